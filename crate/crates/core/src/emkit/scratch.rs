//! Scratch files with live and peak disk accounting.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering::Relaxed};
use std::sync::Arc;

use tempfile::TempDir;

use crate::error::{Error, Result};
use crate::io::{BlockReader, BlockWriter, Charge, DiskGauge, IoStats};

struct Inner {
    dir: TempDir,
    gauge: DiskGauge,
    stats: IoStats,
    next_id: AtomicU64,
    live_files: AtomicU64,
}

/// Owner of a private scratch directory. The directory and anything left in
/// it are removed when the last handle (including file handles) is dropped.
#[derive(Clone)]
pub struct ScratchManager {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for ScratchManager {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScratchManager")
            .field("dir", &self.inner.dir.path())
            .field("live", &self.live_bytes())
            .field("peak", &self.peak_bytes())
            .finish()
    }
}

impl ScratchManager {
    /// Creates a scratch directory under `parent` (or the system temporary
    /// directory).
    pub fn new(parent: Option<&Path>, stats: &IoStats) -> Result<Self> {
        Self::with_gauge(parent, stats, DiskGauge::new())
    }

    pub fn with_gauge(parent: Option<&Path>, stats: &IoStats, gauge: DiskGauge) -> Result<Self> {
        let builder = {
            let mut b = tempfile::Builder::new();
            b.prefix("emlz-scratch-");
            b
        };
        let dir = match parent {
            Some(p) => builder.tempdir_in(p),
            None => builder.tempdir(),
        }
        .map_err(|e| Error::io("scratch", e))?;
        Ok(ScratchManager {
            inner: Arc::new(Inner {
                dir,
                gauge,
                stats: stats.clone(),
                next_id: AtomicU64::new(0),
                live_files: AtomicU64::new(0),
            }),
        })
    }

    pub fn dir(&self) -> &Path {
        self.inner.dir.path()
    }

    pub fn stats(&self) -> &IoStats {
        &self.inner.stats
    }

    pub fn gauge(&self) -> &DiskGauge {
        &self.inner.gauge
    }

    pub fn live_bytes(&self) -> u64 {
        self.inner.gauge.scratch_live()
    }

    pub fn peak_bytes(&self) -> u64 {
        self.inner.gauge.scratch_peak()
    }

    pub fn live_files(&self) -> u64 {
        self.inner.live_files.load(Relaxed)
    }

    /// Registers a new, not yet created, scratch file.
    pub fn file(&self, tag: &str) -> ScratchFile {
        let id = self.inner.next_id.fetch_add(1, Relaxed);
        self.inner.live_files.fetch_add(1, Relaxed);
        ScratchFile {
            path: self.inner.dir.path().join(format!("{id:08}.{tag}")),
            len: Arc::new(AtomicU64::new(0)),
            owner: self.inner.clone(),
        }
    }
}

/// A file inside the scratch directory, deleted on drop.
pub struct ScratchFile {
    path: PathBuf,
    len: Arc<AtomicU64>,
    owner: Arc<Inner>,
}

impl std::fmt::Debug for ScratchFile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScratchFile")
            .field("path", &self.path)
            .field("len", &self.len())
            .finish()
    }
}

impl ScratchFile {
    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Bytes on disk.
    pub fn len(&self) -> u64 {
        self.len.load(Relaxed)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn charge(&self) -> Charge {
        Charge::Scratch {
            gauge: self.owner.gauge.clone(),
            file_len: self.len.clone(),
        }
    }

    /// Truncating writer; bytes are charged to the scratch gauge as they
    /// reach disk.
    pub fn writer(&self, block: usize, stream: &str) -> Result<BlockWriter> {
        let old = self.len.swap(0, Relaxed);
        self.owner.gauge.sub_scratch(old);
        Ok(BlockWriter::create(&self.path, block, &self.owner.stats, stream)?.with_charge(self.charge()))
    }

    pub fn appender(&self, block: usize, stream: &str) -> Result<BlockWriter> {
        let w = BlockWriter::append(&self.path, block, &self.owner.stats, stream)?;
        Ok(w.with_charge(self.charge()))
    }

    /// Appends `data` with a single unbuffered write.
    pub fn append_bytes(&self, data: &[u8], stream: &str) -> Result<()> {
        if data.is_empty() {
            return Ok(());
        }
        let gauge = &self.owner.gauge;
        let scratch_err = |e| Error::ScratchIo {
            stream: stream.to_string(),
            live: gauge.scratch_live(),
            peak: gauge.scratch_peak(),
            source: e,
        };
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(scratch_err)?;
        f.write_all(data).map_err(scratch_err)?;
        self.owner.stats.stream(stream).count_write(data.len() as u64);
        self.len.fetch_add(data.len() as u64, Relaxed);
        gauge.add_scratch(data.len() as u64);
        Ok(())
    }

    pub fn reader(&self, block: usize, stream: &str) -> Result<BlockReader> {
        BlockReader::open(&self.path, block, &self.owner.stats, stream)
    }
}

impl Drop for ScratchFile {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
        self.owner.gauge.sub_scratch(self.len.swap(0, Relaxed));
        self.owner.live_files.fetch_sub(1, Relaxed);
    }
}
