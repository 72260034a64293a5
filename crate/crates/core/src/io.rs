//! Block-buffered sequential streams with byte-accurate accounting.
//!
//! Every transfer to or from disk goes through [`BlockWriter`], [`BlockReader`]
//! or [`PositionedReader`], each of which charges a named counter in an
//! [`IoStats`] registry. Writers can additionally be attached to a
//! [`DiskGauge`] so that the bytes they put on disk count towards the
//! measured disk footprint of a run.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering::Relaxed};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::error::{Error, Result};

/// Counters of one named stream.
#[derive(Debug, Default)]
pub struct StreamCounters {
    bytes_read: AtomicU64,
    bytes_written: AtomicU64,
    read_ops: AtomicU64,
    write_ops: AtomicU64,
}

impl StreamCounters {
    #[inline]
    pub fn count_read(&self, bytes: u64) {
        self.bytes_read.fetch_add(bytes, Relaxed);
        self.read_ops.fetch_add(1, Relaxed);
    }

    #[inline]
    pub fn count_write(&self, bytes: u64) {
        self.bytes_written.fetch_add(bytes, Relaxed);
        self.write_ops.fetch_add(1, Relaxed);
    }

    pub fn snapshot(&self) -> StreamSnapshot {
        StreamSnapshot {
            bytes_read: self.bytes_read.load(Relaxed),
            bytes_written: self.bytes_written.load(Relaxed),
            read_ops: self.read_ops.load(Relaxed),
            write_ops: self.write_ops.load(Relaxed),
        }
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StreamSnapshot {
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub read_ops: u64,
    pub write_ops: u64,
}

impl std::ops::AddAssign for StreamSnapshot {
    fn add_assign(&mut self, o: Self) {
        self.bytes_read += o.bytes_read;
        self.bytes_written += o.bytes_written;
        self.read_ops += o.read_ops;
        self.write_ops += o.write_ops;
    }
}

/// Registry of per-stream transfer counters. Cloning yields another handle to
/// the same registry.
#[derive(Debug, Clone, Default)]
pub struct IoStats {
    streams: Arc<Mutex<BTreeMap<String, Arc<StreamCounters>>>>,
}

impl IoStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counters for `name`, created on first use.
    pub fn stream(&self, name: &str) -> Arc<StreamCounters> {
        let mut map = self.streams.lock().unwrap();
        map.entry(name.to_string()).or_default().clone()
    }

    pub fn get(&self, name: &str) -> StreamSnapshot {
        let map = self.streams.lock().unwrap();
        map.get(name).map(|c| c.snapshot()).unwrap_or_default()
    }

    pub fn snapshot(&self) -> BTreeMap<String, StreamSnapshot> {
        let map = self.streams.lock().unwrap();
        map.iter().map(|(k, v)| (k.clone(), v.snapshot())).collect()
    }

    pub fn totals(&self) -> StreamSnapshot {
        let mut t = StreamSnapshot::default();
        for s in self.snapshot().into_values() {
            t += s;
        }
        t
    }
}

#[derive(Debug, Default)]
struct GaugeInner {
    scratch_live: AtomicU64,
    scratch_peak: AtomicU64,
    external: AtomicU64,
    total_peak: AtomicU64,
}

/// Live and peak disk usage: scratch files plus externally charged bytes
/// (the input parsing and the growing output file).
#[derive(Debug, Clone, Default)]
pub struct DiskGauge(Arc<GaugeInner>);

impl DiskGauge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_scratch(&self, bytes: u64) {
        let g = &self.0;
        let live = g.scratch_live.fetch_add(bytes, Relaxed) + bytes;
        g.scratch_peak.fetch_max(live, Relaxed);
        g.total_peak.fetch_max(live + g.external.load(Relaxed), Relaxed);
    }

    pub fn sub_scratch(&self, bytes: u64) {
        self.0.scratch_live.fetch_sub(bytes, Relaxed);
    }

    pub fn add_external(&self, bytes: u64) {
        let g = &self.0;
        let ext = g.external.fetch_add(bytes, Relaxed) + bytes;
        g.total_peak.fetch_max(ext + g.scratch_live.load(Relaxed), Relaxed);
    }

    pub fn scratch_live(&self) -> u64 {
        self.0.scratch_live.load(Relaxed)
    }

    pub fn scratch_peak(&self) -> u64 {
        self.0.scratch_peak.load(Relaxed)
    }

    pub fn external(&self) -> u64 {
        self.0.external.load(Relaxed)
    }

    /// Peak of scratch plus external bytes over the lifetime of the gauge.
    pub fn total_peak(&self) -> u64 {
        self.0.total_peak.load(Relaxed)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Charge {
    Scratch { gauge: DiskGauge, file_len: Arc<AtomicU64> },
    External(DiskGauge),
}

impl Charge {
    fn add(&self, bytes: u64) {
        match self {
            Charge::Scratch { gauge, file_len } => {
                file_len.fetch_add(bytes, Relaxed);
                gauge.add_scratch(bytes);
            }
            Charge::External(g) => g.add_external(bytes),
        }
    }

    fn error(&self, stream: &str, source: io::Error) -> Error {
        match self {
            Charge::Scratch { gauge, .. } => Error::ScratchIo {
                stream: stream.to_string(),
                live: gauge.scratch_live(),
                peak: gauge.scratch_peak(),
                source,
            },
            Charge::External(_) => Error::io(stream, source),
        }
    }
}

/// Sequential writer that transfers whole blocks, except for a final partial
/// block on [`flush`](Write::flush).
#[derive(Debug)]
pub struct BlockWriter {
    file: File,
    buf: Vec<u8>,
    block: usize,
    name: String,
    counters: Arc<StreamCounters>,
    charge: Option<Charge>,
    written: u64,
}

impl BlockWriter {
    pub fn create(path: &Path, block: usize, stats: &IoStats, name: &str) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(name, e))?;
        Ok(Self::from_file(file, block, stats, name))
    }

    /// Opens `path` for appending; the logical position starts at the
    /// current file length.
    pub fn append(path: &Path, block: usize, stats: &IoStats, name: &str) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(name, e))?;
        let len = file.metadata().map_err(|e| Error::io(name, e))?.len();
        let mut w = Self::from_file(file, block, stats, name);
        w.written = len;
        Ok(w)
    }

    pub fn from_file(file: File, block: usize, stats: &IoStats, name: &str) -> Self {
        assert!(block > 0);
        BlockWriter {
            file,
            buf: Vec::with_capacity(block),
            block,
            name: name.to_string(),
            counters: stats.stream(name),
            charge: None,
            written: 0,
        }
    }

    pub(crate) fn with_charge(mut self, charge: Charge) -> Self {
        self.charge = Some(charge);
        self
    }

    /// Charges every byte put on disk from now on to `gauge` as external usage.
    pub fn charge_external(self, gauge: &DiskGauge) -> Self {
        self.with_charge(Charge::External(gauge.clone()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Bytes accepted so far, buffered or not.
    pub fn position(&self) -> u64 {
        self.written + self.buf.len() as u64
    }

    /// Bytes already handed to the operating system.
    pub fn flushed(&self) -> u64 {
        self.written
    }

    fn err(&self, e: io::Error) -> Error {
        match &self.charge {
            Some(c) => c.error(&self.name, e),
            None => Error::io(&self.name, e),
        }
    }

    fn write_buf(&mut self) -> io::Result<()> {
        if self.buf.is_empty() {
            return Ok(());
        }
        self.file.write_all(&self.buf)?;
        let len = self.buf.len() as u64;
        self.counters.count_write(len);
        if let Some(c) = &self.charge {
            c.add(len);
        }
        self.written += len;
        self.buf.clear();
        Ok(())
    }

    fn put_inner(&mut self, mut data: &[u8]) -> io::Result<()> {
        while !data.is_empty() {
            let room = self.block - self.buf.len();
            let take = room.min(data.len());
            self.buf.extend_from_slice(&data[..take]);
            data = &data[take..];
            if self.buf.len() == self.block {
                self.write_buf()?;
            }
        }
        Ok(())
    }

    pub fn put(&mut self, data: &[u8]) -> Result<()> {
        self.put_inner(data).map_err(|e| self.err(e))
    }

    /// Writes any buffered bytes as a final (possibly partial) block.
    pub fn finish(&mut self) -> Result<()> {
        self.write_buf()
            .and_then(|_| self.file.flush())
            .map_err(|e| self.err(e))
    }
}

impl Write for BlockWriter {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        self.put_inner(data)?;
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        self.write_buf()?;
        self.file.flush()
    }
}

impl Drop for BlockWriter {
    fn drop(&mut self) {
        let _ = self.write_buf();
    }
}

/// Sequential reader that fills whole blocks from disk.
#[derive(Debug)]
pub struct BlockReader {
    file: File,
    buf: Box<[u8]>,
    pos: usize,
    filled: usize,
    name: String,
    counters: Arc<StreamCounters>,
    consumed: u64,
}

impl BlockReader {
    pub fn open(path: &Path, block: usize, stats: &IoStats, name: &str) -> Result<Self> {
        Self::open_at(path, 0, block, stats, name)
    }

    /// Opens `path` and starts reading at byte `offset`.
    pub fn open_at(path: &Path, offset: u64, block: usize, stats: &IoStats, name: &str) -> Result<Self> {
        let mut file = File::open(path).map_err(|e| Error::io(name, e))?;
        if offset > 0 {
            file.seek(SeekFrom::Start(offset)).map_err(|e| Error::io(name, e))?;
        }
        Ok(Self::from_file(file, block, stats, name))
    }

    pub fn from_file(file: File, block: usize, stats: &IoStats, name: &str) -> Self {
        assert!(block > 0);
        BlockReader {
            file,
            buf: vec![0u8; block].into_boxed_slice(),
            pos: 0,
            filled: 0,
            name: name.to_string(),
            counters: stats.stream(name),
            consumed: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Bytes handed out to the caller so far.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    fn refill(&mut self) -> io::Result<()> {
        let mut got = 0;
        while got < self.buf.len() {
            match self.file.read(&mut self.buf[got..]) {
                Ok(0) => break,
                Ok(k) => got += k,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        if got > 0 {
            self.counters.count_read(got as u64);
        }
        self.pos = 0;
        self.filled = got;
        Ok(())
    }

    /// Reads up to `out.len()` bytes, stopping early only at end of file.
    /// Returns the number of bytes read.
    pub fn read_full(&mut self, out: &mut [u8]) -> Result<usize> {
        let mut done = 0;
        while done < out.len() {
            if self.pos == self.filled {
                self.refill().map_err(|e| Error::io(&self.name, e))?;
                if self.filled == 0 {
                    break;
                }
            }
            let take = (self.filled - self.pos).min(out.len() - done);
            out[done..done + take].copy_from_slice(&self.buf[self.pos..self.pos + take]);
            self.pos += take;
            done += take;
        }
        self.consumed += done as u64;
        Ok(done)
    }
}

impl Read for BlockReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        let avail = self.fill_buf()?;
        let take = avail.len().min(out.len());
        out[..take].copy_from_slice(&avail[..take]);
        self.consume(take);
        Ok(take)
    }
}

impl BufRead for BlockReader {
    fn fill_buf(&mut self) -> io::Result<&[u8]> {
        if self.pos == self.filled {
            self.refill()?;
        }
        Ok(&self.buf[self.pos..self.filled])
    }

    fn consume(&mut self, amt: usize) {
        self.pos = (self.pos + amt).min(self.filled);
        self.consumed += amt as u64;
    }
}

/// Random-access reads at explicit offsets.
#[derive(Debug)]
pub struct PositionedReader {
    file: File,
    name: String,
    counters: Arc<StreamCounters>,
}

impl PositionedReader {
    pub fn open(path: &Path, stats: &IoStats, name: &str) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(name, e))?;
        Ok(PositionedReader {
            file,
            name: name.to_string(),
            counters: stats.stream(name),
        })
    }

    /// Fills `out` from byte `offset`; a short file is an error.
    pub fn read_at(&mut self, offset: u64, out: &mut [u8]) -> Result<()> {
        if out.is_empty() {
            return Ok(());
        }
        self.file
            .seek(SeekFrom::Start(offset))
            .and_then(|_| self.file.read_exact(out))
            .map_err(|e| Error::io(&self.name, e))?;
        self.counters.count_read(out.len() as u64);
        Ok(())
    }
}
