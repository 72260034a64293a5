//! Merge-based external priority queue with monotone keys.
//!
//! Inserts go to a RAM heap. When the heap's payload arena reaches the
//! buffer capacity it is drained, in key order, into a sorted run on disk.
//! Extraction takes the smaller of the heap minimum and the smallest run
//! front. Once more than `max_runs` runs exist the smallest half of them are
//! merged into one, so each item is rewritten a logarithmic number of times.
//!
//! Keys must never go below the last extracted key, so an exhausted run can
//! be deleted as soon as its last record has been taken.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::emkit::scratch::{ScratchFile, ScratchManager};
use crate::error::{Error, Result};
use crate::io::BlockReader;

/// Per-record overhead in a run file: 8-byte key and 4-byte length.
const RUN_HEADER: usize = 12;

#[derive(Debug, Clone, Copy)]
pub struct PqConfig {
    /// Bytes of payload (plus per-item overhead) held in RAM before spilling.
    pub buffer_bytes: usize,
    pub block: usize,
    /// Runs kept open before they are merged into one.
    pub max_runs: usize,
    pub payload_max: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct PqStats {
    pub inserts: u64,
    pub extracts: u64,
    pub payload_inserted: u64,
    pub payload_extracted: u64,
    pub spills: u64,
    pub run_merges: u64,
}

/// Item kept in RAM; payload lives in the shared arena.
#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct MemItem {
    key: u64,
    seq: u64,
    off: u32,
    len: u32,
}

struct Run {
    reader: BlockReader,
    _file: ScratchFile,
    key: u64,
    payload: Vec<u8>,
    /// Bytes not yet loaded.
    remaining: u64,
}

impl Run {
    /// Loads the next record; false at end of run.
    fn advance(&mut self) -> Result<bool> {
        let mut hdr = [0u8; RUN_HEADER];
        let got = self.reader.read_full(&mut hdr)?;
        if got == 0 {
            return Ok(false);
        }
        if got < RUN_HEADER {
            return Err(Error::io(
                self.reader.name(),
                std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "partial queue record"),
            ));
        }
        self.key = u64::from_le_bytes(hdr[..8].try_into().unwrap());
        let len = u32::from_le_bytes(hdr[8..].try_into().unwrap()) as usize;
        self.payload.resize(len, 0);
        if self.reader.read_full(&mut self.payload)? < len {
            return Err(Error::io(
                self.reader.name(),
                std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "partial queue payload"),
            ));
        }
        self.remaining = self.remaining.saturating_sub((RUN_HEADER + len) as u64);
        Ok(true)
    }
}

pub struct ExternalPq {
    cfg: PqConfig,
    scratch: ScratchManager,
    stream: String,
    heap: BinaryHeap<Reverse<MemItem>>,
    arena: Vec<u8>,
    seq: u64,
    runs: Vec<Option<Run>>,
    fronts: BinaryHeap<Reverse<(u64, usize)>>,
    open_runs: usize,
    len: u64,
    last_extracted: Option<u64>,
    stats: PqStats,
}

impl ExternalPq {
    pub fn new(cfg: PqConfig, scratch: &ScratchManager, stream: &str) -> Result<Self> {
        if cfg.payload_max == 0 || cfg.payload_max > u32::MAX as usize {
            return Err(Error::Config("queue payload maximum out of range".into()));
        }
        if cfg.max_runs < 2 || cfg.block == 0 {
            return Err(Error::Config("queue needs at least two runs and a block".into()));
        }
        Ok(ExternalPq {
            cfg: PqConfig {
                buffer_bytes: cfg.buffer_bytes.max(cfg.payload_max + RUN_HEADER),
                ..cfg
            },
            scratch: scratch.clone(),
            stream: stream.to_string(),
            heap: BinaryHeap::new(),
            arena: Vec::new(),
            seq: 0,
            runs: Vec::new(),
            fronts: BinaryHeap::new(),
            open_runs: 0,
            len: 0,
            last_extracted: None,
            stats: PqStats::default(),
        })
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stats(&self) -> PqStats {
        self.stats
    }

    pub fn open_runs(&self) -> usize {
        self.open_runs
    }

    pub fn insert(&mut self, key: u64, payload: &[u8]) -> Result<()> {
        if payload.len() > self.cfg.payload_max {
            return Err(Error::PayloadTooLarge {
                len: payload.len(),
                max: self.cfg.payload_max,
            });
        }
        if let Some(last) = self.last_extracted {
            if key < last {
                return Err(Error::NonMonotoneInsert { key, last });
            }
        }
        let item_bytes = payload.len() + RUN_HEADER;
        if self.arena.len() + self.heap.len() * RUN_HEADER + item_bytes > self.cfg.buffer_bytes {
            if self.heap.is_empty() {
                self.arena.clear();
            } else {
                self.spill()?;
            }
        }
        let off = self.arena.len() as u32;
        self.arena.extend_from_slice(payload);
        self.heap.push(Reverse(MemItem {
            key,
            seq: self.seq,
            off,
            len: payload.len() as u32,
        }));
        self.seq += 1;
        self.len += 1;
        self.stats.inserts += 1;
        self.stats.payload_inserted += payload.len() as u64;
        Ok(())
    }

    /// Smallest key currently stored.
    pub fn peek_key(&self) -> Option<u64> {
        let mem = self.heap.peek().map(|Reverse(i)| i.key);
        let disk = self.fronts.peek().map(|Reverse((k, _))| *k);
        match (mem, disk) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Removes the minimum item, replacing the contents of `payload` with its
    /// bytes. Returns its key, or `None` when empty.
    pub fn pop_into(&mut self, payload: &mut Vec<u8>) -> Result<Option<u64>> {
        let mem = self.heap.peek().map(|Reverse(i)| i.key);
        let disk = self.fronts.peek().map(|Reverse((k, _))| *k);
        let from_disk = match (mem, disk) {
            (None, None) => return Ok(None),
            (Some(_), None) => false,
            (None, Some(_)) => true,
            (Some(a), Some(b)) => b < a,
        };
        payload.clear();
        let key = if from_disk {
            let Reverse((key, slot)) = self.fronts.pop().unwrap();
            let run = self.runs[slot].as_mut().unwrap();
            payload.extend_from_slice(&run.payload);
            if run.advance()? {
                self.fronts.push(Reverse((run.key, slot)));
            } else {
                self.runs[slot] = None;
                self.open_runs -= 1;
            }
            key
        } else {
            let Reverse(item) = self.heap.pop().unwrap();
            let off = item.off as usize;
            payload.extend_from_slice(&self.arena[off..off + item.len as usize]);
            if self.heap.is_empty() {
                self.arena.clear();
            }
            item.key
        };
        self.len -= 1;
        self.last_extracted = Some(key);
        self.stats.extracts += 1;
        self.stats.payload_extracted += payload.len() as u64;
        Ok(Some(key))
    }

    pub fn extract_min(&mut self) -> Result<Option<(u64, Vec<u8>)>> {
        let mut buf = Vec::new();
        Ok(self.pop_into(&mut buf)?.map(|k| (k, buf)))
    }

    fn spill(&mut self) -> Result<()> {
        let file = self.scratch.file("pqrun");
        let mut w = file.writer(self.cfg.block, &self.stream)?;
        let mut hdr = [0u8; RUN_HEADER];
        while let Some(Reverse(item)) = self.heap.pop() {
            hdr[..8].copy_from_slice(&item.key.to_le_bytes());
            hdr[8..].copy_from_slice(&item.len.to_le_bytes());
            w.put(&hdr)?;
            let off = item.off as usize;
            w.put(&self.arena[off..off + item.len as usize])?;
        }
        w.finish()?;
        drop(w);
        self.arena.clear();
        self.stats.spills += 1;
        self.add_run(file)?;
        if self.open_runs > self.cfg.max_runs {
            self.merge_runs()?;
        }
        Ok(())
    }

    fn add_run(&mut self, file: ScratchFile) -> Result<()> {
        let reader = file.reader(self.cfg.block, &self.stream)?;
        let mut run = Run {
            reader,
            remaining: file.len(),
            _file: file,
            key: 0,
            payload: Vec::new(),
        };
        if run.advance()? {
            let slot = match self.runs.iter().position(Option::is_none) {
                Some(s) => s,
                None => {
                    self.runs.push(None);
                    self.runs.len() - 1
                }
            };
            self.fronts.push(Reverse((run.key, slot)));
            self.runs[slot] = Some(run);
            self.open_runs += 1;
        }
        Ok(())
    }

    /// Merges the smallest open runs into a single new run.
    fn merge_runs(&mut self) -> Result<()> {
        let mut open: Vec<usize> = (0..self.runs.len()).filter(|&i| self.runs[i].is_some()).collect();
        open.sort_by_key(|&i| self.runs[i].as_ref().unwrap().remaining);
        let take = (self.cfg.max_runs / 2 + 1).max(2).min(open.len());
        let chosen = &open[..take];
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> = chosen
            .iter()
            .map(|&i| Reverse((self.runs[i].as_ref().unwrap().key, i)))
            .collect();
        let file = self.scratch.file("pqrun");
        let mut w = file.writer(self.cfg.block, &self.stream)?;
        let mut hdr = [0u8; RUN_HEADER];
        while let Some(Reverse((key, slot))) = heap.pop() {
            let run = self.runs[slot].as_mut().unwrap();
            hdr[..8].copy_from_slice(&key.to_le_bytes());
            hdr[8..].copy_from_slice(&(run.payload.len() as u32).to_le_bytes());
            w.put(&hdr)?;
            w.put(&run.payload)?;
            if run.advance()? {
                heap.push(Reverse((run.key, slot)));
            } else {
                self.runs[slot] = None;
                self.open_runs -= 1;
            }
        }
        w.finish()?;
        drop(w);
        self.fronts = self
            .runs
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().map(|r| Reverse((r.key, i))))
            .collect();
        self.stats.run_merges += 1;
        self.add_run(file)
    }
}
