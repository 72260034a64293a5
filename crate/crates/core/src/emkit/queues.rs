//! Append-only queues of variable-length records sharing one RAM pool.
//!
//! Record layout: 5-byte key, 5-byte payload length, payload. Each queue
//! buffers its appends in RAM; when the pool is exhausted every buffer
//! holding at least half the average share is written out, which frees at
//! least half of the pool per flush.

use crate::emkit::record::{get_u40, put_u40};
use crate::emkit::scratch::{ScratchFile, ScratchManager};
use crate::error::{Error, Result};
use crate::io::BlockReader;

pub const QUEUE_RECORD_HEADER: usize = 10;

pub struct QueuePool {
    files: Vec<Option<ScratchFile>>,
    pending: Vec<Vec<u8>>,
    pending_total: usize,
    pool_bytes: usize,
    scratch: ScratchManager,
    stream: String,
    payload_written: u64,
    payload_read: u64,
    records_written: u64,
    records_read: u64,
}

impl QueuePool {
    pub fn new(queues: usize, pool_bytes: usize, scratch: &ScratchManager, stream: &str) -> Self {
        QueuePool {
            files: (0..queues).map(|_| None).collect(),
            pending: (0..queues).map(|_| Vec::new()).collect(),
            pending_total: 0,
            pool_bytes: pool_bytes.max(4096),
            scratch: scratch.clone(),
            stream: stream.to_string(),
            payload_written: 0,
            payload_read: 0,
            records_written: 0,
            records_read: 0,
        }
    }

    pub fn queues(&self) -> usize {
        self.files.len()
    }

    /// Payload bytes appended so far.
    pub fn payload_written(&self) -> u64 {
        self.payload_written
    }

    /// Payload bytes handed out by drained queues so far.
    pub fn payload_read(&self) -> u64 {
        self.payload_read
    }

    pub fn records_written(&self) -> u64 {
        self.records_written
    }

    pub fn records_read(&self) -> u64 {
        self.records_read
    }

    pub fn push(&mut self, queue: usize, key: u64, payload: &[u8]) -> Result<()> {
        let mut hdr = [0u8; QUEUE_RECORD_HEADER];
        put_u40(&mut hdr[..5], key);
        put_u40(&mut hdr[5..], payload.len() as u64);
        let buf = &mut self.pending[queue];
        buf.extend_from_slice(&hdr);
        buf.extend_from_slice(payload);
        self.pending_total += QUEUE_RECORD_HEADER + payload.len();
        self.payload_written += payload.len() as u64;
        self.records_written += 1;
        if self.pending_total > self.pool_bytes {
            self.flush_large()?;
        }
        Ok(())
    }

    fn flush_one(&mut self, queue: usize) -> Result<()> {
        if self.pending[queue].is_empty() {
            return Ok(());
        }
        if self.files[queue].is_none() {
            self.files[queue] = Some(self.scratch.file("queue"));
        }
        let file = self.files[queue].as_ref().unwrap();
        file.append_bytes(&self.pending[queue], &self.stream)?;
        self.pending_total -= self.pending[queue].len();
        self.pending[queue].clear();
        Ok(())
    }

    fn flush_large(&mut self) -> Result<()> {
        let active = self.pending.iter().filter(|b| !b.is_empty()).count().max(1);
        let threshold = self.pending_total / (2 * active);
        for q in 0..self.pending.len() {
            if !self.pending[q].is_empty() && self.pending[q].len() >= threshold {
                self.flush_one(q)?;
                // keep the buffer's allocation bounded
                if self.pending[q].capacity() > self.pool_bytes / active + 4096 {
                    self.pending[q] = Vec::new();
                }
            }
        }
        Ok(())
    }

    /// Hands out all records of `queue` in append order and resets it. Any
    /// RAM-buffered records are written to disk first.
    pub fn drain(&mut self, queue: usize, block: usize) -> Result<QueueReader> {
        self.flush_one(queue)?;
        self.pending[queue] = Vec::new();
        let inner = match self.files[queue].take() {
            Some(file) => {
                let reader = file.reader(block, &self.stream)?;
                Some((reader, file))
            }
            None => None,
        };
        Ok(QueueReader {
            inner,
            payload: Vec::new(),
        })
    }

    /// Records the consumption of one drained record.
    pub fn note_read(&mut self, payload_len: usize) {
        self.payload_read += payload_len as u64;
        self.records_read += 1;
    }
}

/// Reader over one drained queue; deletes its file on drop.
pub struct QueueReader {
    inner: Option<(BlockReader, ScratchFile)>,
    payload: Vec<u8>,
}

impl QueueReader {
    /// Next `(key, payload)`; the payload slice is valid until the next call.
    pub fn next_record(&mut self) -> Result<Option<(u64, &[u8])>> {
        let Some((reader, _)) = self.inner.as_mut() else {
            return Ok(None);
        };
        let mut hdr = [0u8; QUEUE_RECORD_HEADER];
        let got = reader.read_full(&mut hdr)?;
        if got == 0 {
            return Ok(None);
        }
        let short = || {
            Error::io(
                "queue",
                std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "partial queue record"),
            )
        };
        if got < QUEUE_RECORD_HEADER {
            return Err(short());
        }
        let key = get_u40(&hdr[..5]);
        let len = get_u40(&hdr[5..]) as usize;
        self.payload.resize(len, 0);
        if reader.read_full(&mut self.payload)? < len {
            return Err(short());
        }
        Ok(Some((key, &self.payload)))
    }
}
