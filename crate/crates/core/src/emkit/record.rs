use std::marker::PhantomData;

use crate::error::{Error, Result};
use crate::io::{BlockReader, BlockWriter};

/// A record with a fixed on-disk size.
pub trait FixedRecord: Sized {
    const SIZE: usize;

    fn encode(&self, out: &mut [u8]);

    fn decode(src: &[u8]) -> Self;
}

impl FixedRecord for u64 {
    const SIZE: usize = 8;

    fn encode(&self, out: &mut [u8]) {
        out.copy_from_slice(&self.to_le_bytes());
    }

    fn decode(src: &[u8]) -> Self {
        u64::from_le_bytes(src.try_into().unwrap())
    }
}

/// Scratch positions and lengths are stored in five bytes.
pub const U40_MAX: u64 = (1 << 40) - 1;

#[inline]
pub fn put_u40(out: &mut [u8], v: u64) {
    debug_assert!(v <= U40_MAX);
    out[..5].copy_from_slice(&v.to_le_bytes()[..5]);
}

#[inline]
pub fn get_u40(src: &[u8]) -> u64 {
    let mut b = [0u8; 8];
    b[..5].copy_from_slice(&src[..5]);
    u64::from_le_bytes(b)
}

/// Typed writer over a [`BlockWriter`].
pub struct RecordWriter<R> {
    inner: BlockWriter,
    scratch: Vec<u8>,
    count: u64,
    _marker: PhantomData<R>,
}

impl<R: FixedRecord> RecordWriter<R> {
    pub fn new(inner: BlockWriter) -> Self {
        RecordWriter {
            inner,
            scratch: vec![0; R::SIZE],
            count: 0,
            _marker: PhantomData,
        }
    }

    #[inline]
    pub fn push(&mut self, rec: &R) -> Result<()> {
        rec.encode(&mut self.scratch);
        self.count += 1;
        self.inner.put(&self.scratch)
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> Result<u64> {
        self.inner.finish()?;
        Ok(self.count)
    }
}

/// Typed reader over a [`BlockReader`].
pub struct RecordReader<R> {
    inner: BlockReader,
    buf: Vec<u8>,
    _marker: PhantomData<R>,
}

impl<R: FixedRecord> RecordReader<R> {
    pub fn new(inner: BlockReader) -> Self {
        RecordReader {
            inner,
            buf: vec![0; R::SIZE],
            _marker: PhantomData,
        }
    }

    pub fn read_next(&mut self) -> Result<Option<R>> {
        let got = self.inner.read_full(&mut self.buf)?;
        if got == 0 {
            return Ok(None);
        }
        if got < R::SIZE {
            return Err(Error::io(
                self.inner.name(),
                std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "partial scratch record"),
            ));
        }
        Ok(Some(R::decode(&self.buf)))
    }
}

impl<R: FixedRecord> Iterator for RecordReader<R> {
    type Item = Result<R>;

    fn next(&mut self) -> Option<Result<R>> {
        self.read_next().transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u40_round_trip() {
        let mut b = [0u8; 5];
        for v in [0, 1, 255, 256, 1 << 32, U40_MAX] {
            put_u40(&mut b, v);
            assert_eq!(get_u40(&b), v);
        }
    }
}
