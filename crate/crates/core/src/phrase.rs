//! Parsing elements and the small amount of arithmetic shared by every decoder.
//!
//! All positions are 0-based byte offsets into the decoded text.

use serde::Serialize;

use crate::error::{Error, Result};

/// One element of an LZ77-type parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phrase {
    /// A single byte with no earlier occurrence required.
    Literal(u8),
    /// A copy of `len >= 1` bytes starting at text position `src`.
    Repeat { src: u64, len: u64 },
}

impl Phrase {
    /// Number of text bytes this phrase spells.
    #[inline]
    pub fn advance(&self) -> u64 {
        match *self {
            Phrase::Literal(_) => 1,
            Phrase::Repeat { len, .. } => len,
        }
    }

    /// The `(a, b)` pair stored on disk: `(c, 0)` for literals, `(p, l)` for repeats.
    #[inline]
    pub fn to_pair(&self) -> (u64, u64) {
        match *self {
            Phrase::Literal(c) => (c as u64, 0),
            Phrase::Repeat { src, len } => (src, len),
        }
    }
}

/// A phrase together with the text position where it starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LocatedPhrase {
    pub pos: u64,
    pub phrase: Phrase,
}

impl LocatedPhrase {
    #[inline]
    pub fn literal(pos: u64, byte: u8) -> Self {
        LocatedPhrase {
            pos,
            phrase: Phrase::Literal(byte),
        }
    }

    #[inline]
    pub fn repeat(src: u64, pos: u64, len: u64) -> Self {
        LocatedPhrase {
            pos,
            phrase: Phrase::Repeat { src, len },
        }
    }

    #[inline]
    pub fn len(&self) -> u64 {
        self.phrase.advance()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn end(&self) -> u64 {
        self.pos + self.len()
    }

    #[inline]
    pub fn is_literal(&self) -> bool {
        matches!(self.phrase, Phrase::Literal(_))
    }

    /// Source start of a repeat phrase.
    #[inline]
    pub fn src(&self) -> Option<u64> {
        match self.phrase {
            Phrase::Repeat { src, .. } => Some(src),
            Phrase::Literal(_) => None,
        }
    }
}

/// Division of a text of length `n` into segments of `seg` bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentGeometry {
    n: u64,
    seg: u64,
}

impl SegmentGeometry {
    pub fn new(n: u64, seg: u64) -> Result<Self> {
        if seg == 0 {
            return Err(Error::Config("segment size must be at least 1".into()));
        }
        Ok(SegmentGeometry { n, seg })
    }

    #[inline]
    pub fn text_len(&self) -> u64 {
        self.n
    }

    #[inline]
    pub fn segment_size(&self) -> u64 {
        self.seg
    }

    /// Number of segments, `ceil(n / b)`.
    #[inline]
    pub fn count(&self) -> u64 {
        self.n.div_ceil(self.seg)
    }

    #[inline]
    pub fn segment_of(&self, pos: u64) -> u64 {
        pos / self.seg
    }

    #[inline]
    pub fn start(&self, segment: u64) -> u64 {
        segment * self.seg
    }

    /// End (exclusive) of `segment`, clipped to the text length.
    #[inline]
    pub fn end(&self, segment: u64) -> u64 {
        ((segment + 1) * self.seg).min(self.n)
    }

    /// First segment boundary strictly after `pos`.
    #[inline]
    pub fn next_boundary(&self, pos: u64) -> u64 {
        (pos / self.seg + 1) * self.seg
    }
}

/// Summary counts of a parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ParsingStats {
    pub n: u64,
    pub z: u64,
    pub z_rep: u64,
    pub z_lit: u64,
    pub repeat_len_sum: u64,
}

impl ParsingStats {
    pub fn record(&mut self, phrase: &Phrase) {
        self.z += 1;
        match *phrase {
            Phrase::Literal(_) => {
                self.z_lit += 1;
                self.n += 1;
            }
            Phrase::Repeat { len, .. } => {
                self.z_rep += 1;
                self.repeat_len_sum += len;
                self.n += len;
            }
        }
    }

    /// Average phrase length, undefined for the empty parsing.
    pub fn avg_phrase_len(&self) -> Option<f64> {
        (self.z > 0).then(|| self.n as f64 / self.z as f64)
    }
}

/// RAM size and transfer block size of the external-memory model, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MemoryBudget {
    ram_bytes: u64,
    block_bytes: u64,
}

pub const MIN_BLOCK_BYTES: u64 = 4096;

impl MemoryBudget {
    pub fn new(ram_bytes: u64, block_bytes: u64) -> Result<Self> {
        if block_bytes < MIN_BLOCK_BYTES {
            return Err(Error::Config(format!(
                "block size {block_bytes} is below the minimum of {MIN_BLOCK_BYTES} bytes"
            )));
        }
        if ram_bytes < 4 * block_bytes {
            return Err(Error::Config(format!(
                "RAM budget {ram_bytes} must hold at least four blocks of {block_bytes} bytes"
            )));
        }
        Ok(MemoryBudget { ram_bytes, block_bytes })
    }

    #[inline]
    pub fn ram_bytes(&self) -> u64 {
        self.ram_bytes
    }

    #[inline]
    pub fn block_bytes(&self) -> u64 {
        self.block_bytes
    }

    #[inline]
    pub fn block_size(&self) -> usize {
        self.block_bytes as usize
    }

    /// Merge fan-in and distribution fan-out: one block is reserved for output.
    #[inline]
    pub fn fan_out(&self) -> usize {
        (self.ram_bytes / self.block_bytes - 1) as usize
    }

    /// Largest multiple of the block size not exceeding half of the RAM budget.
    pub fn half_ram_segment(&self) -> u64 {
        (self.ram_bytes / 2 / self.block_bytes).max(1) * self.block_bytes
    }
}
