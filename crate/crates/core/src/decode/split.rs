//! Cutting phrases at segment boundaries and sorting the pieces by kind.
//!
//! A repeat piece is cut whenever either the phrase or its source crosses a
//! segment boundary, so that both lie inside one segment. A piece is far if
//! its source starts more than `b` positions before it; otherwise its source
//! is in the same or the preceding segment.

use serde::Serialize;

use crate::emkit::record::{get_u40, put_u40, FixedRecord, U40_MAX};
use crate::error::{Error, Result};
use crate::phrase::{LocatedPhrase, Phrase};

/// A repeat piece `(p, q, len)` as stored in scratch streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RepeatRecord {
    pub src: u64,
    pub pos: u64,
    pub len: u64,
}

impl FixedRecord for RepeatRecord {
    const SIZE: usize = 15;

    fn encode(&self, out: &mut [u8]) {
        put_u40(&mut out[0..5], self.src);
        put_u40(&mut out[5..10], self.pos);
        put_u40(&mut out[10..15], self.len);
    }

    fn decode(src: &[u8]) -> Self {
        RepeatRecord {
            src: get_u40(&src[0..5]),
            pos: get_u40(&src[5..10]),
            len: get_u40(&src[10..15]),
        }
    }
}

impl RepeatRecord {
    pub fn end(&self) -> u64 {
        self.pos + self.len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LiteralRecord {
    pub pos: u64,
    pub byte: u8,
}

impl FixedRecord for LiteralRecord {
    const SIZE: usize = 6;

    fn encode(&self, out: &mut [u8]) {
        put_u40(&mut out[0..5], self.pos);
        out[5] = self.byte;
    }

    fn decode(src: &[u8]) -> Self {
        LiteralRecord {
            pos: get_u40(&src[0..5]),
            byte: src[5],
        }
    }
}

/// Upper bound on the number of pieces a phrase of length `len` is cut into.
pub fn piece_bound(len: u64, b: u64) -> u64 {
    2 * len.div_ceil(b) + 1
}

#[inline]
fn piece_len(src: u64, pos: u64, rem: u64, b: u64) -> u64 {
    (b - pos % b).min(b - src % b).min(rem)
}

/// Cuts one phrase into pieces, passing them to `emit` in text order.
pub fn split_phrase(ph: &LocatedPhrase, b: u64, mut emit: impl FnMut(LocatedPhrase)) {
    match ph.phrase {
        Phrase::Literal(_) => emit(*ph),
        Phrase::Repeat { src, len } => {
            let (mut p, mut q, mut rem) = (src, ph.pos, len);
            while rem > 0 {
                let l = piece_len(p, q, rem, b);
                emit(LocatedPhrase::repeat(p, q, l));
                p += l;
                q += l;
                rem -= l;
            }
        }
    }
}

/// Streaming version of [`split_phrase`] over a phrase stream.
pub struct SplitPhrases<I> {
    inner: I,
    b: u64,
    // (src, pos, remaining) of a partly emitted repeat
    open: Option<(u64, u64, u64)>,
}

impl<I> SplitPhrases<I> {
    pub fn new(inner: I, b: u64) -> Self {
        assert!(b > 0);
        SplitPhrases { inner, b, open: None }
    }

    pub fn inner(&self) -> &I {
        &self.inner
    }
}

impl<I: Iterator<Item = Result<LocatedPhrase>>> Iterator for SplitPhrases<I> {
    type Item = Result<LocatedPhrase>;

    fn next(&mut self) -> Option<Result<LocatedPhrase>> {
        let (p, q, rem) = match self.open.take() {
            Some(open) => open,
            None => match self.inner.next()? {
                Err(e) => return Some(Err(e)),
                Ok(ph) => match ph.phrase {
                    Phrase::Literal(_) => {
                        if ph.pos > U40_MAX {
                            return Some(Err(Error::LengthOverflow));
                        }
                        return Some(Ok(ph));
                    }
                    Phrase::Repeat { src, len } => {
                        if ph.end() > U40_MAX {
                            return Some(Err(Error::LengthOverflow));
                        }
                        (src, ph.pos, len)
                    }
                },
            },
        };
        let l = piece_len(p, q, rem, self.b);
        if l < rem {
            self.open = Some((p + l, q + l, rem - l));
        }
        Some(Ok(LocatedPhrase::repeat(p, q, l)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceKind {
    Literal,
    /// Near, source in the preceding segment.
    NearPrev,
    /// Near, source in the piece's own segment.
    NearSame,
    Far,
}

/// Kind of an already split piece.
#[inline]
pub fn classify_piece(piece: &LocatedPhrase, b: u64) -> PieceKind {
    match piece.phrase {
        Phrase::Literal(_) => PieceKind::Literal,
        Phrase::Repeat { src, .. } => {
            if piece.pos - src > b {
                PieceKind::Far
            } else if src / b == piece.pos / b {
                PieceKind::NearSame
            } else {
                PieceKind::NearPrev
            }
        }
    }
}

/// Piece tallies of one decode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PieceCounts {
    pub literals: u64,
    pub near_prev: u64,
    pub near_same: u64,
    pub far: u64,
    /// Sum of far piece lengths.
    pub far_bytes: u64,
}

impl PieceCounts {
    #[inline]
    pub fn add(&mut self, kind: PieceKind, len: u64) {
        match kind {
            PieceKind::Literal => self.literals += 1,
            PieceKind::NearPrev => self.near_prev += 1,
            PieceKind::NearSame => self.near_same += 1,
            PieceKind::Far => {
                self.far += 1;
                self.far_bytes += len;
            }
        }
    }
}

/// In-memory classification of split pieces, each output in phrase order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classified {
    pub far: Vec<RepeatRecord>,
    pub near: Vec<RepeatRecord>,
    pub literals: Vec<LiteralRecord>,
}

pub fn classify(pieces: impl IntoIterator<Item = LocatedPhrase>, b: u64) -> Classified {
    let mut out = Classified::default();
    for piece in pieces {
        let rec = |src| RepeatRecord {
            src,
            pos: piece.pos,
            len: piece.len(),
        };
        match (classify_piece(&piece, b), piece.phrase) {
            (PieceKind::Literal, Phrase::Literal(byte)) => out.literals.push(LiteralRecord { pos: piece.pos, byte }),
            (PieceKind::Far, Phrase::Repeat { src, .. }) => out.far.push(rec(src)),
            (_, Phrase::Repeat { src, .. }) => out.near.push(rec(src)),
            _ => unreachable!(),
        }
    }
    out
}
