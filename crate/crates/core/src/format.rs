//! The `.lz77` parsing file.
//!
//! A 16-byte header (`LZ77EMD1`, one width byte, seven zero bytes) is followed
//! by one record per phrase. A record is a pair `(a, b)` of little-endian
//! unsigned integers of `width` bytes each: `b = 0` encodes the literal byte
//! `a`, `b >= 1` encodes a repeat of length `b` from source position `a`.

use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{BlockReader, IoStats};
use crate::phrase::{LocatedPhrase, ParsingStats, Phrase};

pub const MAGIC: &[u8; 8] = b"LZ77EMD1";
pub const HEADER_LEN: u64 = 16;

/// Byte width of each integer in a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntWidth {
    #[default]
    Five,
    Eight,
}

impl IntWidth {
    pub fn from_bytes(width: u8) -> Option<Self> {
        match width {
            5 => Some(IntWidth::Five),
            8 => Some(IntWidth::Eight),
            _ => None,
        }
    }

    #[inline]
    pub fn bytes(self) -> usize {
        match self {
            IntWidth::Five => 5,
            IntWidth::Eight => 8,
        }
    }

    #[inline]
    pub fn record_len(self) -> usize {
        2 * self.bytes()
    }

    #[inline]
    pub fn max_value(self) -> u64 {
        match self {
            IntWidth::Five => (1u64 << 40) - 1,
            IntWidth::Eight => u64::MAX,
        }
    }
}

pub fn header(width: IntWidth) -> [u8; HEADER_LEN as usize] {
    let mut h = [0u8; HEADER_LEN as usize];
    h[..8].copy_from_slice(MAGIC);
    h[8] = width.bytes() as u8;
    h
}

fn parse_header(h: &[u8; HEADER_LEN as usize]) -> Result<IntWidth> {
    if &h[..8] != MAGIC {
        return Err(Error::BadHeader("magic mismatch".into()));
    }
    let width =
        IntWidth::from_bytes(h[8]).ok_or_else(|| Error::BadHeader(format!("unsupported integer width {}", h[8])))?;
    if h[9..].iter().any(|&b| b != 0) {
        return Err(Error::BadHeader("reserved bytes are not zero".into()));
    }
    Ok(width)
}

#[inline]
fn put_uint(out: &mut [u8], value: u64) {
    let w = out.len();
    out.copy_from_slice(&value.to_le_bytes()[..w]);
}

#[inline]
fn get_uint(src: &[u8]) -> u64 {
    let mut b = [0u8; 8];
    b[..src.len()].copy_from_slice(src);
    u64::from_le_bytes(b)
}

/// Streaming encoder for a parsing.
pub struct ParsingWriter<W: Write> {
    out: W,
    width: IntWidth,
    stats: ParsingStats,
    rec: [u8; 16],
}

impl<W: Write> ParsingWriter<W> {
    pub fn new(mut out: W, width: IntWidth) -> Result<Self> {
        out.write_all(&header(width)).map_err(|e| Error::io("parsing", e))?;
        Ok(ParsingWriter {
            out,
            width,
            stats: ParsingStats::default(),
            rec: [0; 16],
        })
    }

    pub fn push(&mut self, phrase: &Phrase) -> Result<()> {
        let (a, b) = phrase.to_pair();
        if let Phrase::Repeat { len: 0, .. } = phrase {
            return Err(Error::InvalidPhrase {
                record: self.stats.z,
                reason: "repeat phrase of length zero".into(),
            });
        }
        let max = self.width.max_value();
        for v in [a, b] {
            if v > max {
                return Err(Error::ValueOverflow {
                    value: v,
                    width: self.width.bytes(),
                });
            }
        }
        let w = self.width.bytes();
        put_uint(&mut self.rec[..w], a);
        put_uint(&mut self.rec[w..2 * w], b);
        self.out
            .write_all(&self.rec[..2 * w])
            .map_err(|e| Error::io("parsing", e))?;
        self.stats.record(phrase);
        Ok(())
    }

    pub fn stats(&self) -> &ParsingStats {
        &self.stats
    }

    pub fn finish(mut self) -> Result<(W, ParsingStats)> {
        self.out.flush().map_err(|e| Error::io("parsing", e))?;
        Ok((self.out, self.stats))
    }
}

/// Encodes `phrases` into `out`.
pub fn write_parsing<W: Write>(out: W, phrases: &[Phrase], width: IntWidth) -> Result<ParsingStats> {
    let mut w = ParsingWriter::new(out, width)?;
    for p in phrases {
        w.push(p)?;
    }
    Ok(w.finish()?.1)
}

/// Streaming, validating decoder for a parsing. Positions are assigned
/// cumulatively from the first record read.
pub struct ParsingReader<R: Read> {
    src: R,
    width: IntWidth,
    next_pos: u64,
    record: u64,
    stats: ParsingStats,
    failed: bool,
}

impl<R: Read> ParsingReader<R> {
    pub fn new(mut src: R) -> Result<Self> {
        let mut h = [0u8; HEADER_LEN as usize];
        let got = read_up_to(&mut src, &mut h).map_err(|e| Error::io("parsing", e))?;
        if got < h.len() {
            return Err(Error::BadHeader(format!("only {got} header bytes")));
        }
        let width = parse_header(&h)?;
        Ok(Self::resume(src, width, 0, 0))
    }

    /// Continues a stream positioned at record index `record`, whose phrase
    /// starts at text position `pos`.
    pub fn resume(src: R, width: IntWidth, record: u64, pos: u64) -> Self {
        ParsingReader {
            src,
            width,
            next_pos: pos,
            record,
            stats: ParsingStats::default(),
            failed: false,
        }
    }

    pub fn width(&self) -> IntWidth {
        self.width
    }

    /// Statistics over the records read so far.
    pub fn stats(&self) -> &ParsingStats {
        &self.stats
    }

    /// Index of the next record to be read.
    pub fn record_index(&self) -> u64 {
        self.record
    }

    pub fn position(&self) -> u64 {
        self.next_pos
    }

    fn next_record(&mut self) -> Result<Option<LocatedPhrase>> {
        let w = self.width.bytes();
        let mut rec = [0u8; 16];
        let got = read_up_to(&mut self.src, &mut rec[..2 * w]).map_err(|e| Error::io("parsing", e))?;
        if got == 0 {
            return Ok(None);
        }
        if got < 2 * w {
            return Err(Error::Truncated {
                record: self.record,
                bytes: got,
            });
        }
        let a = get_uint(&rec[..w]);
        let b = get_uint(&rec[w..2 * w]);
        let pos = self.next_pos;
        let phrase = if b == 0 {
            if a >= 256 {
                return Err(Error::LiteralOutOfRange {
                    record: self.record,
                    value: a,
                });
            }
            Phrase::Literal(a as u8)
        } else {
            if a >= pos {
                return Err(Error::SourceNotBefore {
                    record: self.record,
                    src: a,
                    pos,
                });
            }
            Phrase::Repeat { src: a, len: b }
        };
        self.next_pos = pos.checked_add(phrase.advance()).ok_or(Error::LengthOverflow)?;
        self.record += 1;
        self.stats.record(&phrase);
        Ok(Some(LocatedPhrase { pos, phrase }))
    }
}

impl<R: Read> Iterator for ParsingReader<R> {
    type Item = Result<LocatedPhrase>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_record() {
            Ok(Some(p)) => Some(Ok(p)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

fn read_up_to<R: Read>(src: &mut R, out: &mut [u8]) -> io::Result<usize> {
    let mut done = 0;
    while done < out.len() {
        match src.read(&mut out[done..]) {
            Ok(0) => break,
            Ok(k) => done += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(done)
}

/// Decodes a whole parsing into memory.
pub fn read_parsing<R: Read>(src: R) -> Result<(Vec<LocatedPhrase>, ParsingStats)> {
    let mut reader = ParsingReader::new(src)?;
    let mut out = Vec::new();
    for p in reader.by_ref() {
        out.push(p?);
    }
    Ok((out, *reader.stats()))
}

/// Opens a `.lz77` file as a block-buffered phrase stream.
pub fn open_parsing(path: &Path, block: usize, stats: &IoStats, name: &str) -> Result<ParsingReader<BlockReader>> {
    ParsingReader::new(BlockReader::open(path, block, stats, name)?)
}

/// Opens a `.lz77` file at record `record` whose phrase starts at text
/// position `pos`.
pub fn open_parsing_at(
    path: &Path,
    width: IntWidth,
    record: u64,
    pos: u64,
    block: usize,
    stats: &IoStats,
    name: &str,
) -> Result<ParsingReader<BlockReader>> {
    let offset = HEADER_LEN + record * width.record_len() as u64;
    let r = BlockReader::open_at(path, offset, block, stats, name)?;
    Ok(ParsingReader::resume(r, width, record, pos))
}

/// Reads only the header of a parsing file.
pub fn read_width(path: &Path) -> Result<IntWidth> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io("parsing", e))?;
    let mut h = [0u8; HEADER_LEN as usize];
    let got = read_up_to(&mut f, &mut h).map_err(|e| Error::io("parsing", e))?;
    if got < h.len() {
        return Err(Error::BadHeader(format!("only {got} header bytes")));
    }
    parse_header(&h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(phrases: &[Phrase], width: IntWidth) -> Vec<u8> {
        let mut buf = Vec::new();
        write_parsing(&mut buf, phrases, width).unwrap();
        buf
    }

    fn body(pairs: &[(u64, u64)], width: IntWidth) -> Vec<u8> {
        let w = width.bytes();
        let mut buf = header(width).to_vec();
        for &(a, b) in pairs {
            buf.extend_from_slice(&a.to_le_bytes()[..w]);
            buf.extend_from_slice(&b.to_le_bytes()[..w]);
        }
        buf
    }

    #[test]
    fn literal_record_bytes() {
        let buf = encode(&[Phrase::Literal(b'a')], IntWidth::Five);
        assert_eq!(&buf[..8], b"LZ77EMD1");
        assert_eq!(buf[8], 5);
        assert_eq!(&buf[9..16], &[0; 7]);
        assert_eq!(&buf[16..], &[0x61, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn repeat_record_bytes() {
        let buf = encode(&[Phrase::Repeat { src: 0, len: 3 }], IntWidth::Five);
        assert_eq!(&buf[16..], &[0, 0, 0, 0, 0, 3, 0, 0, 0, 0]);
    }

    #[test]
    fn positions_are_cumulative() {
        let buf = body(&[(97, 0), (98, 0), (0, 1), (0, 3), (1, 2)], IntWidth::Five);
        let (phrases, stats) = read_parsing(&buf[..]).unwrap();
        let pos: Vec<u64> = phrases.iter().map(|p| p.pos).collect();
        assert_eq!(pos, vec![0, 1, 2, 3, 6]);
        assert_eq!(stats.n, 8);
        assert_eq!(stats.z, 5);
        assert_eq!(stats.z_rep, 3);
    }

    #[test]
    fn empty_body_is_empty_parsing() {
        let buf = header(IntWidth::Eight).to_vec();
        let (phrases, stats) = read_parsing(&buf[..]).unwrap();
        assert!(phrases.is_empty());
        assert_eq!(stats.n, 0);
    }

    #[test]
    fn source_at_or_after_phrase_rejected() {
        // four literals then (5,3) at q=4
        let buf = body(&[(1, 0), (2, 0), (3, 0), (4, 0), (5, 3)], IntWidth::Five);
        match read_parsing(&buf[..]) {
            Err(Error::SourceNotBefore {
                record: 4,
                src: 5,
                pos: 4,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        // p = q is rejected as well
        let buf = body(&[(1, 0), (1, 2)], IntWidth::Five);
        assert!(matches!(read_parsing(&buf[..]), Err(Error::SourceNotBefore { .. })));
    }

    #[test]
    fn literal_out_of_range_rejected() {
        let buf = body(&[(256, 0)], IntWidth::Five);
        assert!(matches!(
            read_parsing(&buf[..]),
            Err(Error::LiteralOutOfRange { value: 256, .. })
        ));
    }

    #[test]
    fn truncated_record_rejected() {
        let mut buf = body(&[(97, 0), (0, 1)], IntWidth::Five);
        buf.pop();
        assert!(matches!(
            read_parsing(&buf[..]),
            Err(Error::Truncated { record: 1, bytes: 9 })
        ));
    }

    #[test]
    fn bad_headers_rejected() {
        assert!(matches!(read_parsing(&b"LZ77"[..]), Err(Error::BadHeader(_))));
        let mut h = header(IntWidth::Five);
        h[8] = 4;
        assert!(matches!(read_parsing(&h[..]), Err(Error::BadHeader(_))));
        let mut h = header(IntWidth::Five);
        h[0] = b'X';
        assert!(matches!(read_parsing(&h[..]), Err(Error::BadHeader(_))));
        let mut h = header(IntWidth::Five);
        h[15] = 1;
        assert!(matches!(read_parsing(&h[..]), Err(Error::BadHeader(_))));
    }

    #[test]
    fn overflow_for_width_rejected() {
        let mut buf = Vec::new();
        let err = write_parsing(
            &mut buf,
            &[Phrase::Literal(1), Phrase::Repeat { src: 0, len: 1 << 40 }],
            IntWidth::Five,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ValueOverflow { width: 5, .. }));
        let mut buf = Vec::new();
        write_parsing(
            &mut buf,
            &[Phrase::Literal(1), Phrase::Repeat { src: 0, len: 1 << 40 }],
            IntWidth::Eight,
        )
        .unwrap();
    }

    #[test]
    fn zero_length_repeat_rejected() {
        let mut buf = Vec::new();
        let err = write_parsing(&mut buf, &[Phrase::Repeat { src: 0, len: 0 }], IntWidth::Five).unwrap_err();
        assert!(matches!(err, Error::InvalidPhrase { .. }));
    }

    fn valid_parsing() -> impl Strategy<Value = Vec<Phrase>> {
        prop::collection::vec((any::<u8>(), any::<bool>(), any::<u64>(), 1u64..50), 0..60).prop_map(|raw| {
            let mut n = 0u64;
            let mut out = Vec::new();
            for (c, lit, s, len) in raw {
                if lit || n == 0 {
                    out.push(Phrase::Literal(c));
                    n += 1;
                } else {
                    out.push(Phrase::Repeat { src: s % n, len });
                    n += len;
                }
            }
            out
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn round_trip(phrases in valid_parsing(), eight in any::<bool>()) {
            let width = if eight { IntWidth::Eight } else { IntWidth::Five };
            let buf = encode(&phrases, width);
            prop_assert_eq!(buf.len(), 16 + phrases.len() * width.record_len());
            let (back, stats) = read_parsing(&buf[..]).unwrap();
            let mut expect = ParsingStats::default();
            let mut pos = 0;
            for (lp, p) in back.iter().zip(&phrases) {
                prop_assert_eq!(&lp.phrase, p);
                prop_assert_eq!(lp.pos, pos);
                pos += p.advance();
                expect.record(p);
            }
            prop_assert_eq!(back.len(), phrases.len());
            prop_assert_eq!(stats, expect);
            prop_assert_eq!(stats.n, pos);
        }
    }
}
