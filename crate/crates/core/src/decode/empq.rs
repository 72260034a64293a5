//! Segment-by-segment decoder with far pieces sorted by source and delivered
//! through an external priority queue keyed by phrase position.
//!
//! After the text of segment `j` is recovered, every far piece whose source
//! lies in segment `j` is inserted into the queue, cut into items of at most
//! `lmax` bytes. Such a piece starts after segment `j + 1` begins, so keys
//! never go below the last extracted one.

use std::path::{Path, PathBuf};

use crate::decode::coverage::Coverage;
use crate::decode::split::{classify_piece, LiteralRecord, PieceCounts, PieceKind, RepeatRecord, SplitPhrases};
use crate::decode::{streams, DecodeConfig, DecodeReport, Run};
use crate::emkit::pq::{ExternalPq, PqConfig};
use crate::emkit::record::{RecordReader, RecordWriter};
use crate::emkit::sort::em_sort;
use crate::error::{Error, Result};
use crate::format::open_parsing;
use crate::io::BlockWriter;
use crate::phrase::{MemoryBudget, Phrase, SegmentGeometry};

#[derive(Debug, Clone)]
pub struct EmpqConfig {
    /// Longest payload of one queue item.
    pub lmax: u64,
    /// Segment size `b`.
    pub segment: u64,
    pub budget: MemoryBudget,
    pub tmp_dir: Option<PathBuf>,
}

impl EmpqConfig {
    /// Validates `lmax >= 1` and `1 <= b <= ram / 2`; `b` defaults to the
    /// largest block multiple not above half the RAM.
    pub fn new(budget: MemoryBudget, segment: Option<u64>, lmax: u64) -> Result<Self> {
        let mut cfg = DecodeConfig::new(budget);
        cfg.segment_size = segment;
        cfg.lmax = lmax;
        Self::from_decode_config(&cfg)
    }

    pub fn from_decode_config(cfg: &DecodeConfig) -> Result<Self> {
        if cfg.lmax == 0 || cfg.lmax > u32::MAX as u64 {
            return Err(Error::Config(format!("lmax {} outside [1, 2^32)", cfg.lmax)));
        }
        Ok(EmpqConfig {
            lmax: cfg.lmax,
            segment: cfg.segment()?,
            budget: cfg.budget,
            tmp_dir: cfg.tmp_dir.clone(),
        })
    }

    /// RAM left for the queue's insertion buffer.
    pub fn pq_buffer_bytes(&self) -> usize {
        let ram = self.budget.ram_bytes();
        let block = self.budget.block_bytes();
        let used = self.segment + self.segment / 8 + 6 * block;
        ram.saturating_sub(used).max(block) as usize
    }
}

pub fn decode_empq(input: &Path, output: &Path, cfg: &EmpqConfig) -> Result<DecodeReport> {
    let run = Run::start(input, cfg.tmp_dir.as_deref())?;
    let b = cfg.segment;
    let block = cfg.budget.block_size();
    let scratch = &run.scratch;

    // Split and classify; literals and near pieces go to their own streams,
    // far pieces straight into the sorter.
    let lit_file = scratch.file("lit");
    let near_file = scratch.file("near");
    let mut lit_w = RecordWriter::<LiteralRecord>::new(lit_file.writer(block, streams::LITERALS)?);
    let mut near_w = RecordWriter::<RepeatRecord>::new(near_file.writer(block, streams::NEAR)?);
    let mut counts = PieceCounts::default();
    let mut split = SplitPhrases::new(open_parsing(input, block, &run.stats, streams::INPUT)?, b);
    let far_pieces = std::iter::from_fn(|| loop {
        let piece = match split.next()? {
            Ok(p) => p,
            Err(e) => return Some(Err(e)),
        };
        let kind = classify_piece(&piece, b);
        counts.add(kind, piece.len());
        let pushed = match piece.phrase {
            Phrase::Literal(byte) => lit_w.push(&LiteralRecord { pos: piece.pos, byte }),
            Phrase::Repeat { src, len } => {
                let rec = RepeatRecord {
                    src,
                    pos: piece.pos,
                    len,
                };
                if kind == PieceKind::Far {
                    return Some(Ok(rec));
                }
                near_w.push(&rec)
            }
        };
        if let Err(e) = pushed {
            return Some(Err(e));
        }
    });
    let mut far = em_sort(
        far_pieces,
        |r: &RepeatRecord| (r.src, r.pos),
        &cfg.budget,
        scratch,
        streams::FAR_SORT,
    )?;
    let parsing = *split.inner().stats();
    lit_w.finish()?;
    near_w.finish()?;
    let sort_stats = far.stats();

    let geom = SegmentGeometry::new(parsing.n, b)?;
    let mut lits = RecordReader::<LiteralRecord>::new(lit_file.reader(block, streams::LITERALS)?);
    let mut near = RecordReader::<RepeatRecord>::new(near_file.reader(block, streams::NEAR)?);
    let mut next_lit = lits.read_next()?;
    let mut next_near = near.read_next()?;
    let mut next_far = far.next().transpose()?;
    let mut pq = ExternalPq::new(
        PqConfig {
            buffer_bytes: cfg.pq_buffer_bytes(),
            block,
            max_runs: (cfg.budget.fan_out() / 2).max(2),
            payload_max: cfg.lmax as usize,
        },
        scratch,
        streams::PQ,
    )?;
    let mut out = BlockWriter::create(output, block, &run.stats, streams::OUTPUT)?.charge_external(&run.gauge);
    let y_len = b.min(parsing.n) as usize;
    let mut y = vec![0u8; y_len];
    let mut cov = Coverage::new(y_len);
    let mut payload = Vec::new();

    for j in 0..geom.count() {
        let start = geom.start(j);
        let end = geom.end(j);
        cov.clear();
        let mut cur = start;
        while cur < end {
            let i = (cur - start) as usize;
            if let Some(l) = next_lit.filter(|l| l.pos == cur) {
                y[i] = l.byte;
                cov.mark(i, i + 1);
                cur += 1;
                next_lit = lits.read_next()?;
                continue;
            }
            if let Some(r) = next_near.filter(|r| r.pos == cur) {
                let len = r.len as usize;
                if r.end() > end {
                    return Err(Error::invariant(
                        j,
                        format!("near piece at {cur} crosses the segment end"),
                    ));
                }
                if r.src >= start {
                    // Source in this segment: its part before the phrase is done.
                    let s = (r.src - start) as usize;
                    if !cov.covered(s, i.min(s + len)) {
                        return Err(Error::invariant(
                            j,
                            format!("source of near piece at {cur} not recovered"),
                        ));
                    }
                    let mut done = 0;
                    while done < len {
                        let chunk = (len - done).min(i - s);
                        y.copy_within(s + done..s + done + chunk, i + done);
                        done += chunk;
                    }
                } else {
                    // Source in the previous segment, still untouched in Y[i..].
                    let s = (r.src + b - start) as usize;
                    if j == 0 || s < i || s + len > y_len {
                        return Err(Error::invariant(
                            j,
                            format!("source of near piece at {cur} not in the untouched tail"),
                        ));
                    }
                    y.copy_within(s..s + len, i);
                }
                cov.mark(i, i + len);
                cur += len as u64;
                next_near = near.read_next()?;
                continue;
            }
            if pq.peek_key() == Some(cur) {
                pq.pop_into(&mut payload)?;
                let len = payload.len();
                if cur + len as u64 > end || len == 0 {
                    return Err(Error::invariant(j, format!("queue item at {cur} has bad length {len}")));
                }
                y[i..i + len].copy_from_slice(&payload);
                cov.mark(i, i + len);
                cur += len as u64;
                continue;
            }
            return Err(Error::invariant(j, format!("no piece starts at position {cur}")));
        }
        let seg_len = (end - start) as usize;
        out.put(&y[..seg_len])?;

        while let Some(r) = next_far.filter(|r| r.src < end) {
            if r.src < start || r.src + r.len > end {
                return Err(Error::invariant(j, format!("far source at {} out of order", r.src)));
            }
            let s = (r.src - start) as usize;
            let mut off = 0;
            while off < r.len {
                let chunk = (r.len - off).min(cfg.lmax);
                let from = s + off as usize;
                pq.insert(r.pos + off, &y[from..from + chunk as usize])?;
                off += chunk;
            }
            next_far = far.next().transpose()?;
        }
    }
    out.finish()?;
    if next_lit.is_some() || next_near.is_some() || next_far.is_some() || !pq.is_empty() {
        return Err(Error::invariant(
            geom.count(),
            "pieces left over after the last segment",
        ));
    }

    let mut report = DecodeReport {
        algorithm: "pq".into(),
        parsing,
        segment_size: Some(b),
        segments: Some(geom.count()),
        lmax: Some(cfg.lmax),
        pieces: Some(counts),
        sort: Some(sort_stats),
        pq: Some(pq.stats()),
        parts: 1,
        ..Default::default()
    };
    drop(far);
    drop(pq);
    run.finish(&mut report);
    Ok(report)
}
