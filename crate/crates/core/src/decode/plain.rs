//! Segment-by-segment decoder with far pieces distributed by source segment
//! and delivered through per-segment queues.
//!
//! Segment `j` is recovered in a RAM array `Y` that still holds segment
//! `j - 1`, in four steps: near pieces with their source in segment `j - 1`
//! (in phrase order, each reading the untouched tail of `Y`), literals, the
//! contents of queue `Q_j`, and near pieces with their source in segment `j`
//! (in phrase order). Then every far piece whose source lies in segment `j`
//! is appended with its text to the queue of its own segment.
//!
//! With a disk budget the text is decoded in parts (see [`plan_parts`]).
//! Before part `k` recovers its own segments, every earlier segment that is
//! the source of a far piece of the part is read back from the output file
//! to fill the queues.

use std::path::Path;

use crate::decode::coverage::Coverage;
use crate::decode::plan::{plan_parts, Part, PartPlan};
use crate::decode::split::{classify_piece, LiteralRecord, PieceCounts, PieceKind, RepeatRecord, SplitPhrases};
use crate::decode::{streams, DecodeConfig, DecodeReport, Run};
use crate::emkit::distribute::{distribute, Buckets};
use crate::emkit::queues::QueuePool;
use crate::emkit::record::{RecordReader, RecordWriter};
use crate::error::{Error, Result};
use crate::format::{open_parsing_at, read_width, IntWidth};
use crate::io::{BlockWriter, PositionedReader};
use crate::phrase::{MemoryBudget, Phrase};

/// Decodes the whole text as a single part.
pub fn decode_plain(input: &Path, output: &Path, cfg: &DecodeConfig) -> Result<DecodeReport> {
    decode_parts(input, output, cfg, 0)
}

/// Decodes in parts so that input, output and scratch together stay within
/// `cfg.disk_budget` bytes (0 for unlimited).
pub fn decode_partwise(input: &Path, output: &Path, cfg: &DecodeConfig) -> Result<DecodeReport> {
    decode_parts(input, output, cfg, cfg.disk_budget)
}

/// Queue pool RAM after `Y`, its coverage bits and stream buffers.
fn queue_pool_bytes(budget: &MemoryBudget, b: u64) -> usize {
    let used = b + b / 8 + 6 * budget.block_bytes();
    budget.ram_bytes().saturating_sub(used).max(budget.block_bytes()) as usize
}

struct Engine<'a> {
    input: &'a Path,
    output: &'a Path,
    width: IntWidth,
    b: u64,
    n: u64,
    budget: MemoryBudget,
    run: &'a Run,
    out: BlockWriter,
    back: Option<PositionedReader>,
    y: Vec<u8>,
    cov: Coverage,
    counts: PieceCounts,
    report: DecodeReport,
}

/// Literal and near streams of one part, read in phrase order.
struct LocalStreams {
    lits: RecordReader<LiteralRecord>,
    prev: RecordReader<RepeatRecord>,
    same: RecordReader<RepeatRecord>,
    next_lit: Option<LiteralRecord>,
    next_prev: Option<RepeatRecord>,
    next_same: Option<RepeatRecord>,
}

fn decode_parts(input: &Path, output: &Path, cfg: &DecodeConfig, disk_budget: u64) -> Result<DecodeReport> {
    let run = Run::start(input, cfg.tmp_dir.as_deref())?;
    let b = cfg.segment()?;
    let block = cfg.budget.block_size();
    let plan = plan_parts(input, disk_budget, b, &cfg.budget, &run.stats, streams::INPUT)?;
    let n = plan.parsing.n;
    let y_len = b.min(n) as usize;
    let mut engine = Engine {
        input,
        output,
        width: read_width(input)?,
        b,
        n,
        budget: cfg.budget,
        run: &run,
        out: BlockWriter::create(output, block, &run.stats, streams::OUTPUT)?.charge_external(&run.gauge),
        back: None,
        y: vec![0; y_len],
        cov: Coverage::new(y_len),
        counts: PieceCounts::default(),
        report: DecodeReport {
            algorithm: "plain".into(),
            parsing: plan.parsing,
            segment_size: Some(b),
            segments: Some(n.div_ceil(b)),
            disk_budget: (disk_budget > 0).then_some(disk_budget),
            ..Default::default()
        },
    };
    for (k, part) in plan.parts.iter().enumerate() {
        engine.part(k, part)?;
    }
    engine.out.finish()?;
    let PartPlan { parts, .. } = plan;
    let mut report = engine.report;
    report.parts = parts.len() as u64;
    report.part_estimates = parts.iter().map(|p| p.estimate).collect();
    report.pieces = Some(engine.counts);
    run.finish(&mut report);
    if disk_budget > 0 && report.peak_disk > disk_budget {
        return Err(Error::DiskBudgetExceeded {
            budget: disk_budget,
            peak: report.peak_disk,
        });
    }
    Ok(report)
}

impl Engine<'_> {
    fn block(&self) -> usize {
        self.budget.block_size()
    }

    fn read_back(&mut self, offset: u64, lo: usize, hi: usize) -> Result<()> {
        if lo == hi {
            return Ok(());
        }
        let r = match self.back.as_mut() {
            Some(r) => r,
            None => self.back.insert(PositionedReader::open(
                self.output,
                &self.run.stats,
                streams::OUTPUT_REPLAY,
            )?),
        };
        r.read_at(offset, &mut self.y[lo..hi])?;
        self.report.replay_bytes += (hi - lo) as u64;
        Ok(())
    }

    /// Appends every far piece of bucket `j` to its queue; `Y` holds segment `j`.
    fn scan_sources(&mut self, j: u64, buckets: &mut Buckets, queues: &mut QueuePool) -> Result<()> {
        let start = j * self.b;
        for rec in buckets.drain::<RepeatRecord>(j as usize, self.block(), streams::FAR_READ)? {
            let rec = rec?;
            if rec.src < start || rec.src + rec.len > start + self.y.len() as u64 {
                return Err(Error::invariant(
                    j,
                    format!("far source at {} outside the segment", rec.src),
                ));
            }
            let s = (rec.src - start) as usize;
            queues.push((rec.pos / self.b) as usize, rec.pos, &self.y[s..s + rec.len as usize])?;
        }
        Ok(())
    }

    fn part(&mut self, k: usize, part: &Part) -> Result<()> {
        let (s, e) = (part.start, part.end);
        if s == e {
            return Ok(());
        }
        let b = self.b;
        let block = self.block();
        let scratch = &self.run.scratch;
        let j0 = s / b;
        let m = e.div_ceil(b);

        // Split, classify and distribute the pieces of [s, e).
        let lit_file = scratch.file("lit");
        let prev_file = scratch.file("prev");
        let same_file = scratch.file("same");
        let mut lit_w = RecordWriter::<LiteralRecord>::new(lit_file.writer(block, streams::LITERALS)?);
        let mut prev_w = RecordWriter::<RepeatRecord>::new(prev_file.writer(block, streams::NEAR_PREV)?);
        let mut same_w = RecordWriter::<RepeatRecord>::new(same_file.writer(block, streams::NEAR_SAME)?);
        let reader = open_parsing_at(
            self.input,
            self.width,
            part.record,
            part.record_pos,
            block,
            &self.run.stats,
            streams::INPUT,
        )?;
        let mut split = SplitPhrases::new(reader, b);
        let counts = &mut self.counts;
        let far_pieces = std::iter::from_fn(|| loop {
            let piece = match split.next()? {
                Ok(p) => p,
                Err(e) => return Some(Err(e)),
            };
            if piece.pos < s {
                continue;
            }
            if piece.pos >= e {
                return None;
            }
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
                    match kind {
                        PieceKind::Far => return Some(Ok(rec)),
                        PieceKind::NearPrev => prev_w.push(&rec),
                        _ => same_w.push(&rec),
                    }
                }
            };
            if let Err(e) = pushed {
                return Some(Err(e));
            }
        });
        let mut buckets = distribute(
            far_pieces,
            |r: &RepeatRecord| r.src / b,
            m,
            &self.budget,
            scratch,
            streams::FAR_DIST,
        )?;
        drop(split);
        lit_w.finish()?;
        prev_w.finish()?;
        same_w.finish()?;
        let rounds = self.report.distribution_rounds.unwrap_or(0).max(buckets.rounds());
        self.report.distribution_rounds = Some(rounds);

        let mut queues = QueuePool::new(m as usize, queue_pool_bytes(&self.budget, b), scratch, streams::QUEUES);

        // Refill the queues from segments written by earlier parts.
        for j in 0..j0 {
            if buckets.count(j as usize) == 0 {
                continue;
            }
            self.read_back(j * b, 0, b as usize)?;
            self.scan_sources(j, &mut buckets, &mut queues)?;
        }

        // Y must hold the previous segment with the already written prefix
        // of segment j0 on top.
        let i0 = (s - j0 * b) as usize;
        if k > 0 {
            if j0 > 0 {
                self.read_back((j0 - 1) * b + i0 as u64, i0, b as usize)?;
            }
            self.read_back(j0 * b, 0, i0)?;
        }

        let mut local = LocalStreams {
            lits: RecordReader::new(lit_file.reader(block, streams::LITERALS)?),
            prev: RecordReader::new(prev_file.reader(block, streams::NEAR_PREV)?),
            same: RecordReader::new(same_file.reader(block, streams::NEAR_SAME)?),
            next_lit: None,
            next_prev: None,
            next_same: None,
        };
        local.next_lit = local.lits.read_next()?;
        local.next_prev = local.prev.read_next()?;
        local.next_same = local.same.read_next()?;

        for j in j0..m {
            let lo = if j == j0 { i0 } else { 0 };
            self.segment(j, lo, e, &mut local, &mut queues)?;
            let seg_end = ((j + 1) * b).min(self.n);
            if seg_end <= e {
                self.scan_sources(j, &mut buckets, &mut queues)?;
            }
        }
        self.out.finish()?;

        if local.next_lit.is_some() || local.next_prev.is_some() || local.next_same.is_some() {
            return Err(Error::invariant(m, "local pieces left over after the part"));
        }
        if buckets.total() != 0 {
            return Err(Error::invariant(m, "far pieces left in buckets after the part"));
        }
        if queues.records_read() != queues.records_written() {
            return Err(Error::invariant(m, "queue records left over after the part"));
        }
        self.report.q_payload_written += queues.payload_written();
        self.report.q_payload_read += queues.payload_read();
        self.report.q_records += queues.records_written();
        Ok(())
    }

    /// Recovers `[max(j·b + lo, ...), min(end of segment j, e))` into `Y` and
    /// writes it out.
    fn segment(&mut self, j: u64, lo: usize, e: u64, local: &mut LocalStreams, queues: &mut QueuePool) -> Result<()> {
        let b = self.b;
        let start = j * b;
        let seg_end = ((j + 1) * b).min(self.n);
        let hi = (seg_end.min(e) - start) as usize;
        let y = &mut self.y;
        let cov = &mut self.cov;
        cov.clear();
        cov.mark(0, lo);

        // 1. sources in the previous segment, still untouched in Y
        while let Some(r) = local.next_prev.filter(|r| r.pos < seg_end) {
            let q = (r.pos - start) as usize;
            let len = r.len as usize;
            let src = (r.src + b).checked_sub(start).map(|s| s as usize);
            match src {
                Some(s) if j > 0 && s >= q && s + len <= y.len() && r.src < start => {
                    y.copy_within(s..s + len, q);
                }
                _ => {
                    return Err(Error::invariant(
                        j,
                        format!("source of near piece at {} precedes its phrase offset", r.pos),
                    ))
                }
            }
            if !cov.mark(q, q + len) {
                return Err(Error::invariant(j, format!("piece at {} overlaps another", r.pos)));
            }
            local.next_prev = local.prev.read_next()?;
        }

        // 2. literals
        while let Some(l) = local.next_lit.filter(|l| l.pos < seg_end) {
            let q = (l.pos - start) as usize;
            y[q] = l.byte;
            if !cov.mark(q, q + 1) {
                return Err(Error::invariant(
                    j,
                    format!("literal at {} overlaps another piece", l.pos),
                ));
            }
            local.next_lit = local.lits.read_next()?;
        }

        // 3. far pieces delivered through the queue
        let mut qr = queues.drain(j as usize, self.budget.block_size())?;
        let mut delivered = Vec::new();
        while let Some((pos, payload)) = qr.next_record()? {
            if pos < start || pos + payload.len() as u64 > seg_end {
                return Err(Error::invariant(j, format!("queue item at {pos} outside the segment")));
            }
            let q = (pos - start) as usize;
            y[q..q + payload.len()].copy_from_slice(payload);
            if !cov.mark(q, q + payload.len()) {
                return Err(Error::invariant(
                    j,
                    format!("queue item at {pos} overlaps another piece"),
                ));
            }
            delivered.push(payload.len());
        }
        drop(qr);
        for len in delivered {
            queues.note_read(len);
        }

        // 4. sources in this segment, in phrase order
        while let Some(r) = local.next_same.filter(|r| r.pos < seg_end) {
            let q = (r.pos - start) as usize;
            let s = (r.src - start) as usize;
            let len = r.len as usize;
            if !cov.covered(s, q.min(s + len)) {
                return Err(Error::invariant(
                    j,
                    format!("source of near piece at {} not recovered", r.pos),
                ));
            }
            let mut done = 0;
            while done < len {
                let chunk = (len - done).min(q - s);
                y.copy_within(s + done..s + done + chunk, q + done);
                done += chunk;
            }
            if !cov.mark(q, q + len) {
                return Err(Error::invariant(j, format!("piece at {} overlaps another", r.pos)));
            }
            local.next_same = local.same.read_next()?;
        }

        if !cov.covered(lo, hi) {
            return Err(Error::invariant(j, "segment not fully recovered"));
        }
        self.out.put(&self.y[lo..hi])?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorize::{factorize_greedy, gen_corpus, gen_permute_instance, CorpusKind, PermuteInstance};
    use crate::format::write_parsing;

    fn cfg(ram: u64, b: u64, disk: u64, dir: &Path) -> DecodeConfig {
        let mut c = DecodeConfig::new(MemoryBudget::new(ram, 4096).unwrap());
        c.segment_size = Some(b);
        c.disk_budget = disk;
        c.tmp_dir = Some(dir.to_path_buf());
        c
    }

    fn run(phrases: &[Phrase], c: impl Fn(&Path, u64) -> DecodeConfig) -> (Vec<u8>, DecodeReport) {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.lz77");
        let output = dir.path().join("out");
        write_parsing(std::fs::File::create(&input).unwrap(), phrases, IntWidth::Five).unwrap();
        let len = std::fs::metadata(&input).unwrap().len();
        let c = c(dir.path(), len);
        let report = decode_partwise(&input, &output, &c).unwrap();
        (std::fs::read(&output).unwrap(), report)
    }

    #[test]
    fn small_example() {
        let (out, _) = run(&factorize_greedy(b"abaababa"), |d, _| cfg(16384, 2, 0, d));
        assert_eq!(out, b"abaababa");
    }

    #[test]
    fn permutation_instance() {
        let inst = PermuteInstance::random(10_000, 8, 256, 4);
        let (out, report) = run(&gen_permute_instance(&inst).unwrap(), |d, _| {
            cfg(1 << 17, 1 << 16, 0, d)
        });
        let half = inst.items.len();
        for (i, &p) in inst.perm.iter().enumerate() {
            let p = p as usize;
            assert_eq!(&out[half + 8 * i..half + 8 * i + 8], &inst.items[8 * p..8 * p + 8]);
        }
        let far = report.pieces.unwrap().far_bytes;
        assert_eq!(report.q_payload_written, far);
        assert_eq!(report.q_payload_read, far);
    }

    #[test]
    fn near_only_parsing_leaves_queues_empty() {
        let mut p = vec![Phrase::Literal(b'a'), Phrase::Literal(b'b')];
        let mut pos = 2;
        for k in 0..2000u64 {
            let len = 1 + k % 7;
            p.push(Phrase::Repeat { src: pos - 2, len });
            pos += len;
        }
        let (out, report) = run(&p, |d, _| cfg(16384, 64, 0, d));
        assert_eq!(out.len() as u64, pos);
        assert_eq!(report.pieces.unwrap().far, 0);
        assert_eq!(report.io.get("q").map_or(0, |s| s.bytes_written), 0);
        assert_eq!(report.io.get("far.dist").map_or(0, |s| s.bytes_written), 0);
    }

    #[test]
    fn partwise_matches_and_respects_budget() {
        let text = gen_corpus(CorpusKind::Random255, 300_000, 9);
        let p = factorize_greedy(&text);
        let (out, report) = run(&p, |d, len| {
            cfg(1 << 15, 1 << 14, ((len + 300_000) as f64 * 1.05) as u64, d)
        });
        assert_eq!(out, text);
        assert!(report.parts >= 2);
        assert!(report.peak_disk <= report.disk_budget.unwrap());
        assert!(report.replay_bytes <= (report.parts - 1) * 300_000);
        let far = report.pieces.unwrap().far_bytes;
        assert_eq!(report.q_payload_written, far);
        assert_eq!(report.q_payload_read, far);
    }
}
