//! Greedy division of a parsing into parts that fit a disk budget.
//!
//! Parts are ranges of text cut at piece boundaries. The estimated peak disk
//! of a part ending at text position `e` is
//!
//! ```text
//! input + e + 6·literals + 15·near + 15·far·(2 if distribution needs
//! more than one round, else 1) + Σ(10 + len) over far pieces
//! ```
//!
//! covering the input file, the output written so far, the literal and near
//! streams, the far-piece buckets (two copies exist while a multi-round
//! distribution splits a group) and the per-segment queues.

use std::path::Path;

use serde::Serialize;

use crate::decode::split::{classify_piece, split_phrase, LiteralRecord, PieceKind, RepeatRecord};
use crate::emkit::distribute::rounds_for;
use crate::emkit::queues::QUEUE_RECORD_HEADER;
use crate::emkit::record::FixedRecord;
use crate::error::{Error, Result};
use crate::format::open_parsing;
use crate::io::IoStats;
use crate::phrase::{LocatedPhrase, MemoryBudget, ParsingStats};

/// One part: text range `[start, end)`, read from record `record` whose
/// phrase starts at `record_pos <= start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Part {
    pub record: u64,
    pub record_pos: u64,
    pub start: u64,
    pub end: u64,
    pub estimate: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartPlan {
    pub parts: Vec<Part>,
    /// 0 means unlimited.
    pub disk_budget: u64,
    pub minimum: u64,
    pub input_bytes: u64,
    pub segment_size: u64,
    pub parsing: ParsingStats,
}

impl PartPlan {
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

/// Smallest disk budget accepted for a text of `n` bytes: input, output and
/// room for the largest single piece (`b` bytes plus record overhead).
pub fn minimum_disk_budget(input_bytes: u64, n: u64, b: u64) -> u64 {
    input_bytes + n + (2 * b).max(b + 64)
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    literals: u64,
    near: u64,
    far: u64,
    queue_bytes: u64,
}

impl Tally {
    fn add(&mut self, piece: &LocatedPhrase, b: u64) {
        match classify_piece(piece, b) {
            PieceKind::Literal => self.literals += 1,
            PieceKind::NearPrev | PieceKind::NearSame => self.near += 1,
            PieceKind::Far => {
                self.far += 1;
                self.queue_bytes += QUEUE_RECORD_HEADER as u64 + piece.len();
            }
        }
    }

    fn is_empty(&self) -> bool {
        self.literals + self.near + self.far == 0
    }
}

struct Estimator {
    input_bytes: u64,
    b: u64,
    fan: usize,
}

impl Estimator {
    fn estimate(&self, t: &Tally, end: u64) -> u64 {
        let rounds = rounds_for(end.div_ceil(self.b).max(1), self.fan);
        let copies = if rounds > 1 { 2 } else { 1 };
        let rec = RepeatRecord::SIZE as u64;
        self.input_bytes
            + end
            + LiteralRecord::SIZE as u64 * t.literals
            + rec * t.near
            + rec * t.far * copies
            + t.queue_bytes
    }
}

/// Plans parts for decoding `input` with segment size `b`. With
/// `disk_budget == 0` the whole text is one part. Reads the parsing once.
pub fn plan_parts(
    input: &Path,
    disk_budget: u64,
    b: u64,
    budget: &MemoryBudget,
    stats: &IoStats,
    stream: &str,
) -> Result<PartPlan> {
    let input_bytes = std::fs::metadata(input).map_err(|e| Error::io(stream, e))?.len();
    let est = Estimator {
        input_bytes,
        b,
        fan: budget.fan_out(),
    };
    let mut reader = open_parsing(input, budget.block_size(), stats, stream)?;
    let mut parts = Vec::new();
    let mut cur = Part {
        record: 0,
        record_pos: 0,
        start: 0,
        end: 0,
        estimate: 0,
    };
    let mut tally = Tally::default();
    let mut infeasible = false;

    loop {
        let record = reader.record_index();
        let ph = match reader.next() {
            None => break,
            Some(ph) => ph?,
        };
        if infeasible {
            continue;
        }
        split_phrase(&ph, b, |piece| {
            if infeasible {
                return;
            }
            let mut next = tally;
            next.add(&piece, b);
            let limited = disk_budget > 0;
            if limited && est.estimate(&next, piece.end()) > disk_budget && !tally.is_empty() {
                cur.end = piece.pos;
                cur.estimate = est.estimate(&tally, piece.pos);
                parts.push(cur);
                cur = Part {
                    record,
                    record_pos: ph.pos,
                    start: piece.pos,
                    end: 0,
                    estimate: 0,
                };
                next = Tally::default();
                next.add(&piece, b);
            }
            if limited && est.estimate(&next, piece.end()) > disk_budget {
                infeasible = true;
            }
            tally = next;
        });
    }
    let parsing = *reader.stats();
    let n = parsing.n;
    let minimum = minimum_disk_budget(input_bytes, n, b);
    if disk_budget > 0 && (infeasible || disk_budget < minimum) {
        return Err(Error::InfeasibleDiskBudget {
            budget: disk_budget,
            minimum,
        });
    }
    cur.end = n;
    cur.estimate = est.estimate(&tally, n);
    parts.push(cur);
    Ok(PartPlan {
        parts,
        disk_budget,
        minimum,
        input_bytes,
        segment_size: b,
        parsing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorize::{factorize_greedy, gen_corpus, CorpusKind};
    use crate::format::{write_parsing, IntWidth};

    fn setup(text: &[u8]) -> (tempfile::TempDir, std::path::PathBuf, u64) {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.lz77");
        write_parsing(
            std::fs::File::create(&input).unwrap(),
            &factorize_greedy(text),
            IntWidth::Five,
        )
        .unwrap();
        let len = std::fs::metadata(&input).unwrap().len();
        (dir, input, len)
    }

    #[test]
    fn unlimited_is_one_part() {
        let text = gen_corpus(CorpusKind::Random255, 100_000, 1);
        let (_d, input, _) = setup(&text);
        let budget = MemoryBudget::new(1 << 16, 4096).unwrap();
        let plan = plan_parts(&input, 0, 4096, &budget, &IoStats::new(), "input").unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!((plan.parts[0].start, plan.parts[0].end), (0, 100_000));
    }

    #[test]
    fn tight_budget_gives_several_parts_within_budget() {
        let n = 400_000u64;
        let text = gen_corpus(CorpusKind::Random255, n as usize, 2);
        let (_d, input, len) = setup(&text);
        let budget = MemoryBudget::new(1 << 16, 4096).unwrap();
        let disk = ((len + n) as f64 * 1.05) as u64;
        let plan = plan_parts(&input, disk, 4096, &budget, &IoStats::new(), "input").unwrap();
        assert!(plan.len() >= 2, "{} parts", plan.len());
        let mut at = 0;
        for p in &plan.parts {
            assert_eq!(p.start, at);
            assert!(p.end > p.start);
            assert!(p.record_pos <= p.start);
            assert!(p.estimate <= disk);
            at = p.end;
        }
        assert_eq!(at, n);
    }

    #[test]
    fn budget_below_minimum_rejected() {
        let text = gen_corpus(CorpusKind::DnaLike, 50_000, 3);
        let (_d, input, len) = setup(&text);
        let budget = MemoryBudget::new(1 << 16, 4096).unwrap();
        let min = minimum_disk_budget(len, 50_000, 4096);
        let err = plan_parts(&input, min - 1, 4096, &budget, &IoStats::new(), "input").unwrap_err();
        assert!(matches!(err, Error::InfeasibleDiskBudget { minimum, .. } if minimum == min));
        assert!(plan_parts(&input, min, 4096, &budget, &IoStats::new(), "input").is_ok());
    }
}
