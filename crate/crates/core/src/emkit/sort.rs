//! External merge sort of fixed-size records.
//!
//! Runs of `ram / SIZE` records are sorted in RAM and written to scratch.
//! Runs are then merged `F` at a time, `F = ram/block - 1`, until at most `F`
//! remain; the last merge is performed lazily while the caller consumes the
//! output. Ties are broken by input order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::emkit::record::{FixedRecord, RecordReader, RecordWriter};
use crate::emkit::scratch::{ScratchFile, ScratchManager};
use crate::error::Result;
use crate::phrase::MemoryBudget;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct SortStats {
    pub records: u64,
    pub initial_runs: u64,
    pub merge_rounds: u32,
}

/// A sorted run on disk.
pub struct SortedRun<K> {
    file: ScratchFile,
    count: u64,
    min_key: K,
    max_key: K,
}

impl<K: Copy> SortedRun<K> {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn key_range(&self) -> (K, K) {
        (self.min_key, self.max_key)
    }
}

struct Head<R> {
    rec: Option<R>,
    reader: RecordReader<R>,
    _file: ScratchFile,
}

/// Lazy k-way merge over sorted runs.
struct Merger<R, K, F> {
    heads: Vec<Head<R>>,
    heap: BinaryHeap<Reverse<(K, usize)>>,
    key: F,
}

impl<R, K, F> Merger<R, K, F>
where
    R: FixedRecord,
    K: Ord + Copy,
    F: Fn(&R) -> K,
{
    fn new(runs: Vec<SortedRun<K>>, key: F, block: usize, stream: &str) -> Result<Self> {
        let mut heads = Vec::with_capacity(runs.len());
        let mut heap = BinaryHeap::with_capacity(runs.len());
        for (i, run) in runs.into_iter().enumerate() {
            let mut reader = RecordReader::new(run.file.reader(block, stream)?);
            let rec = reader.read_next()?;
            if let Some(r) = &rec {
                heap.push(Reverse((key(r), i)));
            }
            heads.push(Head {
                rec,
                reader,
                _file: run.file,
            });
        }
        Ok(Merger { heads, heap, key })
    }

    fn pop(&mut self) -> Result<Option<R>> {
        let Some(Reverse((_, i))) = self.heap.pop() else {
            return Ok(None);
        };
        let head = &mut self.heads[i];
        let out = head.rec.take();
        head.rec = head.reader.read_next()?;
        if let Some(r) = &head.rec {
            self.heap.push(Reverse(((self.key)(r), i)));
        }
        Ok(out)
    }
}

enum Source<R, K, F> {
    Empty,
    Single(RecordReader<R>, #[allow(dead_code)] ScratchFile),
    Merge(Merger<R, K, F>),
}

/// Output of [`em_sort`]: records in non-decreasing key order.
pub struct SortedStream<R, K, F> {
    source: Source<R, K, F>,
    stats: SortStats,
}

impl<R, K, F> SortedStream<R, K, F> {
    pub fn stats(&self) -> SortStats {
        self.stats
    }
}

impl<R, K, F> Iterator for SortedStream<R, K, F>
where
    R: FixedRecord,
    K: Ord + Copy,
    F: Fn(&R) -> K,
{
    type Item = Result<R>;

    fn next(&mut self) -> Option<Result<R>> {
        match &mut self.source {
            Source::Empty => None,
            Source::Single(r, _) => r.read_next().transpose(),
            Source::Merge(m) => m.pop().transpose(),
        }
    }
}

fn write_run<R, K, F>(
    buf: &mut Vec<R>,
    key: &F,
    scratch: &ScratchManager,
    block: usize,
    stream: &str,
) -> Result<SortedRun<K>>
where
    R: FixedRecord,
    K: Ord + Copy,
    F: Fn(&R) -> K,
{
    buf.sort_by_key(|r| key(r));
    let file = scratch.file("run");
    let mut w = RecordWriter::<R>::new(file.writer(block, stream)?);
    for r in buf.iter() {
        w.push(r)?;
    }
    let count = w.finish()?;
    let run = SortedRun {
        file,
        count,
        min_key: key(&buf[0]),
        max_key: key(&buf[buf.len() - 1]),
    };
    buf.clear();
    Ok(run)
}

/// Sorts `input` by `key` within `budget`, spilling runs to `scratch`.
/// Stream names `{name}.runs` and `{name}.merge` receive the run-formation and
/// intermediate-merge traffic respectively.
pub fn em_sort<R, K, F, I>(
    input: I,
    key: F,
    budget: &MemoryBudget,
    scratch: &ScratchManager,
    name: &str,
) -> Result<SortedStream<R, K, F>>
where
    R: FixedRecord,
    K: Ord + Copy,
    F: Fn(&R) -> K,
    I: IntoIterator<Item = Result<R>>,
{
    let block = budget.block_size();
    let fan_in = budget.fan_out().max(2);
    let capacity = ((budget.ram_bytes() as usize) / R::SIZE).max(1);
    let runs_stream = format!("{name}.runs");
    let merge_stream = format!("{name}.merge");

    let mut stats = SortStats::default();
    let mut runs = Vec::new();
    let mut buf: Vec<R> = Vec::with_capacity(capacity.min(1 << 20));
    for rec in input {
        buf.push(rec?);
        stats.records += 1;
        if buf.len() == capacity {
            runs.push(write_run(&mut buf, &key, scratch, block, &runs_stream)?);
        }
    }
    if !buf.is_empty() {
        runs.push(write_run(&mut buf, &key, scratch, block, &runs_stream)?);
    }
    drop(buf);
    stats.initial_runs = runs.len() as u64;

    while runs.len() > fan_in {
        stats.merge_rounds += 1;
        let mut next = Vec::with_capacity(runs.len().div_ceil(fan_in));
        let mut it = runs.into_iter();
        loop {
            let group: Vec<_> = it.by_ref().take(fan_in).collect();
            if group.is_empty() {
                break;
            }
            if group.len() == 1 {
                next.extend(group);
                continue;
            }
            let (mut min_key, mut max_key) = group[0].key_range();
            for r in &group {
                min_key = min_key.min(r.min_key);
                max_key = max_key.max(r.max_key);
            }
            let mut merger = Merger::new(group, &key, block, &merge_stream)?;
            let file = scratch.file("run");
            let mut w = RecordWriter::<R>::new(file.writer(block, &merge_stream)?);
            while let Some(r) = merger.pop()? {
                w.push(&r)?;
            }
            let count = w.finish()?;
            next.push(SortedRun {
                file,
                count,
                min_key,
                max_key,
            });
        }
        runs = next;
    }

    let source = match runs.len() {
        0 => Source::Empty,
        1 => {
            let run = runs.pop().unwrap();
            let reader = RecordReader::new(run.file.reader(block, &merge_stream)?);
            Source::Single(reader, run.file)
        }
        _ => {
            stats.merge_rounds += 1;
            Source::Merge(Merger::new(runs, key, block, &merge_stream)?)
        }
    };
    Ok(SortedStream { source, stats })
}
