//! Multi-round distribution of fixed-size records into buckets.
//!
//! With fan-out `F` and `m` buckets, `r = ceil(log_F m)` rounds are used.
//! A single bucket needs no split and is only copied to its file, which is
//! not counted as a round. Round one splits the input by groups of `F^(r-1)`
//! consecutive buckets, each later round splits one group file by the next
//! smaller group width. Every round reads and writes each record once, and
//! within a bucket the input order is preserved.

use crate::emkit::record::{FixedRecord, RecordReader, RecordWriter};
use crate::emkit::scratch::{ScratchFile, ScratchManager};
use crate::error::{Error, Result};
use crate::phrase::MemoryBudget;

/// Bucket files produced by [`distribute`]. Empty buckets have no file.
pub struct Buckets {
    files: Vec<Option<ScratchFile>>,
    counts: Vec<u64>,
    rounds: u32,
}

impl Buckets {
    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    pub fn count(&self, bucket: usize) -> u64 {
        self.counts[bucket]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Takes ownership of a bucket's file, leaving the bucket empty.
    pub fn take(&mut self, bucket: usize) -> Option<ScratchFile> {
        self.counts[bucket] = 0;
        self.files[bucket].take()
    }

    /// Reads a bucket's records, deleting the file once the reader is dropped.
    pub fn drain<R: FixedRecord>(&mut self, bucket: usize, block: usize, stream: &str) -> Result<BucketReader<R>> {
        match self.take(bucket) {
            Some(file) => {
                let reader = RecordReader::new(file.reader(block, stream)?);
                Ok(BucketReader {
                    inner: Some((reader, file)),
                })
            }
            None => Ok(BucketReader { inner: None }),
        }
    }
}

pub struct BucketReader<R> {
    inner: Option<(RecordReader<R>, ScratchFile)>,
}

impl<R: FixedRecord> Iterator for BucketReader<R> {
    type Item = Result<R>;

    fn next(&mut self) -> Option<Result<R>> {
        let (reader, _) = self.inner.as_mut()?;
        reader.read_next().transpose()
    }
}

/// Number of rounds needed to split into `m` buckets with fan-out
/// `fan_out`: the smallest `r` with `F^r >= m`.
pub fn rounds_for(m: u64, fan_out: usize) -> u32 {
    let f = fan_out.max(2) as u64;
    let mut rounds = 0;
    let mut reach = 1u64;
    while reach < m {
        reach = reach.saturating_mul(f);
        rounds += 1;
    }
    rounds
}

/// One pass: split `input` into `children` groups of `width` consecutive
/// buckets starting at `base`.
#[allow(clippy::too_many_arguments)]
fn split_pass<R, I, B>(
    input: I,
    bucket_of: &B,
    base: u64,
    width: u64,
    children: usize,
    m: u64,
    block: usize,
    scratch: &ScratchManager,
    stream: &str,
) -> Result<Vec<(Option<ScratchFile>, u64)>>
where
    R: FixedRecord,
    I: IntoIterator<Item = Result<R>>,
    B: Fn(&R) -> u64,
{
    let mut files: Vec<Option<ScratchFile>> = (0..children).map(|_| None).collect();
    let mut writers: Vec<Option<RecordWriter<R>>> = (0..children).map(|_| None).collect();
    for rec in input {
        let rec = rec?;
        let b = bucket_of(&rec);
        if b >= m || b < base || (b - base) / width >= children as u64 {
            return Err(Error::Config(format!(
                "record mapped to bucket {b} outside [{base}, {})",
                (base + width * children as u64).min(m)
            )));
        }
        let child = ((b - base) / width) as usize;
        if writers[child].is_none() {
            let file = scratch.file("bucket");
            writers[child] = Some(RecordWriter::new(file.writer(block, stream)?));
            files[child] = Some(file);
        }
        writers[child].as_mut().unwrap().push(&rec)?;
    }
    let mut out = Vec::with_capacity(children);
    for (file, w) in files.into_iter().zip(writers) {
        let count = match w {
            Some(w) => w.finish()?,
            None => 0,
        };
        out.push((file, count));
    }
    Ok(out)
}

/// Distributes `input` into `m` buckets by `bucket_of`, which must map every
/// record into `[0, m)`. All traffic is charged to stream `name`.
pub fn distribute<R, I, B>(
    input: I,
    bucket_of: B,
    m: u64,
    budget: &MemoryBudget,
    scratch: &ScratchManager,
    name: &str,
) -> Result<Buckets>
where
    R: FixedRecord,
    I: IntoIterator<Item = Result<R>>,
    B: Fn(&R) -> u64,
{
    if m == 0 {
        return Err(Error::Config("distribution needs at least one bucket".into()));
    }
    let block = budget.block_size();
    let fan = budget.fan_out().max(2) as u64;
    let rounds = rounds_for(m, fan as usize);
    let mut width = fan.pow(rounds.max(1) - 1);

    // (base bucket, file, count) of groups still to be split further.
    let first = split_pass(
        input,
        &bucket_of,
        0,
        width,
        m.div_ceil(width) as usize,
        m,
        block,
        scratch,
        name,
    )?;
    let mut groups: Vec<(u64, Option<ScratchFile>, u64)> = first
        .into_iter()
        .enumerate()
        .map(|(i, (f, c))| (i as u64 * width, f, c))
        .collect();

    while width > 1 {
        let child_width = width / fan;
        let mut next = Vec::new();
        for (base, file, count) in groups {
            let span = width.min(m - base);
            let children = span.div_ceil(child_width) as usize;
            match file {
                Some(file) if count > 0 => {
                    let reader = RecordReader::<R>::new(file.reader(block, name)?);
                    let parts = split_pass(reader, &bucket_of, base, child_width, children, m, block, scratch, name)?;
                    drop(file);
                    for (i, (f, c)) in parts.into_iter().enumerate() {
                        next.push((base + i as u64 * child_width, f, c));
                    }
                }
                _ => {
                    for i in 0..children {
                        next.push((base + i as u64 * child_width, None, 0));
                    }
                }
            }
        }
        groups = next;
        width = child_width;
    }

    debug_assert_eq!(groups.len() as u64, m);
    let mut files = Vec::with_capacity(m as usize);
    let mut counts = Vec::with_capacity(m as usize);
    for (_, f, c) in groups {
        files.push(f);
        counts.push(c);
    }
    Ok(Buckets { files, counts, rounds })
}
