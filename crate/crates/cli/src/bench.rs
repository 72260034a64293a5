//! Throughput series: generate, encode and decode one corpus at several sizes
//! with several algorithms, one JSON line per run plus a text table.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use emlz::decode::DEFAULT_LMAX;
use emlz::factorize::{gen_corpus, CorpusKind};
use emlz::{Algorithm, IntWidth};
use serde::Serialize;

use crate::commands::{
    check_encodable, decode_config, encode_text, run_decode, ModelArgs, TuningArgs, DEFAULT_ENCODE_MAX_RAM,
};
use crate::error::{CliError, CliResult};
use crate::report::{emit, free_bytes, mib_per_s, sha256_bytes, sha256_file};
use crate::size::{format_size, parse_size};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Corpus kind: random255, dna_like or repetitive.
    #[arg(long)]
    pub corpus: CorpusKind,
    /// Comma-separated text lengths, ascending.
    #[arg(long, value_delimiter = ',', value_parser = parse_size, required = true)]
    pub sizes: Vec<u64>,
    /// Comma-separated decoders.
    #[arg(long, value_delimiter = ',', default_value = "ram,naive,pq,plain")]
    pub algorithms: Vec<Algorithm>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Segment size b for pq and plain; derived from --mem when omitted.
    #[arg(long = "segment-size", value_parser = parse_size)]
    pub segment_size: Option<u64>,
    /// Longest priority-queue payload for pq.
    #[arg(long, default_value_t = DEFAULT_LMAX)]
    pub lmax: u64,
    /// RAM the factorizer and the in-RAM decoder may use.
    #[arg(long = "max-ram", default_value_t = DEFAULT_ENCODE_MAX_RAM, value_parser = parse_size)]
    pub max_ram: u64,
    /// Decode each configuration this many times and keep the fastest.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub repeat: u32,
}

#[derive(Serialize, Debug, Clone)]
pub struct Row {
    pub corpus: &'static str,
    pub size_bytes: u64,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub skipped: bool,
    pub mem: u64,
    pub block_size: u64,
    pub n: u64,
    pub z: u64,
    pub n_over_z: Option<f64>,
    pub wallclock_seconds: f64,
    pub mib_per_s: f64,
    pub sha256: String,
    pub source_sha256: String,
    pub verified: bool,
    pub segment_size: Option<u64>,
    pub peak_scratch_bytes: u64,
    pub peak_disk_bytes: u64,
    pub part_count: u64,
    pub io_bytes_read: u64,
    pub io_bytes_written: u64,
    pub repeat: u32,
}

#[derive(Serialize, Debug, Clone)]
pub struct Skip {
    pub corpus: &'static str,
    pub size_bytes: u64,
    pub seed: u64,
    pub algorithm: Option<Algorithm>,
    pub skipped: bool,
    pub note: String,
}

enum Line {
    Row(Row),
    Skip(Skip),
}

/// Disk needed to decode a text of `n` bytes from a parsing of
/// `parsing_bytes` with `algorithms` decoders: the parsing, one output per
/// decoder and generous room for scratch.
fn disk_needed(n: u64, parsing_bytes: u64, algorithms: u64) -> u64 {
    3 * parsing_bytes + (algorithms + 2) * n
}

fn tuning_for(alg: Algorithm, a: &BenchArgs) -> TuningArgs {
    TuningArgs {
        segment_size: a
            .segment_size
            .filter(|_| matches!(alg, Algorithm::Pq | Algorithm::Plain)),
        lmax: (alg == Algorithm::Pq).then_some(a.lmax),
        disk_budget: None,
        max_ram: (alg == Algorithm::Ram).then_some(a.max_ram),
    }
}

pub fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    if a.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage("--sizes must be strictly ascending".into()));
    }
    if a.algorithms.is_empty() {
        return Err(CliError::Usage("--algorithms is empty".into()));
    }
    for &alg in &a.algorithms {
        decode_config(alg, &a.model, &tuning_for(alg, a))?;
    }
    let work = match &a.model.tmp {
        Some(t) => tempfile::Builder::new().prefix("emlz-bench").tempdir_in(t),
        None => tempfile::Builder::new().prefix("emlz-bench").tempdir(),
    }?;
    let mut lines = Vec::new();
    for &size in &a.sizes {
        bench_size(a, size, work.path(), &mut lines)?;
    }
    print_table(&lines);
    let bad = lines
        .iter()
        .filter(|l| matches!(l, Line::Row(r) if !r.verified))
        .count();
    if bad > 0 {
        return Err(CliError::Mismatch(format!(
            "{bad} bench rows did not reproduce the source text"
        )));
    }
    Ok(())
}

fn skip(a: &BenchArgs, size: u64, alg: Option<Algorithm>, note: String, lines: &mut Vec<Line>) -> CliResult<()> {
    let s = Skip {
        corpus: a.corpus.name(),
        size_bytes: size,
        seed: a.seed,
        algorithm: alg,
        skipped: true,
        note,
    };
    emit(&s)?;
    lines.push(Line::Skip(s));
    Ok(())
}

fn bench_size(a: &BenchArgs, size: u64, work: &Path, lines: &mut Vec<Line>) -> CliResult<()> {
    if let Err(e) = check_encodable(size, a.max_ram) {
        return skip(a, size, None, format!("insufficient RAM: {e}"), lines);
    }
    let parsing: PathBuf = work.join(format!("{size}.lz77"));
    let text = gen_corpus(a.corpus, size as usize, a.seed);
    let source_sha256 = sha256_bytes(&text);
    let summary = match encode_text(&text, &parsing, IntWidth::Five) {
        Ok(s) => s,
        Err(e @ CliError::Resource(_)) => {
            let _ = std::fs::remove_file(&parsing);
            return skip(a, size, None, format!("insufficient disk for the parsing: {e}"), lines);
        }
        Err(e) => return Err(e),
    };
    drop(text);
    let need = disk_needed(size, summary.parsing_bytes, a.algorithms.len() as u64);
    let free = free_bytes(work).unwrap_or(u64::MAX);
    if free < need {
        std::fs::remove_file(&parsing)?;
        return skip(
            a,
            size,
            None,
            format!("insufficient disk: about {need} bytes needed, {free} free"),
            lines,
        );
    }
    // Repetitions go round-robin over the algorithms, so slow drift in the
    // machine's state does not favour whichever algorithm runs first.
    let output = |alg: Algorithm| work.join(format!("{size}.{alg}.out"));
    let mut best: Vec<Option<(f64, emlz::DecodeReport)>> = a.algorithms.iter().map(|_| None).collect();
    let mut failed: Vec<Option<CliError>> = a.algorithms.iter().map(|_| None).collect();
    for _ in 0..a.repeat {
        for (i, &alg) in a.algorithms.iter().enumerate() {
            if failed[i].is_some() {
                continue;
            }
            let cfg = decode_config(alg, &a.model, &tuning_for(alg, a))?;
            match run_decode(alg, &parsing, &output(alg), &cfg) {
                Ok(run) => {
                    if best[i].as_ref().is_none_or(|(s, _)| run.seconds < *s) {
                        best[i] = Some((run.seconds, run.report));
                    }
                }
                Err(e @ CliError::Resource(_)) => {
                    let _ = std::fs::remove_file(output(alg));
                    failed[i] = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
    }
    for (i, &alg) in a.algorithms.iter().enumerate() {
        if let Some(e) = failed[i].take() {
            skip(a, size, Some(alg), format!("insufficient resources: {e}"), lines)?;
            continue;
        }
        let (seconds, r) = best[i].take().expect("at least one run");
        let sha256 = sha256_file(&output(alg))?;
        std::fs::remove_file(output(alg))?;
        let row = Row {
            corpus: a.corpus.name(),
            size_bytes: size,
            seed: a.seed,
            algorithm: alg,
            skipped: false,
            mem: a.model.mem,
            block_size: a.model.block_size,
            n: r.parsing.n,
            z: r.parsing.z,
            n_over_z: r.parsing.avg_phrase_len(),
            wallclock_seconds: seconds,
            mib_per_s: mib_per_s(r.parsing.n, seconds),
            verified: sha256 == source_sha256,
            sha256,
            source_sha256: source_sha256.clone(),
            segment_size: r.segment_size,
            peak_scratch_bytes: r.peak_scratch,
            peak_disk_bytes: r.peak_disk,
            part_count: r.parts,
            io_bytes_read: r.io_totals.bytes_read,
            io_bytes_written: r.io_totals.bytes_written,
            repeat: a.repeat,
        };
        emit(&row)?;
        lines.push(Line::Row(row));
    }
    std::fs::remove_file(&parsing)?;
    Ok(())
}

fn print_table(lines: &[Line]) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "{:<11} {:>8} {:<6} {:>9} {:>9} {:>8} {:>12} {:>5} {:<8}",
        "corpus", "size", "alg", "MiB/s", "seconds", "n/z", "peak_scr", "parts", "verified"
    );
    for l in lines {
        let _ = match l {
            Line::Row(r) => writeln!(
                err,
                "{:<11} {:>8} {:<6} {:>9.1} {:>9.3} {:>8} {:>12} {:>5} {:<8}",
                r.corpus,
                format_size(r.size_bytes),
                r.algorithm.name(),
                r.mib_per_s,
                r.wallclock_seconds,
                r.n_over_z.map_or("-".to_string(), |v| format!("{v:.2}")),
                r.peak_scratch_bytes,
                r.part_count,
                if r.verified { "yes" } else { "NO" }
            ),
            Line::Skip(s) => writeln!(
                err,
                "{:<11} {:>8} {:<6} skipped: {}",
                s.corpus,
                format_size(s.size_bytes),
                s.algorithm.map_or("-", |a| a.name()),
                s.note
            ),
        };
    }
}
