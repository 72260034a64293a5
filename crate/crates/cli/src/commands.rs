//! Generators, encoder, decoder and verifier subcommands.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::builder::TypedValueParser;
use clap::Args;
use emlz::factorize::{
    factorize_greedy_with, factorize_ram_estimate, gen_corpus, gen_permute_instance, CorpusKind, PermuteInstance,
    DEFAULT_ITEM_WIDTH, MAX_FACTORIZE_LEN,
};
use emlz::format::write_parsing;
use emlz::{
    decode, Algorithm, DecodeConfig, DecodeReport, IntWidth, MemoryBudget, ParsingStats, ParsingWriter, StreamSnapshot,
};
use serde::Serialize;

use crate::error::{io_at, CliError, CliResult};
use crate::report::{compare_streams, emit, mib_per_s, sha256_bytes, sha256_file};
use crate::size::parse_size;

/// Factorizer working-set limit used when --max-ram is not given.
pub const DEFAULT_ENCODE_MAX_RAM: u64 = 4 << 30;

/// Memory model shared by the decoding subcommands.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// RAM budget M.
    #[arg(long, default_value = "64MiB", value_parser = parse_size)]
    pub mem: u64,
    /// Transfer block size B.
    #[arg(long = "block-size", default_value = "1MiB", value_parser = parse_size)]
    pub block_size: u64,
    /// Parent directory for scratch files.
    #[arg(long, env = "EMLZ_TMPDIR")]
    pub tmp: Option<PathBuf>,
}

impl ModelArgs {
    pub fn budget(&self) -> CliResult<MemoryBudget> {
        Ok(MemoryBudget::new(self.mem, self.block_size)?)
    }
}

/// Algorithm-specific decoder flags; each is rejected for the algorithms it
/// does not apply to.
#[derive(Args, Debug, Clone, Default)]
pub struct TuningArgs {
    /// Segment size b (pq and plain); derived from --mem when omitted.
    #[arg(long = "segment-size", value_parser = parse_size)]
    pub segment_size: Option<u64>,
    /// Longest priority-queue payload in bytes (pq only).
    #[arg(long)]
    pub lmax: Option<u64>,
    /// Peak disk allowed, 0 for unlimited (plain only).
    #[arg(long = "disk-budget", value_parser = parse_size)]
    pub disk_budget: Option<u64>,
    /// Largest text the in-RAM decoder accepts (ram only).
    #[arg(long = "max-ram", value_parser = parse_size)]
    pub max_ram: Option<u64>,
}

/// Builds a decoder configuration, rejecting flags that do not apply to `alg`.
pub fn decode_config(alg: Algorithm, model: &ModelArgs, tuning: &TuningArgs) -> CliResult<DecodeConfig> {
    let reject = |flag: &str, applies: &str| {
        Err(CliError::Usage(format!(
            "{flag} applies only to --algorithm {applies}, not {alg}"
        )))
    };
    if tuning.lmax.is_some() && alg != Algorithm::Pq {
        return reject("--lmax", "pq");
    }
    if tuning.disk_budget.is_some() && alg != Algorithm::Plain {
        return reject("--disk-budget", "plain");
    }
    if tuning.segment_size.is_some() && !matches!(alg, Algorithm::Pq | Algorithm::Plain) {
        return reject("--segment-size", "pq or plain");
    }
    if tuning.max_ram.is_some() && alg != Algorithm::Ram {
        return reject("--max-ram", "ram");
    }
    let mut cfg = DecodeConfig::new(model.budget()?);
    cfg.tmp_dir = model.tmp.clone();
    cfg.segment_size = tuning.segment_size;
    if let Some(l) = tuning.lmax {
        cfg.lmax = l;
    }
    if let Some(d) = tuning.disk_budget {
        cfg.disk_budget = d;
    }
    if let Some(r) = tuning.max_ram {
        cfg.max_ram = r;
    }
    Ok(cfg)
}

/// A timed decoder run.
pub struct DecodeRun {
    pub report: DecodeReport,
    pub seconds: f64,
}

pub fn run_decode(alg: Algorithm, input: &Path, output: &Path, cfg: &DecodeConfig) -> CliResult<DecodeRun> {
    let start = Instant::now();
    let report = decode(alg, input, output, cfg)?;
    Ok(DecodeRun {
        report,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Whether the per-stream counters add up to the reported totals.
pub fn io_totals_consistent(report: &DecodeReport) -> bool {
    let mut sum = StreamSnapshot::default();
    for s in report.io.values() {
        sum += *s;
    }
    sum == report.io_totals
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::with_capacity(
        1 << 20,
        File::create(path).map_err(io_at(path))?,
    ))
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Corpus kind: random255, dna_like or repetitive.
    #[arg(long)]
    pub kind: CorpusKind,
    /// Text length.
    #[arg(long, value_parser = parse_size)]
    pub size: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Serialize)]
struct GenLine<'a> {
    command: &'static str,
    kind: &'static str,
    n: u64,
    seed: u64,
    output: &'a Path,
    sha256: String,
}

pub fn cmd_gen(a: &GenArgs) -> CliResult<()> {
    let n =
        usize::try_from(a.size).map_err(|_| CliError::Resource(format!("{} bytes do not fit in memory", a.size)))?;
    let text = gen_corpus(a.kind, n, a.seed);
    let mut w = create(&a.output)?;
    w.write_all(&text).map_err(io_at(&a.output))?;
    w.flush().map_err(io_at(&a.output))?;
    emit(&GenLine {
        command: "gen",
        kind: a.kind.name(),
        n: a.size,
        seed: a.seed,
        output: &a.output,
        sha256: sha256_bytes(&text),
    })
}

#[derive(Args, Debug)]
pub struct PermuteArgs {
    /// Number of items k.
    #[arg(short, long)]
    pub k: usize,
    /// Item length h.
    #[arg(long = "item-width", default_value_t = DEFAULT_ITEM_WIDTH)]
    pub item_width: usize,
    /// Item bytes are drawn from 0..sigma.
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u16).range(1..=256))]
    pub sigma: u16,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output parsing.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the text the parsing decodes to.
    #[arg(long)]
    pub text: Option<PathBuf>,
}

#[derive(Serialize)]
struct PermuteLine<'a> {
    command: &'static str,
    k: usize,
    item_width: usize,
    sigma: u16,
    seed: u64,
    n: u64,
    z: u64,
    output: &'a Path,
    text_sha256: String,
}

pub fn cmd_permute(a: &PermuteArgs) -> CliResult<()> {
    let inst = PermuteInstance::random(a.k, a.item_width, a.sigma, a.seed);
    let phrases = gen_permute_instance(&inst).map_err(|e| CliError::Usage(e.to_string()))?;
    let stats = write_parsing(create(&a.output)?, &phrases, IntWidth::Five)?;
    let mut text = inst.items.clone();
    for &p in &inst.perm {
        let p = p as usize * inst.h;
        text.extend_from_slice(&inst.items[p..p + inst.h]);
    }
    if let Some(path) = &a.text {
        let mut w = create(path)?;
        w.write_all(&text).map_err(io_at(path))?;
        w.flush().map_err(io_at(path))?;
    }
    emit(&PermuteLine {
        command: "permute",
        k: a.k,
        item_width: a.item_width,
        sigma: inst.sigma,
        seed: a.seed,
        n: stats.n,
        z: stats.z,
        output: &a.output,
        text_sha256: sha256_bytes(&text),
    })
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    /// Text to factorize.
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Bytes per integer in the parsing file.
    #[arg(long, default_value_t = 5, value_parser = clap::builder::PossibleValuesParser::new(["5", "8"]).map(|s| s.parse::<u8>().unwrap()))]
    pub width: u8,
    /// RAM the in-RAM factorizer may use.
    #[arg(long = "max-ram", default_value_t = DEFAULT_ENCODE_MAX_RAM, value_parser = parse_size)]
    pub max_ram: u64,
}

#[derive(Serialize)]
pub struct EncodeSummary {
    pub n: u64,
    pub z: u64,
    pub z_rep: u64,
    pub z_lit: u64,
    /// Average phrase length, null for the empty text.
    pub n_over_z: Option<f64>,
    /// Repeat phrases per text byte.
    pub z_rep_ratio: Option<f64>,
    pub parsing_bytes: u64,
    pub seconds: f64,
}

impl EncodeSummary {
    fn new(stats: &ParsingStats, width: IntWidth, seconds: f64) -> Self {
        EncodeSummary {
            n: stats.n,
            z: stats.z,
            z_rep: stats.z_rep,
            z_lit: stats.z_lit,
            n_over_z: stats.avg_phrase_len(),
            z_rep_ratio: (stats.n > 0).then(|| stats.z_rep as f64 / stats.n as f64),
            parsing_bytes: emlz::format::HEADER_LEN + stats.z * width.record_len() as u64,
            seconds,
        }
    }
}

/// Refuses texts the in-RAM factorizer cannot take within `max_ram`.
pub fn check_encodable(n: u64, max_ram: u64) -> CliResult<()> {
    if n > MAX_FACTORIZE_LEN {
        return Err(CliError::Resource(format!(
            "text of {n} bytes exceeds the factorizer limit of {MAX_FACTORIZE_LEN} bytes"
        )));
    }
    let need = factorize_ram_estimate(n);
    if need > max_ram {
        return Err(CliError::Resource(format!(
            "factorizing {n} bytes needs about {need} bytes of RAM, more than --max-ram {max_ram}; \
             raise --max-ram to override"
        )));
    }
    Ok(())
}

/// Factorizes `text` into the parsing file `output`.
pub fn encode_text(text: &[u8], output: &Path, width: IntWidth) -> CliResult<EncodeSummary> {
    let start = Instant::now();
    let mut w = ParsingWriter::new(create(output)?, width)?;
    factorize_greedy_with(text, |ph| w.push(&ph))?;
    let (_, stats) = w.finish()?;
    Ok(EncodeSummary::new(&stats, width, start.elapsed().as_secs_f64()))
}

#[derive(Serialize)]
struct EncodeLine<'a> {
    command: &'static str,
    input: &'a Path,
    output: &'a Path,
    width: u8,
    #[serde(flatten)]
    summary: EncodeSummary,
}

pub fn cmd_encode(a: &EncodeArgs) -> CliResult<()> {
    let width =
        IntWidth::from_bytes(a.width).ok_or_else(|| CliError::Usage(format!("unsupported width {}", a.width)))?;
    let len = std::fs::metadata(&a.input).map_err(io_at(&a.input))?.len();
    check_encodable(len, a.max_ram)?;
    let text = std::fs::read(&a.input).map_err(io_at(&a.input))?;
    let summary = encode_text(&text, &a.output, width)?;
    emit(&EncodeLine {
        command: "encode",
        input: &a.input,
        output: &a.output,
        width: a.width,
        summary,
    })
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    /// Parsing file.
    pub input: PathBuf,
    /// Decoded text.
    #[arg(short, long)]
    pub output: PathBuf,
    /// ram, naive, pq or plain.
    #[arg(short, long, default_value = "plain")]
    pub algorithm: Algorithm,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Serialize)]
struct DecodeLine<'a> {
    command: &'static str,
    algorithm: Algorithm,
    input: &'a Path,
    output: &'a Path,
    mem: u64,
    block_size: u64,
    n: u64,
    z: u64,
    wallclock_seconds: f64,
    mib_per_s: f64,
    sha256: String,
    segment_size: Option<u64>,
    peak_scratch_bytes: u64,
    peak_disk_bytes: u64,
    part_count: u64,
    io: &'a BTreeMap<String, StreamSnapshot>,
    io_totals: StreamSnapshot,
    io_totals_consistent: bool,
    details: &'a DecodeReport,
}

pub fn cmd_decode(a: &DecodeArgs) -> CliResult<()> {
    let cfg = decode_config(a.algorithm, &a.model, &a.tuning)?;
    let run = run_decode(a.algorithm, &a.input, &a.output, &cfg)?;
    let r = &run.report;
    emit(&DecodeLine {
        command: "decode",
        algorithm: a.algorithm,
        input: &a.input,
        output: &a.output,
        mem: a.model.mem,
        block_size: a.model.block_size,
        n: r.parsing.n,
        z: r.parsing.z,
        wallclock_seconds: run.seconds,
        mib_per_s: mib_per_s(r.parsing.n, run.seconds),
        sha256: sha256_file(&a.output)?,
        segment_size: r.segment_size,
        peak_scratch_bytes: r.peak_scratch,
        peak_disk_bytes: r.peak_disk,
        part_count: r.parts,
        io: &r.io,
        io_totals: r.io_totals,
        io_totals_consistent: io_totals_consistent(r),
        details: r,
    })
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Reference text.
    pub text: PathBuf,
    /// Parsing expected to decode to the text.
    pub parsing: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Serialize)]
struct VerifyLine {
    command: &'static str,
    ok: bool,
    text_bytes: u64,
    decoded_bytes: u64,
    mismatch_offset: Option<u64>,
    expected: Option<u8>,
    actual: Option<u8>,
}

pub fn cmd_verify(a: &VerifyArgs) -> CliResult<()> {
    let cfg = decode_config(Algorithm::Plain, &a.model, &TuningArgs::default())?;
    let dir = match &a.model.tmp {
        Some(t) => tempfile::Builder::new().prefix("emlz-verify").tempdir_in(t),
        None => tempfile::Builder::new().prefix("emlz-verify").tempdir(),
    }?;
    let decoded = dir.path().join("decoded");
    decode(Algorithm::Plain, &a.parsing, &decoded, &cfg)?;
    let text = BufReader::new(File::open(&a.text).map_err(io_at(&a.text))?);
    let got = BufReader::new(File::open(&decoded).map_err(io_at(&decoded))?);
    let (mismatch, text_bytes, decoded_bytes) = compare_streams(text, got)?;
    emit(&VerifyLine {
        command: "verify",
        ok: mismatch.is_none(),
        text_bytes,
        decoded_bytes,
        mismatch_offset: mismatch.map(|m| m.offset),
        expected: mismatch.and_then(|m| m.expected),
        actual: mismatch.and_then(|m| m.actual),
    })?;
    match mismatch {
        None => Ok(()),
        Some(m) => {
            let show = |b: Option<u8>| b.map_or("end of data".to_string(), |b| format!("0x{b:02x}"));
            Err(CliError::Mismatch(format!(
                "mismatch at offset {}: text has {}, parsing decodes to {}",
                m.offset,
                show(m.expected),
                show(m.actual)
            )))
        }
    }
}
