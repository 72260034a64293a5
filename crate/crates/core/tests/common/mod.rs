//! Helpers shared by the integration tests: random parsings, a bytewise
//! decoding oracle and an independent piece splitter.

#![allow(dead_code)]

pub mod emkit_scenarios;

use std::path::{Path, PathBuf};

use emlz::format::{write_parsing, IntWidth};
use emlz::{decode, Algorithm, DecodeConfig, DecodeReport, MemoryBudget, Phrase};
use rand::{Rng, RngExt};

/// Decodes by copying one byte at a time.
pub fn bytewise(phrases: &[Phrase]) -> Vec<u8> {
    let mut t = Vec::new();
    for ph in phrases {
        match *ph {
            Phrase::Literal(c) => t.push(c),
            Phrase::Repeat { src, len } => {
                for k in 0..len {
                    let c = t[(src + k) as usize];
                    t.push(c);
                }
            }
        }
    }
    t
}

/// Log-uniform integer in `[1, max]`.
pub fn log_uniform<R: Rng>(rng: &mut R, max: u64) -> u64 {
    let x = rng.random_range(0.0..((max as f64) + 1.0).ln());
    (x.exp() as u64).clamp(1, max)
}

/// Shapes of random parsings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Mixed,
    AllLiteral,
    /// One literal phrase.
    SinglePhrase,
    /// One literal followed by one long self-overlapping repeat.
    SelfOverlap,
}

/// A valid parsing of a text of about `n` bytes.
pub fn random_parsing<R: Rng>(rng: &mut R, n: u64, shape: Shape) -> Vec<Phrase> {
    let sigma: u16 = *[2u16, 4, 26, 256].get(rng.random_range(0..4)).unwrap();
    let lit = |rng: &mut R| Phrase::Literal(rng.random_range(0..sigma) as u8);
    match shape {
        Shape::AllLiteral => return (0..n).map(|_| lit(rng)).collect(),
        Shape::SinglePhrase => return vec![lit(rng)],
        Shape::SelfOverlap => {
            let mut p = vec![lit(rng)];
            if n > 1 {
                p.push(Phrase::Repeat { src: 0, len: n - 1 });
            }
            return p;
        }
        Shape::Mixed => {}
    }
    let p_lit = rng.random_range(0.0..0.6);
    let max_len = log_uniform(rng, n);
    let mut out = Vec::new();
    let mut pos = 0u64;
    while pos < n {
        if pos == 0 || rng.random_bool(p_lit) {
            out.push(lit(rng));
            pos += 1;
            continue;
        }
        let len = log_uniform(rng, max_len.min(n - pos));
        let src = match rng.random_range(0..4) {
            0 => rng.random_range(0..pos),
            1 => pos - log_uniform(rng, pos),
            // self-overlapping: source starts fewer than `len` bytes back
            2 => pos - rng.random_range(1..=pos.min(len)),
            _ => rng.random_range(0..pos.min(8)),
        };
        out.push(Phrase::Repeat { src, len });
        pos += len;
    }
    out
}

/// Picks a shape: mostly mixed, with the special shapes mixed in.
pub fn random_shape<R: Rng>(rng: &mut R) -> Shape {
    match rng.random_range(0..20) {
        0 => Shape::AllLiteral,
        1 => Shape::SinglePhrase,
        2 => Shape::SelfOverlap,
        _ => Shape::Mixed,
    }
}

/// A piece from the independent splitter: `(src, pos, len)`, `src = None` for
/// literals.
pub type OraclePiece = (Option<u64>, u64, u64);

/// Cuts every repeat phrase where either the phrase or its source crosses a
/// multiple of `b`.
pub fn oracle_pieces(phrases: &[Phrase], b: u64) -> Vec<OraclePiece> {
    let mut out = Vec::new();
    oracle_split(phrases.iter().copied(), b, |piece| out.push(piece));
    out
}

pub fn oracle_split(phrases: impl IntoIterator<Item = Phrase>, b: u64, mut emit: impl FnMut(OraclePiece)) {
    let mut q = 0u64;
    for ph in phrases {
        match ph {
            Phrase::Literal(_) => {
                emit((None, q, 1));
                q += 1;
            }
            Phrase::Repeat { src, len } => {
                let (mut p, end) = (src, q + len);
                while q < end {
                    let l = (b - q % b).min(b - p % b).min(end - q);
                    emit((Some(p), q, l));
                    p += l;
                    q += l;
                }
            }
        }
    }
}

/// Total length of far pieces: repeats whose source starts more than `b`
/// before the piece.
pub fn oracle_far_bytes(phrases: &[Phrase], b: u64) -> u64 {
    oracle_far_bytes_iter(phrases.iter().copied(), b)
}

pub fn oracle_far_bytes_iter(phrases: impl IntoIterator<Item = Phrase>, b: u64) -> u64 {
    let mut far = 0;
    oracle_split(phrases, b, |(p, q, l)| {
        if p.is_some_and(|p| q - p > b) {
            far += l;
        }
    });
    far
}

/// Scratch directory for the many small decodes of the fuzz suites: RAM-backed
/// when available, because they create thousands of tiny bucket and queue files.
pub fn fuzz_tempdir() -> tempfile::TempDir {
    let shm = Path::new("/dev/shm");
    if shm.is_dir() {
        if let Ok(d) = tempfile::Builder::new().prefix("emlz-fuzz").tempdir_in(shm) {
            return d;
        }
    }
    tempfile::tempdir().unwrap()
}

pub fn write_input(dir: &Path, name: &str, phrases: &[Phrase]) -> PathBuf {
    let path = dir.join(name);
    write_parsing(std::fs::File::create(&path).unwrap(), phrases, IntWidth::Five).unwrap();
    path
}

pub struct Setting {
    pub algorithm: Algorithm,
    pub segment: Option<u64>,
    pub lmax: u64,
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.algorithm)?;
        if let Some(b) = self.segment {
            write!(f, " b={b}")?;
        }
        if self.algorithm == Algorithm::Pq {
            write!(f, " lmax={}", self.lmax)?;
        }
        Ok(())
    }
}

/// ram, naive, pq over b × lmax, plain over b.
pub fn fuzz_settings() -> Vec<Setting> {
    let mut s = vec![
        Setting {
            algorithm: Algorithm::Ram,
            segment: None,
            lmax: 16,
        },
        Setting {
            algorithm: Algorithm::Naive,
            segment: None,
            lmax: 16,
        },
    ];
    for b in [16, 256, 4096] {
        for lmax in [1, 4, 16] {
            s.push(Setting {
                algorithm: Algorithm::Pq,
                segment: Some(b),
                lmax,
            });
        }
        s.push(Setting {
            algorithm: Algorithm::Plain,
            segment: Some(b),
            lmax: 16,
        });
    }
    s
}

/// Budget used by the fuzz runs: small enough that the naive window and
/// the queues spill, large enough for b = 4096.
pub fn fuzz_budget() -> MemoryBudget {
    MemoryBudget::new(64 << 10, 4096).unwrap()
}

pub fn run_setting(
    setting: &Setting,
    budget: MemoryBudget,
    input: &Path,
    output: &Path,
    tmp: &Path,
) -> emlz::Result<DecodeReport> {
    let mut cfg = DecodeConfig::new(budget);
    cfg.tmp_dir = Some(tmp.to_path_buf());
    cfg.segment_size = setting.segment;
    cfg.lmax = setting.lmax;
    decode(setting.algorithm, input, output, &cfg)
}

/// Checks that far-piece payload is conserved through the queues: for plain,
/// Q bytes written = Q bytes read = far bytes; for pq, PQ bytes inserted =
/// extracted = far bytes. Returns a description of the first violation.
pub fn conservation_error(setting: &Setting, report: &DecodeReport, far_bytes: u64) -> Option<String> {
    match setting.algorithm {
        Algorithm::Plain => {
            let (w, r) = (report.q_payload_written, report.q_payload_read);
            (w != far_bytes || r != far_bytes)
                .then(|| format!("{setting}: Q written {w}, read {r}, far bytes {far_bytes}"))
        }
        Algorithm::Pq => {
            let pq = report.pq.expect("pq report has queue stats");
            (pq.payload_inserted != far_bytes || pq.payload_extracted != far_bytes).then(|| {
                format!(
                    "{setting}: PQ inserted {}, extracted {}, far bytes {far_bytes}",
                    pq.payload_inserted, pq.payload_extracted
                )
            })
        }
        Algorithm::Ram | Algorithm::Naive => None,
    }
}

/// Outcome of fuzzing one parsing with every setting.
#[derive(Default)]
pub struct FuzzOutcome {
    pub decodes: u64,
    /// Errors and outputs differing from the oracle.
    pub failures: Vec<String>,
    /// Violations of far-payload conservation.
    pub conservation: Vec<String>,
    pub conservation_checks: u64,
}

/// Decodes `phrases` with every fuzz setting and compares each output with
/// the bytewise oracle and each report with the conservation identities.
pub fn fuzz_one(case: u64, phrases: &[Phrase], dir: &Path, out: &mut FuzzOutcome) {
    let expected = bytewise(phrases);
    let input = write_input(dir, "in.lz77", phrases);
    let output = dir.join("out");
    for setting in fuzz_settings() {
        out.decodes += 1;
        match run_setting(&setting, fuzz_budget(), &input, &output, dir) {
            Err(e) => out.failures.push(format!("case {case} {setting}: error {e}")),
            Ok(report) => {
                let got = std::fs::read(&output).unwrap();
                if got != expected {
                    let at = got.iter().zip(&expected).position(|(a, b)| a != b);
                    out.failures.push(format!(
                        "case {case} {setting}: output differs (first at {at:?}, lengths {} vs {})",
                        got.len(),
                        expected.len()
                    ));
                }
                let b = report.segment_size.unwrap_or(0);
                if b > 0 {
                    out.conservation_checks += 1;
                    if let Some(e) = conservation_error(&setting, &report, oracle_far_bytes(phrases, b)) {
                        out.conservation.push(format!("case {case} {e}"));
                    }
                }
            }
        }
    }
}
