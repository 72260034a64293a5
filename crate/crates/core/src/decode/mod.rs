//! Decoders from a `.lz77` parsing file to a text file.
//!
//! * [`decode_ram`]: whole text in RAM.
//! * [`decode_naive_em`]: a RAM window over the output, older sources read
//!   back from the output file.
//! * [`decode_empq`]: segments recovered left to right, far pieces sorted by
//!   source and delivered through an external priority queue.
//! * [`decode_plain`] / [`decode_partwise`]: far pieces distributed by source
//!   segment and delivered through per-segment queues, optionally in parts
//!   that respect a disk budget.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::emkit::pq::PqStats;
use crate::emkit::scratch::ScratchManager;
use crate::emkit::sort::SortStats;
use crate::error::{Error, Result};
use crate::io::{DiskGauge, IoStats, StreamSnapshot};
use crate::phrase::{MemoryBudget, ParsingStats};

pub mod basic;
mod coverage;
pub mod empq;
pub mod plain;
pub mod plan;
pub mod split;

pub use basic::{decode_naive_em, decode_ram, decode_ram_phrases, naive_window};
pub use empq::{decode_empq, EmpqConfig};
pub use plain::{decode_partwise, decode_plain};
pub use plan::{plan_parts, Part, PartPlan};
pub use split::{classify, classify_piece, split_phrase, PieceCounts, PieceKind, SplitPhrases};

pub const DEFAULT_LMAX: u64 = 16;
pub const DEFAULT_MAX_RAM: u64 = 2 << 30;

/// Stream names used in [`DecodeReport::io`].
pub mod streams {
    pub const INPUT: &str = "input";
    pub const OUTPUT: &str = "output";
    /// Positioned reads of the output by the naive decoder.
    pub const OUTPUT_RANDOM: &str = "output.random";
    /// Reads of already written text in partwise decoding.
    pub const OUTPUT_REPLAY: &str = "output.replay";
    pub const LITERALS: &str = "lit";
    pub const NEAR: &str = "near";
    pub const NEAR_PREV: &str = "near.prev";
    pub const NEAR_SAME: &str = "near.same";
    /// Prefix of the far-piece sort streams.
    pub const FAR_SORT: &str = "far.sort";
    pub const FAR_DIST: &str = "far.dist";
    pub const FAR_READ: &str = "far.read";
    pub const PQ: &str = "pq";
    pub const QUEUES: &str = "q";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ram,
    Naive,
    Pq,
    Plain,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ram, Algorithm::Naive, Algorithm::Pq, Algorithm::Plain];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ram => "ram",
            Algorithm::Naive => "naive",
            Algorithm::Pq => "pq",
            Algorithm::Plain => "plain",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?} (ram, naive, pq, plain)"))
    }
}

/// Settings shared by all decoders; each uses only the fields it needs.
#[derive(Debug, Clone)]
pub struct DecodeConfig {
    pub budget: MemoryBudget,
    /// Parent of the scratch directory; the system temporary directory if unset.
    pub tmp_dir: Option<PathBuf>,
    /// Segment size `b`; derived from the budget if unset.
    pub segment_size: Option<u64>,
    /// Longest priority-queue payload (pq only).
    pub lmax: u64,
    /// Peak disk allowed in bytes, 0 for unlimited (plain only).
    pub disk_budget: u64,
    /// Largest text the in-RAM decoder accepts.
    pub max_ram: u64,
}

impl DecodeConfig {
    pub fn new(budget: MemoryBudget) -> Self {
        DecodeConfig {
            budget,
            tmp_dir: None,
            segment_size: None,
            lmax: DEFAULT_LMAX,
            disk_budget: 0,
            max_ram: DEFAULT_MAX_RAM,
        }
    }

    /// Segment size for the segment-based decoders.
    pub fn segment(&self) -> Result<u64> {
        let b = self.segment_size.unwrap_or_else(|| self.budget.half_ram_segment());
        if b == 0 {
            return Err(Error::Config("segment size must be at least 1".into()));
        }
        if b > self.budget.ram_bytes() / 2 {
            return Err(Error::Config(format!(
                "segment size {b} exceeds half of the RAM budget {}",
                self.budget.ram_bytes()
            )));
        }
        Ok(b)
    }
}

/// What a decode did, for reports and accounting checks.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DecodeReport {
    pub algorithm: String,
    pub parsing: ParsingStats,
    pub segment_size: Option<u64>,
    pub segments: Option<u64>,
    pub lmax: Option<u64>,
    pub pieces: Option<PieceCounts>,
    pub sort: Option<SortStats>,
    pub pq: Option<PqStats>,
    pub distribution_rounds: Option<u32>,
    /// Payload bytes appended to and consumed from per-segment queues.
    pub q_payload_written: u64,
    pub q_payload_read: u64,
    pub q_records: u64,
    pub parts: u64,
    pub part_estimates: Vec<u64>,
    pub disk_budget: Option<u64>,
    /// Bytes of already written output read back by partwise decoding.
    pub replay_bytes: u64,
    /// Bytes read back from the output file by the naive decoder.
    pub random_read_bytes: u64,
    pub peak_scratch: u64,
    /// Peak of input + output + live scratch bytes on disk.
    pub peak_disk: u64,
    pub io: BTreeMap<String, StreamSnapshot>,
    pub io_totals: StreamSnapshot,
}

/// Decodes `input` into `output` with `algorithm`.
pub fn decode(algorithm: Algorithm, input: &Path, output: &Path, cfg: &DecodeConfig) -> Result<DecodeReport> {
    match algorithm {
        Algorithm::Ram => decode_ram(input, output, cfg),
        Algorithm::Naive => decode_naive_em(input, output, cfg),
        Algorithm::Pq => decode_empq(input, output, &EmpqConfig::from_decode_config(cfg)?),
        Algorithm::Plain => {
            if cfg.disk_budget == 0 {
                decode_plain(input, output, cfg)
            } else {
                decode_partwise(input, output, cfg)
            }
        }
    }
}

/// Per-run accounting state.
pub(crate) struct Run {
    pub stats: IoStats,
    pub gauge: DiskGauge,
    pub scratch: ScratchManager,
}

impl Run {
    pub fn start(input: &Path, tmp_dir: Option<&Path>) -> Result<Self> {
        let stats = IoStats::new();
        let gauge = DiskGauge::new();
        let input_len = std::fs::metadata(input)
            .map_err(|e| Error::io(streams::INPUT, e))?
            .len();
        gauge.add_external(input_len);
        let scratch = ScratchManager::with_gauge(tmp_dir, &stats, gauge.clone())?;
        Ok(Run { stats, gauge, scratch })
    }

    pub fn finish(&self, report: &mut DecodeReport) {
        report.peak_scratch = self.gauge.scratch_peak();
        report.peak_disk = self.gauge.total_peak();
        report.io = self.stats.snapshot();
        report.io_totals = self.stats.totals();
    }
}
