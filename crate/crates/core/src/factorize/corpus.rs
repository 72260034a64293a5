//! Deterministic synthetic corpora.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    /// i.i.d. uniform bytes over `1..=255`.
    Random255,
    /// i.i.d. skewed over `A C G T N \n`.
    DnaLike,
    /// A random block of 1% of the length over a 64-symbol source-text
    /// alphabet, replicated with 0.1% point mutations.
    Repetitive,
}

impl CorpusKind {
    pub const ALL: [CorpusKind; 3] = [CorpusKind::Random255, CorpusKind::DnaLike, CorpusKind::Repetitive];

    pub fn name(self) -> &'static str {
        match self {
            CorpusKind::Random255 => "random255",
            CorpusKind::DnaLike => "dna_like",
            CorpusKind::Repetitive => "repetitive",
        }
    }
}

impl fmt::Display for CorpusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorpusKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random255" => Ok(CorpusKind::Random255),
            "dna_like" | "dna-like" | "dna" => Ok(CorpusKind::DnaLike),
            "repetitive" | "kernel" => Ok(CorpusKind::Repetitive),
            _ => Err(format!("unknown corpus kind {s:?} (random255, dna_like, repetitive)")),
        }
    }
}

pub const MUTATION_RATE: f64 = 0.001;

// Cumulative weights out of 1000 for A, C, G, T, N, newline.
/// Letters, digits, space and newline.
const TEXT_SYMBOLS: &[u8; 64] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 \n";

const DNA_SYMBOLS: [u8; 6] = *b"ACGTN\n";
const DNA_CUMULATIVE: [u32; 6] = [295, 495, 695, 985, 993, 1000];

fn dna_symbol(r: u32) -> u8 {
    let r = r % 1000;
    let k = DNA_CUMULATIVE.iter().position(|&c| r < c).unwrap();
    DNA_SYMBOLS[k]
}

/// Gap to the next mutated byte, geometric with success rate `MUTATION_RATE`.
fn mutation_gap(rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    (u.ln() / (1.0 - MUTATION_RATE).ln()) as usize
}

/// Generates `n` bytes of the given kind; equal arguments give equal output.
pub fn gen_corpus(kind: CorpusKind, n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (kind as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut out = vec![0u8; n];
    match kind {
        CorpusKind::Random255 => {
            rng.fill_bytes(&mut out);
            for b in out.iter_mut() {
                // map 0..=255 onto 1..=255 without bias
                while *b == 0 {
                    *b = rng.random();
                }
            }
        }
        CorpusKind::DnaLike => {
            for b in out.iter_mut() {
                *b = dna_symbol(rng.random::<u32>());
            }
        }
        CorpusKind::Repetitive => {
            // Each copy derives from the previous one, so mutations accumulate
            // like successive versions of a source tree.
            let block = (n / 100).max(1).min(n);
            for b in out[..block].iter_mut() {
                *b = TEXT_SYMBOLS[rng.random_range(0..64)];
            }
            let mut at = block;
            let mut next_mut = block + mutation_gap(&mut rng);
            while at < n {
                if at == next_mut {
                    out[at] = TEXT_SYMBOLS[rng.random_range(0..64)];
                    at += 1;
                    next_mut = at + mutation_gap(&mut rng);
                    continue;
                }
                let end = next_mut.min(n).min(at + block);
                out.copy_within(at - block..end - block, at);
                at = end;
            }
        }
    }
    out
}
