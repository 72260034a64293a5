//! Parsings whose decoding permutes a sequence of fixed-width items.
//!
//! The text is the concatenation `X` of `k` items of `h` bytes spelled with
//! literals, followed by `k` repeat phrases, the `i`-th copying item `π[i]`.
//! Decoding yields `X·Y` with `Y[i] = X[π[i]]`.

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::phrase::Phrase;

pub const DEFAULT_ITEM_WIDTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermuteInstance {
    /// Item width `h` in bytes.
    pub h: usize,
    /// The `k` items, concatenated.
    pub items: Vec<u8>,
    /// `π`, a permutation of `0..k`.
    pub perm: Vec<u32>,
    /// Every item byte is below `sigma`.
    pub sigma: u16,
}

impl PermuteInstance {
    /// Random items over `0..sigma` and a uniformly random permutation.
    pub fn random(k: usize, h: usize, sigma: u16, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = sigma.clamp(1, 256);
        let items = (0..k * h).map(|_| rng.random_range(0..sigma) as u8).collect();
        let mut perm: Vec<u32> = (0..k as u32).collect();
        perm.shuffle(&mut rng);
        PermuteInstance { h, items, perm, sigma }
    }

    pub fn k(&self) -> usize {
        self.perm.len()
    }

    /// Decoded text length `2·h·k`.
    pub fn text_len(&self) -> u64 {
        2 * (self.h * self.k()) as u64
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if self.h == 0 {
            return Err(Error::Config("item width must be at least 1".into()));
        }
        if self.items.len() != k * self.h {
            return Err(Error::Config(format!(
                "{} item bytes for {k} items of width {}",
                self.items.len(),
                self.h
            )));
        }
        if let Some(&b) = self.items.iter().find(|&&b| b as u16 >= self.sigma) {
            return Err(Error::Config(format!("item byte {b} not below sigma {}", self.sigma)));
        }
        let mut seen = vec![false; k];
        for &v in &self.perm {
            let v = v as usize;
            if v >= k || seen[v] {
                return Err(Error::Config(format!("perm is not a permutation of 0..{k}")));
            }
            seen[v] = true;
        }
        Ok(())
    }

    /// The parsing, phrase by phrase.
    pub fn phrases(&self) -> impl Iterator<Item = Phrase> + '_ {
        let h = self.h as u64;
        let lits = self.items.iter().map(|&c| Phrase::Literal(c));
        let reps = self.perm.iter().map(move |&p| Phrase::Repeat {
            src: h * p as u64,
            len: h,
        });
        lits.chain(reps)
    }
}

/// Builds the permuting parsing for a valid instance.
pub fn gen_permute_instance(inst: &PermuteInstance) -> Result<Vec<Phrase>> {
    inst.validate()?;
    Ok(inst.phrases().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_items_swapped() {
        let inst = PermuteInstance {
            h: 2,
            items: b"abcd".to_vec(),
            perm: vec![1, 0],
            sigma: 256,
        };
        let p = gen_permute_instance(&inst).unwrap();
        assert_eq!(
            p,
            vec![
                Phrase::Literal(b'a'),
                Phrase::Literal(b'b'),
                Phrase::Literal(b'c'),
                Phrase::Literal(b'd'),
                Phrase::Repeat { src: 2, len: 2 },
                Phrase::Repeat { src: 0, len: 2 },
            ]
        );
    }

    #[test]
    fn random_instances_are_valid() {
        let inst = PermuteInstance::random(1000, 8, 4, 9);
        inst.validate().unwrap();
        assert_eq!(inst.text_len(), 16_000);
        let mut sorted = inst.perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..1000).collect::<Vec<u32>>());
    }

    #[test]
    fn invalid_instances_rejected() {
        let mut inst = PermuteInstance::random(10, 3, 256, 1);
        inst.perm[0] = inst.perm[1];
        assert!(gen_permute_instance(&inst).is_err());
        let mut inst = PermuteInstance::random(10, 3, 4, 1);
        inst.items[5] = 9;
        assert!(inst.validate().is_err());
        let mut inst = PermuteInstance::random(10, 3, 256, 1);
        inst.items.pop();
        assert!(inst.validate().is_err());
    }
}
