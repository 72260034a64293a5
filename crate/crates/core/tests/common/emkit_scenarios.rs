//! Randomized scenarios comparing the external-memory primitives with
//! in-RAM oracles. Each returns a description of the first discrepancy.

use std::collections::BTreeMap;

use emlz::emkit::{distribute, em_sort, ExternalPq, FixedRecord, PqConfig, ScratchManager};
use emlz::{IoStats, MemoryBudget};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::log_uniform;

/// Ten-byte record: 4-byte key and 6-byte tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rec10 {
    pub key: u32,
    pub tag: u64,
}

impl FixedRecord for Rec10 {
    const SIZE: usize = 10;

    fn encode(&self, out: &mut [u8]) {
        out[..4].copy_from_slice(&self.key.to_le_bytes());
        out[4..].copy_from_slice(&self.tag.to_le_bytes()[..6]);
    }

    fn decode(src: &[u8]) -> Self {
        let mut tag = [0u8; 8];
        tag[..6].copy_from_slice(&src[4..]);
        Rec10 {
            key: u32::from_le_bytes(src[..4].try_into().unwrap()),
            tag: u64::from_le_bytes(tag),
        }
    }
}

fn small_budget(rng: &mut ChaCha8Rng) -> MemoryBudget {
    let blocks = rng.random_range(4..=32u64);
    MemoryBudget::new(blocks * 4096, 4096).unwrap()
}

/// External sort against `sort` on a copy: same multiset, keys ascending.
pub fn sort_scenario(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = small_budget(&mut rng);
    let count = log_uniform(&mut rng, 60_000) as usize - 1;
    let key_range = log_uniform(&mut rng, u32::MAX as u64) as u32;
    let mut input: Vec<Rec10> = (0..count)
        .map(|_| Rec10 {
            key: rng.random_range(0..key_range),
            tag: rng.random_range(0..1u64 << 48),
        })
        .collect();
    match rng.random_range(0..6) {
        0 => input.sort(),
        1 => input.sort_by(|a, b| b.cmp(a)),
        _ => {}
    }
    let stats = IoStats::new();
    let sm = ScratchManager::new(None, &stats).map_err(|e| e.to_string())?;
    let sorted = em_sort(input.iter().copied().map(Ok), |r: &Rec10| r.key, &budget, &sm, "sort")
        .map_err(|e| format!("seed {seed}: {e}"))?;
    let got: Vec<Rec10> = sorted
        .collect::<emlz::Result<_>>()
        .map_err(|e| format!("seed {seed}: {e}"))?;
    if let Some(w) = got.windows(2).position(|w| w[0].key > w[1].key) {
        return Err(format!("seed {seed}: keys out of order at {w}"));
    }
    let mut a = got;
    let mut b = input;
    a.sort();
    b.sort();
    if a != b {
        return Err(format!("seed {seed}: sorted output is not the input multiset"));
    }
    if sm.live_files() != 0 {
        return Err(format!("seed {seed}: {} scratch files left", sm.live_files()));
    }
    Ok(())
}

/// External PQ against a key-ordered multiset: every extraction must return
/// the smallest key present and one of the payloads stored under it.
pub fn pq_scenario(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payload_max = log_uniform(&mut rng, 64) as usize;
    let cfg = PqConfig {
        buffer_bytes: rng.random_range(64..16_384),
        block: 4096,
        max_runs: rng.random_range(2..10),
        payload_max,
    };
    let stats = IoStats::new();
    let sm = ScratchManager::new(None, &stats).map_err(|e| e.to_string())?;
    let mut pq = ExternalPq::new(cfg, &sm, "pq").map_err(|e| e.to_string())?;
    let mut oracle: BTreeMap<u64, Vec<Vec<u8>>> = BTreeMap::new();
    let live = std::cell::Cell::new(0u64);
    let mut floor = 0u64;
    let ops = log_uniform(&mut rng, 20_000);
    let p_insert = rng.random_range(0.3..0.9);
    let key_spread = log_uniform(&mut rng, 1 << 20);
    let mut buf = Vec::new();
    let mut step = |insert: bool, rng: &mut ChaCha8Rng, pq: &mut ExternalPq| -> Result<(), String> {
        if insert {
            let key = floor + rng.random_range(0..key_spread);
            let len = rng.random_range(0..=payload_max);
            let payload: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            pq.insert(key, &payload)
                .map_err(|e| format!("seed {seed}: insert: {e}"))?;
            oracle.entry(key).or_default().push(payload);
            live.set(live.get() + 1);
            return Ok(());
        }
        let got = pq
            .pop_into(&mut buf)
            .map_err(|e| format!("seed {seed}: extract: {e}"))?;
        let Some(mut entry) = oracle.first_entry() else {
            return match got {
                None => Ok(()),
                Some(k) => Err(format!("seed {seed}: extracted {k} from an empty queue")),
            };
        };
        let want = *entry.key();
        if got != Some(want) {
            return Err(format!("seed {seed}: extracted {got:?}, smallest key is {want}"));
        }
        let bag = entry.get_mut();
        let Some(i) = bag.iter().position(|p| *p == buf) else {
            return Err(format!("seed {seed}: payload under key {want} was never inserted"));
        };
        bag.swap_remove(i);
        if bag.is_empty() {
            entry.remove();
        }
        live.set(live.get() - 1);
        floor = want;
        Ok(())
    };
    for _ in 0..ops {
        let insert = rng.random_bool(p_insert);
        step(insert, &mut rng, &mut pq)?;
    }
    while live.get() > 0 {
        step(false, &mut rng, &mut pq)?;
    }
    step(false, &mut rng, &mut pq)?;
    if !pq.is_empty() {
        return Err(format!("seed {seed}: queue reports {} items after draining", pq.len()));
    }
    let s = pq.stats();
    if s.payload_inserted != s.payload_extracted || s.inserts != s.extracts {
        return Err(format!("seed {seed}: unbalanced queue stats {s:?}"));
    }
    Ok(())
}

/// Smallest `r` with `f^r >= m`, by repeated division.
pub fn ceil_log(m: u64, f: u64) -> u32 {
    let mut r = 0;
    let mut rest = m;
    while rest > 1 {
        rest = rest.div_ceil(f);
        r += 1;
    }
    r
}

/// Distribution against per-bucket filtering of the input, with the round
/// count compared to `ceil(log_F m)`.
pub fn distribute_scenario(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = small_budget(&mut rng);
    let fan = budget.fan_out() as u64;
    let m = log_uniform(&mut rng, 5_000);
    let count = log_uniform(&mut rng, 20_000) as usize;
    let input: Vec<u64> = (0..count).map(|_| rng.random()).collect();
    let stats = IoStats::new();
    let sm = ScratchManager::new(None, &stats).map_err(|e| e.to_string())?;
    let mut buckets = distribute(input.iter().copied().map(Ok), |&x| x % m, m, &budget, &sm, "dist")
        .map_err(|e| format!("seed {seed}: {e}"))?;
    let want_rounds = ceil_log(m, fan);
    if buckets.rounds() != want_rounds {
        return Err(format!(
            "seed {seed}: {} rounds for m={m}, F={fan}; expected {want_rounds}",
            buckets.rounds()
        ));
    }
    let passes = u64::from(want_rounds.max(1));
    let written = stats.get("dist").bytes_written;
    if written != passes * 8 * count as u64 {
        return Err(format!(
            "seed {seed}: {written} bytes written in {passes} passes of {count} records"
        ));
    }
    let mut by_bucket: Vec<Vec<u64>> = vec![Vec::new(); m as usize];
    for &x in &input {
        by_bucket[(x % m) as usize].push(x);
    }
    for (i, want) in by_bucket.iter().enumerate() {
        let got: Vec<u64> = buckets
            .drain(i, 4096, "read")
            .map_err(|e| e.to_string())?
            .collect::<emlz::Result<_>>()
            .map_err(|e| e.to_string())?;
        if got != *want {
            return Err(format!("seed {seed}: bucket {i} differs from the filtered input"));
        }
    }
    Ok(())
}
