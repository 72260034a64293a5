//! Greedy LZ77 factorization using a suffix array.
//!
//! For every text position `i`, `psv[i]` (`nsv[i]`) is the text position of
//! the nearest suffix before (after) `i` in suffix-array order that starts
//! left of `i`. The longest previous factor at `i` is shared with one of the
//! two. To get the smallest source among all equally long matches, the chain
//! `psv[i], psv[psv[i]], ...` (and likewise for `nsv`) is followed while the
//! match length is kept; each step moves to a strictly smaller position.

use crate::error::{Error, Result};
use crate::phrase::Phrase;

const NONE: u32 = u32::MAX;

/// Longest text accepted by the factorizer.
pub const MAX_FACTORIZE_LEN: u64 = i32::MAX as u64 - 1;

/// Approximate peak RAM of [`factorize_greedy`] on a text of `n` bytes.
pub fn factorize_ram_estimate(n: u64) -> u64 {
    13 * n
}

fn lcp(x: &[u8], a: usize, b: usize) -> usize {
    let (s, t) = (&x[a..], &x[b..]);
    let limit = s.len().min(t.len());
    let mut k = 0;
    while k + 8 <= limit {
        let u = u64::from_le_bytes(s[k..k + 8].try_into().unwrap());
        let v = u64::from_le_bytes(t[k..k + 8].try_into().unwrap());
        let d = u ^ v;
        if d != 0 {
            return k + (d.trailing_zeros() / 8) as usize;
        }
        k += 8;
    }
    while k < limit && s[k] == t[k] {
        k += 1;
    }
    k
}

fn neighbours(x: &[u8]) -> (Vec<u32>, Vec<u32>) {
    let n = x.len();
    let mut sa = vec![0i32; n];
    cdivsufsort::sort_in_place(x, &mut sa);
    let mut psv = vec![NONE; n];
    let mut nsv = vec![NONE; n];
    // The stack of candidate positions is threaded through psv itself.
    let mut top = NONE;
    for &s in &sa {
        let s = s as u32;
        while top != NONE && top > s {
            nsv[top as usize] = s;
            top = psv[top as usize];
        }
        psv[s as usize] = top;
        top = s;
    }
    (psv, nsv)
}

/// Runs the greedy parse of `x`, passing each phrase to `sink` in order.
pub fn factorize_greedy_with<F>(x: &[u8], mut sink: F) -> Result<()>
where
    F: FnMut(Phrase) -> Result<()>,
{
    if x.len() as u64 > MAX_FACTORIZE_LEN {
        return Err(Error::Config(format!(
            "text of {} bytes exceeds the factorizer limit of {MAX_FACTORIZE_LEN}",
            x.len()
        )));
    }
    let (psv, nsv) = neighbours(x);
    let best_on_chain = |chain: &[u32], start: u32, i: usize, len: usize, best: usize| {
        let mut best = best;
        let mut c = start;
        while c != NONE && x[c as usize..c as usize + len] == x[i..i + len] {
            best = best.min(c as usize);
            c = chain[c as usize];
        }
        best
    };
    let mut i = 0;
    while i < x.len() {
        let (a, b) = (psv[i], nsv[i]);
        let la = if a == NONE { 0 } else { lcp(x, a as usize, i) };
        let lb = if b == NONE { 0 } else { lcp(x, b as usize, i) };
        let len = la.max(lb);
        if len == 0 {
            sink(Phrase::Literal(x[i]))?;
            i += 1;
            continue;
        }
        let mut src = usize::MAX;
        if la == len {
            src = best_on_chain(&psv, a, i, len, src);
        }
        if lb == len {
            src = best_on_chain(&nsv, b, i, len, src);
        }
        sink(Phrase::Repeat {
            src: src as u64,
            len: len as u64,
        })?;
        i += len;
    }
    Ok(())
}

/// Greedy left-to-right parse of `x` into longest previous factors, with
/// the smallest source position on ties.
///
/// Panics if `x` is longer than [`MAX_FACTORIZE_LEN`].
pub fn factorize_greedy(x: &[u8]) -> Vec<Phrase> {
    let mut out = Vec::new();
    factorize_greedy_with(x, |p| {
        out.push(p);
        Ok(())
    })
    .expect("text too long for the factorizer");
    out
}
