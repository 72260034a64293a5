//! Longest previous factor at a single position.

/// Z-array of `s`: `z[k]` is the length of the longest common prefix of `s`
/// and `s[k..]`, with `z[0] = s.len()`.
pub fn z_array(s: &[u8]) -> Vec<usize> {
    let n = s.len();
    let mut z = vec![0; n];
    if n == 0 {
        return z;
    }
    z[0] = n;
    let (mut l, mut r) = (0, 0);
    for k in 1..n {
        let mut len = 0;
        if k < r {
            len = z[k - l].min(r - k);
        }
        while k + len < n && s[len] == s[k + len] {
            len += 1;
        }
        if k + len > r {
            l = k;
            r = k + len;
        }
        z[k] = len;
    }
    z
}

/// Longest previous factor of `x` at `i`: the largest `len` such that
/// `x[p..p+len] == x[i..i+len]` for some `p < i`, together with the smallest
/// such `p`. The source may run past `i`. Returns `(0, 0)` when `x[i]` has no
/// earlier occurrence.
///
/// Panics if `i >= x.len()`.
pub fn lpf(x: &[u8], i: usize) -> (usize, usize) {
    assert!(i < x.len(), "position {i} outside text of length {}", x.len());
    let n = x.len();
    let pat = &x[i..];
    let z = z_array(pat);
    let mut best = (0, 0);
    // [l, r): window of x known to match a prefix of pat
    let (mut l, mut r) = (0, 0);
    for p in 0..i {
        let mut k = 0;
        if p < r {
            k = z[p - l].min(r - p);
        }
        if p + k >= r {
            while p + k < n && k < pat.len() && x[p + k] == pat[k] {
                k += 1;
            }
            if p + k > r {
                l = p;
                r = p + k;
            }
        }
        if k > best.1 {
            best = (p, k);
        }
    }
    best
}
