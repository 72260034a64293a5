//! One bit per byte of a segment, used to trap decoding-order bugs.

pub(crate) struct Coverage {
    bits: Vec<u64>,
}

impl Coverage {
    pub fn new(len: usize) -> Self {
        Coverage {
            bits: vec![0; len.div_ceil(64)],
        }
    }

    pub fn clear(&mut self) {
        self.bits.fill(0);
    }

    fn words(lo: usize, hi: usize) -> impl Iterator<Item = (usize, u64)> {
        let (first, last) = (lo / 64, (hi - 1) / 64);
        (first..=last).map(move |w| {
            let from = if w == first { lo % 64 } else { 0 };
            let to = if w == last { (hi - 1) % 64 + 1 } else { 64 };
            let mask = if to - from == 64 {
                u64::MAX
            } else {
                ((1u64 << (to - from)) - 1) << from
            };
            (w, mask)
        })
    }

    /// Marks `[lo, hi)`; false if any byte was already marked.
    pub fn mark(&mut self, lo: usize, hi: usize) -> bool {
        if lo >= hi {
            return true;
        }
        let mut fresh = true;
        for (w, mask) in Self::words(lo, hi) {
            fresh &= self.bits[w] & mask == 0;
            self.bits[w] |= mask;
        }
        fresh
    }

    /// Whether every byte of `[lo, hi)` is marked.
    pub fn covered(&self, lo: usize, hi: usize) -> bool {
        lo >= hi || Self::words(lo, hi).all(|(w, mask)| self.bits[w] & mask == mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mark_and_query() {
        let mut c = Coverage::new(200);
        assert!(c.mark(3, 70));
        assert!(c.covered(3, 70));
        assert!(!c.covered(2, 70));
        assert!(!c.covered(3, 71));
        assert!(!c.mark(69, 80));
        assert!(c.mark(80, 200));
        assert!(c.mark(0, 3));
        assert!(c.covered(0, 200));
        c.clear();
        assert!(!c.covered(0, 1));
        assert!(c.covered(5, 5));
    }
}
