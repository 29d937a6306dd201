//! Reproducible pseudo-random inputs.
//!
//! A 64-bit linear congruential generator with Knuth's MMIX constants,
//! `s ← 6364136223846793005 · s + 1442695040888963407 (mod 2^64)`.
//! A uniform draw in `[0, 1)` uses the top 53 bits of the new state.
//! Other implementations can reproduce every random input from the seed.

use crate::poly::PolyField;

pub const LCG_MULTIPLIER: u64 = 6364136223846793005;
pub const LCG_INCREMENT: u64 = 1442695040888963407;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(LCG_MULTIPLIER).wrapping_add(LCG_INCREMENT);
        self.state
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// An independent stream derived from this one.
    pub fn fork(&mut self) -> Lcg {
        Lcg::new(self.next_u64())
    }

    /// Polynomial with coefficients uniform in `[-amp, amp)` up to total degree
    /// `degree`, stored under `cap`. Draw order: slot, then degree, then power of `y`.
    pub fn poly(&mut self, shape: &[usize], degree: usize, cap: usize, amp: f64) -> PolyField {
        let mut f = PolyField::zeros(shape, cap);
        for s in 0..f.slot_count() {
            for d in 0..=degree.min(cap) {
                for j in 0..=d {
                    f.set(s, d - j, j, self.range(-amp, amp));
                }
            }
        }
        f
    }

    pub fn vector(&mut self, len: usize, amp: f64) -> Vec<f64> {
        (0..len).map(|_| self.range(-amp, amp)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_sequence() {
        let mut r = Lcg::new(0);
        assert_eq!(r.next_u64(), LCG_INCREMENT);
        assert_eq!(r.next_u64(), LCG_INCREMENT.wrapping_mul(LCG_MULTIPLIER).wrapping_add(LCG_INCREMENT));
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = Lcg::new(42);
        for _ in 0..1000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
        assert_eq!(Lcg::new(7).poly(&[2], 2, 3, 1.0), Lcg::new(7).poly(&[2], 2, 3, 1.0));
    }
}
