//! Seeded random streams and the variate generators built on them.
//!
//! Every stream is identified by a `(seed, stream id)` pair and can derive
//! child streams from an id without consuming its own state. That lets a
//! parallel algorithm hand each worker (or each tree node) its own stream
//! with no coordination, and makes the result independent of scheduling.

use rand_core::{RngCore, SeedableRng};
use rand_distr::{Binomial, Distribution};
use rand_xoshiro::Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const CHILD_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct RngStream {
    key: u64,
    gen: Xoshiro256PlusPlus,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::from_key(mix64(seed ^ mix64(stream.wrapping_add(GOLDEN))))
    }

    fn from_key(key: u64) -> Self {
        RngStream {
            key,
            gen: Xoshiro256PlusPlus::seed_from_u64(key),
        }
    }

    /// Stream for child `id`. Depends only on this stream's identity, not on
    /// how many values have been drawn from it.
    pub fn child(&self, id: u64) -> RngStream {
        Self::from_key(mix64(self.key.wrapping_add(mix64(id ^ CHILD_SALT))))
    }

    /// Fresh stream keyed by the next value of this one.
    pub fn fork(&mut self) -> RngStream {
        let key = self.gen.next_u64();
        Self::from_key(mix64(key ^ CHILD_SALT))
    }

    /// Uniform in `[0, 1)` from the top 53 bits of one output word.
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        (self.gen.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1)`.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform01();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform index in `0..n` as `floor(u * n)`, redrawn in the rare case
    /// rounding lands on `n`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        loop {
            let r = (self.uniform01() * n as f64) as usize;
            if r < n {
                return r;
            }
        }
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.gen.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.gen.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.gen.fill_bytes(dst)
    }
}

/// Exponential clock `-ln(u) / w` with `u` never exactly zero.
#[inline]
pub fn exponential_key(w: f64, rng: &mut RngStream) -> f64 {
    assert!(w > 0.0, "exponential_key needs a positive weight, got {w}");
    -rng.uniform_open().ln() / w
}

/// Number of `k` samples that fall on the left side of a binary split with
/// the given side weights: `Binomial(k, left / (left + right))`.
pub fn binomial_split(k: u64, left: f64, right: f64, rng: &mut RngStream) -> u64 {
    assert!(
        left >= 0.0 && right >= 0.0 && (left + right > 0.0 || k == 0),
        "binomial_split needs nonnegative weights with a positive sum (got {left}, {right})"
    );
    if k == 0 || left == 0.0 {
        return 0;
    }
    if right == 0.0 {
        return k;
    }
    let p = left / (left + right);
    // p can round to exactly 1 for extreme ratios.
    if p >= 1.0 {
        return k;
    }
    Binomial::new(k, p)
        .expect("probability in (0, 1)")
        .sample(rng)
}
