//! Splittable deterministic randomness.
//!
//! One root seed feeds every stochastic draw in the crate. Substreams are
//! derived by splitmix64-mixing child indices into the key, and each key
//! expands into a counter-based ChaCha8 stream, so runs are reproducible
//! bit-exactly on one platform regardless of thread scheduling.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Splitmix64 finalizer; decorrelates derived keys.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A key in the seed tree. Copy it around freely; derive children by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngKey(u64);

impl RngKey {
    pub fn root(seed: u64) -> Self {
        RngKey(splitmix64(seed))
    }

    /// Deterministic child key for substream `index`.
    pub fn child(self, index: u64) -> Self {
        RngKey(splitmix64(self.0 ^ index.wrapping_mul(0xa076_1d64_78bd_642f)))
    }

    pub fn stream(self) -> Stream {
        Stream { inner: ChaCha8Rng::seed_from_u64(self.0) }
    }
}

/// Concrete sample stream backed by ChaCha8.
pub struct Stream {
    inner: ChaCha8Rng,
}

impl Stream {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        // 53 mantissa bits of a u64.
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.uniform() * n as f64) as usize % n
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        loop {
            let u1 = self.uniform();
            let u2 = self.uniform();
            if u1 > 1e-300 {
                let r = (-2.0 * u1.ln()).sqrt();
                return r * (2.0 * std::f64::consts::PI * u2).cos();
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_deterministic_and_split() {
        let a = RngKey::root(42);
        let b = RngKey::root(42);
        assert_eq!(a, b);
        assert_ne!(a.child(0), a.child(1));
        assert_ne!(a.child(0), a.child(0).child(0));

        let mut s1 = a.child(3).stream();
        let mut s2 = b.child(3).stream();
        for _ in 0..16 {
            assert_eq!(s1.next_u64(), s2.next_u64());
        }
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut s = RngKey::root(7).stream();
        for _ in 0..1000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn normal_moments_roughly_standard() {
        let mut s = RngKey::root(11).stream();
        let n = 50_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let z = s.normal();
            sum += z;
            sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }
}
