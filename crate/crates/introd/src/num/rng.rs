//! A splittable, counter-based PRNG built on the SplitMix64 finalizer.
//!
//! The generator is fully specified by this file: identical seeds give
//! identical streams on every platform and in every language that implements
//! the same mix function. Substreams are derived by hashing a tag into the
//! state, which lets dataset generation draw per-sample randomness from
//! `(seed, split, index)` independent of iteration order.

use serde::{Deserialize, Serialize};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded generator state. Single-owner: never share mutably across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RngState {
    state: u64,
    cached_normal: Option<f64>,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            state: seed,
            cached_normal: None,
        }
    }

    /// Derives an independent substream tagged by `tag` without disturbing
    /// this stream. Folding distinct tags yields distinct streams.
    pub fn substream(&self, tag: u64) -> RngState {
        RngState {
            state: mix(self.state.wrapping_add(GAMMA).wrapping_mul(mix(tag | 1))),
            cached_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Multiply-shift keeps this unbiased enough for n << 2^53 and, unlike
        // rejection sampling, consumes exactly one draw (stream stability).
        (self.next_f64() * n as f64) as usize % n
    }

    /// Standard normal via Box-Muller; the paired value is cached.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seeds_give_identical_streams() {
        let mut a = RngState::new(42);
        let mut b = RngState::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let va: Vec<f64> = (0..50).map(|_| a.next_normal()).collect();
        let vb: Vec<f64> = (0..50).map(|_| b.next_normal()).collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn substreams_are_independent_of_parent_consumption() {
        let parent = RngState::new(7);
        let mut child_before = parent.substream(3);
        let mut p = parent.clone();
        p.next_u64();
        // substream derives from the snapshot it was taken from
        let mut child_same = parent.substream(3);
        assert_eq!(child_before.next_u64(), child_same.next_u64());

        let mut other = parent.substream(4);
        assert_ne!(child_before.next_u64(), other.next_u64());
    }

    #[test]
    fn uniform_is_in_unit_interval_and_roughly_uniform() {
        let mut rng = RngState::new(1);
        let n = 20_000;
        let mut mean = 0.0;
        for _ in 0..n {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
            mean += u;
        }
        mean /= n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean={mean}");
    }

    #[test]
    fn normal_moments() {
        let mut rng = RngState::new(2);
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let mean: f64 = xs.iter().sum::<f64>() / n as f64;
        let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean={mean}");
        assert!((var - 1.0).abs() < 0.05, "var={var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = RngState::new(3);
        let mut v: Vec<usize> = (0..100).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(v, (0..100).collect::<Vec<_>>());
    }
}
