//! Named random substreams.
//!
//! Every consumer of randomness asks for a stream by `(master seed, label)`.
//! The stream is ChaCha20 keyed by SHA-256 of the pair, so streams are
//! independent of each other and of the order in which they are requested,
//! and their output is identical on every platform.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

pub struct Substream {
    inner: ChaCha20Rng,
}

impl Substream {
    pub fn new(master_seed: u64, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"scrub-substream\0");
        h.update(master_seed.to_le_bytes());
        h.update(label.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        Substream { inner: ChaCha20Rng::from_seed(key) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi]` (hi reachable only through rounding).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)` without modulo bias.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Approximately standard normal: centred sum of twelve uniforms.
    ///
    /// Uses only additions, so the output is bit-identical across hosts.
    pub fn standard_normal(&mut self) -> f64 {
        (0..12).map(|_| self.next_f64()).sum::<f64>() - 6.0
    }

    /// `k` distinct items drawn uniformly without replacement from `items`,
    /// returned in their original order.
    pub fn sample_sorted(&mut self, items: &[usize], k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = items.to_vec();
        let k = k.min(pool.len());
        for i in 0..k {
            let j = i + self.below((pool.len() - i) as u64) as usize;
            pool.swap(i, j);
        }
        let mut chosen = pool[..k].to_vec();
        chosen.sort_unstable();
        chosen
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
