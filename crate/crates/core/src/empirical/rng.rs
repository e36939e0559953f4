use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// Name of the generator, for output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64)";

/// Deterministic random source: ChaCha20 keyed by a 64-bit seed.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on `[lo, hi)` from the top 53 bits of one output word.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let unit = (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + (hi - lo) * unit
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

/// Seed for one experiment trial: `base + mix(d, n, trial)` (wrapping), where
/// `mix` is FNV-1a over the little-endian bytes of the three integers.
pub fn trial_seed(base: u64, d: usize, n: usize, trial: usize) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for word in [d as u64, n as u64, trial as u64] {
        for byte in word.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    base.wrapping_add(h)
}
