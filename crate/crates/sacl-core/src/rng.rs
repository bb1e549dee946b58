//! Seeded random streams.
//!
//! A [`Stream`] is xoshiro256** seeded through SplitMix64. The 64-bit seed for
//! a stream is `fold(seed, fnv1a64(tag), parts...)` where each fold step is one
//! SplitMix64 finalizer over `state ^ value`. Shuffles are descending
//! Fisher-Yates with Lemire's multiply-shift bounded draw (with rejection), so
//! any implementation following these three rules reproduces the same orders.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

/// Name recorded in emitted artifacts.
pub const PRNG_NAME: &str = "xoshiro256**/splitmix64-seed/fnv1a64-tag/fisher-yates-desc/lemire";

/// Purpose tags. Each tag selects an independent stream from the same seed.
pub mod tags {
    pub const SPLIT: &str = "split";
    pub const SUBSET: &str = "subset";
    pub const SAMPLE_BASE: &str = "sample-base";
    pub const SAMPLE_HARD: &str = "sample-hard";
    pub const SYNTH_TIERS: &str = "synth-tiers";
    pub const SYNTH_FLIPS: &str = "synth-flips";
    pub const SYNTH_FEATURES: &str = "synth-features";
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the stream seed for `(seed, tag, parts)`.
pub fn derive_seed(seed: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut state = splitmix64(seed ^ fnv1a64(tag.as_bytes()));
    for &p in parts {
        state = splitmix64(state ^ p);
    }
    state
}

#[derive(Debug, Clone)]
pub struct Stream {
    inner: Xoshiro256StarStar,
}

impl Stream {
    pub fn new(seed: u64, tag: &str, parts: &[u64]) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(derive_seed(seed, tag, parts)),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..bound`. `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let mut m = u128::from(self.next_u64()) * u128::from(bound);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(bound);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Uniform float in `[0, 1)` with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box-Muller, cosine branch only).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit_f64();
        let u2 = self.unit_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
