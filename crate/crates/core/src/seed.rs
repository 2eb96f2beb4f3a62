//! Stable seed derivation.
//!
//! Sub-streams are keyed by text labels so that a run and a later reanalysis
//! of its trace draw identical random numbers without sharing RNG state. The
//! hash is FNV-1a followed by a SplitMix64 finalizer; both are fixed here so
//! derived seeds do not change with the standard library's hasher.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of labelled components.
#[derive(Debug, Clone, Copy)]
pub struct SeedStream(u64);

impl SeedStream {
    pub fn new(base: u64) -> Self {
        let mut s = Self(FNV_OFFSET);
        s = s.with_u64(base);
        s
    }

    pub fn with_str(mut self, label: &str) -> Self {
        for b in label.bytes() {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        // Field separator, so ("ab", "c") and ("a", "bc") differ.
        self.0 ^= 0xff;
        self.0 = self.0.wrapping_mul(FNV_PRIME);
        self
    }

    pub fn with_u64(mut self, v: u64) -> Self {
        for b in v.to_le_bytes() {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        self
    }

    pub fn seed(self) -> u64 {
        splitmix(self.0)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed())
    }
}

/// RNG used throughout the crate; ChaCha8 output is stable across releases.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
