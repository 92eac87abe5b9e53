//! Seed derivation. Every random draw in the crate descends from a single
//! user seed through [`derive`], so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child seed for `(parent, label)`; distinct labels give unrelated streams.
pub fn derive(parent: u64, label: u64) -> u64 {
    mix(parent ^ mix(label.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn derive2(parent: u64, a: u64, b: u64) -> u64 {
    derive(derive(parent, a), b)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Domain labels used with [`derive`].
pub mod label {
    pub const BACKGROUND: u64 = 0xB6;
    pub const RAIN: u64 = 0x5A1;
    pub const HOLDOUT: u64 = 0x401D;
    pub const INIT: u64 = 0x1A17;
    pub const BATCH_NEW: u64 = 0xBA7C;
    pub const BATCH_REPLAY: u64 = 0xBA7D;
    pub const REPLAY: u64 = 0x2E91;
    pub const LATENT: u64 = 0x1A7E;
    pub const PICK: u64 = 0x91C;
    pub const STAGE: u64 = 0x57A6;
    pub const DATASET: u64 = 0xDA7A;
}
