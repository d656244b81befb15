//! Deterministic RNG streams.
//!
//! Every random draw in the crate flows from one user-visible seed. Distinct
//! subsystems (init, shuffling, dropout, splits, synthesis) get independent
//! streams by mixing a tag and an index into the ChaCha key, so adding draws
//! to one subsystem never perturbs another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_INIT: u64 = 1;
pub(crate) const TAG_SHUFFLE: u64 = 2;
pub(crate) const TAG_DROPOUT_X: u64 = 3;
pub(crate) const TAG_DROPOUT_Y: u64 = 4;
pub(crate) const TAG_SPLIT: u64 = 5;
pub(crate) const TAG_SYNTH: u64 = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a per-subsystem seed from the run seed and a stream tag.
pub(crate) fn stream_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// ChaCha stream keyed by (seed, tag, index).
pub(crate) fn seeded_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..32].copy_from_slice(&0xA076_1D64_78BD_642Fu64.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
