//! Deterministic sub-seed derivation.
//!
//! One master seed drives a whole pipeline run; every stage and scenario gets
//! an independent stream derived by hashing `(master, stage, index)`. The hash
//! is a hand-rolled FNV-1a so the mapping is stable across platforms and Rust
//! releases (`DefaultHasher` makes no such promise).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(h: u64, bytes: &[u8]) -> u64 {
    let mut h = h;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Derive a sub-seed from a master seed, a stage label, and an index.
pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    let h = fnv1a(FNV_OFFSET, &master.to_le_bytes());
    let h = fnv1a(h, stage.as_bytes());
    fnv1a(h, &index.to_le_bytes())
}

/// Seeded generator used everywhere randomness is needed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Convenience: generator for a derived stream.
pub fn stream_rng(master: u64, stage: &str, index: u64) -> ChaCha8Rng {
    rng_from_seed(derive_seed(master, stage, index))
}
