//! Counter-based seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` keyed by a 64-bit seed
//! derived from one user seed plus a path of counters (stage, replicate,
//! auxiliary index, subject, ...). Streams never depend on scheduling order,
//! so parallel and sequential runs draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage tags mixed into the user seed. The numeric values are part of the
/// reproducibility contract and are recorded in run manifests.
pub mod stage {
    pub const IMPUTE: u64 = 1;
    pub const SCREEN_ADDITIVE: u64 = 2;
    pub const SCREEN_DOMINANT: u64 = 3;
    pub const SCREEN_INTERACTION: u64 = 4;
    pub const SIM_MAF: u64 = 5;
    pub const SIM_GENOTYPE: u64 = 6;
    pub const SIM_NOISE: u64 = 7;
    pub const REPLICATE: u64 = 8;
    pub const SPLIT: u64 = 9;
    pub const PIPELINE: u64 = 10;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a counter path into a base seed.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_at(base: u64, path: &[u64]) -> ChaCha8Rng {
    rng(derive(base, path))
}
