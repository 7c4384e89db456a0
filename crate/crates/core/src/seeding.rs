//! Deterministic seed derivation for worker and per-instance random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fallback root seed when neither a flag nor `QPRL_SEED` is given.
pub const DEFAULT_SEED: u64 = 0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with a stream tag and an index into an independent seed.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ stream) ^ index)
}

pub fn rng_for(root: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, stream, index))
}

/// Stream tags, one per consumer, so streams never collide.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const ROLLOUT_ENV: u64 = 2;
    pub const DATASET_SHUFFLE: u64 = 3;
    pub const MINIBATCH: u64 = 4;
    pub const EVAL_EPISODE: u64 = 5;
    pub const INSTANCE: u64 = 6;
    pub const QAOA_SAMPLE: u64 = 7;
    pub const SPLIT_SHUFFLE: u64 = 8;
}
