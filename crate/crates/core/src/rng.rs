//! Seed streams.
//!
//! Every random object is drawn from a ChaCha8 stream selected by a
//! `(seed, role)` pair; ChaCha is counter based, so distinct roles give
//! non-overlapping streams for the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Role tags for the streams used by the sketches.
pub mod role {
    pub const SRHT_SIGNS: u64 = 0x5352_0001;
    pub const SRHT_ROWS: u64 = 0x5352_0002;
    pub const TENSOR_SIGNS_1: u64 = 0x5453_0001;
    pub const TENSOR_SIGNS_2: u64 = 0x5453_0002;
    pub const TENSOR_ROWS: u64 = 0x5453_0003;
    pub const SKETCHER_T: u64 = 0x544b_0001;
    pub const SKETCHER_S: u64 = 0x544b_0002;
    pub const KERNEL_BLOCK: u64 = 0x4b42_0001;
    pub const KERNEL_SAMPLING: u64 = 0x4b42_0002;
    pub const SOLVER_OUTER: u64 = 0x534c_0001;
    pub const TRIAL: u64 = 0x5452_0001;
}

/// A generator for the stream `role` of `seed`.
pub fn stream(seed: u64, role: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(role);
    rng
}

/// Derives a child seed from `(seed, role, index)` with the SplitMix64 finalizer.
pub fn derive_seed(seed: u64, role: u64, index: u64) -> u64 {
    let mut z = seed
        ^ role.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
