//! Seedable random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from a
//! root seed, a purpose tag and an index, so results never depend on how work
//! is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags for independent streams.
pub mod tag {
    pub const OU: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const MAR: u64 = 3;
    pub const BOOTSTRAP: u64 = 4;
    pub const QUERY: u64 = 5;
    pub const PILOT: u64 = 6;
    pub const REPLICATE: u64 = 7;
    pub const EVAL_CURVES: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed; used to fan a root seed out to replicates.
pub fn derive_seed(root: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ splitmix64(tag)) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn stream(root: u64, tag: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(root ^ splitmix64(tag)));
    rng.set_stream(index);
    rng
}
