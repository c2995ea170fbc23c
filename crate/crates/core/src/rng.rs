//! Seeded random streams. Every consumer derives its own stream from the run
//! seed plus a tuple of tags, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod tag {
    pub const PARTITION: u64 = 1;
    pub const DESIGNATE: u64 = 2;
    pub const DATA_ATTACK: u64 = 3;
    pub const UPDATE_ATTACK: u64 = 4;
    pub const COMPRESS: u64 = 5;
    pub const SKETCH: u64 = 6;
    pub const SYNTHETIC: u64 = 7;
    pub const CORPUS: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, tags...)`.
pub fn stream(seed: u64, tags: &[u64]) -> Rng {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ t.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    }
    ChaCha8Rng::seed_from_u64(h)
}
