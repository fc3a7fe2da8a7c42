//! Per-path random streams.
//!
//! Every path draws from its own ChaCha8 stream, keyed by a 64-bit seed and
//! selected by the path index through the cipher's stream id. The numbers a
//! path sees therefore depend only on `(seed, index)`, never on which worker
//! runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for path `index` under `seed`.
pub fn path_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent child seed from a parent seed and a label path,
/// e.g. `derive_seed(master, &[tags::SAMPLE_TIME, combo])`.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix(seed), |acc, &l| mix(acc ^ mix(l)))
}

/// Labels separating the streams used by different consumers of one seed.
pub mod tags {
    pub const PATHS: u64 = 0x5041_5448;
    pub const SAMPLE_TIME: u64 = 0x5354_494d;
    pub const COMBOS: u64 = 0x434f_4d42;
}
