//! Reproducible random streams.
//!
//! Every Monte Carlo path draws from its own ChaCha8 stream, addressed by a
//! `(seed, purpose, index)` triple. ChaCha is counter based, so a stream can
//! be opened directly at any index and results do not depend on how paths
//! are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// Separates the streams used by different stages of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Skeleton = 1,
    Exploration = 2,
    Evaluation = 3,
    Chi = 4,
    Benchmark = 5,
    Statistics = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Opens the substream `index` of `purpose` under the experiment seed.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> PathRng {
    let key = splitmix64(seed ^ splitmix64(purpose as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
