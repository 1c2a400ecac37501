//! Reproducible random streams for trial-parallel Monte Carlo.
//!
//! Every trial draws from its own ChaCha stream whose seed is a pure function
//! of `(master_seed, trial_index, purpose)`. Simulation and reference draws use
//! different purposes, so they never share a stream, and results do not depend
//! on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Simulation,
    Reference,
    Check,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Simulation => 0x5349_4d55_4c41_5445,
            Purpose::Reference => 0x5245_4645_5245_4e43,
            Purpose::Check => 0x4348_4543_4b53_5549,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The 64-bit seed of trial `index` for the given purpose.
pub fn trial_seed(master_seed: u64, index: u64, purpose: Purpose) -> u64 {
    let key = splitmix64(master_seed ^ purpose.tag());
    splitmix64(key ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn stream_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn trial_stream(master_seed: u64, index: u64, purpose: Purpose) -> StreamRng {
    stream_from_seed(trial_seed(master_seed, index, purpose))
}
