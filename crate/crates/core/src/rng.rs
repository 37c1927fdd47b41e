//! Seeded random streams.
//!
//! Every chain runs on its own `ChaCha8Rng`. Replicate streams are derived as
//! `chain_seed = derive_seed(master_seed, stream, index)`, a SplitMix64-style
//! mix, so replicates can run in any order or in parallel and still reproduce.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Distinguishes independent families of streams drawn from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Chain = 1,
    Design = 2,
    Pilot = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master_seed: u64, stream: Stream, index: u64) -> u64 {
    let lane = splitmix64(master_seed ^ splitmix64(stream as u64));
    splitmix64(lane ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

pub fn rng_from_seed(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(master_seed: u64, stream: Stream, index: u64) -> ChainRng {
    rng_from_seed(derive_seed(master_seed, stream, index))
}
