//! Run-owned random number generation.
//!
//! Every stochastic step (initialization, shuffling, dropout, synthetic data)
//! draws from a ChaCha8 stream seeded explicitly by the caller, so a run is
//! reproducible bit-for-bit from its seed. There is no global generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator for `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
