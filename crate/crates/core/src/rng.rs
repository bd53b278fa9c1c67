//! Seeded random streams.
//!
//! Every experiment has one 64-bit master seed. Each sampling stage draws
//! from its own ChaCha8 stream (same key, distinct stream id), so adding or
//! removing draws in one stage never shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sampling stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Edges = 1,
    Kinds = 2,
    WarmupCurrent = 3,
    PlanSamples = 4,
    Restarts = 5,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
