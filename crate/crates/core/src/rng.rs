//! Seeded random streams.
//!
//! A run has one root seed. Each phase that consumes randomness draws from its
//! own ChaCha8 stream (same key, distinct stream id), so extra draws in one phase
//! never shift the numbers another phase sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Initial skill draws, N x 4 in agent order.
    Skills = 0,
    /// Initial tenure: base then jitter per agent, in level-assignment order.
    Tenure = 1,
    /// Per-step exits, levels 1..=5 in order.
    Attrition = 2,
    /// Random promotion orderings.
    Ordering = 3,
    /// Skill draws for Level 1 hires.
    Hiring = 4,
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
