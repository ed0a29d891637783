//! Counter-based random-number streams.
//!
//! Every Monte-Carlo batch draws from a ChaCha stream selected purely by
//! `(master seed, phase, batch index)`, so results are independent of worker
//! count and scheduling order. Phases separate the independent sampling
//! stages of one run (paths, limit-cluster draws, probes, ...) so that no two
//! stages share a stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sampling stage identifiers baked into the stream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Paths = 1,
    Theta = 2,
    CondA = 3,
    CondB = 4,
    CondC = 5,
    CondCStar = 6,
    Marginal = 7,
    Scratch = 15,
}

/// RNG for batch `index` of stage `phase` under `master_seed`.
pub fn stream(master_seed: u64, phase: Phase, index: u64) -> ChaCha8Rng {
    assert!(index < (1 << 56), "batch index exceeds stream space");
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((phase as u64) << 56) | index);
    rng
}
