//! Seeded pseudo-random generation.
//!
//! All randomness in the crate flows through [`seeded`], a ChaCha8 stream
//! keyed by a 64-bit seed, so every run is reproducible bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}
