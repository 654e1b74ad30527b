//! Seeded random streams.
//!
//! A run owns one [`SimRng`]. Batches of independent episodes draw a fresh
//! seed from it and hand every episode its own ChaCha stream, so the results
//! do not depend on the order (or thread) in which episodes are simulated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic split of one seed into indexed, independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSplitter {
    seed: u64,
}

impl StreamSplitter {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Consumes one word from `rng` to seed the splitter.
    pub fn from_rng<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(rng.next_u64())
    }

    pub fn stream(&self, index: u64) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Draws an index from a probability vector by inversion.
///
/// Falls back to the last index with positive mass when rounding leaves the
/// uniform draw above the cumulative sum.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
