//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream whose 256-bit key
//! is `(seed, graph index, purpose, item index)`. Work can therefore be split
//! across threads in any order and still reproduce the serial output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Topology = 1,
    Weights = 2,
    Smooth = 3,
    Noise = 4,
    TimeVertex = 5,
    Custom = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub graph: u64,
    pub purpose: Purpose,
}

impl RngStream {
    pub fn new(seed: u64, graph: u64, purpose: Purpose) -> Self {
        Self { seed, graph, purpose }
    }

    pub fn with_purpose(self, purpose: Purpose) -> Self {
        Self { purpose, ..self }
    }

    /// Generator for item `index` (a signal column, a retry attempt, ...).
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.graph.to_le_bytes());
        key[16..24].copy_from_slice(&(self.purpose as u64).to_le_bytes());
        key[24..].copy_from_slice(&index.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}
