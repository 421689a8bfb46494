//! Counter-based random streams.
//!
//! Every random draw in the sampler comes from a stream keyed by the run
//! seed plus a tuple of tags (iteration, phase, stencil, entity). Streams are
//! independent of scheduling, so a parallel sweep gives the same result as a
//! sequential one and a resumed run needs no saved generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn key(&self, tags: &[u64]) -> u64 {
        tags.iter()
            .fold(splitmix64(self.seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
    }

    pub fn rng(&self, tags: &[u64]) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.key(tags))
    }
}
