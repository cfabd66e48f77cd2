//! Counter-based random streams.
//!
//! Every random draw in a run comes from a ChaCha8 stream whose key is
//! derived from `(master seed, purpose id)` and whose 64-bit stream number is
//! the worker chunk id. Streams never share state, so the numbers a chunk
//! sees depend only on its id and not on how chunks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// What a stream is used for. Combined with the step index into a purpose id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    InitSampling = 1,
    BirthCount = 2,
    Births = 3,
    Diffusion = 4,
    Annihilation = 5,
    FullResample = 6,
}

impl Purpose {
    /// Purpose id for the given step; the tag sits in the top byte.
    pub fn id(self, step: u64) -> u64 {
        ((self as u64) << 56) ^ (step & ((1 << 56) - 1))
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the stream for `(seed, purpose, chunk)`.
pub fn split(seed: u64, purpose: u64, chunk: u64) -> Stream {
    let mut mixed = purpose.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut state = seed ^ splitmix64(&mut mixed);
    let mut key = [0u8; 32];
    for word in key.chunks_exact_mut(8) {
        word.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(chunk);
    rng
}

/// A `(seed, purpose)` pair from which per-chunk streams are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSpec {
    pub seed: u64,
    pub purpose: u64,
}

impl StreamSpec {
    pub fn new(seed: u64, purpose: Purpose, step: u64) -> Self {
        Self { seed, purpose: purpose.id(step) }
    }

    pub fn chunk(&self, chunk: u64) -> Stream {
        split(self.seed, self.purpose, chunk)
    }

    /// The single stream used by sequential consumers.
    pub fn stream(&self) -> Stream {
        self.chunk(0)
    }
}
