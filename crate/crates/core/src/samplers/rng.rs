//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a ChaCha generator keyed by the root seed, with the
//! 64-bit stream id encoding what the stream is used for and which chain or worker owns it.
//! Streams with different ids are independent, and the same `(seed, purpose, index)` always
//! reproduces the same sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a random stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Purpose {
    Mala = 1,
    Initialization = 2,
    Rto = 3,
    TruncatedNormal = 4,
    Exponential = 5,
    Prior = 6,
    Data = 7,
    Problem = 8,
    Test = 9,
}

/// Generator for stream `(purpose, index)` under the root seed.
pub fn stream(seed: u64, purpose: Purpose, index: u32) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | index as u64);
    rng
}
