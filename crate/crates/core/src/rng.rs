//! Counter-based random streams.
//!
//! Every random draw in the library comes from a stream addressed by a
//! master seed, an index (trial, shard, ...) and a purpose tag. Streams with
//! different addresses are independent, so results do not depend on how work
//! is split between threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Pattern = 1,
    WrongPattern = 2,
    Payload = 3,
    Noise = 4,
    Sphere = 5,
    Matrix = 6,
    Design = 7,
}

const INDEX_BITS: u32 = 56;

/// Stream for `(seed, index, purpose)`. `index` must be below 2^56.
pub fn stream(seed: u64, index: u64, purpose: Purpose) -> StreamRng {
    debug_assert!(index < 1 << INDEX_BITS, "stream index {index} too large");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << INDEX_BITS) | index);
    rng
}
