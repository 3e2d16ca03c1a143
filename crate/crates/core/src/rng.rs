//! Replicate-addressable random streams.
//!
//! Every (seed, n, m, replicate) tuple is hashed by a stateless splitmix64
//! chain into the key of its own ChaCha8 stream, so any replicate of any cell
//! can be regenerated in isolation and the scheduling order never matters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream consumed by the data generators.
pub type Stream = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one well-mixed key.
pub fn mix_words(words: &[u64]) -> u64 {
    words.iter().fold(GOLDEN_GAMMA, |acc, &w| {
        mix64(acc.wrapping_add(GOLDEN_GAMMA) ^ mix64(w.wrapping_add(GOLDEN_GAMMA)))
    })
}

/// Stream for replicate `replicate` of cell (n, m) under master `seed`.
pub fn replicate_stream(seed: u64, n: usize, m: usize, replicate: usize) -> Stream {
    let key = mix_words(&[seed, n as u64, m as u64, replicate as u64]);
    ChaCha8Rng::seed_from_u64(key)
}

/// Stream keyed directly by a seed, for one-off generation.
pub fn seeded_stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(mix64(seed))
}
