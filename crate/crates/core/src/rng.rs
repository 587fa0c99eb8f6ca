//! Keyed random streams.
//!
//! Every stream is a ChaCha8 keystream whose 256-bit key is the tuple
//! `(seed, a, b, index)`. Draws depend only on that tuple and on the
//! position within the stream, never on which thread produced them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream for one Monte Carlo sample of the range `[a, b)`.
pub fn keyed_stream(seed: u64, a: u64, b: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, a, b, index]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Fills `out` with IID standard normal draws from the given stream.
pub fn fill_standard_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = StandardNormal.sample(rng);
    }
}
