//! Seeded random streams.
//!
//! Every consumer draws from a ChaCha20 stream selected by `(seed, stream)`,
//! so independent quantities generated from one seed never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Rng = ChaCha20Rng;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
