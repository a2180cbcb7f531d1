//! Seeded, splittable random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream type used by the samplers.
pub type StreamRng = ChaCha8Rng;

/// Stream `stream` of the generator seeded by `master`. Streams of one master
/// seed are independent and do not depend on how many other streams are used.
pub fn stream_rng(master: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}
