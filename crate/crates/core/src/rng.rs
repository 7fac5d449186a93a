use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A generator for `seed`, on an independent stream per `stream` tag.
pub(crate) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
