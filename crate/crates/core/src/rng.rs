use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for replication `index` under `seed`.
///
/// Each replication owns its own ChaCha stream, so results do not depend on
/// how replications are scheduled across threads.
pub(crate) fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
