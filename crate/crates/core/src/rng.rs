//! Counter-based random streams: draw `i` of a Monte-Carlo job gets its own
//! generator derived from `(seed, i)`, so results do not depend on the order
//! or thread in which draws are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
