//! Seeding policy: every replicate `i` of a run with seed `s` draws from
//! ChaCha8 keyed by `s` on stream `i`, so results do not depend on how
//! replicates are scheduled across threads.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
