//! Deterministic random streams.
//!
//! Every parallel task draws from its own ChaCha8 stream: the master seed
//! selects the key and the task index selects the stream, so results do not
//! depend on how tasks are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for task `task` under `master`.
pub fn stream(master: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(task);
    rng
}
