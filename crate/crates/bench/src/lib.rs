//! Shared fixtures for the benchmarks.

use shapley_core::game::{random_interior, shapley_family};
use shapley_core::{GamePair, JointState};

/// Game at `beta` and a reproducible interior start.
pub fn fixture(beta: f64, seed: u64) -> (GamePair, JointState) {
    use rand::SeedableRng;
    let game = shapley_family(beta).expect("beta in (0,1)");
    let start = random_interior(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    (game, start)
}
