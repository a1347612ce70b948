//! Fixtures shared by the benchmarks.

use labe_core::distributions::NullModel;
use labe_core::statistics::{draw_null, Sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A reproducible null sample of size `n`.
pub fn null_sample(null: NullModel, n: usize, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_null(null, n, &mut rng).expect("null sample")
}

/// Small refinement schedule so that eigenvalue benchmarks finish quickly.
pub const SMALL_SCHEDULE: [(usize, f64); 2] = [(100, 10.0), (200, 12.0)];
