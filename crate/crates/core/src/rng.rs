//! Seed derivation and random test-case generation.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;
use crate::stats::{QueryId, RewardGroup, WeightVector};

/// Stream generator used everywhere in the crate.
pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(master, stream)`; distinct streams give unrelated seeds.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    mix64(mix64(master) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn stream(master: u64, stream: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, stream))
}

/// Weights drawn uniformly from the probability simplex (flat Dirichlet).
pub fn simplex_weights<R: Rng + ?Sized>(rng: &mut R, n: usize) -> WeightVector {
    let draws: Vec<f64> = (0..n).map(|_| -libm::log(1.0 - rng.gen::<f64>())).collect();
    let total: f64 = draws.iter().sum();
    let mut w: Vec<f64> = draws.iter().map(|d| d / total).collect();
    // Push the rounding residue into the largest entry so the sum is 1 to the ulp.
    let residue = 1.0 - w.iter().sum::<f64>();
    if let Some(max) = w.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max = (*max + residue).clamp(0.0, 1.0);
    }
    WeightVector::new(w).expect("normalized draws form a valid weight vector")
}

/// `g × n` rewards drawn uniformly from `[0, 1]`.
pub fn uniform_group<R: Rng + ?Sized>(rng: &mut R, query: QueryId, g: usize, n: usize) -> RewardGroup {
    let data = (0..g * n).map(|_| rng.gen::<f64>()).collect();
    let rewards = Matrix::from_row_major(g, n, data).expect("buffer sized g * n");
    RewardGroup::new(query, rewards).expect("uniform draws lie in [0, 1]")
}
