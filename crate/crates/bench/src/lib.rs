//! Seeded inputs shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use recession_core::synth::simulate_arma;
use recession_core::FeatureMatrix;

/// An ARMA(1,1) path around a positive level, the size of a full monthly history.
pub fn arma_levels(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_arma(&mut rng, 50_000.0, &[0.7], &[0.3], 800.0, n, 200)
}

/// `n` rows of `p` correlated Gaussian features.
pub fn features(seed: u64, n: usize, p: usize) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            (0..p).map(|j| z[j] + 0.5 * z[(j + 1) % p]).collect()
        })
        .collect();
    FeatureMatrix::from_complete(
        (0..n).map(|i| format!("r{i}")).collect(),
        (0..p).map(|j| format!("f{j}")).collect(),
        rows,
    )
    .expect("complete matrix")
}
