//! Fixtures shared by the benchmarks.

use collapse_core::rng::{substream, Stream};
use collapse_core::ComponentBank;
use rand::Rng;

/// One-dimensional bank with `components` means spaced 10 apart.
pub fn spaced_bank(components: usize) -> ComponentBank {
    let means: Vec<f64> = (0..components).map(|b| 10.0 * b as f64).collect();
    ComponentBank::scalar(&means, 1.0).expect("valid bank")
}

/// `count` points of dimension `dim`, uniform on [-scale, scale].
pub fn uniform_points(count: usize, dim: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = substream(seed, Stream::Model, 0, 0);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}
