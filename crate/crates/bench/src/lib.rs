//! Shared fixtures for the benchmark targets.

use robustmsd::numerics::Matrix;
use robustmsd::sampling::sample_mvn;
use robustmsd::types::{NominalModel, ReturnSample};

/// The three-asset daily-return model used across the benchmarks.
pub fn reference_model() -> NominalModel {
    NominalModel::new(
        vec![0.0007, 0.0022, 0.0016],
        Matrix::from_rows(&[
            vec![0.0003, 0.0001, 0.0001],
            vec![0.0001, 0.0004, 0.0001],
            vec![0.0001, 0.0001, 0.0003],
        ])
        .expect("square covariance"),
    )
    .expect("positive definite covariance")
}

/// A gross-return sample from the reference model.
pub fn reference_sample(count: usize, seed: u64) -> ReturnSample {
    let model = reference_model();
    sample_mvn(&model.gross_mean(), model.sigma(), count, seed).expect("sampling")
}
