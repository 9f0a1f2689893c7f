//! Model-risk quantification against an empirical alternative: estimate
//! the divergence between a fitted nominal model and an observed dataset,
//! then bootstrap the loss of running the non-robust strategy when the
//! empirical law is the one that materializes.

use rand::Rng;
use rand::SeedableRng;

use crate::divergence::{kl_knn_estimate, KnnConfig};
use crate::error::{Error, Result};
use crate::numerics::{empirical_quantile, Matrix};
use crate::sampling::{sample_mvn, substream_seed};
use crate::types::Strategy;

/// Outcome of the model-risk pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRiskResult {
    /// Average of the positive nearest-neighbor divergence estimates.
    pub estimated_eta: f64,
    /// Loss quantile per unit of initial wealth: with probability `q` the
    /// non-robust shortfall against the robust strategy stays below this.
    pub model_risk: f64,
    /// Confidence level `q`.
    pub confidence: f64,
    /// Bootstrap sample of `W_N^nonrobust - W_N^robust`.
    pub diff_sample: Vec<f64>,
}

/// Repeated nearest-neighbor estimate of the divergence between a fitted
/// Gaussian nominal model and an observed dataset: each repeat draws a
/// fresh nominal sample of the dataset's size, estimates the divergence,
/// and only positive estimates are kept and averaged.
pub fn estimate_divergence_repeated(
    nominal_mu: &[f64],
    nominal_sigma: &Matrix,
    dataset: &Matrix,
    cfg: &KnnConfig,
    seed: u64,
) -> Result<f64> {
    if dataset.rows() < cfg.k + 1 {
        return Err(Error::InsufficientData {
            what: "divergence dataset",
            needed: cfg.k + 1,
            actual: dataset.rows(),
        });
    }
    if cfg.repeats == 0 {
        return Err(Error::InvalidParameter { what: "divergence repeats", value: 0.0 });
    }
    let mut kept = 0usize;
    let mut acc = 0.0;
    for rep in 0..cfg.repeats {
        let nominal = sample_mvn(
            nominal_mu,
            nominal_sigma,
            dataset.rows(),
            substream_seed(seed, &format!("divergence-repeat-{rep}")),
        )?;
        let estimate = kl_knn_estimate(nominal.draws(), dataset, cfg)?;
        if estimate.value > 0.0 {
            kept += 1;
            acc += estimate.value;
        }
    }
    if kept == 0 {
        return Err(Error::AllEstimatesRejected { repeats: cfg.repeats });
    }
    Ok(acc / kept as f64)
}

/// Loss quantile of the sorted difference sample: minus its
/// `(1 - q)`-quantile.
pub fn quantile_risk(diffs: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter { what: "confidence level q", value: q });
    }
    Ok(-empirical_quantile(diffs, 1.0 - q)?)
}

/// Bootstraps `boot_count` return paths from the empirical dataset (rows
/// resampled with replacement, independently across the horizon, so
/// cross-asset dependence within a day is preserved), evaluates both
/// strategies on the same paths, and reports the `(1 - q)`-quantile loss
/// of the non-robust strategy against the robust one.
///
/// `estimated_eta` is carried through to the result; the robust strategy
/// is expected to have been solved at that radius.
pub fn model_risk_quantile(
    robust: &Strategy,
    nonrobust: &Strategy,
    dataset: &Matrix,
    estimated_eta: f64,
    boot_count: usize,
    q: f64,
    seed: u64,
) -> Result<ModelRiskResult> {
    if robust.horizon() != nonrobust.horizon() || robust.assets() != nonrobust.assets() {
        return Err(Error::DimensionMismatch {
            what: "model risk strategies",
            expected: robust.horizon(),
            actual: nonrobust.horizon(),
        });
    }
    if dataset.cols() != robust.assets() {
        return Err(Error::DimensionMismatch {
            what: "model risk dataset",
            expected: robust.assets(),
            actual: dataset.cols(),
        });
    }
    if dataset.rows() == 0 {
        return Err(Error::InsufficientData { what: "model risk dataset", needed: 1, actual: 0 });
    }
    if boot_count == 0 {
        return Err(Error::InvalidParameter { what: "bootstrap count", value: 0.0 });
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter { what: "confidence level q", value: q });
    }

    let horizon = robust.horizon();
    let rows = dataset.rows();
    let mut rng = rand::rngs::StdRng::seed_from_u64(substream_seed(seed, "model-risk-bootstrap"));
    let mut diffs = Vec::with_capacity(boot_count);
    for _ in 0..boot_count {
        let mut w_robust = 1.0;
        let mut w_nonrobust = 1.0;
        for n in 0..horizon {
            let row = dataset.row(rng.gen_range(0..rows));
            // dataset rows are net returns; payoffs use gross returns
            let mut robust_payoff = 0.0;
            let mut nonrobust_payoff = 0.0;
            let ur = robust.row(n);
            let un = nonrobust.row(n);
            for j in 0..row.len() {
                let gross = 1.0 + row[j];
                robust_payoff += gross * ur[j];
                nonrobust_payoff += gross * un[j];
            }
            w_robust *= robust_payoff;
            w_nonrobust *= nonrobust_payoff;
        }
        diffs.push(w_nonrobust - w_robust);
    }
    let model_risk = quantile_risk(&diffs, q)?;
    Ok(ModelRiskResult {
        estimated_eta,
        model_risk,
        confidence: q,
        diff_sample: diffs,
    })
}

/// Histogram of the difference sample on equal-width bins; the plotting
/// series behind the diff distribution figure.
pub fn diff_histogram(diffs: &[f64], bins: usize) -> Result<Vec<(f64, f64, usize)>> {
    if diffs.is_empty() || bins == 0 {
        return Err(Error::InsufficientData { what: "histogram input", needed: 1, actual: 0 });
    }
    let min = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if max > min { (max - min) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &d in diffs {
        let mut idx = ((d - min) / width) as usize;
        if idx >= bins {
            idx = bins - 1;
        }
        counts[idx] += 1;
    }
    Ok((0..bins)
        .map(|i| (min + i as f64 * width, min + (i + 1) as f64 * width, counts[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::mean;

    fn fitted_model() -> (Vec<f64>, Matrix) {
        (
            vec![0.0009, 0.0019, 0.0014],
            Matrix::from_rows(&[
                vec![0.0003, 0.0001, 0.0001],
                vec![0.0001, 0.0003, 0.0001],
                vec![0.0001, 0.0001, 0.0002],
            ])
            .unwrap(),
        )
    }

    #[test]
    fn repeated_estimate_small_when_dataset_matches_nominal() {
        let (mu, sigma) = fitted_model();
        let dataset = sample_mvn(&mu, &sigma, 60, 404).unwrap();
        let cfg = KnnConfig { k: 5, repeats: 1000 };
        let est = estimate_divergence_repeated(&mu, &sigma, dataset.draws(), &cfg, 77).unwrap();
        // positive-only filtering biases upward; stay under the bound
        assert!(est >= 0.0);
        assert!(est <= 0.15, "estimate {est}");
    }

    #[test]
    fn repeated_estimate_tracks_known_divergence_at_small_samples() {
        // Alternative on the 0.5 divergence ring of an identity Gaussian.
        // At 60 observations the neighbor estimator carries a sizable
        // downward small-sample bias (roughly -0.2 here, measured over many
        // dataset draws), so the band is calibrated to that, not to the
        // asymptotic value. The large-sample accuracy test lives with the
        // estimator itself.
        let eye = Matrix::identity(3);
        let mu0 = vec![0.0, 0.0, 0.0];
        let mu1 = vec![1.0, 0.0, 0.0];
        let dataset = sample_mvn(&mu1, &eye, 60, 505).unwrap();
        let cfg = KnnConfig { k: 5, repeats: 1000 };
        let est = estimate_divergence_repeated(&mu0, &eye, dataset.draws(), &cfg, 88).unwrap();
        assert!(est > 0.5 - 0.35 && est < 0.5 + 0.2, "estimate {est}");
    }

    #[test]
    fn repeated_estimate_reports_all_rejected() {
        // With the dataset drawn from the fitted model itself the true
        // divergence is zero and single estimates are coin-flip negative;
        // this dataset/master seed pair pins two negative repeats.
        let (mu, sigma) = fitted_model();
        let dataset = sample_mvn(&mu, &sigma, 60, 4240).unwrap();
        let cfg = KnnConfig { k: 5, repeats: 2 };
        match estimate_divergence_repeated(&mu, &sigma, dataset.draws(), &cfg, 4) {
            Err(Error::AllEstimatesRejected { repeats }) => assert_eq!(repeats, 2),
            other => panic!("expected AllEstimatesRejected, got {other:?}"),
        }
    }

    #[test]
    fn identical_strategies_have_zero_risk() {
        let strat = Strategy::from_rows(&vec![vec![0.5, 0.5]; 2]).unwrap();
        let dataset = Matrix::from_rows(&[vec![0.01, -0.002], vec![-0.004, 0.003]]).unwrap();
        for q in [0.5, 0.9, 0.99] {
            let result =
                model_risk_quantile(&strat, &strat, &dataset, 0.1, 2_000, q, 3).unwrap();
            assert_eq!(result.model_risk, 0.0);
        }
    }

    #[test]
    fn single_row_dataset_gives_deterministic_difference() {
        let robust = Strategy::from_rows(&[vec![0.6, 0.4]]).unwrap();
        let nonrobust = Strategy::from_rows(&[vec![0.2, 0.8]]).unwrap();
        let dataset = Matrix::from_rows(&[vec![0.02, -0.01]]).unwrap();
        let result = model_risk_quantile(&robust, &nonrobust, &dataset, 0.0, 500, 0.95, 4).unwrap();
        let w_r = 0.6 * 1.02 + 0.4 * 0.99;
        let w_n = 0.2 * 1.02 + 0.8 * 0.99;
        let expected = w_n - w_r;
        assert!((result.model_risk - (-expected)).abs() <= 1e-15);
        assert!(result.diff_sample.iter().all(|d| (d - expected).abs() <= 1e-15));
    }

    #[test]
    fn two_point_dataset_matches_exhaustive_enumeration() {
        // Two empirical rows and a two-period horizon: only four path
        // outcomes exist, each with probability 1/4. The bootstrap
        // quantile must land exactly on the enumerated one.
        let robust = Strategy::from_rows(&vec![vec![0.5, 0.5]; 2]).unwrap();
        let nonrobust = Strategy::from_rows(&vec![vec![0.9, 0.1]; 2]).unwrap();
        let rows = [vec![0.05, -0.01], vec![-0.06, 0.02]];
        let dataset = Matrix::from_rows(&rows).unwrap();

        let payoff = |w: &[f64], r: &[f64]| w[0] * (1.0 + r[0]) + w[1] * (1.0 + r[1]);
        let mut outcomes = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                let w_r = payoff(&[0.5, 0.5], &rows[a]) * payoff(&[0.5, 0.5], &rows[b]);
                let w_n = payoff(&[0.9, 0.1], &rows[a]) * payoff(&[0.9, 0.1], &rows[b]);
                outcomes.push(w_n - w_r);
            }
        }
        // enumerated lower 5% quantile: the worst outcome (mass 1/4 >> 5%)
        let oracle = -outcomes.iter().copied().fold(f64::INFINITY, f64::min);

        let result =
            model_risk_quantile(&robust, &nonrobust, &dataset, 0.0, 40_000, 0.95, 5).unwrap();
        assert_eq!(result.model_risk, oracle);
        // every bootstrap diff is one of the enumerated outcomes
        for d in &result.diff_sample {
            assert!(outcomes.iter().any(|o| (o - d).abs() <= 1e-15));
        }
    }

    #[test]
    fn quantile_risk_translation_consistency() {
        let diffs = vec![-0.5, -0.1, 0.0, 0.2, 0.4, 0.9, -0.3, 0.05];
        let base = quantile_risk(&diffs, 0.75).unwrap();
        let shifted: Vec<f64> = diffs.iter().map(|d| d + 0.25).collect();
        let moved = quantile_risk(&shifted, 0.75).unwrap();
        assert!((moved - (base - 0.25)).abs() <= 1e-15);
    }

    #[test]
    fn quantile_risk_monotone_in_confidence() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(8);
        let diffs: Vec<f64> = (0..501).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut prev = f64::NEG_INFINITY;
        for i in 1..20 {
            let q = i as f64 / 20.0;
            let risk = quantile_risk(&diffs, q).unwrap();
            assert!(risk >= prev - 1e-15, "q {q}");
            prev = risk;
        }
    }

    #[test]
    fn shortfall_fraction_respects_confidence() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        let diffs: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let risk = quantile_risk(&diffs, 0.95).unwrap();
        let below = diffs.iter().filter(|d| **d < -risk).count() as f64;
        assert!(below / diffs.len() as f64 <= 0.05);
        let _ = mean(&diffs);
    }

    #[test]
    fn histogram_covers_all_mass() {
        let diffs = vec![-1.0, -0.5, 0.0, 0.5, 1.0, 0.25];
        let hist = diff_histogram(&diffs, 4).unwrap();
        let total: usize = hist.iter().map(|(_, _, c)| c).sum();
        assert_eq!(total, diffs.len());
        assert_eq!(hist.len(), 4);
    }
}
