//! Sample-average evaluator of the multi-period mean-standard-deviation
//! objective under the nominal measure.

use crate::error::{Error, Result};
use crate::numerics;
use crate::types::{NominalModel, PortfolioSpec, ReturnSample, RiskProfile, Strategy};

/// Evaluates the objective of a strategy: the sum over periods of
/// `E[W_{n+1}] - kappa_n E[W_n] sqrt(u_n' Sigma u_n)`, with the expected
/// wealth propagated multiplicatively through the sample means of the
/// period payoffs. Returns are independent of current wealth, so the
/// expectation factorizes this way exactly.
pub fn evaluate_objective(
    spec: &PortfolioSpec,
    model: &NominalModel,
    profile: &RiskProfile,
    strategy: &Strategy,
    sample: &ReturnSample,
) -> Result<f64> {
    if strategy.horizon() != spec.horizon || profile.horizon() != spec.horizon {
        return Err(Error::DimensionMismatch {
            what: "objective horizon",
            expected: spec.horizon,
            actual: strategy.horizon(),
        });
    }
    if strategy.assets() != spec.assets || model.dim() != spec.assets || sample.dim() != spec.assets
    {
        return Err(Error::DimensionMismatch {
            what: "objective asset count",
            expected: spec.assets,
            actual: strategy.assets(),
        });
    }
    let mut expected_wealth = spec.w0;
    let mut total = 0.0;
    for n in 0..spec.horizon {
        let weights = strategy.row(n);
        let mean_payoff = numerics::mean(&sample.payoffs(weights)?);
        let vol = portfolio_vol(model, weights)?;
        let next_wealth = expected_wealth * mean_payoff;
        total += next_wealth - profile.kappa()[n] * expected_wealth * vol;
        expected_wealth = next_wealth;
        if !total.is_finite() || !expected_wealth.is_finite() {
            return Err(Error::NonFinite { what: "objective accumulation" });
        }
    }
    Ok(total)
}

/// `sqrt(u' Sigma u)` under the nominal covariance.
pub fn portfolio_vol(model: &NominalModel, weights: &[f64]) -> Result<f64> {
    let sw = model.sigma().mat_vec(weights)?;
    let var = numerics::dot(weights, &sw);
    if var < 0.0 {
        return Err(Error::NonFinite { what: "portfolio variance" });
    }
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use crate::sampling;

    fn setup(horizon: usize, kappa: f64) -> (PortfolioSpec, NominalModel, RiskProfile) {
        let spec = PortfolioSpec::new(2, horizon, 1.0).unwrap();
        let sigma = Matrix::from_rows(&[vec![0.04, 0.01], vec![0.01, 0.09]]).unwrap();
        let model = NominalModel::new(vec![0.05, 0.08], sigma).unwrap();
        let profile =
            RiskProfile::constant(horizon, kappa, 0.0, vec![0.0; horizon - 1]).unwrap();
        (spec, model, profile)
    }

    #[test]
    fn zero_risk_aversion_is_pure_expectation() {
        let (spec, model, _) = setup(3, 1.0);
        // kappa must stay positive; approximate the zero-penalty limit.
        let profile = RiskProfile::constant(3, 1e-300, 0.0, vec![0.0, 0.0]).unwrap();
        let sample = sampling::sample_mvn(&model.gross_mean(), model.sigma(), 500, 42).unwrap();
        let strat = Strategy::from_rows(&vec![vec![0.3, 0.7]; 3]).unwrap();
        let value = evaluate_objective(&spec, &model, &profile, &strat, &sample).unwrap();
        // oracle: sum of E[W_{n+1}] with W propagated through sample means
        let m = numerics::mean(&sample.payoffs(strat.row(0)).unwrap());
        let oracle = m + m * m + m * m * m;
        assert!((value - oracle).abs() < 1e-12);
    }

    #[test]
    fn equal_marginals_penalty_identity() {
        // Two assets with identical marginal variance: the (0.5, 0.5)
        // penalty equals kappa * wealth * sqrt((s11 + 2 s12 + s22) / 4).
        let spec = PortfolioSpec::new(2, 1, 1.0).unwrap();
        let sigma = Matrix::from_rows(&[vec![0.04, 0.01], vec![0.01, 0.04]]).unwrap();
        let model = NominalModel::new(vec![0.02, 0.02], sigma).unwrap();
        let profile = RiskProfile::constant(1, 2.0, 0.0, vec![]).unwrap();
        let sample = sampling::sample_mvn(&model.gross_mean(), model.sigma(), 400, 9).unwrap();
        let strat = Strategy::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let value = evaluate_objective(&spec, &model, &profile, &strat, &sample).unwrap();
        let mean_payoff = numerics::mean(&sample.payoffs(strat.row(0)).unwrap());
        let penalty = 2.0 * 1.0 * ((0.04 + 2.0 * 0.01 + 0.04) / 4.0f64).sqrt();
        assert!((value - (mean_payoff - penalty)).abs() < 1e-14);
    }

    #[test]
    fn single_period_matches_brute_force_oracle() {
        let (spec0, model, _) = setup(1, 3.0);
        let profile = RiskProfile::constant(1, 3.0, 0.0, vec![]).unwrap();
        let sample = sampling::sample_mvn(&model.gross_mean(), model.sigma(), 1000, 7).unwrap();
        let strat = Strategy::from_rows(&[vec![0.4, 0.6]]).unwrap();
        let value = evaluate_objective(&spec0, &model, &profile, &strat, &sample).unwrap();
        // brute force: plain loop over draws, textbook formulas
        let mut acc = 0.0;
        for i in 0..sample.len() {
            let r = sample.draws().row(i);
            acc += r[0] * 0.4 + r[1] * 0.6;
        }
        let mean_payoff = acc / sample.len() as f64;
        let var: f64 = 0.4 * 0.4 * 0.04 + 2.0 * 0.4 * 0.6 * 0.01 + 0.6 * 0.6 * 0.09;
        let oracle = mean_payoff - 3.0 * var.sqrt();
        assert!((value - oracle).abs() < 1e-12);
    }

    #[test]
    fn invariant_under_row_permutation() {
        let (spec, model, profile) = setup(2, 3.0);
        let sample = sampling::sample_mvn(&model.gross_mean(), model.sigma(), 300, 5).unwrap();
        let strat = Strategy::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        let v1 = evaluate_objective(&spec, &model, &profile, &strat, &sample).unwrap();
        // reverse the rows
        let rows: Vec<Vec<f64>> = (0..sample.len())
            .rev()
            .map(|i| sample.draws().row(i).to_vec())
            .collect();
        let reversed = ReturnSample::new(Matrix::from_rows(&rows).unwrap(), 0).unwrap();
        let v2 = evaluate_objective(&spec, &model, &profile, &strat, &reversed).unwrap();
        assert!((v1 - v2).abs() <= 1e-12 * v1.abs().max(1.0));
    }

    #[test]
    fn scales_linearly_in_initial_wealth() {
        let (_, model, profile) = setup(2, 3.0);
        let sample = sampling::sample_mvn(&model.gross_mean(), model.sigma(), 300, 5).unwrap();
        let strat = Strategy::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        let spec1 = PortfolioSpec::new(2, 2, 1.0).unwrap();
        let spec3 = PortfolioSpec::new(2, 2, 3.0).unwrap();
        let v1 = evaluate_objective(&spec1, &model, &profile, &strat, &sample).unwrap();
        let v3 = evaluate_objective(&spec3, &model, &profile, &strat, &sample).unwrap();
        assert!((v3 - 3.0 * v1).abs() <= 1e-12 * v1.abs().max(1.0));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let (spec, model, profile) = setup(2, 3.0);
        let sample = sampling::sample_mvn(&model.gross_mean(), model.sigma(), 300, 5).unwrap();
        let strat = Strategy::from_rows(&[vec![0.5, 0.5]]).unwrap(); // wrong horizon
        assert!(evaluate_objective(&spec, &model, &profile, &strat, &sample).is_err());
    }
}
