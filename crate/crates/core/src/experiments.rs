//! Worst-case scenario construction and paired-path comparison of the
//! robust and non-robust strategies.
//!
//! Two scenario families are supported: a Gaussian whose mean is scaled
//! onto a target divergence ring, and a skew-normal whose skewness shifts
//! the mean by a given percentage while location and scale stay nominal.

use crate::divergence::{kl_normal, kl_skew_normal};
use crate::error::{Error, Result};
use crate::numerics::{self, cholesky, sqrt_spd, Matrix};
use crate::sampling::{sample_mvn, sample_skew_normal, substream_seed, SkewNormalParams};
use crate::solver::{solve_horizon, HorizonSolution, Mode, SolverOptions};
use crate::types::{NominalModel, PortfolioSpec, ReturnSample, RiskProfile, Strategy};

/// A fully determined worst-case return distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSpec {
    /// Gaussian with mean `gamma * mu` and the nominal covariance.
    GaussianScaledMean { eta: f64, gamma: f64 },
    /// Skew-normal with nominal location and scale whose skewness moves
    /// the mean by `beta_pct` percent of the nominal mean.
    SkewNormal {
        eta: f64,
        beta_pct: f64,
        xi_bar: Vec<f64>,
    },
}

impl ScenarioSpec {
    pub fn eta(&self) -> f64 {
        match self {
            ScenarioSpec::GaussianScaledMean { eta, .. } => *eta,
            ScenarioSpec::SkewNormal { eta, .. } => *eta,
        }
    }

    /// Draws a block of gross returns from the worst-case law.
    pub fn sample_gross(
        &self,
        model: &NominalModel,
        count: usize,
        seed: u64,
    ) -> Result<ReturnSample> {
        match self {
            ScenarioSpec::GaussianScaledMean { gamma, .. } => {
                let mean: Vec<f64> = model.mu().iter().map(|m| 1.0 + gamma * m).collect();
                sample_mvn(&mean, model.sigma(), count, seed)
            }
            ScenarioSpec::SkewNormal { xi_bar, .. } => {
                let params = SkewNormalParams::new(
                    model.gross_mean(),
                    model.sigma().clone(),
                    xi_bar.clone(),
                )?;
                sample_skew_normal(&params, count, seed)
            }
        }
    }
}

/// Mean scale `gamma <= 1` putting the scaled-mean Gaussian on the KL ring
/// of radius `eta`: the closed form collapses to
/// `eta = (1 - gamma)^2 q / 2` with `q = mu' Sigma^-1 mu`, and the
/// pessimistic branch `gamma = 1 - sqrt(2 eta / q)` is taken.
pub fn gamma_for_eta(mu: &[f64], sigma: &Matrix, eta: f64) -> Result<f64> {
    let chol = cholesky(sigma)?;
    let q = chol.inv_quad(mu)?;
    gamma_from_precision(q, eta)
}

/// Same calibration from a precomputed `q = mu' Sigma^-1 mu`.
pub fn gamma_from_precision(q: f64, eta: f64) -> Result<f64> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter { what: "scenario eta", value: eta });
    }
    if !(q > 0.0) {
        return Err(Error::InvalidParameter {
            what: "mean precision q (zero mean cannot reach a positive radius)",
            value: q,
        });
    }
    Ok(1.0 - (2.0 * eta / q).sqrt())
}

/// The divergence radius a scaled-mean Gaussian sits on: the inverse of
/// [`gamma_from_precision`].
pub fn eta_for_gamma(q: f64, gamma: f64) -> f64 {
    0.5 * (1.0 - gamma) * (1.0 - gamma) * q
}

/// Skewness vector moving the skew-normal mean by `beta_pct` percent of
/// the nominal mean while location and scale stay nominal:
/// `xi = sqrt(pi/2) Sigma^{-1/2} mu (beta / 100)`, so the worst-case mean
/// is `(1 + beta/100) mu`. The symmetric square root is used throughout.
pub fn xi_for_beta(mu: &[f64], sigma: &Matrix, beta_pct: f64) -> Result<SkewNormalParams> {
    if !beta_pct.is_finite() {
        return Err(Error::InvalidParameter { what: "beta percent", value: beta_pct });
    }
    let (_, inv_root) = sqrt_spd(sigma)?;
    let projected = inv_root.mat_vec(mu)?;
    let factor = (std::f64::consts::PI / 2.0).sqrt() * beta_pct / 100.0;
    let xi: Vec<f64> = projected.iter().map(|p| factor * p).collect();
    let norm2 = numerics::dot(&xi, &xi);
    if !(norm2 < 1.0) {
        return Err(Error::BetaOutOfRange {
            beta_pct,
            skew_norm: norm2.sqrt(),
        });
    }
    SkewNormalParams::new(mu.to_vec(), sigma.clone(), xi)
}

/// Builds the scaled-mean Gaussian scenario on the `eta` ring.
pub fn gaussian_scenario(model: &NominalModel, eta: f64) -> Result<ScenarioSpec> {
    let gamma = gamma_for_eta(model.mu(), model.sigma(), eta)?;
    Ok(ScenarioSpec::GaussianScaledMean { eta, gamma })
}

/// Builds the skew-normal scenario for a mean shift of `beta_pct` percent
/// and computes its companion divergence radius by Monte Carlo.
pub fn skew_scenario(
    model: &NominalModel,
    beta_pct: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<ScenarioSpec> {
    let params = xi_for_beta(model.mu(), model.sigma(), beta_pct)?;
    let nominal = SkewNormalParams::new(
        model.mu().to_vec(),
        model.sigma().clone(),
        vec![0.0; model.dim()],
    )?;
    let est = kl_skew_normal(&nominal, &params, mc_samples, seed)?;
    Ok(ScenarioSpec::SkewNormal {
        eta: est.value,
        beta_pct,
        xi_bar: params.skew().to_vec(),
    })
}

/// Divergence of the scaled-mean Gaussian against the nominal model,
/// closed form; kept next to the calibration for cross-checks.
pub fn gaussian_scenario_divergence(model: &NominalModel, gamma: f64) -> Result<f64> {
    let alt: Vec<f64> = model.mu().iter().map(|m| gamma * m).collect();
    kl_normal(model.mu(), model.sigma(), &alt, model.sigma())
}

/// Performance comparison of two strategies over paired worst-case paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Paths on which the robust terminal wealth strictly exceeds the
    /// non-robust one; ties count as non-outperformance.
    pub outperform_count: u64,
    /// `outperform_count / path_count`, in percent.
    pub outperform_pct: f64,
    pub mean_wealth_robust: f64,
    pub mean_wealth_nonrobust: f64,
    /// `(E[W_N] - W_0) / sd(W_N)` under the simulated worst-case paths.
    pub ratio_robust: f64,
    pub ratio_nonrobust: f64,
    pub path_count: usize,
    pub seed: u64,
}

impl ComparisonReport {
    pub fn mean_difference(&self) -> f64 {
        self.mean_wealth_robust - self.mean_wealth_nonrobust
    }

    pub fn ratio_difference(&self) -> f64 {
        self.ratio_robust - self.ratio_nonrobust
    }
}

/// Knobs of the simulation study pipeline.
#[derive(Debug, Clone)]
pub struct StudySettings {
    pub kappa: f64,
    /// Future-payoff penalty products, one per period after the first.
    /// The reference tables are reproduced with zeros; see `study_robust`.
    pub penalties: Vec<f64>,
    pub mc_samples: usize,
    pub path_count: usize,
    pub solver: SolverOptions,
}

/// Non-robust baseline of the study: the closed form driven by Monte
/// Carlo draws from the nominal model.
pub fn study_baseline(
    spec: &PortfolioSpec,
    model: &NominalModel,
    settings: &StudySettings,
    seed: u64,
) -> Result<HorizonSolution> {
    let profile = RiskProfile::constant(
        spec.horizon,
        settings.kappa,
        0.0,
        settings.penalties.clone(),
    )?;
    let samples: Result<Vec<ReturnSample>> = (0..spec.horizon)
        .map(|n| {
            sample_mvn(
                &model.gross_mean(),
                model.sigma(),
                settings.mc_samples,
                substream_seed(seed, &format!("study-baseline-period-{n}")),
            )
        })
        .collect();
    solve_horizon(spec, model, &profile, &samples?, Mode::NonRobust, &settings.solver)
}

/// Robust leg of the study: the per-period system solved on Monte Carlo
/// draws from the worst-case scenario itself, at the scenario's radius.
/// The study premise is that the worst case is the law that materializes,
/// so the solver's sample-average expectations are taken under it.
pub fn study_robust(
    spec: &PortfolioSpec,
    model: &NominalModel,
    scenario: &ScenarioSpec,
    settings: &StudySettings,
    seed: u64,
) -> Result<HorizonSolution> {
    let profile = RiskProfile::constant(
        spec.horizon,
        settings.kappa,
        scenario.eta(),
        settings.penalties.clone(),
    )?;
    let samples: Result<Vec<ReturnSample>> = (0..spec.horizon)
        .map(|n| {
            scenario.sample_gross(
                model,
                settings.mc_samples,
                substream_seed(seed, &format!("study-robust-period-{n}")),
            )
        })
        .collect();
    solve_horizon(spec, model, &profile, &samples?, Mode::Robust, &settings.solver)
}

/// One full comparison row: robust leg, baseline leg (reused when given),
/// and the paired-path comparison under the scenario.
pub fn study_row(
    spec: &PortfolioSpec,
    model: &NominalModel,
    scenario: &ScenarioSpec,
    settings: &StudySettings,
    baseline: &Strategy,
    seed: u64,
) -> Result<ComparisonReport> {
    let robust = study_robust(spec, model, scenario, settings, seed)?;
    compare_strategies(
        spec,
        model,
        &robust.strategy()?,
        baseline,
        scenario,
        settings.path_count,
        substream_seed(seed, "study-compare"),
    )
}

/// Simulates `path_count` paired paths from the worst-case distribution
/// (common random numbers: both strategies see the same draws) and
/// tabulates outperformance counts, mean terminal wealths and
/// mean-to-dispersion ratios.
pub fn compare_strategies(
    spec: &PortfolioSpec,
    model: &NominalModel,
    robust: &Strategy,
    nonrobust: &Strategy,
    scenario: &ScenarioSpec,
    path_count: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    if robust.horizon() != spec.horizon || nonrobust.horizon() != spec.horizon {
        return Err(Error::DimensionMismatch {
            what: "comparison strategy horizon",
            expected: spec.horizon,
            actual: robust.horizon(),
        });
    }
    if robust.assets() != spec.assets || nonrobust.assets() != spec.assets {
        return Err(Error::DimensionMismatch {
            what: "comparison strategy assets",
            expected: spec.assets,
            actual: robust.assets(),
        });
    }
    if path_count == 0 {
        return Err(Error::InsufficientData {
            what: "comparison paths",
            needed: 1,
            actual: 0,
        });
    }

    let mut robust_wealth = vec![spec.w0; path_count];
    let mut nonrobust_wealth = vec![spec.w0; path_count];
    for period in 0..spec.horizon {
        let block = scenario.sample_gross(
            model,
            path_count,
            substream_seed(seed, &format!("compare-period-{period}")),
        )?;
        let robust_payoffs = block.payoffs(robust.row(period))?;
        let nonrobust_payoffs = block.payoffs(nonrobust.row(period))?;
        for i in 0..path_count {
            robust_wealth[i] *= robust_payoffs[i];
            nonrobust_wealth[i] *= nonrobust_payoffs[i];
        }
    }

    let outperform_count = robust_wealth
        .iter()
        .zip(nonrobust_wealth.iter())
        .filter(|(r, n)| r > n)
        .count() as u64;
    let mean_wealth_robust = numerics::mean(&robust_wealth);
    let mean_wealth_nonrobust = numerics::mean(&nonrobust_wealth);
    let sd_robust = numerics::std_dev(&robust_wealth);
    let sd_nonrobust = numerics::std_dev(&nonrobust_wealth);
    Ok(ComparisonReport {
        outperform_count,
        outperform_pct: 100.0 * outperform_count as f64 / path_count as f64,
        mean_wealth_robust,
        mean_wealth_nonrobust,
        ratio_robust: (mean_wealth_robust - spec.w0) / sd_robust,
        ratio_nonrobust: (mean_wealth_nonrobust - spec.w0) / sd_nonrobust,
        path_count,
        seed,
    })
}
