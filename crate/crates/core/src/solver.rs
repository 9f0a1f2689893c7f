//! Per-period robust inner/outer optimization and the backward induction
//! over the horizon, plus the positivity acceptance gate and the
//! non-robust baseline.
//!
//! Each period solves a max-min problem on a fixed Monte Carlo sample: the
//! inner minimization over the KL ball is an exponential tilt whose dual
//! multiplier is pinned by the binding constraint `E[w ln w] = eta`, and
//! the outer maximization over the budget hyperplane has a closed form
//! given the tilted mean. The two are coupled, so the solver runs a damped
//! fixed-point iteration warm-started from the non-robust solution.

use crate::divergence::kl_of_ratio_weights_unchecked;
use crate::error::{Error, Result};
use crate::numerics::{self, cholesky, CholeskyFactor, Matrix};
use crate::sampling::{tilt_components, TiltedMeasure};
use crate::types::{
    snap_budget, NominalModel, PortfolioSpec, ReturnSample, RiskProfile, Strategy, BUDGET_TOL,
};

/// Solver knobs; the defaults match the documented tolerances.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Damping factor of the outer fixed-point update, in (0, 1].
    pub damping: f64,
    /// Sup-norm tolerance on the weight update.
    pub weight_tol: f64,
    /// Absolute tolerance on the KL binding constraint.
    pub kl_tol: f64,
    /// Maximum outer iterations per period.
    pub max_iter: usize,
    /// Re-solve from an equal-weight start and compare; a disagreement
    /// beyond 1e-6 is reported on the period solution.
    pub multi_start: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            damping: 0.5,
            weight_tol: 1e-9,
            kl_tol: 1e-8,
            max_iter: 500,
            multi_start: false,
        }
    }
}

/// Which side of the comparison to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Robust,
    NonRobust,
}

/// Optimum of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSolution {
    /// Optimal wealth fractions; sums to one.
    pub weights: Vec<f64>,
    /// Dual multiplier of the KL constraint (0 for the non-robust form).
    pub theta: f64,
    /// Worst-case-tilted mean payoff vector, including the discounted
    /// continuation term.
    pub tilted_mean: Vec<f64>,
    /// `1' Sigma^-1 1`.
    pub ones_precision: f64,
    /// `1' Sigma^-1 X`.
    pub cross_precision: f64,
    /// `X' Sigma^-1 X`.
    pub mean_precision: f64,
    /// `X' Sigma^-1 X - (1' Sigma^-1 X)^2 / (1' Sigma^-1 1)`.
    pub centered_precision: f64,
    /// Scale of the risky tilt in the closed-form weights.
    pub risk_scale: f64,
    /// Value-function coefficient of this period: `V(n, x) = x G_n`.
    pub value_coeff: f64,
    /// KL divergence achieved by the tilted measure (0 when non-robust).
    pub kl_achieved: f64,
    /// Sup-norm disagreement between warm starts, when `multi_start` ran
    /// and the two fixed points differ beyond 1e-6.
    pub multi_start_gap: Option<f64>,
}

/// Backward-induction result over the whole horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSolution {
    /// Per-period optima, index n = 0..N-1.
    pub periods: Vec<PeriodSolution>,
    /// `V(0, W0) = W0 * G_0`.
    pub value_at_w0: f64,
    /// Positivity gate: true when every period passes.
    pub accepted: bool,
    /// Monte Carlo estimate of `P(W_{n+1} > 0 | W_n = 1)` per period.
    pub positivity_probs: Vec<f64>,
}

impl HorizonSolution {
    /// The optimal strategy as a weight matrix.
    pub fn strategy(&self) -> Result<Strategy> {
        let rows: Vec<Vec<f64>> = self.periods.iter().map(|p| p.weights.clone()).collect();
        Strategy::from_rows(&rows)
    }
}

/// Maximum KL divergence any tilt of the payoffs can reach: all mass on
/// the minimum-payoff draws, `ln(M / multiplicity of the minimum)`.
fn max_achievable_kl(payoffs: &[f64]) -> f64 {
    let min = payoffs.iter().copied().fold(f64::INFINITY, f64::min);
    let count = payoffs.iter().filter(|y| **y == min).count();
    ((payoffs.len() as f64) / (count as f64)).ln()
}

/// Solves the inner worst-case problem at fixed weights: finds the
/// multiplier `theta > 0` whose exponential tilt makes the KL constraint
/// bind, `E[w ln w] = eta`. Returns the tilted measure and the dual value
/// `-theta ln E[exp(-R.u / theta)] - eta theta` (the strategy-independent
/// part of the worst-case objective; the caller adds its own terms).
pub fn solve_inner(
    sample: &ReturnSample,
    weights: &[f64],
    eta: f64,
) -> Result<(TiltedMeasure, f64)> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter { what: "inner KL radius eta", value: eta });
    }
    let payoffs = sample.payoffs(weights)?;
    let inner = solve_inner_on_payoffs(&payoffs, eta, None)?;
    let dual = -inner.theta * inner.log_mean_exp - eta * inner.theta;
    Ok((
        TiltedMeasure::from_parts(inner.weights, inner.theta),
        dual,
    ))
}

struct InnerSolution {
    theta: f64,
    weights: Vec<f64>,
    log_mean_exp: f64,
    kl: f64,
}

/// Root-find on the monotone map `theta -> KL(theta)`: safeguarded secant
/// inside a bisection bracket. `KL` decreases from `ln(M/c)` at `theta -> 0`
/// to zero at `theta -> inf`.
fn solve_inner_on_payoffs(
    payoffs: &[f64],
    eta: f64,
    warm_theta: Option<f64>,
) -> Result<InnerSolution> {
    let spread_kl = max_achievable_kl(payoffs);
    if !(eta < spread_kl) {
        return Err(Error::EtaTooLargeForSample { eta, max_kl: spread_kl });
    }

    let kl_at = |theta: f64| -> Result<(f64, Vec<f64>, f64)> {
        let (weights, log_mean_exp) = tilt_components(payoffs, theta)?;
        let kl = kl_of_ratio_weights_unchecked(&weights);
        Ok((kl, weights, log_mean_exp))
    };

    // Initial point: the payoff dispersion, or the previous multiplier.
    let theta0 = match warm_theta {
        Some(t) if t > 0.0 && t.is_finite() => t,
        _ => {
            let sd = numerics::std_dev(payoffs);
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        }
    };

    // Bracket [lo, hi] with KL(lo) >= eta >= KL(hi).
    let mut lo = theta0;
    let mut hi = theta0;
    let (mut kl_lo, _, _) = kl_at(lo)?;
    let mut kl_hi = kl_lo;
    let mut guard = 0;
    while kl_lo < eta {
        hi = lo;
        kl_hi = kl_lo;
        lo *= 0.25;
        if lo < 1e-280 {
            return Err(Error::ThetaUnderflow { theta: lo });
        }
        let r = kl_at(lo)?;
        kl_lo = r.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::NoConvergence { residual: (kl_lo - eta).abs(), iterations: guard });
        }
    }
    guard = 0;
    while kl_hi > eta {
        lo = hi;
        kl_lo = kl_hi;
        hi *= 4.0;
        if hi > 1e290 {
            return Err(Error::NoConvergence { residual: (kl_hi - eta).abs(), iterations: guard });
        }
        let r = kl_at(hi)?;
        kl_hi = r.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::NoConvergence { residual: (kl_hi - eta).abs(), iterations: guard });
        }
    }

    // Safeguarded secant: accept the secant proposal when it lands inside
    // the bracket, and force a bisection whenever the previous step failed
    // to halve the interval, so the bracket width is guaranteed to shrink
    // geometrically. Iterate until the KL residual or the bracket width is
    // negligible.
    let mut best: Option<InnerSolution> = None;
    let mut force_bisection = false;
    let mut prev_width = hi - lo;
    for _ in 0..200 {
        let width = hi - lo;
        if width > 0.5 * prev_width {
            force_bisection = true;
        }
        prev_width = width;
        let mut candidate = if !force_bisection && (kl_lo - kl_hi).abs() > 1e-300 {
            lo + (kl_lo - eta) * width / (kl_lo - kl_hi)
        } else {
            0.5 * (lo + hi)
        };
        force_bisection = false;
        if !(candidate > lo && candidate < hi) {
            candidate = 0.5 * (lo + hi);
        }
        let (kl, weights, log_mean_exp) = kl_at(candidate)?;
        let residual = kl - eta;
        let improved = match &best {
            Some(b) => residual.abs() < (b.kl - eta).abs(),
            None => true,
        };
        if improved {
            best = Some(InnerSolution { theta: candidate, weights, log_mean_exp, kl });
        }
        if residual.abs() <= 1e-11 || width <= 1e-15 * hi {
            break;
        }
        if residual > 0.0 {
            lo = candidate;
            kl_lo = kl;
        } else {
            hi = candidate;
            kl_hi = kl;
        }
    }
    let best = best.ok_or(Error::NoConvergence { residual: f64::NAN, iterations: 0 })?;
    if (best.kl - eta).abs() > 1e-8 {
        return Err(Error::NoConvergence {
            residual: (best.kl - eta).abs(),
            iterations: 200,
        });
    }
    Ok(best)
}

/// Scalars of the closed-form outer optimum for a given mean vector.
struct OuterForm {
    weights: Vec<f64>,
    ones_precision: f64,
    cross_precision: f64,
    mean_precision: f64,
    centered_precision: f64,
    risk_scale: f64,
}

fn outer_closed_form(
    chol: &CholeskyFactor,
    mean_vec: &[f64],
    kappa: f64,
) -> Result<OuterForm> {
    let d = chol.dim();
    let ones = vec![1.0; d];
    let sigma_inv_ones = chol.solve(&ones)?;
    let sigma_inv_mean = chol.solve(mean_vec)?;
    let ones_precision = numerics::compensated_sum(sigma_inv_ones.iter().copied());
    let cross_precision = numerics::compensated_sum(sigma_inv_mean.iter().copied());
    let mean_precision = numerics::dot(mean_vec, &sigma_inv_mean);
    let centered_precision = mean_precision - cross_precision * cross_precision / ones_precision;
    let feasibility = 1.0 - centered_precision / (kappa * kappa);
    if !(feasibility > 0.0) {
        return Err(Error::KappaTooSmall { kappa, g: centered_precision });
    }
    let risk_scale = ((1.0 / ones_precision) / feasibility).sqrt();
    let mut weights = Vec::with_capacity(d);
    let ratio = cross_precision / ones_precision;
    for j in 0..d {
        weights.push(
            (risk_scale / kappa) * (sigma_inv_mean[j] - ratio * sigma_inv_ones[j])
                + sigma_inv_ones[j] / ones_precision,
        );
    }
    // The closed form satisfies the budget algebraically; anything beyond
    // rounding noise is a defect, not something to renormalize away.
    let residual = snap_budget(&mut weights);
    if residual.abs() > BUDGET_TOL {
        return Err(Error::BudgetViolation { sum: 1.0 + residual });
    }
    Ok(OuterForm {
        weights,
        ones_precision,
        cross_precision,
        mean_precision,
        centered_precision,
        risk_scale,
    })
}

/// Non-robust per-period optimum: the same closed form with the supplied
/// (untilted) mean vector; no dual multiplier, no KL terms. The value
/// coefficient is `X . u - kappa S`.
pub fn solve_period_nonrobust(
    sigma: &Matrix,
    kappa: f64,
    mean_vec: &[f64],
) -> Result<PeriodSolution> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter { what: "risk aversion kappa", value: kappa });
    }
    let chol = cholesky(sigma)?;
    let form = outer_closed_form(&chol, mean_vec, kappa)?;
    let value_coeff = numerics::dot(mean_vec, &form.weights) - kappa * form.risk_scale;
    Ok(PeriodSolution {
        weights: form.weights,
        theta: 0.0,
        tilted_mean: mean_vec.to_vec(),
        ones_precision: form.ones_precision,
        cross_precision: form.cross_precision,
        mean_precision: form.mean_precision,
        centered_precision: form.centered_precision,
        risk_scale: form.risk_scale,
        value_coeff,
        kl_achieved: 0.0,
        multi_start_gap: None,
    })
}

/// Robust per-period optimum on a Monte Carlo sample.
///
/// `discounted_continuation` is the already-discounted continuation
/// coefficient `exp(-penalty) G_{n+1}` and `mean_gross` the untilted mean
/// gross return of the sample; together they extend the tilted mean with
/// the continuation term. `eta = 0` dispatches to the non-robust closed
/// form.
pub fn solve_period(
    sample: &ReturnSample,
    sigma: &Matrix,
    kappa: f64,
    eta: f64,
    discounted_continuation: f64,
    mean_gross: &[f64],
    options: &SolverOptions,
) -> Result<PeriodSolution> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter { what: "risk aversion kappa", value: kappa });
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter { what: "KL radius eta", value: eta });
    }
    let d = sample.dim();
    if sample.len() < d + 1 {
        return Err(Error::InsufficientData {
            what: "solver sample",
            needed: d + 1,
            actual: sample.len(),
        });
    }

    // Non-robust mean vector doubles as the eta = 0 answer and as the
    // warm start of the fixed point.
    let base_mean: Vec<f64> = mean_gross
        .iter()
        .map(|m| (1.0 + discounted_continuation) * m)
        .collect();
    if eta == 0.0 {
        return solve_period_nonrobust(sigma, kappa, &base_mean);
    }

    let chol = cholesky(sigma)?;
    let warm = outer_closed_form(&chol, &base_mean, kappa)?;
    let solved = solve_period_from_start(
        sample,
        &chol,
        kappa,
        eta,
        discounted_continuation,
        mean_gross,
        warm.weights,
        options,
    )?;

    if !options.multi_start {
        return Ok(solved);
    }
    let equal = vec![1.0 / d as f64; d];
    let alt = solve_period_from_start(
        sample,
        &chol,
        kappa,
        eta,
        discounted_continuation,
        mean_gross,
        equal,
        options,
    )?;
    let gap = solved
        .weights
        .iter()
        .zip(alt.weights.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let mut out = solved;
    if gap > 1e-6 {
        out.multi_start_gap = Some(gap);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn solve_period_from_start(
    sample: &ReturnSample,
    chol: &CholeskyFactor,
    kappa: f64,
    eta: f64,
    discounted_continuation: f64,
    mean_gross: &[f64],
    start: Vec<f64>,
    options: &SolverOptions,
) -> Result<PeriodSolution> {
    let m = sample.len() as f64;
    let d = sample.dim();
    let mut weights = start;
    let mut theta_guess = None;
    let mut residual = f64::INFINITY;
    let mut converged = false;

    for _ in 0..options.max_iter {
        let payoffs = sample.payoffs(&weights)?;
        let inner = solve_inner_on_payoffs(&payoffs, eta, theta_guess)?;
        theta_guess = Some(inner.theta);

        let tilted_mean = tilted_mean_vector(sample, &inner.weights, mean_gross, discounted_continuation, m, d);
        let form = outer_closed_form(chol, &tilted_mean, kappa)?;
        let mut next: Vec<f64> = weights
            .iter()
            .zip(form.weights.iter())
            .map(|(w, f)| (1.0 - options.damping) * w + options.damping * f)
            .collect();
        snap_budget(&mut next);
        residual = weights
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        weights = next;
        if residual < options.weight_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { residual, iterations: options.max_iter });
    }

    // Final refresh at the converged weights so every reported quantity is
    // consistent with them: multiplier, tilt, scalars, value coefficient.
    let payoffs = sample.payoffs(&weights)?;
    let inner = solve_inner_on_payoffs(&payoffs, eta, theta_guess)?;
    if (inner.kl - eta).abs() > options.kl_tol {
        return Err(Error::NoConvergence {
            residual: (inner.kl - eta).abs(),
            iterations: options.max_iter,
        });
    }
    let tilted_mean = tilted_mean_vector(sample, &inner.weights, mean_gross, discounted_continuation, m, d);
    let form = outer_closed_form(chol, &tilted_mean, kappa)?;
    let mean_payoff = numerics::dot(mean_gross, &weights);
    let value_coeff = -inner.theta * inner.log_mean_exp
        + discounted_continuation * mean_payoff
        - kappa * form.risk_scale
        - eta * inner.theta;
    if !value_coeff.is_finite() {
        return Err(Error::NonFinite { what: "value coefficient" });
    }
    Ok(PeriodSolution {
        weights,
        theta: inner.theta,
        tilted_mean,
        ones_precision: form.ones_precision,
        cross_precision: form.cross_precision,
        mean_precision: form.mean_precision,
        centered_precision: form.centered_precision,
        risk_scale: form.risk_scale,
        value_coeff,
        kl_achieved: inner.kl,
        multi_start_gap: None,
    })
}

/// Tilted sample mean of the gross returns plus the discounted
/// continuation term on the untilted mean.
fn tilted_mean_vector(
    sample: &ReturnSample,
    tilt: &[f64],
    mean_gross: &[f64],
    discounted_continuation: f64,
    m: f64,
    d: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (j, out_j) in out.iter_mut().enumerate() {
        let s = numerics::compensated_sum(
            tilt.iter()
                .enumerate()
                .map(|(i, w)| w * sample.draws().get(i, j)),
        );
        *out_j = s / m + discounted_continuation * mean_gross[j];
    }
    out
}

/// Backward induction over the horizon. One sample block per period; the
/// block of period `n` drives both the tilt expectations and the
/// positivity gate of that period.
pub fn solve_horizon(
    spec: &PortfolioSpec,
    model: &NominalModel,
    profile: &RiskProfile,
    samples: &[ReturnSample],
    mode: Mode,
    options: &SolverOptions,
) -> Result<HorizonSolution> {
    let n = spec.horizon;
    if profile.horizon() != n {
        return Err(Error::DimensionMismatch {
            what: "profile horizon",
            expected: n,
            actual: profile.horizon(),
        });
    }
    if samples.len() != n {
        return Err(Error::DimensionMismatch {
            what: "sample blocks",
            expected: n,
            actual: samples.len(),
        });
    }
    for s in samples {
        if s.dim() != spec.assets {
            return Err(Error::DimensionMismatch {
                what: "sample dimension",
                expected: spec.assets,
                actual: s.dim(),
            });
        }
    }

    let mut periods: Vec<PeriodSolution> = Vec::with_capacity(n);
    let mut continuation = 0.0; // G_N = 0
    for period in (0..n).rev() {
        let discount = match mode {
            Mode::Robust => profile.discount_after(period),
            Mode::NonRobust => 1.0,
        };
        let discounted = discount * continuation;
        let mean_gross = samples[period].mean_gross();
        let solution = match mode {
            Mode::Robust => solve_period(
                &samples[period],
                model.sigma(),
                profile.kappa()[period],
                profile.eta()[period],
                discounted,
                &mean_gross,
                options,
            ),
            Mode::NonRobust => {
                let mean_vec: Vec<f64> =
                    mean_gross.iter().map(|m| (1.0 + discounted) * m).collect();
                solve_period_nonrobust(model.sigma(), profile.kappa()[period], &mean_vec)
            }
        }
        .map_err(|e| e.in_period(period))?;
        continuation = solution.value_coeff;
        periods.push(solution);
    }
    periods.reverse();

    let (accepted, positivity_probs) = positivity_gate(&periods, samples, profile)?;
    Ok(HorizonSolution {
        value_at_w0: spec.w0 * periods[0].value_coeff,
        periods,
        accepted,
        positivity_probs,
    })
}

/// Positivity gate: per period, the Monte Carlo probability that one-period
/// wealth stays positive starting from wealth one, compared against the
/// threshold `1 - exp(-kappa)`. Accepts only if every period clears it.
pub fn check_positivity(
    solution: &HorizonSolution,
    samples: &[ReturnSample],
    profile: &RiskProfile,
) -> Result<(bool, Vec<f64>)> {
    positivity_gate(&solution.periods, samples, profile)
}

fn positivity_gate(
    periods: &[PeriodSolution],
    samples: &[ReturnSample],
    profile: &RiskProfile,
) -> Result<(bool, Vec<f64>)> {
    if samples.len() != periods.len() || profile.horizon() != periods.len() {
        return Err(Error::DimensionMismatch {
            what: "positivity inputs",
            expected: periods.len(),
            actual: samples.len(),
        });
    }
    let mut probs = Vec::with_capacity(periods.len());
    let mut accepted = true;
    for (n, period) in periods.iter().enumerate() {
        let payoffs = samples[n].payoffs(&period.weights)?;
        let positive = payoffs.iter().filter(|p| **p > 0.0).count();
        let prob = positive as f64 / payoffs.len() as f64;
        let threshold = 1.0 - (-profile.kappa()[n]).exp();
        if !(prob > threshold) {
            accepted = false;
        }
        probs.push(prob);
    }
    Ok((accepted, probs))
}

/// Worst-case objective of fixed weights on a sample: the dual value of the
/// inner problem minus the volatility penalty,
/// `-theta ln E[exp(-R.u/theta)] - eta theta - kappa sqrt(u' Sigma u)`.
pub fn worst_case_objective(
    sample: &ReturnSample,
    sigma: &Matrix,
    weights: &[f64],
    kappa: f64,
    eta: f64,
) -> Result<f64> {
    let (_, dual) = solve_inner(sample, weights, eta)?;
    let sw = sigma.mat_vec(weights)?;
    let vol = numerics::dot(weights, &sw).sqrt();
    Ok(dual - kappa * vol)
}

/// The concave dual objective at a fixed multiplier,
/// `-theta ln E[exp(-u.R/theta)] - kappa sqrt(u' Sigma u)`.
pub fn dual_objective(
    sample: &ReturnSample,
    sigma: &Matrix,
    weights: &[f64],
    kappa: f64,
    theta: f64,
) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter { what: "dual multiplier theta", value: theta });
    }
    let payoffs = sample.payoffs(weights)?;
    let (_, log_mean_exp) = tilt_components(&payoffs, theta)?;
    let sw = sigma.mat_vec(weights)?;
    let vol = numerics::dot(weights, &sw).sqrt();
    Ok(-theta * log_mean_exp - kappa * vol)
}
