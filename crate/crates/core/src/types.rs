//! Domain types shared by every other module.
//!
//! Gross returns `R = 1 + r` are the canonical internal representation;
//! net returns appear only at ingestion and reporting. All types are
//! immutable after construction.

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

/// Static description of the investment problem: `assets` risky assets,
/// `horizon` rebalancing periods, initial wealth `w0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSpec {
    pub assets: usize,
    pub horizon: usize,
    pub w0: f64,
}

impl PortfolioSpec {
    pub fn new(assets: usize, horizon: usize, w0: f64) -> Result<Self> {
        if assets < 2 {
            return Err(Error::InvalidParameter {
                what: "asset count (must be >= 2)",
                value: assets as f64,
            });
        }
        if horizon < 1 {
            return Err(Error::InvalidParameter {
                what: "horizon (must be >= 1)",
                value: horizon as f64,
            });
        }
        if !(w0 > 0.0) || !w0.is_finite() {
            return Err(Error::InvalidParameter {
                what: "initial wealth",
                value: w0,
            });
        }
        Ok(PortfolioSpec { assets, horizon, w0 })
    }
}

/// Mean vector and covariance matrix of one-period *net* returns under the
/// nominal measure. Time-homogeneous: the same law drives every period.
#[derive(Debug, Clone)]
pub struct NominalModel {
    mu: Vec<f64>,
    sigma: Matrix,
}

impl NominalModel {
    pub fn new(mu: Vec<f64>, sigma: Matrix) -> Result<Self> {
        if sigma.rows() != mu.len() {
            return Err(Error::DimensionMismatch {
                what: "nominal model covariance",
                expected: mu.len(),
                actual: sigma.rows(),
            });
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "nominal mean" });
        }
        // Validates symmetry, finiteness and positive definiteness.
        numerics::cholesky(&sigma)?;
        Ok(NominalModel { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Expected net returns.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Expected gross returns `1 + mu`.
    pub fn gross_mean(&self) -> Vec<f64> {
        self.mu.iter().map(|m| 1.0 + m).collect()
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }
}

/// Per-period risk aversions, KL radii and future-payoff penalty products.
///
/// `penalty[n]` is the product `c * eta * kappa` whose exponential discount
/// scales the continuation value coming out of period `n + 1`; only the
/// product is identifiable, so only the product is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskProfile {
    kappa: Vec<f64>,
    eta: Vec<f64>,
    penalty: Vec<f64>,
}

impl RiskProfile {
    pub fn new(kappa: Vec<f64>, eta: Vec<f64>, penalty: Vec<f64>) -> Result<Self> {
        let n = kappa.len();
        if n == 0 {
            return Err(Error::InsufficientData {
                what: "risk profile",
                needed: 1,
                actual: 0,
            });
        }
        if eta.len() != n {
            return Err(Error::DimensionMismatch {
                what: "risk profile eta",
                expected: n,
                actual: eta.len(),
            });
        }
        if penalty.len() + 1 != n {
            return Err(Error::DimensionMismatch {
                what: "risk profile penalty",
                expected: n - 1,
                actual: penalty.len(),
            });
        }
        for &k in &kappa {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::InvalidParameter {
                    what: "risk aversion kappa",
                    value: k,
                });
            }
        }
        for &e in &eta {
            if !(e >= 0.0) || !e.is_finite() {
                return Err(Error::InvalidParameter { what: "KL radius eta", value: e });
            }
        }
        for &p in &penalty {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidParameter {
                    what: "penalty product",
                    value: p,
                });
            }
        }
        Ok(RiskProfile { kappa, eta, penalty })
    }

    /// Constant `kappa` and `eta` across `horizon` periods with explicit
    /// penalty products for the `horizon - 1` future periods.
    pub fn constant(horizon: usize, kappa: f64, eta: f64, penalty: Vec<f64>) -> Result<Self> {
        RiskProfile::new(vec![kappa; horizon], vec![eta; horizon], penalty)
    }

    pub fn horizon(&self) -> usize {
        self.kappa.len()
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn penalty(&self) -> &[f64] {
        &self.penalty
    }

    /// Discount applied to the continuation value of period `n + 1`,
    /// `exp(-penalty[n])`; 1 for the last period (no continuation).
    pub fn discount_after(&self, n: usize) -> f64 {
        if n + 1 < self.horizon() {
            (-self.penalty[n]).exp()
        } else {
            1.0
        }
    }

    /// Same radii replaced by zeros; used for the non-robust limit.
    pub fn with_zero_eta(&self) -> RiskProfile {
        RiskProfile {
            kappa: self.kappa.clone(),
            eta: vec![0.0; self.eta.len()],
            penalty: self.penalty.clone(),
        }
    }
}

/// Budget tolerance on portfolio weight rows.
pub const BUDGET_TOL: f64 = 1e-12;

/// Snaps a weight vector whose sum is within `BUDGET_TOL` of one onto the
/// budget hyperplane exactly, by absorbing the residual into the
/// largest-magnitude weight. Returns the pre-snap residual.
pub fn snap_budget(weights: &mut [f64]) -> f64 {
    let sum = numerics::compensated_sum(weights.iter().copied());
    let residual = sum - 1.0;
    if residual != 0.0 {
        let mut idx = 0;
        for (i, w) in weights.iter().enumerate() {
            if w.abs() > weights[idx].abs() {
                idx = i;
            }
        }
        weights[idx] -= residual;
    }
    residual
}

/// A rebalancing strategy: row `n` holds the wealth fractions applied over
/// period `n`. Every row sums to one within [`BUDGET_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    weights: Matrix,
}

impl Strategy {
    pub fn new(weights: Matrix) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::InsufficientData {
                what: "strategy weights",
                needed: 1,
                actual: 0,
            });
        }
        if !weights.is_finite() {
            return Err(Error::NonFinite { what: "strategy weights" });
        }
        for n in 0..weights.rows() {
            let sum = numerics::compensated_sum(weights.row(n).iter().copied());
            if (sum - 1.0).abs() > BUDGET_TOL {
                return Err(Error::BudgetViolation { sum });
            }
        }
        Ok(Strategy { weights })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Strategy::new(Matrix::from_rows(rows)?)
    }

    pub fn horizon(&self) -> usize {
        self.weights.rows()
    }

    pub fn assets(&self) -> usize {
        self.weights.cols()
    }

    /// Weights applied over period `n`.
    pub fn row(&self, n: usize) -> &[f64] {
        self.weights.row(n)
    }
}

/// A Monte Carlo block of gross returns: `draws` is `m x d`, one scenario
/// per row, together with the seed that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSample {
    draws: Matrix,
    seed: u64,
}

impl ReturnSample {
    pub fn new(draws: Matrix, seed: u64) -> Result<Self> {
        if draws.rows() < 2 {
            return Err(Error::InsufficientData {
                what: "return sample",
                needed: 2,
                actual: draws.rows(),
            });
        }
        if !draws.is_finite() {
            return Err(Error::NonFinite { what: "return sample" });
        }
        Ok(ReturnSample { draws, seed })
    }

    pub fn len(&self) -> usize {
        self.draws.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.draws.cols()
    }

    pub fn draws(&self) -> &Matrix {
        &self.draws
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Portfolio payoffs `R_i . u` for every scenario row.
    pub fn payoffs(&self, weights: &[f64]) -> Result<Vec<f64>> {
        self.draws.mat_vec(weights)
    }

    /// Column means (mean gross return per asset).
    pub fn mean_gross(&self) -> Vec<f64> {
        let m = self.len() as f64;
        (0..self.dim())
            .map(|j| numerics::compensated_sum((0..self.len()).map(|i| self.draws.get(i, j))) / m)
            .collect()
    }
}

/// A single realized wealth trajectory `W_0 .. W_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPath {
    values: Vec<f64>,
}

impl WealthPath {
    /// Builds the path from one gross-return vector per period; enforces
    /// the wealth recursion exactly.
    pub fn from_returns(w0: f64, strategy: &Strategy, gross_returns: &[&[f64]]) -> Result<Self> {
        if gross_returns.len() != strategy.horizon() {
            return Err(Error::DimensionMismatch {
                what: "wealth path returns",
                expected: strategy.horizon(),
                actual: gross_returns.len(),
            });
        }
        let mut values = Vec::with_capacity(strategy.horizon() + 1);
        values.push(w0);
        let mut w = w0;
        for (n, r) in gross_returns.iter().enumerate() {
            w *= numerics::dot(r, strategy.row(n));
            values.push(w);
        }
        Ok(WealthPath { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("nonempty path")
    }
}
