//! Random generation of nominal, alternative and worst-case-tilted return
//! samples, plus wealth-path simulation.
//!
//! Every sampler is a deterministic function of its parameters, the draw
//! count and an explicit seed. Independent sub-tasks derive their own seeds
//! from a master seed through [`substream_seed`], so results never depend
//! on scheduling.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{self, cholesky, sqrt_spd, Matrix};
use crate::types::{ReturnSample, Strategy};

/// Derives an independent stream seed from a master seed and a label.
/// FNV-1a over the label keeps the mapping stable across platforms, and a
/// splitmix finalizer decorrelates neighbouring labels.
pub fn substream_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(master ^ h)
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Draws `count` vectors from the multivariate normal `N(mean, sigma)`.
pub fn sample_mvn(mean: &[f64], sigma: &Matrix, count: usize, seed: u64) -> Result<ReturnSample> {
    let d = mean.len();
    if sigma.rows() != d {
        return Err(Error::DimensionMismatch {
            what: "mvn sampler covariance",
            expected: d,
            actual: sigma.rows(),
        });
    }
    let chol = cholesky(sigma)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut draws = Matrix::zeros(count, d);
    let mut z = vec![0.0; d];
    for i in 0..count {
        for zj in z.iter_mut() {
            *zj = StandardNormal.sample(&mut rng);
        }
        let shock = chol.transform(&z);
        for j in 0..d {
            draws.set(i, j, mean[j] + shock[j]);
        }
    }
    ReturnSample::new(draws, seed)
}

/// Location, scale and skewness of a multivariate skew-normal law.
///
/// The skewness vector must satisfy `xi' xi < 1`; the conditional variance
/// `1 - xi' xi` in the density has to stay positive.
#[derive(Debug, Clone)]
pub struct SkewNormalParams {
    loc: Vec<f64>,
    scale: Matrix,
    skew: Vec<f64>,
}

impl SkewNormalParams {
    pub fn new(loc: Vec<f64>, scale: Matrix, skew: Vec<f64>) -> Result<Self> {
        let d = loc.len();
        if scale.rows() != d || skew.len() != d {
            return Err(Error::DimensionMismatch {
                what: "skew-normal parameters",
                expected: d,
                actual: scale.rows().max(skew.len()),
            });
        }
        cholesky(&scale)?;
        let norm2 = numerics::dot(&skew, &skew);
        if !(norm2 < 1.0) {
            return Err(Error::InvalidParameter {
                what: "skewness norm squared (must be < 1)",
                value: norm2,
            });
        }
        Ok(SkewNormalParams { loc, scale, skew })
    }

    pub fn dim(&self) -> usize {
        self.loc.len()
    }

    pub fn loc(&self) -> &[f64] {
        &self.loc
    }

    pub fn scale(&self) -> &Matrix {
        &self.scale
    }

    pub fn skew(&self) -> &[f64] {
        &self.skew
    }

    /// Squared norm of the skewness vector.
    pub fn skew_norm2(&self) -> f64 {
        numerics::dot(&self.skew, &self.skew)
    }

    /// The distribution mean `loc + sqrt(2/pi) scale^{1/2} skew`.
    pub fn mean(&self) -> Result<Vec<f64>> {
        let (root, _) = sqrt_spd(&self.scale)?;
        let shift = root.mat_vec(&self.skew)?;
        let c = (2.0 / std::f64::consts::PI).sqrt();
        Ok(self
            .loc
            .iter()
            .zip(shift.iter())
            .map(|(l, s)| l + c * s)
            .collect())
    }

    /// Same location and scale, shifted by a constant per coordinate
    /// (net-to-gross conversion).
    pub fn shifted(&self, offset: f64) -> SkewNormalParams {
        SkewNormalParams {
            loc: self.loc.iter().map(|l| l + offset).collect(),
            scale: self.scale.clone(),
            skew: self.skew.clone(),
        }
    }
}

/// Applies `(I - xi xi')^{1/2} z` using the closed rank-1 form of the
/// square root: `I - xi xi' (1 - sqrt(1 - xi'xi)) / (xi'xi)`.
fn apply_orthogonal_root(skew: &[f64], z: &[f64]) -> Vec<f64> {
    let norm2 = numerics::dot(skew, skew);
    if norm2 == 0.0 {
        return z.to_vec();
    }
    let coeff = (1.0 - (1.0 - norm2).sqrt()) / norm2;
    let proj = numerics::dot(skew, z);
    z.iter()
        .zip(skew.iter())
        .map(|(zi, xi)| zi - coeff * proj * xi)
        .collect()
}

/// Draws from the skew-normal via its stochastic representation
/// `Y = loc + scale^{1/2} (xi |Z0| + (I - xi xi')^{1/2} Z)`, with the
/// symmetric positive-definite square root of the scale matrix.
pub fn sample_skew_normal(
    params: &SkewNormalParams,
    count: usize,
    seed: u64,
) -> Result<ReturnSample> {
    let d = params.dim();
    let (root, _) = sqrt_spd(params.scale())?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut draws = Matrix::zeros(count, d);
    let mut z = vec![0.0; d];
    for i in 0..count {
        let z0: f64 = StandardNormal.sample(&mut rng);
        for zj in z.iter_mut() {
            *zj = StandardNormal.sample(&mut rng);
        }
        let mut latent = apply_orthogonal_root(params.skew(), &z);
        let a = z0.abs();
        for (l, xi) in latent.iter_mut().zip(params.skew().iter()) {
            *l += xi * a;
        }
        let shock = root.mat_vec(&latent)?;
        for (j, s) in shock.iter().enumerate() {
            draws.set(i, j, params.loc()[j] + s);
        }
    }
    ReturnSample::new(draws, seed)
}

/// Draws from the scalar skew-normal `SN(loc, scale2, delta)` where
/// `scale2` is the squared scale and `delta` the skewness.
pub fn sample_skew_normal_1d(
    loc: f64,
    scale2: f64,
    delta: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if scale2 < 0.0 {
        return Err(Error::InvalidParameter {
            what: "scalar skew-normal scale",
            value: scale2,
        });
    }
    if delta.abs() > 1.0 {
        return Err(Error::InvalidParameter {
            what: "scalar skew-normal skewness",
            value: delta,
        });
    }
    let s = scale2.sqrt();
    let ortho = (1.0 - delta * delta).max(0.0).sqrt();
    let mut rng = StdRng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            loc + s * (delta * z0.abs() + ortho * z1)
        })
        .collect())
}

/// Normalized likelihood-ratio weights of an exponentially tilted measure
/// over a Monte Carlo sample, together with the multiplier that produced
/// them. Weights are nonnegative with mean one.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedMeasure {
    weights: Vec<f64>,
    theta: f64,
}

impl TiltedMeasure {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    // Construction sites guarantee nonnegative weights with mean one.
    pub(crate) fn from_parts(weights: Vec<f64>, theta: f64) -> Self {
        debug_assert!((numerics::mean(&weights) - 1.0).abs() <= 1e-10);
        TiltedMeasure { weights, theta }
    }
}

/// Log-mean-exp of `-payoff / theta` with max-subtraction, plus the
/// normalized weights. Never overflows: every exponent is <= 0.
pub(crate) fn tilt_components(payoffs: &[f64], theta: f64) -> Result<(Vec<f64>, f64)> {
    let m = payoffs.len() as f64;
    let min_payoff = payoffs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = payoffs
        .iter()
        .map(|y| (-(y - min_payoff) / theta).exp())
        .collect();
    let mean_w = numerics::compensated_sum(weights.iter().copied()) / m;
    if !(mean_w > 0.0) || !mean_w.is_finite() {
        return Err(Error::ThetaUnderflow { theta });
    }
    for w in weights.iter_mut() {
        *w /= mean_w;
    }
    // log E[exp(-y/theta)] = -min/theta + log(mean of shifted exponentials)
    let log_mean_exp = -min_payoff / theta + mean_w.ln();
    Ok((weights, log_mean_exp))
}

/// Exponentially tilts a return sample against portfolio weights:
/// `w_i` proportional to `exp(-R_i . u / theta)`, normalized to mean one.
pub fn tilt_weights(sample: &ReturnSample, weights: &[f64], theta: f64) -> Result<TiltedMeasure> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidParameter { what: "tilt multiplier theta", value: theta });
    }
    let payoffs = sample.payoffs(weights)?;
    let (tilted, _) = tilt_components(&payoffs, theta)?;
    if tilted.iter().any(|w| !w.is_finite()) {
        return Err(Error::ThetaUnderflow { theta });
    }
    Ok(TiltedMeasure { weights: tilted, theta })
}

/// Terminal wealths of `m` paired paths: path `i` applies row `i` of each
/// period block to the strategy. One block per period, equal row counts.
pub fn simulate_terminal_wealths(
    strategy: &Strategy,
    period_blocks: &[ReturnSample],
    w0: f64,
) -> Result<Vec<f64>> {
    if period_blocks.len() != strategy.horizon() {
        return Err(Error::DimensionMismatch {
            what: "wealth simulation blocks",
            expected: strategy.horizon(),
            actual: period_blocks.len(),
        });
    }
    let m = period_blocks
        .first()
        .map(|b| b.len())
        .ok_or(Error::InsufficientData { what: "wealth simulation", needed: 1, actual: 0 })?;
    let mut wealth = vec![w0; m];
    for (n, block) in period_blocks.iter().enumerate() {
        if block.len() != m {
            return Err(Error::DimensionMismatch {
                what: "wealth simulation block size",
                expected: m,
                actual: block.len(),
            });
        }
        let payoffs = block.payoffs(strategy.row(n))?;
        for (w, p) in wealth.iter_mut().zip(payoffs.iter()) {
            *w *= p;
        }
    }
    Ok(wealth)
}

/// Full wealth trajectories, when the intermediate values matter.
pub fn simulate_wealth_paths(
    strategy: &Strategy,
    period_blocks: &[ReturnSample],
    w0: f64,
) -> Result<Vec<crate::types::WealthPath>> {
    if period_blocks.len() != strategy.horizon() {
        return Err(Error::DimensionMismatch {
            what: "wealth simulation blocks",
            expected: strategy.horizon(),
            actual: period_blocks.len(),
        });
    }
    let m = period_blocks
        .first()
        .map(|b| b.len())
        .ok_or(Error::InsufficientData { what: "wealth simulation", needed: 1, actual: 0 })?;
    let mut paths = Vec::with_capacity(m);
    for i in 0..m {
        let rows: Vec<&[f64]> = period_blocks.iter().map(|b| b.draws().row(i)).collect();
        paths.push(crate::types::WealthPath::from_returns(w0, strategy, &rows)?);
    }
    Ok(paths)
}
