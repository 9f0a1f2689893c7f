//! Closed-form, Monte Carlo and nonparametric Kullback-Leibler divergence
//! computations, plus the alpha-divergence of likelihood-ratio weights.

use crate::error::{Error, Result};
use crate::numerics::{self, cholesky, log_norm_cdf, sqrt_spd, Matrix};
use crate::sampling::SkewNormalParams;

/// Configuration of the k-nearest-neighbor divergence estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    /// Neighbor rank used for both samples.
    pub k: usize,
    /// Number of repeats averaged by the repeated estimator.
    pub repeats: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 5, repeats: 1000 }
    }
}

/// KL divergence between two multivariate normals, alternative against
/// nominal:
/// `(trace(S0^-1 S1) + (m0 - m1)' S0^-1 (m0 - m1) - d + ln(|S0| / |S1|)) / 2`
/// with `(m0, S0)` the nominal and `(m1, S1)` the alternative model.
pub fn kl_normal(
    nominal_mu: &[f64],
    nominal_sigma: &Matrix,
    alt_mu: &[f64],
    alt_sigma: &Matrix,
) -> Result<f64> {
    let d = nominal_mu.len();
    if alt_mu.len() != d || nominal_sigma.rows() != d || alt_sigma.rows() != d {
        return Err(Error::DimensionMismatch {
            what: "normal KL inputs",
            expected: d,
            actual: alt_mu.len(),
        });
    }
    let chol0 = cholesky(nominal_sigma)?;
    let chol1 = cholesky(alt_sigma)?;
    let trace = chol0.inv_trace_product(alt_sigma)?;
    let diff: Vec<f64> = nominal_mu
        .iter()
        .zip(alt_mu.iter())
        .map(|(a, b)| a - b)
        .collect();
    let quad = chol0.inv_quad(&diff)?;
    let log_det_ratio = chol0.log_det() - chol1.log_det();
    Ok(0.5 * (trace + quad - d as f64 + log_det_ratio))
}

/// A Monte Carlo estimate together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// KL divergence between two multivariate skew-normal laws, alternative
/// against nominal: the Gaussian closed form plus a linear skewness
/// correction and two log-CDF expectations over scalar skew-normal
/// variables. Both expectations are functionals of the same alternative
/// draw, so they are estimated from common latent normals and the standard
/// error is that of the combined term.
pub fn kl_skew_normal(
    nominal: &SkewNormalParams,
    alt: &SkewNormalParams,
    mc_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let d = nominal.dim();
    if alt.dim() != d {
        return Err(Error::DimensionMismatch {
            what: "skew-normal KL inputs",
            expected: d,
            actual: alt.dim(),
        });
    }
    if mc_samples < 1000 {
        return Err(Error::InsufficientData {
            what: "skew-normal KL Monte Carlo",
            needed: 1000,
            actual: mc_samples,
        });
    }
    let gaussian = kl_normal(nominal.loc(), nominal.scale(), alt.loc(), alt.scale())?;

    let chol0 = cholesky(nominal.scale())?;
    let (alt_root, _) = sqrt_spd(alt.scale())?;

    // 2 sqrt(2/pi) (loc1 - loc0)' S0^-1 S1^{1/2} xi1
    let root_skew = alt_root.mat_vec(alt.skew())?;
    let loc_diff: Vec<f64> = alt
        .loc()
        .iter()
        .zip(nominal.loc().iter())
        .map(|(a, b)| a - b)
        .collect();
    let solved = chol0.solve(&root_skew)?;
    let linear = 2.0 * (2.0 / std::f64::consts::PI).sqrt() * numerics::dot(&loc_diff, &solved);

    let nominal_norm2 = nominal.skew_norm2();
    let alt_norm2 = alt.skew_norm2();
    let nominal_skewed = nominal_norm2 > 0.0;
    let alt_skewed = alt_norm2 > 0.0;

    if !nominal_skewed && !alt_skewed {
        // Both log terms vanish identically: Phi(0 | v) = 1/2.
        return Ok(McEstimate { value: gaussian + linear, std_error: 0.0 });
    }

    // Scalar CDF arguments as linear maps of the alternative's latent
    // vector Y*:
    //   own term:   xi1' Y*
    //   cross term: xi0' S0^{-1/2} (loc1 - loc0) + xi0' S0^{-1/2} S1^{1/2} Y*
    let own_sd = (1.0 - alt_norm2).sqrt();
    let (cross_offset, cross_coeff, cross_sd) = if nominal_skewed {
        let (_, inv_root0) = sqrt_spd(nominal.scale())?;
        let proj = inv_root0.mat_vec(nominal.skew())?;
        let offset = numerics::dot(&proj, &loc_diff);
        let coeff = alt_root.mat_vec(&proj)?;
        (offset, coeff, (1.0 - nominal_norm2).sqrt())
    } else {
        (0.0, vec![0.0; d], 1.0)
    };

    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let ln2 = std::f64::consts::LN_2;
    let mut terms = Vec::with_capacity(mc_samples);
    let mut latent = vec![0.0; d];
    for _ in 0..mc_samples {
        let z0: f64 = StandardNormal.sample(&mut rng);
        for zj in latent.iter_mut() {
            *zj = StandardNormal.sample(&mut rng);
        }
        let mut y_star = apply_orthogonal_root(alt.skew(), &latent);
        let a = z0.abs();
        for (y, xi) in y_star.iter_mut().zip(alt.skew().iter()) {
            *y += xi * a;
        }
        let mut term = 0.0;
        if alt_skewed {
            let own_arg = numerics::dot(alt.skew(), &y_star);
            term += ln2 + log_norm_cdf(own_arg / own_sd);
        }
        if nominal_skewed {
            let cross_arg = cross_offset + numerics::dot(&cross_coeff, &y_star);
            term -= ln2 + log_norm_cdf(cross_arg / cross_sd);
        }
        terms.push(term);
    }
    let mean = numerics::mean(&terms);
    let std_error = numerics::std_dev(&terms) / (mc_samples as f64).sqrt();
    Ok(McEstimate { value: gaussian + linear + mean, std_error })
}

// Shared with the sampler: rank-1 closed form of (I - xi xi')^{1/2} z.
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

/// Result of one k-nearest-neighbor divergence estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnEstimate {
    pub value: f64,
    /// Number of neighbor distances floored at 1e-12 because of duplicate
    /// points; nonzero values flag an unreliable estimate.
    pub floored: usize,
}

const KNN_DISTANCE_FLOOR: f64 = 1e-12;

/// Nonparametric KL estimate of the alternative sample against the nominal
/// sample. For each alternative point the k-th nearest-neighbor distance is
/// taken among the other alternative points and within the nominal sample,
/// and the estimate averages `d ln(nominal distance / own distance)` plus
/// the sample-size correction `ln(M / (K - 1))`. The estimate may be
/// negative; callers decide whether to filter.
pub fn kl_knn_estimate(
    nominal_sample: &Matrix,
    alt_sample: &Matrix,
    cfg: &KnnConfig,
) -> Result<KnnEstimate> {
    let d = alt_sample.cols();
    if nominal_sample.cols() != d {
        return Err(Error::DimensionMismatch {
            what: "knn sample dimension",
            expected: d,
            actual: nominal_sample.cols(),
        });
    }
    let alt_n = alt_sample.rows();
    let nom_n = nominal_sample.rows();
    if cfg.k == 0 {
        return Err(Error::InvalidParameter { what: "knn rank k", value: 0.0 });
    }
    if alt_n < cfg.k + 1 {
        return Err(Error::InsufficientData {
            what: "knn alternative sample",
            needed: cfg.k + 1,
            actual: alt_n,
        });
    }
    if nom_n < cfg.k {
        return Err(Error::InsufficientData {
            what: "knn nominal sample",
            needed: cfg.k,
            actual: nom_n,
        });
    }

    let mut floored = 0usize;
    let mut acc = 0.0;
    let correction = (nom_n as f64 / (alt_n - 1) as f64).ln();
    let mut own = Vec::with_capacity(alt_n - 1);
    let mut other = Vec::with_capacity(nom_n);
    for i in 0..alt_n {
        let point = alt_sample.row(i);
        own.clear();
        for j in 0..alt_n {
            if j != i {
                own.push(sq_dist(point, alt_sample.row(j)));
            }
        }
        other.clear();
        for j in 0..nom_n {
            other.push(sq_dist(point, nominal_sample.row(j)));
        }
        let mut own_dist = kth_smallest(&mut own, cfg.k).sqrt();
        let mut nominal_dist = kth_smallest(&mut other, cfg.k).sqrt();
        if own_dist < KNN_DISTANCE_FLOOR {
            own_dist = KNN_DISTANCE_FLOOR;
            floored += 1;
        }
        if nominal_dist < KNN_DISTANCE_FLOOR {
            nominal_dist = KNN_DISTANCE_FLOOR;
            floored += 1;
        }
        acc += d as f64 * (nominal_dist / own_dist).ln() + correction;
    }
    Ok(KnnEstimate { value: acc / alt_n as f64, floored })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

/// k-th smallest element (1-based) by partial selection; mutates the slice.
fn kth_smallest(values: &mut [f64], k: usize) -> f64 {
    let idx = k - 1;
    let (_, kth, _) =
        values.select_nth_unstable_by(idx, |a, b| a.partial_cmp(b).expect("finite distances"));
    *kth
}

fn validate_ratio_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InsufficientData {
            what: "ratio weights",
            needed: 1,
            actual: 0,
        });
    }
    for &w in weights {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter { what: "ratio weight", value: w });
        }
    }
    let mean = numerics::mean(weights);
    if (mean - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter {
            what: "ratio weight mean (must be 1)",
            value: mean,
        });
    }
    Ok(())
}

/// Sample-average KL divergence `E[w ln w]` of normalized likelihood-ratio
/// weights evaluated on nominal draws, with `0 ln 0 = 0`.
pub fn kl_of_ratio_weights(weights: &[f64]) -> Result<f64> {
    validate_ratio_weights(weights)?;
    Ok(kl_of_ratio_weights_unchecked(weights))
}

/// Same as [`kl_of_ratio_weights`] without revalidating; for hot loops that
/// already hold weights coming out of the tilting routine.
pub(crate) fn kl_of_ratio_weights_unchecked(weights: &[f64]) -> f64 {
    numerics::compensated_sum(weights.iter().map(|&w| if w > 0.0 { w * w.ln() } else { 0.0 }))
        / weights.len() as f64
}

/// Sample-average alpha-divergence
/// `E[w^alpha - alpha (w - 1) - 1] / (alpha (alpha - 1))` for `alpha > 1`.
/// The KL divergence is the `alpha -> 1` limit and is served by
/// [`kl_of_ratio_weights`].
pub fn alpha_divergence_of_ratio_weights(weights: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter { what: "alpha (must be > 1)", value: alpha });
    }
    validate_ratio_weights(weights)?;
    let sum = numerics::compensated_sum(
        weights
            .iter()
            .map(|&w| w.powf(alpha) - alpha * (w - 1.0) - 1.0),
    );
    Ok(sum / weights.len() as f64 / (alpha * (alpha - 1.0)))
}
