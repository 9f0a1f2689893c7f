//! Deterministic linear-algebra and statistics kernels.
//!
//! Everything here is plain dense `f64` arithmetic in a fixed evaluation
//! order, so identical inputs produce bit-identical outputs. Covariance
//! matrices are always handled through their Cholesky factor; no explicit
//! inverse is ever formed.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    what: "matrix row",
                    expected: c,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Maximum absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// `self * v` for a length-`cols` vector.
    pub fn mat_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                what: "matrix-vector product",
                expected: self.cols,
                actual: v.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `self * other`.
    pub fn mat_mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "matrix product",
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Checks square symmetry within an absolute tolerance scaled by the
    /// largest entry.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.max_abs().max(1e-300);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self.get(i, j) - self.get(j, i)).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

/// Plain dot product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Neumaier-compensated sum; order-deterministic and accurate for the
/// 10^5..10^6-term reductions used by the samplers and the solver.
pub fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Compensated arithmetic mean.
pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample standard deviation (divisor `n - 1`).
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    (ss / (n - 1) as f64).sqrt()
}

/// Lower-triangular Cholesky factor `L` with `sigma = L L^T`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: Matrix,
}

/// Factors a symmetric positive-definite matrix.
///
/// Fails with [`Error::DegenerateCovariance`] when a pivot is not strictly
/// positive, which is the signal that the covariance input cannot drive the
/// per-period system.
pub fn cholesky(sigma: &Matrix) -> Result<CholeskyFactor> {
    if sigma.rows() != sigma.cols() {
        return Err(Error::DimensionMismatch {
            what: "cholesky input",
            expected: sigma.rows(),
            actual: sigma.cols(),
        });
    }
    if !sigma.is_finite() {
        return Err(Error::NonFinite { what: "cholesky input" });
    }
    if !sigma.is_symmetric(1e-10) {
        return Err(Error::InvalidParameter {
            what: "cholesky input symmetry",
            value: f64::NAN,
        });
    }
    let n = sigma.rows();
    let mut lower = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = sigma.get(j, j);
        for k in 0..j {
            let l = lower.get(j, k);
            diag -= l * l;
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::DegenerateCovariance { order: j + 1 });
        }
        let ljj = diag.sqrt();
        lower.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut v = sigma.get(i, j);
            for k in 0..j {
                v -= lower.get(i, k) * lower.get(j, k);
            }
            lower.set(i, j, v / ljj);
        }
    }
    Ok(CholeskyFactor { lower })
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Solves `sigma x = b` by forward then backward substitution.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                what: "cholesky solve",
                expected: n,
                actual: b.len(),
            });
        }
        let mut y = b.to_vec();
        // L y = b
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lower.get(i, k) * y[k];
            }
            y[i] /= self.lower.get(i, i);
        }
        // L^T x = y
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.lower.get(k, i) * y[k];
            }
            y[i] /= self.lower.get(i, i);
        }
        Ok(y)
    }

    /// Quadratic form `x^T sigma^{-1} x = ||L^{-1} x||^2`.
    pub fn inv_quad(&self, x: &[f64]) -> Result<f64> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                what: "cholesky quadratic form",
                expected: n,
                actual: x.len(),
            });
        }
        let mut y = x.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lower.get(i, k) * y[k];
            }
            y[i] /= self.lower.get(i, i);
        }
        Ok(dot(&y, &y))
    }

    /// `log det sigma`.
    pub fn log_det(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.lower.get(i, i).ln())
            .sum::<f64>()
            * 2.0
    }

    /// `trace(sigma^{-1} a)`, column by column.
    pub fn inv_trace_product(&self, a: &Matrix) -> Result<f64> {
        let n = self.dim();
        if a.rows() != n || a.cols() != n {
            return Err(Error::DimensionMismatch {
                what: "trace product",
                expected: n,
                actual: a.rows(),
            });
        }
        let mut tr = 0.0;
        let mut col = vec![0.0; n];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = a.get(i, j);
            }
            let x = self.solve(&col)?;
            tr += x[j];
        }
        Ok(tr)
    }

    /// `L L^T`, for factor verification.
    pub fn reconstruct(&self) -> Matrix {
        let lt = self.lower.transpose();
        self.lower.mat_mul(&lt).expect("square factor")
    }

    /// `L z` — maps a standard-normal vector to covariance `sigma`.
    pub fn transform(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                acc += self.lower.get(i, k) * zk;
            }
            *o = acc;
        }
        out
    }
}

/// Symmetric positive-definite square root and its inverse, by the
/// Denman-Beavers iteration. Each half-step inverts a symmetric positive
/// definite iterate through its Cholesky factor, so only solves are used.
pub fn sqrt_spd(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = a.rows();
    cholesky(a)?; // validates shape, symmetry, positive definiteness
    let mut y = a.clone();
    let mut z = Matrix::identity(n);
    let scale = a.max_abs().max(1e-300);
    for _ in 0..60 {
        let y_inv = spd_inverse(&y)?;
        let z_inv = spd_inverse(&z)?;
        let mut y_next = Matrix::zeros(n, n);
        let mut z_next = Matrix::zeros(n, n);
        let mut delta = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let yv = 0.5 * (y.get(i, j) + z_inv.get(i, j));
                let zv = 0.5 * (z.get(i, j) + y_inv.get(i, j));
                delta = delta.max((yv - y.get(i, j)).abs());
                y_next.set(i, j, yv);
                z_next.set(i, j, zv);
            }
        }
        symmetrize(&mut y_next);
        symmetrize(&mut z_next);
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * scale.sqrt().max(1.0) {
            break;
        }
    }
    Ok((y, z))
}

fn symmetrize(m: &mut Matrix) {
    let n = m.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
}

fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    let chol = cholesky(m)?;
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = chol.solve(&e)?;
        e[j] = 0.0;
        for (i, v) in col.iter().enumerate() {
            inv.set(i, j, *v);
        }
    }
    symmetrize(&mut inv);
    Ok(inv)
}

/// Sample mean and unbiased covariance (divisor `m - 1`) of an `m x d`
/// data matrix, one observation per row.
pub fn sample_mean_cov(data: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let m = data.rows();
    let d = data.cols();
    if m < 2 {
        return Err(Error::InsufficientData {
            what: "sample mean/covariance",
            needed: 2,
            actual: m,
        });
    }
    let mut mu = vec![0.0; d];
    for (j, mu_j) in mu.iter_mut().enumerate() {
        *mu_j = compensated_sum((0..m).map(|i| data.get(i, j))) / m as f64;
    }
    let mut cov = Matrix::zeros(d, d);
    for j in 0..d {
        for k in j..d {
            let s = compensated_sum((0..m).map(|i| (data.get(i, j) - mu[j]) * (data.get(i, k) - mu[k])));
            let v = s / (m - 1) as f64;
            cov.set(j, k, v);
            cov.set(k, j, v);
        }
    }
    Ok((mu, cov))
}

/// Lower order-statistic quantile: sort ascending and return the element at
/// index `ceil(p m) - 1`, clamped to the valid range. No interpolation, so
/// the result is always an observed value and reproducible everywhere.
pub fn empirical_quantile(xs: &[f64], p: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InsufficientData {
            what: "empirical quantile",
            needed: 1,
            actual: 0,
        });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter {
            what: "quantile probability",
            value: p,
        });
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite quantile input"));
    let m = sorted.len();
    let idx = ((p * m as f64).ceil() as isize - 1).clamp(0, m as isize - 1) as usize;
    Ok(sorted[idx])
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal cumulative distribution function.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `log Phi(z)`, stable far into the left tail.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z > -10.0 {
        norm_cdf(z).ln()
    } else {
        // Asymptotic expansion of Mills' ratio.
        let z2 = z * z;
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// Complementary error function, rational approximation with relative error
/// below 1.2e-7 on the whole real line.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}
