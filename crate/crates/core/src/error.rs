//! Error type shared by every module of the library.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix does not have the size the operation requires.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A scalar parameter is outside its admissible range.
    InvalidParameter { what: &'static str, value: f64 },
    /// An input collection that must be nonempty is empty or too small.
    InsufficientData { what: &'static str, needed: usize, actual: usize },
    /// A covariance matrix is not symmetric positive definite; the leading
    /// minor of the given order failed during factorization.
    DegenerateCovariance { order: usize },
    /// An intermediate value became NaN or infinite.
    NonFinite { what: &'static str },
    /// The requested KL radius exceeds what the finite sample can express;
    /// the supremum over all tilts of this sample is `max_kl`. A larger
    /// sample raises the ceiling.
    EtaTooLargeForSample { eta: f64, max_kl: f64 },
    /// The risk aversion is too small for the feasibility condition
    /// `1 - g / kappa^2 > 0` of the per-period system.
    KappaTooSmall { kappa: f64, g: f64 },
    /// The fixed-point iteration did not reach its tolerance.
    NoConvergence { residual: f64, iterations: usize },
    /// The dual multiplier collapsed below the numerically usable range.
    ThetaUnderflow { theta: f64 },
    /// The requested mean shift needs a skewness vector of norm >= 1,
    /// which no skew-normal distribution can provide.
    BetaOutOfRange { beta_pct: f64, skew_norm: f64 },
    /// Every repeat of the nearest-neighbor estimate came out nonpositive;
    /// the two distributions are indistinguishable at this sample size.
    AllEstimatesRejected { repeats: usize },
    /// Portfolio weights stopped summing to one beyond tolerance. The
    /// closed form guarantees the budget algebraically, so this indicates
    /// a solver defect rather than bad input.
    BudgetViolation { sum: f64 },
    /// An error raised while solving the period with the given index.
    Period { index: usize, source: Box<Error> },
}

impl Error {
    /// Annotates an error with the period it occurred in.
    pub fn in_period(self, index: usize) -> Error {
        Error::Period {
            index,
            source: Box::new(self),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                what,
                expected,
                actual,
            } => write!(f, "{what}: expected dimension {expected}, got {actual}"),
            Error::InvalidParameter { what, value } => {
                write!(f, "invalid parameter {what} = {value}")
            }
            Error::InsufficientData {
                what,
                needed,
                actual,
            } => write!(f, "{what}: need at least {needed} entries, got {actual}"),
            Error::DegenerateCovariance { order } => write!(
                f,
                "covariance matrix is not positive definite (leading minor of order {order})"
            ),
            Error::NonFinite { what } => write!(f, "non-finite value encountered in {what}"),
            Error::EtaTooLargeForSample { eta, max_kl } => write!(
                f,
                "KL radius {eta} exceeds the maximum {max_kl} achievable on this sample; \
                 increase the sample size"
            ),
            Error::KappaTooSmall { kappa, g } => write!(
                f,
                "risk aversion {kappa} violates feasibility: 1 - g/kappa^2 <= 0 with g = {g}"
            ),
            Error::NoConvergence {
                residual,
                iterations,
            } => write!(
                f,
                "no convergence after {iterations} iterations (last residual {residual:e})"
            ),
            Error::ThetaUnderflow { theta } => {
                write!(f, "dual multiplier theta = {theta:e} is numerically unusable")
            }
            Error::BetaOutOfRange { beta_pct, skew_norm } => write!(
                f,
                "mean shift of {beta_pct}% needs skewness norm {skew_norm:.4} >= 1"
            ),
            Error::AllEstimatesRejected { repeats } => write!(
                f,
                "all {repeats} divergence estimates were nonpositive; distributions are \
                 indistinguishable at this sample size"
            ),
            Error::BudgetViolation { sum } => {
                write!(f, "weights sum to {sum} instead of 1; solver defect")
            }
            Error::Period { index, source } => write!(f, "period {index}: {source}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Period { source, .. } => Some(source),
            _ => None,
        }
    }
}
