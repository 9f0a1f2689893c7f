//! Robust multi-period portfolio selection under a mean-standard-deviation
//! criterion with Kullback-Leibler distributional uncertainty.
//!
//! The library solves, by backward induction, a sequence of per-period
//! max-min problems: the inner minimization picks the worst-case return
//! distribution inside a KL ball around the nominal model (an exponential
//! tilt of the nominal sample), and the outer maximization picks portfolio
//! weights against that worst case. Alongside the solver it provides the
//! divergence estimators, samplers and comparison studies needed to measure
//! the model risk of ignoring the uncertainty altogether.

// Validation guards use the negated form on purpose: `!(x > 0.0)` rejects
// NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod divergence;
pub mod error;
pub mod experiments;
pub mod modelrisk;
pub mod numerics;
pub mod objective;
pub mod sampling;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use types::{NominalModel, PortfolioSpec, ReturnSample, RiskProfile, Strategy, WealthPath};
