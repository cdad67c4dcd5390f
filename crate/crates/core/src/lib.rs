//! NSVh (hyperbolic normal stochastic volatility) model: exact simulation,
//! Johnson S_U closed forms, normal SABR, moment matching and calibration.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic_su;
pub mod calibrate;
pub mod error;
pub mod mc;
pub mod moments;
pub mod oracles;
pub mod params;
pub mod risk;
pub mod root;
pub mod sabr_normal;
pub mod scalar;
pub mod special;

pub use error::{NsvhError, Result};
pub use params::{CanonicalParams, NsvhParams, MAX_S_VAR};
pub use scalar::Real;

pub type Params = NsvhParams<f64>;
pub type Canonical = CanonicalParams<f64>;
pub type Params32 = NsvhParams<f32>;
pub type Moments = moments::MomentSummary<f64>;
pub type Score = analytic_su::SuScore<f64>;
pub type VolQuote = sabr_normal::NormalVolQuote<f64>;
