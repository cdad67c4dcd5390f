//! Normal SABR (`lambda = 0`) approximation, Bachelier pricing and its inverse.

use serde::{Deserialize, Serialize};

use crate::error::{NsvhError, Result};
use crate::params::NsvhParams;
use crate::root::newton_bisect;
use crate::scalar::Real;
use crate::special::{norm_cdf, norm_pdf};

/// Below this `|zeta|` the ratio `zeta / chi` is taken from its series.
const ZETA_SERIES_SWITCH: f64 = 1e-6;
const RHO_LIMIT: f64 = 1.0 - 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalVolQuote<T> {
    pub strike: T,
    pub normal_vol: T,
}

/// `chi(zeta) = log((sqrt(1 - 2 rho zeta + zeta^2) - rho + zeta) / (1 - rho))`
/// for `zeta >= 0`, written as a `ln_1p` of a cancellation-free argument.
fn chi_nonneg<T: Real>(zeta: T, rho: T) -> T {
    let one = T::one();
    let root = (one - T::lit(2.0) * rho * zeta + zeta * zeta).sqrt();
    let arg = zeta * (root + one + zeta - T::lit(2.0) * rho) / ((root + one) * (one - rho));
    arg.ln_1p()
}

fn zeta_over_chi<T: Real>(zeta: T, rho: T) -> T {
    if zeta.abs() < T::lit(ZETA_SERIES_SWITCH) {
        let c2 = (T::lit(2.0) - T::lit(3.0) * rho * rho) / T::lit(12.0);
        return T::one() - T::lit(0.5) * rho * zeta + c2 * zeta * zeta;
    }
    // chi(zeta, rho) = -chi(-zeta, -rho)
    let chi = if zeta >= T::zero() {
        chi_nonneg(zeta, rho)
    } else {
        -chi_nonneg(-zeta, -rho)
    };
    zeta / chi
}

/// Hagan's normal (beta = 0) implied volatility. `lambda` is ignored.
pub fn hagan_normal_vol<T: Real>(params: &NsvhParams<T>, strike: T) -> Result<T> {
    let rho = params.rho();
    if rho.abs() >= T::lit(RHO_LIMIT) {
        return Err(NsvhError::DegenerateCorrelation(rho.abs().as_f64()));
    }
    let (sigma0, alpha) = (params.sigma0(), params.alpha());
    let zeta = alpha / sigma0 * (params.f0() - strike);
    let correction = T::one() + (T::lit(2.0) - T::lit(3.0) * rho * rho) / T::lit(24.0) * params.s_var();
    Ok(sigma0 * zeta_over_chi(zeta, rho) * correction)
}

/// Undiscounted Bachelier price. A zero vol returns the intrinsic value.
pub fn bachelier_price<T: Real>(forward: T, strike: T, normal_vol: T, t_expiry: T, is_call: bool) -> T {
    let m = forward - strike;
    let v = normal_vol * t_expiry.sqrt();
    if v <= T::zero() {
        return if is_call { m.max(T::zero()) } else { (-m).max(T::zero()) };
    }
    let d = m / v;
    if is_call {
        m * norm_cdf(d) + v * norm_pdf(d)
    } else {
        -m * norm_cdf(-d) + v * norm_pdf(d)
    }
}

/// `d price / d normal_vol`.
pub fn bachelier_vega<T: Real>(forward: T, strike: T, normal_vol: T, t_expiry: T) -> T {
    let sqrt_t = t_expiry.sqrt();
    sqrt_t * norm_pdf((forward - strike) / (normal_vol * sqrt_t))
}

/// Out-of-the-money price as a function of total vol `v`; depends on `|F - K|` only.
fn otm_value<T: Real>(distance: T, v: T) -> T {
    let x = distance / v;
    v * norm_pdf(x) - distance * norm_cdf(-x)
}

/// Normal vol reproducing `price`. Works on the time value so that deep
/// in-the-money quotes keep their precision.
pub fn implied_normal_vol<T: Real>(price: T, forward: T, strike: T, t_expiry: T, is_call: bool) -> Result<T> {
    if !(t_expiry > T::zero()) || !price.is_finite() {
        return Err(NsvhError::NoSolution(format!(
            "cannot invert price {price} at expiry {t_expiry}"
        )));
    }
    let m = forward - strike;
    let intrinsic = if is_call { m.max(T::zero()) } else { (-m).max(T::zero()) };
    let tv = price - intrinsic;
    if !(tv > T::zero()) {
        return Err(NsvhError::NoSolution(format!(
            "price {price} does not exceed intrinsic value {intrinsic}"
        )));
    }
    let distance = m.abs();
    // otm_value(v) <= v / sqrt(2 pi), so this is a lower bound on v
    let lo = tv * T::lit(2.0 * std::f64::consts::PI).sqrt();
    let mut hi = lo.max(distance);
    let mut doublings = 0;
    while otm_value(distance, hi) < tv {
        hi = hi * T::lit(2.0);
        doublings += 1;
        if doublings > 200 {
            return Err(NsvhError::NoSolution("vol bracket overflow".into()));
        }
    }
    if otm_value(distance, lo) >= tv {
        return Ok(lo / t_expiry.sqrt());
    }
    let eps = T::epsilon();
    let v = newton_bisect(
        |v| (otm_value(distance, v) - tv, norm_pdf(distance / v)),
        lo,
        hi,
        T::lit(0.5) * (lo + hi),
        T::lit(4.0) * eps * hi,
        T::lit(2.0) * eps * tv,
        200,
    )?;
    Ok(v / t_expiry.sqrt())
}
