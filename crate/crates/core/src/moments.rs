//! Central moments of the NSVh terminal price and moment-matching fits.
//!
//! The `lambda = 0` fit solves the univariate equation `kappa = f(w)` with
//! `w = e^S`; any other `lambda` uses a nested solve (correlation from the
//! skewness at fixed `w`, then `w` from the excess kurtosis). Internally the
//! unknown is `y = w - 1` so that small `S` keeps its precision.

use serde::{Deserialize, Serialize};

use crate::error::{NsvhError, Result};
use crate::params::{CanonicalParams, NsvhParams, MAX_S_VAR};
use crate::root::{bisect, brent, newton_bisect};
use crate::scalar::Real;
use crate::special::stable_exp_ratio;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary<T> {
    pub mean: T,
    pub mu2: T,
    pub skew: T,
    pub exkurt: T,
}

/// Dimensionless central moments `(mu2, mu3, mu4)` of the canonical form.
pub fn canonical_moments<T: Real>(c: &CanonicalParams<T>) -> (T, T, T) {
    let s = c.s_var;
    let lam = c.lambda;
    let rho = c.rho;
    let rho2 = rho * rho;
    let rs2 = (T::one() - rho) * (T::one() + rho);
    let ym1 = s.exp_m1();
    let w = ym1 + T::one();
    let ser = |k: f64| stable_exp_ratio(T::lit(k) + lam, s);
    let wl = |k: f64| (T::lit(k) * lam * s).exp();
    let (e1, e3, e5) = (ser(1.0), ser(3.0), ser(5.0));
    let (two, three) = (T::lit(2.0), T::lit(3.0));

    let m2 = rho2 * wl(1.0) * ym1 + rs2 * e1;
    let m3 = rho2 * rho * wl(1.5) * ym1 * ym1 * (w + two) + three * rho * rs2 * wl(0.5) * (e3 - e1);
    let quartic = w.powi(4) + two * w.powi(3) + three * w * w - three;
    let w1l = ((T::one() + lam) * s).exp();
    let w3l = ((three + lam) * s).exp();
    let m4 = rho2 * rho2 * wl(2.0) * ym1 * ym1 * quartic
        + T::lit(6.0) * rho2 * rs2 * wl(1.0) * (w * e5 - two * e3 + e1)
        + T::lit(1.5) * rs2 * rs2 * (-w1l * e5 + (w3l + T::one()) * e3 - e1);
    (m2, m3, m4)
}

/// Mean, variance, skewness and excess kurtosis of `F_T`.
///
/// `alpha = 0` gives the normal law with variance `sigma0^2 T`.
pub fn central_moments<T: Real>(params: &NsvhParams<T>) -> MomentSummary<T> {
    if params.alpha() == T::zero() {
        return MomentSummary {
            mean: params.mean(),
            mu2: params.sigma0() * params.sigma0() * params.t_expiry(),
            skew: T::zero(),
            exkurt: T::zero(),
        };
    }
    let (m2, m3, m4) = canonical_moments(&params.canonical());
    let scale = params.scale();
    MomentSummary {
        mean: params.mean(),
        mu2: scale * scale * m2,
        skew: m3 / (m2 * m2.sqrt()),
        exkurt: m4 / (m2 * m2) - T::lit(3.0),
    }
}

/// `(skew, exkurt)` of the canonical form.
fn shape(s_var: f64, rho: f64, lambda: f64) -> (f64, f64) {
    let (m2, m3, m4) = canonical_moments(&CanonicalParams { s_var, rho, lambda });
    (m3 / (m2 * m2.sqrt()), m4 / (m2 * m2) - 3.0)
}

/// `w^3 + 3w^2 + 6w + 5` in terms of `y = w - 1`.
fn quintic_core(y: f64) -> f64 {
    ((y + 6.0) * y + 15.0) * y + 15.0
}

/// Excess kurtosis of normal SABR as a function of `w`, with `rho`
/// eliminated through the skewness `s`.
pub fn kurtosis_curve(w: f64, skew: f64) -> f64 {
    curve_y(w - 1.0, skew)
}

fn curve_y(y: f64, skew: f64) -> f64 {
    let g = quintic_core(y);
    0.8 * skew * skew * g / ((y + 3.0) * (y + 3.0)) + y * (1.0 + 0.2 * g)
}

fn curve_y_prime(y: f64, skew: f64) -> f64 {
    let g = quintic_core(y);
    let dg = (3.0 * y + 12.0) * y + 15.0;
    let u = y + 3.0;
    0.8 * skew * skew * (dg * u - 2.0 * g) / (u * u * u) + 1.0 + 0.2 * g + 0.2 * y * dg
}

/// Root of `y (y + 3)^2 = s^2`, the `|rho| = 1` boundary.
fn y_lower(skew: f64) -> f64 {
    let x = 0.5 * skew * skew;
    let theta = (x + (x * (x + 2.0)).sqrt()).ln_1p();
    4.0 * (theta / 6.0).sinh().powi(2)
}

fn y_upper(skew: f64, exkurt: f64, y_m: f64) -> f64 {
    let g = quintic_core(y_m);
    let plug = (exkurt - 0.8 * skew * skew * g / ((y_m + 3.0) * (y_m + 3.0))) / (1.0 + 0.2 * g);
    let mut y = plug.max(y_m);
    if y <= 0.0 {
        y = 1e-3;
    }
    let mut guard = 0;
    while curve_y(y, skew) < exkurt && guard < 200 {
        y *= 2.0;
        guard += 1;
    }
    y
}

/// Bracket `[w_m, w_M]` for the normal SABR root `kappa = f(w)`.
///
/// `w_m` solves `(w - 1)(w + 2)^2 = s^2`; `w_M` starts from the plug-in
/// bound and doubles `w - 1` until `f(w_M) >= kappa`.
pub fn bracket_w(skew: f64, exkurt: f64) -> (f64, f64) {
    let y_m = y_lower(skew);
    (1.0 + y_m, 1.0 + y_upper(skew, exkurt, y_m))
}

fn check_target(target: &MomentSummary<f64>, t_expiry: f64) -> Result<()> {
    let MomentSummary {
        mean,
        mu2,
        skew,
        exkurt,
    } = *target;
    if !(mean.is_finite() && mu2.is_finite() && skew.is_finite() && exkurt.is_finite()) {
        return Err(NsvhError::param("target", "moments must be finite"));
    }
    if !(t_expiry > 0.0 && t_expiry.is_finite()) {
        return Err(NsvhError::param("t_expiry", format!("must be > 0, got {t_expiry}")));
    }
    if !(mu2 > 0.0) {
        return Err(NsvhError::ZeroVariance(format!("mu2 = {mu2}")));
    }
    Ok(())
}

fn infeasible(reason: String, skew: f64, min_exkurt: f64, y_m: f64) -> NsvhError {
    NsvhError::InfeasibleMoments {
        reason,
        min_exkurt,
        boundary_s_var: y_m.ln_1p(),
        boundary_rho: if skew < 0.0 { -1.0 } else { 1.0 },
    }
}

fn normal_limit(target: &MomentSummary<f64>, t_expiry: f64, lambda: f64) -> Result<NsvhParams<f64>> {
    NsvhParams::new((target.mu2 / t_expiry).sqrt(), 0.0, 0.0, lambda, target.mean, t_expiry)
}

fn assemble(
    target: &MomentSummary<f64>,
    t_expiry: f64,
    y: f64,
    rho: f64,
    lambda: f64,
    m2: f64,
) -> Result<NsvhParams<f64>> {
    let s_var = y.ln_1p();
    if s_var > MAX_S_VAR {
        return Err(NsvhError::NoSolution(format!(
            "fitted S = {s_var} exceeds the supported maximum {MAX_S_VAR}"
        )));
    }
    let scale = (target.mu2 / m2).sqrt();
    let alpha = (s_var / t_expiry).sqrt();
    NsvhParams::from_mean(scale * alpha, alpha, rho, lambda, target.mean, t_expiry)
}

/// Normal SABR (`lambda = 0`) parameters matching mean, variance, skewness
/// and excess kurtosis.
pub fn fit_normal_sabr(target: &MomentSummary<f64>, t_expiry: f64) -> Result<NsvhParams<f64>> {
    check_target(target, t_expiry)?;
    let (s, k) = (target.skew, target.exkurt);
    let y_m = y_lower(s);
    let f_m = curve_y(y_m, s);
    let ftol = 1e-12 * (1.0 + k.abs());
    if k < f_m - ftol {
        return Err(infeasible(
            format!("excess kurtosis {k} below the minimum {f_m} attainable at skewness {s}"),
            s,
            f_m,
            y_m,
        ));
    }
    let y = if k <= f_m + ftol {
        y_m
    } else {
        let y_hi = y_upper(s, k, y_m);
        newton_bisect(
            |y| (curve_y(y, s) - k, curve_y_prime(y, s)),
            y_m,
            y_hi,
            0.5 * (y_m + y_hi),
            1e-15 * y_hi,
            ftol,
            500,
        )?
    };
    if y == 0.0 {
        return normal_limit(target, t_expiry, 0.0);
    }
    let rho = (s / ((y + 3.0) * y.sqrt())).clamp(-1.0, 1.0);
    assemble(target, t_expiry, y, rho, 0.0, y)
}

/// Correlation giving skewness `skew` at fixed `S`; `|skew|` must not exceed
/// the `|rho| = 1` value.
fn rho_for_skew(s_var: f64, lambda: f64, skew: f64) -> Result<f64> {
    let (hi, _) = shape(s_var, 1.0, lambda);
    if skew >= hi {
        return Ok(1.0);
    }
    if skew <= -hi {
        return Ok(-1.0);
    }
    bisect(|r| shape(s_var, r, lambda).0 - skew, -1.0, 1.0, 1e-15)
}

/// Moment match for any `lambda` by the nested solve described in the module docs.
pub fn fit_nsvh(target: &MomentSummary<f64>, t_expiry: f64, lambda: f64) -> Result<NsvhParams<f64>> {
    check_target(target, t_expiry)?;
    if !lambda.is_finite() {
        return Err(NsvhError::param("lambda", "must be finite"));
    }
    let (s, k) = (target.skew, target.exkurt);
    let y_m = y_lower(s);
    // |rho| = 1 skewness is (w + 2) sqrt(w - 1) for every lambda, so the
    // lambda = 0 lower bound applies unchanged
    let kurt_at = |y: f64| -> Result<(f64, f64)> {
        if y == 0.0 {
            // normal limit
            return Ok((0.0, 0.0));
        }
        let s_var = y.ln_1p();
        let rho = rho_for_skew(s_var, lambda, s)?;
        Ok((shape(s_var, rho, lambda).1, rho))
    };
    if y_m == 0.0 && k.abs() <= 1e-12 {
        return normal_limit(target, t_expiry, lambda);
    }
    let (k_m, _) = kurt_at(y_m)?;
    let ftol = 1e-12 * (1.0 + k.abs());
    if k < k_m - ftol {
        return Err(infeasible(
            format!("excess kurtosis {k} below the minimum {k_m} attainable at skewness {s}"),
            s,
            k_m,
            y_m,
        ));
    }
    let y = if k <= k_m + ftol {
        y_m
    } else {
        let mut y_hi = y_upper(s, k, y_m).max(1e-3);
        let mut guard = 0;
        while kurt_at(y_hi)?.0 < k {
            y_hi *= 2.0;
            guard += 1;
            if guard > 200 || y_hi.ln_1p() > MAX_S_VAR {
                return Err(NsvhError::NoSolution(format!(
                    "excess kurtosis {k} not reached below S = {MAX_S_VAR}"
                )));
            }
        }
        let mut failed = None;
        let root = brent(
            |y| match kurt_at(y) {
                Ok((kk, _)) => kk - k,
                Err(e) => {
                    failed = Some(e);
                    f64::NAN
                }
            },
            y_m,
            y_hi,
            1e-15 * y_hi,
            500,
        );
        if let Some(e) = failed {
            return Err(e);
        }
        root?
    };
    let s_var = y.ln_1p();
    let rho = rho_for_skew(s_var, lambda, s)?;
    let (m2, _, _) = canonical_moments(&CanonicalParams { s_var, rho, lambda });
    assemble(target, t_expiry, y, rho, lambda, m2)
}

/// `lambda = 1` (Johnson S_U) moment match.
pub fn fit_su(target: &MomentSummary<f64>, t_expiry: f64) -> Result<NsvhParams<f64>> {
    fit_nsvh(target, t_expiry, 1.0)
}

/// Mean and central moments with denominator `n` (no small-sample correction).
pub fn sample_moments(data: &[f64]) -> Result<MomentSummary<f64>> {
    if data.len() < 4 {
        return Err(NsvhError::InsufficientData(format!(
            "need at least 4 observations, got {}",
            data.len()
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(NsvhError::InsufficientData("non-finite observation".into()));
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in data {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if !(m2 > 0.0) {
        return Err(NsvhError::ZeroVariance("all observations are equal".into()));
    }
    Ok(MomentSummary {
        mean,
        mu2: m2,
        skew: m3 / (m2 * m2.sqrt()),
        exkurt: m4 / (m2 * m2) - 3.0,
    })
}

/// Percent returns `100 (P_i / P_{i-1} - 1)` of a level series.
pub fn percent_returns(levels: &[f64]) -> Result<Vec<f64>> {
    if levels.len() < 2 {
        return Err(NsvhError::InsufficientData("need at least 2 levels".into()));
    }
    if levels.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(NsvhError::param("levels", "must be finite and > 0"));
    }
    Ok(levels.windows(2).map(|w| 100.0 * (w[1] / w[0] - 1.0)).collect())
}
