//! Smile calibration of `(sigma0, alpha, rho)` for `lambda = 0` or `lambda = 1`.
//!
//! Quotes are turned into normal vols once; residuals are model minus quoted
//! vol. The solver is Levenberg-Marquardt on `(ln sigma0, ln alpha, atanh rho)`
//! with a central-difference Jacobian. With three quotes this is a damped
//! Newton iteration on a square system.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::analytic_su::option_price;
use crate::error::{NsvhError, Result};
use crate::params::NsvhParams;
use crate::sabr_normal::{hagan_normal_vol, implied_normal_vol, NormalVolQuote};

const RHO_BOUND: f64 = 1.0 - 1e-6;
/// Below `S` of this size a vanishing vol-of-vol is tried.
const FLAT_S_VAR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuoteKind {
    NormalVol,
    OptionPrice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionSide {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmileQuote {
    /// `K - forward`.
    pub strike_offset: f64,
    pub kind: QuoteKind,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<OptionSide>,
}

impl SmileQuote {
    pub fn normal_vol(strike_offset: f64, vol: f64) -> Self {
        Self {
            strike_offset,
            kind: QuoteKind::NormalVol,
            value: vol,
            side: None,
        }
    }

    pub fn price(strike_offset: f64, value: f64, side: OptionSide) -> Self {
        Self {
            strike_offset,
            kind: QuoteKind::OptionPrice,
            value,
            side: Some(side),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Target max absolute vol residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// `(sigma0, alpha, rho)`; derived from the smile shape when absent.
    pub initial_guess: Option<(f64, f64, f64)>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
            initial_guess: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub params: NsvhParams<f64>,
    /// Model minus quoted normal vol, per quote.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Normal vol implied by the model at `strike`: Hagan's formula for
/// `lambda = 0`, the S_U price inverted through Bachelier for `lambda = 1`.
pub fn model_normal_vol(params: &NsvhParams<f64>, strike: f64) -> Result<f64> {
    let lambda = params.lambda();
    if lambda != 0.0 && lambda != 1.0 {
        return Err(NsvhError::UnsupportedLambda(lambda));
    }
    if params.alpha() == 0.0 {
        return Ok(params.sigma0());
    }
    if lambda == 0.0 {
        return hagan_normal_vol(params, strike);
    }
    let fwd = params.mean();
    // out-of-the-money side keeps the time value well conditioned
    let is_call = strike >= fwd;
    let price = option_price(strike, is_call, params)?;
    implied_normal_vol(price, fwd, strike, params.t_expiry(), is_call)
}

/// Model smile on a strike grid; each point fails independently.
pub fn smile_curve(params: &NsvhParams<f64>, strikes: &[f64]) -> Vec<Result<NormalVolQuote<f64>>> {
    strikes
        .iter()
        .map(|&k| {
            model_normal_vol(params, k).map(|v| NormalVolQuote {
                strike: k,
                normal_vol: v,
            })
        })
        .collect()
}

fn quote_vols(quotes: &[SmileQuote], forward: f64, t_expiry: f64) -> Result<Vec<f64>> {
    quotes
        .iter()
        .enumerate()
        .map(|(i, q)| {
            if !(q.value > 0.0 && q.value.is_finite()) || !q.strike_offset.is_finite() {
                return Err(NsvhError::param(
                    "quotes",
                    format!("quote {i}: value must be finite and > 0"),
                ));
            }
            match q.kind {
                QuoteKind::NormalVol => Ok(q.value),
                QuoteKind::OptionPrice => {
                    let side = q
                        .side
                        .ok_or_else(|| NsvhError::param("quotes", format!("quote {i}: price quote needs a side")))?;
                    let k = forward + q.strike_offset;
                    implied_normal_vol(q.value, forward, k, t_expiry, side == OptionSide::Call)
                        .map_err(|e| NsvhError::NoSolution(format!("quote {i}: {e}")))
                }
            }
        })
        .collect()
}

struct Problem<'a> {
    strikes: &'a [f64],
    vols: &'a [f64],
    forward: f64,
    t_expiry: f64,
    lambda: f64,
}

fn c_bound() -> f64 {
    RHO_BOUND.atanh()
}

impl Problem<'_> {
    fn params(&self, x: &Vector3<f64>) -> Result<NsvhParams<f64>> {
        let (sigma0, alpha) = (x[0].exp(), x[1].exp());
        let rho = x[2].clamp(-c_bound(), c_bound()).tanh();
        self.params_raw(sigma0, alpha, rho)
    }

    fn params_raw(&self, sigma0: f64, alpha: f64, rho: f64) -> Result<NsvhParams<f64>> {
        NsvhParams::from_mean(sigma0, alpha, rho, self.lambda, self.forward, self.t_expiry)
    }

    fn residuals_of(&self, p: &NsvhParams<f64>) -> Result<DVector<f64>> {
        let mut r = DVector::zeros(self.strikes.len());
        for (i, (&k, &v)) in self.strikes.iter().zip(self.vols).enumerate() {
            r[i] = model_normal_vol(p, k)? - v;
        }
        Ok(r)
    }

    fn residuals(&self, x: &Vector3<f64>) -> Option<DVector<f64>> {
        let p = self.params(x).ok()?;
        let r = self.residuals_of(&p).ok()?;
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self, x: &Vector3<f64>) -> Option<DMatrix<f64>> {
        let m = self.strikes.len();
        let mut jac = DMatrix::zeros(m, 3);
        for j in 0..3 {
            let h = 1e-6 * (1.0 + x[j].abs());
            let (mut up, mut dn) = (*x, *x);
            up[j] += h;
            dn[j] -= h;
            let col = (self.residuals(&up)? - self.residuals(&dn)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        Some(jac)
    }
}

/// Quadratic fit of the smile through the quotes, matched to the ATM
/// expansion `sigma0 + rho alpha x / 2 + (2 - 3 rho^2) alpha^2 x^2 / (12 sigma0)`.
fn initial_guess(offsets: &[f64], vols: &[f64], t_expiry: f64) -> (f64, f64, f64) {
    let m = offsets.len();
    let a = DMatrix::from_fn(m, 3, |i, j| offsets[i].powi(j as i32));
    let b = DVector::from_column_slice(vols);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .unwrap_or_else(|_| DVector::from_vec(vec![vols[0], 0.0, 0.0]));
    let (c0, c1, c2) = (coef[0].max(1e-12), coef[1], coef[2]);
    let ra = 2.0 * c1;
    let alpha_sq = (12.0 * c0 * c2 + 3.0 * ra * ra) / 2.0;
    let alpha = if alpha_sq > 0.0 { alpha_sq.sqrt().max(1e-3) } else { 0.1 };
    let rho = (ra / alpha).clamp(-0.9, 0.9);
    let sigma0 = c0 / (1.0 + (2.0 - 3.0 * rho * rho) / 24.0 * alpha * alpha * t_expiry);
    (sigma0.max(1e-12), alpha, rho)
}

fn max_abs(r: &DVector<f64>) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Calibrates to three or more quotes at distinct strikes.
///
/// `forward` is the expected terminal price `F̄_T`; quote offsets are relative
/// to it. Non-convergence is not an error: the best point is returned with
/// `converged = false`.
pub fn calibrate_smile(
    quotes: &[SmileQuote],
    forward: f64,
    t_expiry: f64,
    lambda: f64,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    if lambda != 0.0 && lambda != 1.0 {
        return Err(NsvhError::UnsupportedLambda(lambda));
    }
    if quotes.len() < 3 {
        return Err(NsvhError::InsufficientData(format!(
            "need at least 3 quotes, got {}",
            quotes.len()
        )));
    }
    if !forward.is_finite() {
        return Err(NsvhError::param("forward", "must be finite"));
    }
    if !(t_expiry > 0.0 && t_expiry.is_finite()) {
        return Err(NsvhError::param("t_expiry", "must be > 0"));
    }
    let mut offsets: Vec<f64> = quotes.iter().map(|q| q.strike_offset).collect();
    offsets.sort_by(f64::total_cmp);
    if offsets.windows(2).any(|w| w[0] == w[1]) {
        return Err(NsvhError::param("quotes", "strikes must be distinct"));
    }
    if !(opts.tolerance > 0.0) {
        return Err(NsvhError::param("tolerance", "must be > 0"));
    }

    let vols = quote_vols(quotes, forward, t_expiry)?;
    let offsets: Vec<f64> = quotes.iter().map(|q| q.strike_offset).collect();
    let strikes: Vec<f64> = offsets.iter().map(|o| forward + o).collect();
    let prob = Problem {
        strikes: &strikes,
        vols: &vols,
        forward,
        t_expiry,
        lambda,
    };

    let (s0, a0, r0) = opts
        .initial_guess
        .unwrap_or_else(|| initial_guess(&offsets, &vols, t_expiry));
    if !(s0 > 0.0 && a0 > 0.0 && r0.abs() < 1.0) {
        return Err(NsvhError::param(
            "initial_guess",
            "needs sigma0 > 0, alpha > 0 and |rho| < 1",
        ));
    }
    let mut x = Vector3::new(s0.ln(), a0.ln(), r0.atanh());
    let mut r = prob
        .residuals(&x)
        .ok_or_else(|| NsvhError::NoSolution("model cannot be evaluated at the initial guess".into()))?;
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    let mut iterations = 0;
    // polish well past the tolerance; the extra steps are cheap
    let target = opts.tolerance * 1e-3;
    let square = strikes.len() == 3;
    let mut stalled = false;

    while iterations < opts.max_iterations && max_abs(&r) > target {
        iterations += 1;
        let Some(jac) = prob.jacobian(&x) else {
            break;
        };
        let jt = jac.transpose();
        let jtj: Matrix3<f64> = (&jt * &jac).fixed_view::<3, 3>(0, 0).into_owned();
        let g: Vector3<f64> = (&jt * &r).fixed_view::<3, 1>(0, 0).into_owned();
        if !square && g.norm() <= 1e-15 * (1.0 + cost.sqrt()) {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj;
            for i in 0..3 {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-g)) else {
                mu *= 10.0;
                continue;
            };
            let mut cand = x + step;
            cand[2] = cand[2].clamp(-c_bound(), c_bound());
            if let Some(rc) = prob.residuals(&cand) {
                let cc = rc.norm_squared();
                if cc < cost {
                    let small = (cand - x).norm() <= 1e-15 * (1.0 + x.norm());
                    x = cand;
                    r = rc;
                    cost = cc;
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    stalled = small;
                    break;
                }
            }
            mu *= 4.0;
        }
        if !accepted || stalled {
            break;
        }
    }

    let mut params = prob.params(&x)?;
    let mut diagnostic = None;
    if params.s_var() < FLAT_S_VAR {
        let flat = NsvhParams::new(params.sigma0(), 0.0, 0.0, lambda, forward, t_expiry)?;
        let rf = prob.residuals_of(&flat)?;
        if max_abs(&rf) <= opts.tolerance {
            diagnostic = Some(format!(
                "flat smile: vol-of-vol collapsed to the alpha = 0 boundary (alpha was {:.3e})",
                params.alpha()
            ));
            params = flat;
            r = rf;
        } else {
            diagnostic = Some(format!("vol-of-vol near zero: alpha = {:.3e}", params.alpha()));
        }
    }
    if params.rho().abs() >= RHO_BOUND * (1.0 - 1e-12) {
        diagnostic = Some(format!("correlation at the bound: rho = {}", params.rho()));
    }
    let converged = if square {
        max_abs(&r) <= opts.tolerance
    } else {
        iterations < opts.max_iterations
    };
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!(
            "no convergence after {iterations} iterations: max residual {:.3e}",
            max_abs(&r)
        ));
    }
    Ok(CalibrationResult {
        params,
        residuals: r.iter().copied().collect(),
        iterations,
        converged,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn one_by_one() -> NsvhParams<f64> {
        NsvhParams::from_mean(0.00477, 0.62181, 0.32244, 1.0, 0.020221, 1.0).unwrap()
    }

    fn ten_by_ten0() -> NsvhParams<f64> {
        NsvhParams::new(0.00691, 0.22372, 0.01697, 0.0, 0.030673, 10.0).unwrap()
    }

    fn price_quotes(p: &NsvhParams<f64>, offsets: &[f64]) -> Vec<SmileQuote> {
        offsets
            .iter()
            .map(|&o| {
                let side = if o >= 0.0 { OptionSide::Call } else { OptionSide::Put };
                let v = option_price(p.mean() + o, side == OptionSide::Call, p).unwrap();
                SmileQuote::price(o, v, side)
            })
            .collect()
    }

    #[test]
    fn su_round_trip_from_prices() {
        let p = one_by_one();
        let quotes = price_quotes(&p, &[-0.01, 0.0, 0.01]);
        let res = calibrate_smile(&quotes, p.mean(), 1.0, 1.0, &CalibrationOptions::default()).unwrap();
        assert!(res.converged, "{res:?}");
        assert!(rel(res.params.sigma0(), p.sigma0()) < 1e-7);
        assert!(rel(res.params.alpha(), p.alpha()) < 1e-7);
        assert!(rel(res.params.rho(), p.rho()) < 1e-7);
        assert!(res.residuals.iter().all(|r| r.abs() <= 1e-10));
    }

    #[test]
    fn normal_sabr_round_trip_from_vols() {
        let p = ten_by_ten0();
        let quotes: Vec<SmileQuote> = [-0.01, 0.0, 0.01]
            .iter()
            .map(|&o| SmileQuote::normal_vol(o, hagan_normal_vol(&p, p.f0() + o).unwrap()))
            .collect();
        let res = calibrate_smile(&quotes, p.f0(), 10.0, 0.0, &CalibrationOptions::default()).unwrap();
        assert!(res.converged);
        assert!(rel(res.params.sigma0(), p.sigma0()) < 1e-7);
        assert!(rel(res.params.alpha(), p.alpha()) < 1e-7);
        assert!(rel(res.params.rho(), p.rho()) < 1e-7);
    }

    #[test]
    fn independent_of_starting_point() {
        let p = one_by_one();
        let quotes = price_quotes(&p, &[-0.01, 0.0, 0.01]);
        let starts = [(0.004, 0.4, 0.0), (0.006, 1.0, 0.6), (0.003, 0.3, -0.5)];
        let fits: Vec<NsvhParams<f64>> = starts
            .iter()
            .map(|&g| {
                let opts = CalibrationOptions {
                    initial_guess: Some(g),
                    ..Default::default()
                };
                calibrate_smile(&quotes, p.mean(), 1.0, 1.0, &opts).unwrap().params
            })
            .collect();
        for f in &fits {
            assert!(rel(f.sigma0(), fits[0].sigma0()) < 1e-6);
            assert!(rel(f.alpha(), fits[0].alpha()) < 1e-6);
            assert!((f.rho() - fits[0].rho()).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_smile_hits_alpha_boundary() {
        let quotes: Vec<SmileQuote> = [-0.01, 0.0, 0.01]
            .iter()
            .map(|&o| SmileQuote::normal_vol(o, 0.008))
            .collect();
        for lambda in [0.0, 1.0] {
            let res = calibrate_smile(&quotes, 0.03, 2.0, lambda, &CalibrationOptions::default()).unwrap();
            assert!(res.converged);
            assert!(res.params.alpha() < 1e-6);
            assert!(rel(res.params.sigma0(), 0.008) < 1e-8);
            assert!(res.diagnostic.is_some());
        }
    }

    #[test]
    fn least_squares_with_more_quotes() {
        let p = ten_by_ten0();
        let quotes: Vec<SmileQuote> = [-0.015, -0.01, -0.005, 0.0, 0.005, 0.01, 0.015]
            .iter()
            .map(|&o| SmileQuote::normal_vol(o, hagan_normal_vol(&p, p.f0() + o).unwrap()))
            .collect();
        let res = calibrate_smile(&quotes, p.f0(), 10.0, 0.0, &CalibrationOptions::default()).unwrap();
        assert!(res.converged);
        assert!(rel(res.params.alpha(), p.alpha()) < 1e-7);
    }

    #[test]
    fn rejects_bad_input() {
        let q = [SmileQuote::normal_vol(0.0, 0.01), SmileQuote::normal_vol(0.01, 0.01)];
        assert!(matches!(
            calibrate_smile(&q, 0.03, 1.0, 0.0, &CalibrationOptions::default()),
            Err(NsvhError::InsufficientData(_))
        ));
        let dup = [
            SmileQuote::normal_vol(0.0, 0.01),
            SmileQuote::normal_vol(0.0, 0.011),
            SmileQuote::normal_vol(0.01, 0.01),
        ];
        assert!(calibrate_smile(&dup, 0.03, 1.0, 0.0, &CalibrationOptions::default()).is_err());
        let below = [
            SmileQuote::price(-0.01, 0.0001, OptionSide::Call),
            SmileQuote::normal_vol(0.0, 0.01),
            SmileQuote::normal_vol(0.01, 0.01),
        ];
        assert!(matches!(
            calibrate_smile(&below, 0.03, 1.0, 1.0, &CalibrationOptions::default()),
            Err(NsvhError::NoSolution(_))
        ));
        let good = [
            SmileQuote::normal_vol(-0.01, 0.01),
            SmileQuote::normal_vol(0.0, 0.01),
            SmileQuote::normal_vol(0.01, 0.01),
        ];
        assert!(calibrate_smile(&good, 0.03, 1.0, 0.5, &CalibrationOptions::default()).is_err());
    }

    #[test]
    fn jacobian_nonsingular_at_swaption_points() {
        for p in [one_by_one(), ten_by_ten0()] {
            let base: Vec<f64> = [-0.01, 0.0, 0.01]
                .iter()
                .map(|o| model_normal_vol(&p, p.mean() + o).unwrap())
                .collect();
            let bumps = [
                NsvhParams::from_mean(
                    p.sigma0() * 1.01,
                    p.alpha(),
                    p.rho(),
                    p.lambda(),
                    p.mean(),
                    p.t_expiry(),
                ),
                NsvhParams::from_mean(
                    p.sigma0(),
                    p.alpha() * 1.01,
                    p.rho(),
                    p.lambda(),
                    p.mean(),
                    p.t_expiry(),
                ),
                NsvhParams::from_mean(
                    p.sigma0(),
                    p.alpha(),
                    p.rho() * 1.01,
                    p.lambda(),
                    p.mean(),
                    p.t_expiry(),
                ),
            ];
            for q in bumps {
                let q = q.unwrap();
                let moved = [-0.01, 0.0, 0.01]
                    .iter()
                    .zip(&base)
                    .map(|(o, b)| (model_normal_vol(&q, q.mean() + o).unwrap() - b).abs())
                    .fold(0.0, f64::max);
                assert!(moved > 1e-6 * 1e-2, "{moved}");
            }
        }
    }

    #[test]
    fn smile_curve_points() {
        let p = one_by_one();
        let atm_price = option_price(p.mean(), false, &p).unwrap();
        let atm_iv = implied_normal_vol(atm_price, p.mean(), p.mean(), 1.0, false).unwrap();
        let curve = smile_curve(&p, &[p.mean() - 0.01, p.mean(), p.mean() + 0.01]);
        assert!((curve[1].as_ref().unwrap().normal_vol - atm_iv).abs() < 1e-15);
        let sym = NsvhParams::new(0.006, 0.5, 0.0, 1.0, 0.03, 1.0).unwrap();
        let c = smile_curve(&sym, &[0.02, 0.04]);
        let (a, b) = (c[0].as_ref().unwrap().normal_vol, c[1].as_ref().unwrap().normal_vol);
        assert!(rel(a, b) < 1e-9);
    }
}
