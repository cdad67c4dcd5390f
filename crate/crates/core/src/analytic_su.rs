//! Closed forms for `lambda = 1`, where the terminal price follows a
//! re-parametrized Johnson S_U law.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{NsvhError, Result};
use crate::params::NsvhParams;
use crate::scalar::Real;
use crate::special::{norm_cdf, norm_pdf, norm_quantile};

/// Standardized score of a price under the S_U law.
///
/// `d` is strictly decreasing in the price; `xi` is the `asinh` operand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuScore<T> {
    pub d: T,
    pub xi: T,
}

pub(crate) fn check_su<T: Real>(params: &NsvhParams<T>) -> Result<()> {
    if params.lambda() != T::one() {
        return Err(NsvhError::UnsupportedLambda(params.lambda().as_f64()));
    }
    if params.alpha() == T::zero() {
        return Err(NsvhError::ZeroVolOfVol);
    }
    if params.rho().abs() >= T::one() {
        return Err(NsvhError::DegenerateCorrelation(params.rho().abs().as_f64()));
    }
    Ok(())
}

/// Score of price `x`: `d = (asinh(xi) + atanh(rho)) / sqrt(S)`.
pub fn su_score<T: Real>(x: T, params: &NsvhParams<T>) -> Result<SuScore<T>> {
    check_su(params)?;
    let rs = params.rho_star();
    let half_s = T::lit(0.5) * params.s_var();
    let xi = params.alpha() / (rs * params.sigma0()) * (params.mean() - x) - params.rho() / rs * half_s.exp();
    let d = (xi.asinh() + params.rho().atanh()) / params.s_var().sqrt();
    Ok(SuScore { d, xi })
}

pub fn d_score<T: Real>(x: T, params: &NsvhParams<T>) -> Result<T> {
    su_score(x, params).map(|s| s.d)
}

pub fn pdf<T: Real>(x: T, params: &NsvhParams<T>) -> Result<T> {
    let SuScore { d, xi } = su_score(x, params)?;
    let denom = params.rho_star() * params.sigma0() * params.t_expiry().sqrt() * (T::one() + xi * xi).sqrt();
    Ok(norm_pdf(d) / denom)
}

pub fn cdf<T: Real>(x: T, params: &NsvhParams<T>) -> Result<T> {
    let d = d_score(x, params)?;
    Ok(norm_cdf(-d))
}

/// Inverse of [`cdf`].
pub fn quantile<T: Real>(p: T, params: &NsvhParams<T>) -> Result<T> {
    check_su(params)?;
    let d = -norm_quantile(p)?;
    Ok(quantile_at_score(d, params))
}

/// Price whose score equals `d`.
pub(crate) fn quantile_at_score<T: Real>(d: T, params: &NsvhParams<T>) -> T {
    let sqrt_s = params.s_var().sqrt();
    let body = params.rho_star() * (d * sqrt_s - params.rho().atanh()).sinh()
        + params.rho() * (T::lit(0.5) * params.s_var()).exp();
    params.mean() - params.scale() * body
}

/// Undiscounted vanilla price in numeraire units.
pub fn option_price<T: Real>(strike: T, is_call: bool, params: &NsvhParams<T>) -> Result<T> {
    let d = d_score(strike, params)?;
    let sqrt_s = params.s_var().sqrt();
    let rho = params.rho();
    let one = T::one();
    let two = T::lit(2.0);
    let tv = params.sigma0() / (two * params.alpha())
        * (T::lit(0.5) * params.s_var()).exp()
        * ((one + rho) * norm_cdf(d + sqrt_s) - (one - rho) * norm_cdf(d - sqrt_s) - two * rho * norm_cdf(d));
    let moneyness = params.mean() - strike;
    Ok(if is_call {
        tv + moneyness * norm_cdf(d)
    } else {
        tv - moneyness * norm_cdf(-d)
    })
}

/// `n` i.i.d. terminal prices, one standard normal per draw.
pub fn sample<T: Real>(params: &NsvhParams<T>, n: usize, seed: u64) -> Result<Vec<T>>
where
    StandardNormal: Distribution<T>,
{
    check_su(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_s = params.s_var().sqrt();
    let growth = (T::lit(0.5) * params.s_var()).exp();
    let (mean, scale, rho) = (params.mean(), params.scale(), params.rho());
    Ok((0..n)
        .map(|_| {
            let w = sqrt_s * StandardNormal.sample(&mut rng);
            mean + scale * (w.sinh() + rho * (w.cosh() - growth))
        })
        .collect())
}
