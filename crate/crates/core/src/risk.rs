//! Value-at-risk, expected shortfall and probability-plot scores.
//!
//! Everything is on signed values: losses are negative, and `es <= var`.

use serde::{Deserialize, Serialize};

use crate::analytic_su::{check_su, quantile_at_score, su_score};
use crate::error::{NsvhError, Result};
use crate::mc::{pairwise_sum, terminal_price_groups, DrawMode, McConfig};
use crate::params::NsvhParams;
use crate::scalar::Real;
use crate::special::{norm_cdf, norm_pdf, norm_quantile};

/// Groups used for the Monte-Carlo standard error.
pub const RISK_GROUPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMethod {
    ClosedForm,
    MonteCarlo,
    Empirical,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskReport {
    pub p: f64,
    pub var: f64,
    pub es: f64,
    pub method: RiskMethod,
    /// Standard errors of `(var, es)`, Monte-Carlo only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<(f64, f64)>,
}

/// Plotting position for the empirical quantile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileRule {
    /// Rank `n p + 1/2`.
    #[default]
    Hazen,
    /// Rank `p (n + 1)`.
    Weibull,
}

fn check_p<T: Real>(p: T) -> Result<()> {
    if p > T::zero() && p < T::one() {
        Ok(())
    } else {
        Err(NsvhError::param("p", "must be in (0, 1)"))
    }
}

/// Closed-form VaR for `lambda = 1`.
pub fn var_closed<T: Real>(params: &NsvhParams<T>, p: T) -> Result<T> {
    check_su(params)?;
    check_p(p)?;
    let d = -norm_quantile(p)?;
    Ok(quantile_at_score(d, params))
}

/// Closed-form ES for `lambda = 1`.
pub fn es_closed<T: Real>(params: &NsvhParams<T>, p: T) -> Result<T> {
    check_su(params)?;
    check_p(p)?;
    let d = -norm_quantile(p)?;
    let sqrt_s = params.s_var().sqrt();
    let rho = params.rho();
    let one = T::one();
    let two = T::lit(2.0);
    // upper-tail probabilities, so nothing cancels at small p
    let bracket = (one - rho) * norm_cdf(sqrt_s - d) - (one + rho) * norm_cdf(-d - sqrt_s) + two * rho * p;
    let head = params.sigma0() * (T::lit(0.5) * params.s_var()).exp() / (two * params.alpha() * p);
    Ok(params.mean() - head * bracket)
}

pub fn risk_closed(params: &NsvhParams<f64>, p: f64) -> Result<RiskReport> {
    Ok(RiskReport {
        p,
        var: var_closed(params, p)?,
        es: es_closed(params, p)?,
        method: RiskMethod::ClosedForm,
        std_err: None,
    })
}

/// VaR and ES of a normal law with the given mean and variance.
pub fn var_es_normal(mean: f64, mu2: f64, p: f64) -> Result<RiskReport> {
    check_p(p)?;
    if !(mu2 > 0.0 && mu2.is_finite()) || !mean.is_finite() {
        return Err(NsvhError::param("mu2", "must be finite and > 0"));
    }
    let z = norm_quantile(p)?;
    let sd = mu2.sqrt();
    Ok(RiskReport {
        p,
        var: mean + sd * z,
        es: mean - sd * norm_pdf(z) / p,
        method: RiskMethod::Normal,
        std_err: None,
    })
}

/// Partially orders `xs` and returns `(var, es)`.
///
/// ES averages the `n p` smallest values, the last one fractionally weighted.
fn tail_stats(xs: &mut [f64], p: f64, rule: QuantileRule) -> Result<(f64, f64)> {
    let n = xs.len();
    let np = n as f64 * p;
    if np < 1.0 {
        return Err(NsvhError::InsufficientData(format!("empty tail: n p = {np:.3} < 1")));
    }
    let rank = match rule {
        QuantileRule::Hazen => np + 0.5,
        QuantileRule::Weibull => p * (n as f64 + 1.0),
    };
    if rank < 1.0 || rank > n as f64 {
        return Err(NsvhError::InsufficientData(format!(
            "quantile rank {rank:.3} outside 1..={n}"
        )));
    }
    let last = ((np.floor() as usize) + 2).min(n - 1);
    if last + 1 < n {
        xs.select_nth_unstable_by(last, f64::total_cmp);
    }
    xs[..=last].sort_unstable_by(f64::total_cmp);

    let j = rank.floor() as usize;
    let frac = rank - j as f64;
    let var = if j >= n {
        xs[n - 1]
    } else {
        xs[j - 1] + frac * (xs[j] - xs[j - 1])
    };
    let k = np.floor() as usize;
    let mut tail = pairwise_sum(&xs[..k]);
    if k < n {
        tail += (np - k as f64) * xs[k];
    }
    Ok((var, tail / np))
}

/// Historical VaR and ES of a sample of returns.
pub fn empirical_var_es(data: &[f64], p: f64, rule: QuantileRule) -> Result<RiskReport> {
    check_p(p)?;
    if data.iter().any(|x| !x.is_finite()) {
        return Err(NsvhError::param("data", "must be finite"));
    }
    let mut xs = data.to_vec();
    let (var, es) = tail_stats(&mut xs, p, rule)?;
    Ok(RiskReport {
        p,
        var,
        es,
        method: RiskMethod::Empirical,
        std_err: None,
    })
}

/// Monte-Carlo VaR and ES with [`RISK_GROUPS`] groups of paired draws.
pub fn var_es_mc(params: &NsvhParams<f64>, p: f64, n_triplets: usize, seed: u64) -> Result<RiskReport> {
    var_es_mc_with(
        params,
        p,
        n_triplets,
        &McConfig::new(seed, RISK_GROUPS, DrawMode::Paired),
    )
}

/// Monte-Carlo VaR and ES; the pooled sample gives the estimate, the spread of
/// per-group estimates gives the standard error.
pub fn var_es_mc_with(params: &NsvhParams<f64>, p: f64, n_triplets: usize, cfg: &McConfig) -> Result<RiskReport> {
    check_p(p)?;
    if cfg.n_groups < 2 {
        return Err(NsvhError::param(
            "n_groups",
            "need at least 2 groups for a standard error",
        ));
    }
    let per = match cfg.mode {
        DrawMode::Paired => 2,
        DrawMode::Independent => 1,
    };
    let n = n_triplets * per;
    if (n as f64) * p < 100.0 {
        return Err(NsvhError::InsufficientData(format!(
            "tail mass n p = {:.1} < 100",
            n as f64 * p
        )));
    }
    let mut groups = terminal_price_groups(params, n_triplets, cfg)?;
    let rule = QuantileRule::Hazen;
    let mut var_g = Vec::with_capacity(groups.len());
    let mut es_g = Vec::with_capacity(groups.len());
    for g in groups.iter_mut() {
        let (v, e) = tail_stats(g, p, rule)?;
        var_g.push(v);
        es_g.push(e);
    }
    let mut pooled: Vec<f64> = groups.into_iter().flatten().collect();
    let (var, es) = tail_stats(&mut pooled, p, rule)?;
    let se = |xs: &[f64]| {
        let m = xs.len() as f64;
        let mean = pairwise_sum(xs) / m;
        let ss: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        (pairwise_sum(&ss) / (m - 1.0) / m).sqrt()
    };
    Ok(RiskReport {
        p,
        var,
        es,
        method: RiskMethod::MonteCarlo,
        std_err: Some((se(&var_g), se(&es_g))),
    })
}

/// One point of the normal and S_U probability plots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlotPoint {
    /// Ordered sample value.
    pub x: f64,
    /// Theoretical score `N^-1((j - 1/2) / n)`.
    pub z0: f64,
    /// Normal score `(x - mean) / sqrt(mu2)`.
    pub z1: f64,
    /// S_U score `N^-1(cdf(x))`.
    pub z2: f64,
}

/// Probability-plot scores of `data` against a fitted `lambda = 1` model.
/// `mu2` is the sample variance (denominator `n`).
pub fn probability_plot_scores(data: &[f64], params: &NsvhParams<f64>) -> Result<Vec<PlotPoint>> {
    check_su(params)?;
    let n = data.len();
    if n < 2 {
        return Err(NsvhError::InsufficientData(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(NsvhError::param("data", "must be finite"));
    }
    let mut xs = data.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let nf = n as f64;
    let sample_mean = pairwise_sum(&xs) / nf;
    let dev: Vec<f64> = xs.iter().map(|x| (x - sample_mean).powi(2)).collect();
    let mu2 = pairwise_sum(&dev) / nf;
    if !(mu2 > 0.0) {
        return Err(NsvhError::ZeroVariance("constant data".into()));
    }
    let sd = mu2.sqrt();
    let mean = params.mean();
    xs.iter()
        .enumerate()
        .map(|(j, &x)| {
            Ok(PlotPoint {
                x,
                z0: norm_quantile((j as f64 + 0.5) / nf)?,
                z1: (x - mean) / sd,
                z2: -su_score(x, params)?.d,
            })
        })
        .collect()
}
