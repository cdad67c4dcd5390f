//! Brute-force and closed-form oracles: the H^3 heat kernel, an Euler scheme
//! for hyperbolic Brownian motion, conditional moments of the time-changed
//! BM, and Kolmogorov-Smirnov statistics. Used by the tests and `verify`.

use quadrature::double_exponential::integrate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{NsvhError, Result};
use crate::mc::draw_triplet;
use crate::moments::canonical_moments;
use crate::params::CanonicalParams;
use crate::special::{norm_pdf, norm_sf, phi_radial, stable_exp_ratio};

/// Point of the upper half-space model of H^3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HypPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(z > 0.0) || !x.is_finite() || !y.is_finite() || !z.is_finite() {
            return Err(NsvhError::param("z", "point must be finite with z > 0"));
        }
        Ok(Self { x, y, z })
    }

    pub fn origin() -> Self {
        Self { x: 0.0, y: 0.0, z: 1.0 }
    }

    pub fn radius_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    /// Hyperbolic distance to `(0, 0, 1)`.
    pub fn distance_from_origin(&self) -> f64 {
        let zm1 = self.z - 1.0;
        let q = (self.radius_sq() + zm1 * zm1) / (2.0 * self.z);
        // acosh(1 + q)
        (q + (q * (q + 2.0)).sqrt()).ln_1p()
    }
}

/// Heat kernel of H^3 at time `t` and distance `d`.
pub fn heat_kernel_h3(t: f64, d: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(NsvhError::param("t", "must be > 0"));
    }
    if !(d >= 0.0 && d.is_finite()) {
        return Err(NsvhError::param("d", "must be >= 0"));
    }
    let head = (2.0 * std::f64::consts::PI * t).powf(-1.5);
    let gauss = -(t * t + d * d) / (2.0 * t);
    Ok(if d < 1.0 {
        let ratio = if d == 0.0 { 1.0 } else { d / d.sinh() };
        head * ratio * gauss.exp()
    } else {
        // d / sinh d with the exponential folded in
        head * 2.0 * d / (-(-2.0 * d).exp_m1()) * (gauss - d).exp()
    })
}

/// `integral of p_3(t, D) 4 pi sinh^2 D dD` over `[0, inf)`.
pub fn heat_kernel_mass(t: f64) -> Result<f64> {
    heat_kernel_h3(t, 0.0)?;
    let head = 4.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * t).powf(-1.5);
    // p_3 sinh^2 D = head' D sinh D e^{-(t^2 + D^2) / 2t}
    let f = |d: f64| {
        if d == 0.0 {
            return 0.0;
        }
        let e = -(t * t + d * d) / (2.0 * t);
        head * d * 0.5 * ((e + d).exp() - (e - d).exp())
    };
    let upper = t + 15.0 * t.sqrt();
    let peak = t.min(upper);
    Ok(integrate(f, 0.0, peak, 1e-15).integral + integrate(f, peak, upper, 1e-15).integral)
}

/// Euler scheme for `dx = z dX, dy = z dY, dz / z = dZ + (1/2 + mu) dt`
/// from `(0, 0, 1)`. The `z` step is exact in log space; `x, y` are
/// left-point Euler. One ChaCha stream per path.
pub fn euler_hyperbolic_bm(mu: f64, t_end: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<Vec<HypPoint>> {
    if !(t_end > 0.0 && t_end.is_finite()) || !mu.is_finite() {
        return Err(NsvhError::param("t_end", "must be finite and > 0"));
    }
    if n_steps == 0 || t_end / n_steps as f64 > 1e-2 {
        return Err(NsvhError::param("n_steps", "step must be at most 0.01"));
    }
    let dt = t_end / n_steps as f64;
    let sd = dt.sqrt();
    Ok((0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(path as u64);
            let (mut x, mut y, mut logz) = (0.0f64, 0.0f64, 0.0f64);
            for _ in 0..n_steps {
                let z = logz.exp();
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                let dz: f64 = rng.sample(StandardNormal);
                x += z * sd * dx;
                y += z * sd * dy;
                logz += sd * dz + mu * dt;
            }
            HypPoint { x, y, z: logz.exp() }
        })
        .collect())
}

/// Radii `sqrt(x_T^2 + y_T^2)` drawn from the closed form
/// `phi(Z, sqrt(X^2 + Y^2 + Z^2))` with `Z ~ N(mu t, t)`.
pub fn phi_radius_draws(mu: f64, t_end: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let d = draw_triplet(&mut rng, t_end);
            phi_radial(d.z + mu * t_end, d.r_sq)
        })
        .collect()
}

/// `(N(u + eps) - N(u - eps)) / (2 eps e^{-eps^2/2} n(u))`.
pub fn m_ratio(u: f64, eps: f64) -> f64 {
    let u = u.abs();
    if eps < 1e-3 {
        let (u2, e2) = (u * u, eps * eps);
        let he2 = u2 - 1.0;
        let he4 = u2 * u2 - 6.0 * u2 + 3.0;
        let he6 = u2 * u2 * u2 - 15.0 * u2 * u2 + 45.0 * u2 - 15.0;
        return (0.5 * e2).exp() * (1.0 + e2 * (he2 / 6.0 + e2 * (he4 / 120.0 + e2 * he6 / 5040.0)));
    }
    (norm_sf(u - eps) - norm_sf(u + eps)) / (2.0 * eps * (-0.5 * eps * eps).exp() * norm_pdf(u))
}

fn check_t(t_end: f64) -> Result<()> {
    if t_end > 0.0 && t_end.is_finite() {
        Ok(())
    } else {
        Err(NsvhError::param("t_end", "must be > 0"))
    }
}

/// `E[X_{A_T}^2 | Z_T = z]`, with `z` the drifted Brownian value at `T`.
/// The conditional law does not depend on the drift.
pub fn cond_moment2(z: f64, t_end: f64) -> Result<f64> {
    check_t(t_end)?;
    let eps = t_end.sqrt();
    Ok(t_end * z.exp() * m_ratio(z / eps, eps))
}

/// `E[X_{A_T}^4 | Z_T = z]`.
pub fn cond_moment4(z: f64, t_end: f64) -> Result<f64> {
    check_t(t_end)?;
    let eps = t_end.sqrt();
    let u = z / eps;
    let diff = m_ratio(u, 2.0 * eps) - (u * eps).cosh() * m_ratio(u, eps);
    Ok(3.0 * t_end * (2.0 * z).exp() * diff)
}

/// Unconditional `(E[X_{A_S}^2], E[X_{A_S}^4])` for drift `mu`.
pub fn uncond_moments_x(mu: f64, s_var: f64) -> Result<(f64, f64)> {
    if !(s_var >= 0.0 && s_var.is_finite()) {
        return Err(NsvhError::param("s_var", "must be >= 0"));
    }
    let r = |k: f64| stable_exp_ratio(k + 2.0 * mu, s_var);
    let wk = |k: f64| ((k + 2.0 * mu) * s_var).exp();
    let m2 = r(2.0);
    let m4 = 1.5 * (-wk(2.0) * r(6.0) + (wk(4.0) + 1.0) * r(4.0) - r(2.0));
    Ok((m2, m4))
}

/// `E[g(Z)]` for `Z ~ N(mean, var)` by double-exponential quadrature.
fn normal_expectation<F: Fn(f64) -> f64>(mean: f64, var: f64, g: F, tol: f64) -> f64 {
    let sd = var.sqrt();
    // integrands carry up to e^{4Z}; widen the window for the tilt
    let lo = mean - (12.0 + 4.0 * sd) * sd;
    let hi = mean + (12.0 + 4.0 * sd) * sd;
    let f = |z: f64| {
        let u = (z - mean) / sd;
        g(z) * norm_pdf(u) / sd
    };
    integrate(f, lo, mean, tol).integral + integrate(f, mean, hi, tol).integral
}

/// `E[cond_moment2(Z)]` and `E[cond_moment4(Z)]` over `Z ~ N(mu S, S)`.
pub fn integrated_cond_moments(mu: f64, s_var: f64) -> Result<(f64, f64)> {
    check_t(s_var)?;
    let m2 = normal_expectation(mu * s_var, s_var, |z| cond_moment2(z, s_var).unwrap_or(f64::NAN), 1e-16);
    let m4 = normal_expectation(mu * s_var, s_var, |z| cond_moment4(z, s_var).unwrap_or(f64::NAN), 1e-16);
    Ok((m2, m4))
}

/// Canonical central moments assembled from the conditional moments given
/// `Z^mu_S`, one quadrature over `Z`.
pub fn assembled_moments(c: &CanonicalParams<f64>) -> Result<(f64, f64, f64)> {
    let s = c.s_var;
    check_t(s)?;
    let mu = 0.5 * (c.lambda - 1.0);
    let (rho, rs2) = (c.rho, (1.0 - c.rho) * (1.0 + c.rho));
    let lead = (0.5 * c.lambda * s).exp();
    let e = |z: f64| lead * (z - 0.5 * c.lambda * s).exp_m1();
    let c2 = |z: f64| cond_moment2(z, s).unwrap_or(f64::NAN);
    let c4 = |z: f64| cond_moment4(z, s).unwrap_or(f64::NAN);
    let tol = 1e-17;
    let m2 = normal_expectation(mu * s, s, |z| rho * rho * e(z).powi(2) + rs2 * c2(z), tol);
    let m3 = normal_expectation(
        mu * s,
        s,
        |z| rho.powi(3) * e(z).powi(3) + 3.0 * rho * rs2 * e(z) * c2(z),
        tol,
    );
    let m4 = normal_expectation(
        mu * s,
        s,
        |z| {
            let v = e(z);
            rho.powi(4) * v.powi(4) + 6.0 * rho * rho * rs2 * v * v * c2(z) + rs2 * rs2 * c4(z)
        },
        tol,
    );
    Ok((m2, m3, m4))
}

/// Largest gap between the empirical distribution of `data` and `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> f64 {
    let mut xs = data.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Largest gap between two empirical distributions.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_unstable_by(f64::total_cmp);
    xb.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov coefficient `c(level) = sqrt(-ln(level / 2) / 2)`.
pub fn ks_coefficient(level: f64) -> f64 {
    (-(0.5 * level).ln() / 2.0).sqrt()
}

pub fn ks_critical_one(n: usize, level: f64) -> f64 {
    ks_coefficient(level) / (n as f64).sqrt()
}

pub fn ks_critical_two(n: usize, m: usize, level: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(level) * ((n + m) / (n * m)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Kernel,
    Euler,
    Moments,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyCheck {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl VerifyCheck {
    fn below(suite: &'static str, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub euler_paths: usize,
    pub euler_steps_per_unit: usize,
    pub binning_samples: usize,
    pub moment_sets: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: crate::mc::DEFAULT_SEED,
            euler_paths: 100_000,
            euler_steps_per_unit: 2000,
            binning_samples: 1_000_000,
            moment_sets: 20,
        }
    }
}

pub fn verify_kernel() -> Result<Vec<VerifyCheck>> {
    let mut out = Vec::new();
    let at0 = heat_kernel_h3(1.0, 0.0)?;
    let want = (2.0 * std::f64::consts::PI).powf(-1.5) * (-0.5f64).exp();
    out.push(VerifyCheck::below(
        "kernel",
        "D = 0 limit",
        (at0 - want).abs() / want,
        1e-15,
    ));
    for t in [0.5, 1.0, 2.0] {
        let mass = heat_kernel_mass(t)?;
        out.push(VerifyCheck::below(
            "kernel",
            format!("radial mass t = {t}"),
            (mass - 1.0).abs(),
            1e-6,
        ));
    }
    let grid: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
    let vals: Vec<f64> = grid.iter().map(|&d| heat_kernel_h3(1.0, d)).collect::<Result<_>>()?;
    let rises = vals.windows(2).filter(|w| w[1] > w[0]).count();
    out.push(VerifyCheck::below("kernel", "decreasing in D", rises as f64, 0.0));
    Ok(out)
}

pub fn verify_euler(opts: &VerifyOptions) -> Result<Vec<VerifyCheck>> {
    let (mu, t) = (-1.0, 1.0);
    let n = opts.euler_paths;
    let pts = euler_hyperbolic_bm(mu, t, opts.euler_steps_per_unit, n, opts.seed)?;
    let radii: Vec<f64> = pts.iter().map(|p| p.radius_sq().sqrt()).collect();
    let closed = phi_radius_draws(mu, t, n, opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = vec![VerifyCheck::below(
        "euler",
        "radius vs closed form (two-sample KS, 1%)",
        ks_two_sample(&radii, &closed),
        ks_critical_two(n, n, 0.01),
    )];

    let logz: Vec<f64> = pts.iter().map(|p| p.z.ln()).collect();
    let z_ks = ks_one_sample(&logz, |v| 1.0 - norm_sf((v - mu * t) / t.sqrt()));
    out.push(VerifyCheck::below(
        "euler",
        "log z normal (KS, 1%)",
        z_ks,
        ks_critical_one(n, 0.01),
    ));

    // D^2 - Z^2 given Z is 2T times a unit exponential
    let gaps: Vec<(f64, f64)> = pts
        .iter()
        .zip(&logz)
        .map(|(p, &z)| (z, p.distance_from_origin().powi(2) - z * z))
        .collect();
    let unif: Vec<f64> = gaps.iter().map(|&(_, g)| (-g / (2.0 * t)).exp()).collect();
    out.push(VerifyCheck::below(
        "euler",
        "conditional distance law (KS, 1%)",
        ks_one_sample(&unif, |u| u.clamp(0.0, 1.0)),
        ks_critical_one(n, 0.01),
    ));
    let edges: Vec<f64> = (0..=8).map(|k| mu * t + (-2.0 + 0.5 * k as f64) * t.sqrt()).collect();
    let mut worst = 0.0f64;
    for w in edges.windows(2) {
        let bin: Vec<f64> = gaps
            .iter()
            .filter(|(z, _)| *z >= w[0] && *z < w[1])
            .map(|g| g.1)
            .collect();
        if bin.len() >= 100 {
            let mean = bin.iter().sum::<f64>() / bin.len() as f64;
            worst = worst.max((mean / (2.0 * t) - 1.0).abs());
        }
    }
    out.push(VerifyCheck::below(
        "euler",
        "conditional distance per Z bin",
        worst,
        0.10,
    ));
    Ok(out)
}

pub fn verify_moments(opts: &VerifyOptions) -> Result<Vec<VerifyCheck>> {
    let mut out = Vec::new();
    out.push(VerifyCheck::below(
        "moments",
        "m(u, 0+) = 1",
        (m_ratio(0.7, 1e-9) - 1.0).abs(),
        1e-12,
    ));

    // binned conditional second moment of the closed-form draws
    let (mu, s) = (-0.5, 1.0);
    let n = opts.binning_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let d = draw_triplet(&mut rng, s);
        let z = d.z + mu * s;
        draws.push((z, d.cos_theta * phi_radial(z, d.r_sq)));
    }
    let n_bins = 10;
    let sd = s.sqrt();
    let mut worst = 0.0f64;
    for k in 0..n_bins {
        let lo = mu * s + (-1.5 + 3.0 * k as f64 / n_bins as f64) * sd;
        let hi = lo + 3.0 * sd / n_bins as f64;
        let (mut sx, mut sc, mut cnt) = (0.0, 0.0, 0usize);
        for &(z, x) in draws.iter().filter(|(z, _)| *z >= lo && *z < hi) {
            sx += x * x;
            sc += cond_moment2(z, s)?;
            cnt += 1;
        }
        if cnt > 0 {
            worst = worst.max((sx / sc - 1.0).abs());
        }
    }
    out.push(VerifyCheck::below(
        "moments",
        "binned E[X^2 | Z] (central bins)",
        worst,
        0.05,
    ));

    // at S = 1 the sample mean of X^4 is too skewed for a normal-theory SE
    let s_tail = 0.25;
    let xs: Vec<f64> = (0..n)
        .map(|_| {
            let d = draw_triplet(&mut rng, s_tail);
            d.cos_theta * phi_radial(d.z + mu * s_tail, d.r_sq)
        })
        .collect();
    let (m2, m4) = uncond_moments_x(mu, s_tail)?;
    for (k, want, name) in [(2, m2, "E[X^2]"), (4, m4, "E[X^4]")] {
        let vals: Vec<f64> = xs.iter().map(|x| x.powi(k)).collect();
        let (mean, se) = crate::mc::mean_and_se(&vals);
        out.push(VerifyCheck::below(
            "moments",
            format!("MC {name} in SEs"),
            (mean - want).abs() / se,
            4.0,
        ));
    }

    let (m2, m4) = uncond_moments_x(mu, s)?;
    let (q2, q4) = integrated_cond_moments(mu, s)?;
    out.push(VerifyCheck::below(
        "moments",
        "integrated E[X^2 | Z]",
        (q2 / m2 - 1.0).abs(),
        1e-10,
    ));
    out.push(VerifyCheck::below(
        "moments",
        "integrated E[X^4 | Z]",
        (q4 / m4 - 1.0).abs(),
        1e-10,
    ));

    let mut prng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut worst = 0.0f64;
    for _ in 0..opts.moment_sets {
        let c = CanonicalParams::new(
            prng.random_range(0.02..1.5),
            prng.random_range(-0.95..0.95),
            prng.random_range(-1.5..2.0),
        )?;
        let (a2, a3, a4) = assembled_moments(&c)?;
        let (b2, b3, b4) = canonical_moments(&c);
        let scale = b2.sqrt();
        worst = worst
            .max((a2 / b2 - 1.0).abs())
            .max(((a3 - b3) / scale.powi(3)).abs())
            .max((a4 / b4 - 1.0).abs());
    }
    out.push(VerifyCheck::below(
        "moments",
        "assembled vs closed-form moments",
        worst,
        1e-12,
    ));
    Ok(out)
}

pub fn verify(suite: Suite, opts: &VerifyOptions) -> Result<Vec<VerifyCheck>> {
    Ok(match suite {
        Suite::Kernel => verify_kernel()?,
        Suite::Euler => verify_euler(opts)?,
        Suite::Moments => verify_moments(opts)?,
        Suite::All => {
            let mut v = verify_kernel()?;
            v.extend(verify_euler(opts)?);
            v.extend(verify_moments(opts)?);
            v
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_checks() {
        for c in verify_kernel().unwrap() {
            assert!(c.passed, "{c:?}");
        }
        assert!(heat_kernel_h3(0.0, 1.0).is_err());
        let big = heat_kernel_h3(1.0, 800.0).unwrap();
        assert!(big.is_finite() && big >= 0.0);
    }

    #[test]
    fn distance_of_vertical_point() {
        let p = HypPoint::new(0.0, 0.0, 2.0f64.exp()).unwrap();
        assert!((p.distance_from_origin() - 2.0).abs() < 1e-14);
        assert!(HypPoint::new(0.0, 0.0, 0.0).is_err());
        assert_eq!(HypPoint::origin().distance_from_origin(), 0.0);
    }

    #[test]
    fn m_ratio_branches_join() {
        for u in [0.0, 0.5, 2.0, -1.3] {
            let below = m_ratio(u, 0.999e-3);
            let above = m_ratio(u, 1.001e-3);
            assert!((below - above).abs() < 1e-8, "{u}");
        }
        assert!((m_ratio(0.7, 1e-9) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_moments() {
        assert!(cond_moment2(0.0, 1e-12).unwrap() < 1e-11);
        // short horizon: A_T ~ T, so E[X^4 | Z] ~ 3 T^2
        let t = 1e-4;
        assert!((cond_moment4(0.0, t).unwrap() / (3.0 * t * t) - 1.0).abs() < 1e-3);
        for z in [-1.0, 0.0, 0.4, 2.0] {
            let m2 = cond_moment2(z, 0.8).unwrap();
            assert!(cond_moment4(z, 0.8).unwrap() >= m2 * m2);
            // time reversal: E[A | z] = e^{2z} E[A | -z]
            let back = cond_moment2(-z, 0.8).unwrap();
            assert!((m2 / back / (2.0 * z).exp() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn unconditional_moments() {
        assert_eq!(uncond_moments_x(0.3, 0.0).unwrap(), (0.0, 0.0));
        let (m2, _) = uncond_moments_x(-1.0, 0.7).unwrap();
        assert!((m2 - 0.7).abs() < 1e-15);
        for (mu, s) in [(-0.5, 1.0), (0.0, 0.3), (-1.0, 2.0), (0.5, 0.05)] {
            let (m2, m4) = uncond_moments_x(mu, s).unwrap();
            let (q2, q4) = integrated_cond_moments(mu, s).unwrap();
            assert!((q2 / m2 - 1.0).abs() < 1e-10, "{mu} {s}: {q2} {m2}");
            assert!((q4 / m4 - 1.0).abs() < 1e-10, "{mu} {s}: {q4} {m4}");
        }
    }

    #[test]
    fn assembled_matches_closed_form() {
        for (s, rho, lam) in [(0.5, -0.3, 0.0), (1.2, 0.6, 1.0), (0.1, 0.0, -1.0), (0.8, 0.2, 0.5)] {
            let c = CanonicalParams::new(s, rho, lam).unwrap();
            let (a2, a3, a4) = assembled_moments(&c).unwrap();
            let (b2, b3, b4) = canonical_moments(&c);
            assert!((a2 / b2 - 1.0).abs() < 1e-12, "{a2} {b2}");
            assert!(((a3 - b3) / b2.powf(1.5)).abs() < 1e-12, "{a3} {b3}");
            assert!((a4 / b4 - 1.0).abs() < 1e-12, "{a4} {b4}");
        }
    }

    #[test]
    fn ks_statistics() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        let d = ks_one_sample(&[0.25, 0.75], |x| x);
        assert!((d - 0.25).abs() < 1e-15);
        assert!((ks_coefficient(0.01) - 1.6276).abs() < 1e-4);
    }

    #[test]
    fn euler_short_horizon() {
        let pts = euler_hyperbolic_bm(-1.0, 1e-4, 100, 200, 1).unwrap();
        for p in pts {
            assert!(p.radius_sq().sqrt() < 0.1);
            assert!((p.z - 1.0).abs() < 0.1);
        }
        assert!(euler_hyperbolic_bm(-1.0, 1.0, 10, 5, 1).is_err());
    }

    #[test]
    fn euler_is_deterministic() {
        let a = euler_hyperbolic_bm(0.0, 0.5, 100, 8, 42).unwrap();
        let b = euler_hyperbolic_bm(0.0, 0.5, 100, 8, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn moment_suite_small() {
        let opts = VerifyOptions {
            binning_samples: 200_000,
            moment_sets: 20,
            ..Default::default()
        };
        for c in verify_moments(&opts).unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }
}
