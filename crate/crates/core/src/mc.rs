//! Exact Monte-Carlo simulation of the NSVh model for any `lambda`.
//!
//! Work is split into groups; group `g` draws from a ChaCha8 generator keyed
//! by the 64-bit seed with stream number `g`. Outputs depend on
//! `(seed, n_groups, mode)` only, never on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NsvhError, Result};
use crate::params::NsvhParams;
use crate::special::phi_radial;

pub const DEFAULT_SEED: u64 = 12345;
pub const DEFAULT_GROUPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    /// Two samples per triplet (cos and sin projections share `z` and `r_sq`).
    #[default]
    Paired,
    /// One sample per triplet (cos projection only); samples are i.i.d.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    pub n_groups: usize,
    pub mode: DrawMode,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            n_groups: DEFAULT_GROUPS,
            mode: DrawMode::Paired,
        }
    }
}

impl McConfig {
    pub fn new(seed: u64, n_groups: usize, mode: DrawMode) -> Self {
        Self { seed, n_groups, mode }
    }

    fn rng(&self, group: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(group as u64);
        rng
    }

    fn samples_per_triplet(&self) -> usize {
        match self.mode {
            DrawMode::Paired => 2,
            DrawMode::Independent => 1,
        }
    }
}

/// Three standard normals turned into the Brownian quantities at integrated
/// variance `S`: `z = Z1 sqrt(S)`, `r_sq = (X1^2 + Y1^2) S` and the angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletDraw {
    pub z: f64,
    pub r_sq: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
    /// Raw horizontal normals, kept for the `alpha = 0` path.
    pub x1: f64,
    pub y1: f64,
    pub z1: f64,
}

impl TripletDraw {
    /// `None` when `X1 = Y1 = 0`.
    pub fn from_normals(x1: f64, y1: f64, z1: f64, s_var: f64) -> Option<Self> {
        let rr = x1 * x1 + y1 * y1;
        if rr == 0.0 {
            return None;
        }
        let r = rr.sqrt();
        Some(Self {
            z: z1 * s_var.sqrt(),
            r_sq: rr * s_var,
            cos_theta: x1 / r,
            sin_theta: y1 / r,
            x1,
            y1,
            z1,
        })
    }
}

/// Consumes three standard normals (more only on the probability-zero redraw).
pub fn draw_triplet<R: Rng + ?Sized>(rng: &mut R, s_var: f64) -> TripletDraw {
    loop {
        let x1: f64 = rng.sample(StandardNormal);
        let y1: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        if let Some(t) = TripletDraw::from_normals(x1, y1, z1, s_var) {
            return t;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalSample {
    pub f_t: f64,
    pub sigma_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_groups: usize,
}

/// Per-draw constants of the terminal law.
struct Terminal {
    sigma0: f64,
    scale: f64,
    rho: f64,
    rho_star: f64,
    s_var: f64,
    shift: f64,
    half_lambda_s: f64,
    growth: f64,
    mean: f64,
    alpha_zero: bool,
    sd_flat: f64,
    f0: f64,
}

impl Terminal {
    fn new(p: &NsvhParams<f64>) -> Self {
        let s_var = p.s_var();
        let half_lambda_s = 0.5 * p.lambda() * s_var;
        Self {
            sigma0: p.sigma0(),
            scale: if p.alpha() > 0.0 { p.scale() } else { 0.0 },
            rho: p.rho(),
            rho_star: p.rho_star(),
            s_var,
            shift: 0.5 * (p.lambda() - 1.0) * s_var,
            half_lambda_s,
            growth: half_lambda_s.exp(),
            mean: p.mean(),
            alpha_zero: p.alpha() == 0.0,
            sd_flat: p.sigma0() * p.t_expiry().sqrt(),
            f0: p.f0(),
        }
    }

    #[inline]
    fn sample(&self, t: &TripletDraw, proj: f64, horizontal: f64) -> TerminalSample {
        if self.alpha_zero {
            return TerminalSample {
                f_t: self.f0 + self.sd_flat * (self.rho * t.z1 + self.rho_star * horizontal),
                sigma_t: self.sigma0,
            };
        }
        let zp = t.z + self.shift;
        let phi = phi_radial(zp, t.r_sq);
        // rho (e^{Z'} - e^{lambda S/2}) without cancellation at small S
        let vertical = self.rho * self.growth * (zp - self.half_lambda_s).exp_m1();
        TerminalSample {
            f_t: self.mean + self.scale * (vertical + self.rho_star * proj * phi),
            sigma_t: self.sigma0 * zp.exp(),
        }
    }

    fn emit<F: FnMut(TerminalSample)>(&self, t: &TripletDraw, mode: DrawMode, sink: &mut F) {
        sink(self.sample(t, t.cos_theta, t.x1));
        if mode == DrawMode::Paired {
            sink(self.sample(t, t.sin_theta, t.y1));
        }
    }
}

/// Number of triplets in each group: the remainder goes to the first groups.
pub fn group_sizes(n: usize, n_groups: usize) -> Vec<usize> {
    let (base, extra) = (n / n_groups, n % n_groups);
    (0..n_groups).map(|g| base + usize::from(g < extra)).collect()
}

fn check_counts(n_triplets: usize, cfg: &McConfig) -> Result<()> {
    if n_triplets == 0 {
        return Err(NsvhError::param("n_triplets", "must be >= 1"));
    }
    if cfg.n_groups == 0 {
        return Err(NsvhError::param("n_groups", "must be >= 1"));
    }
    Ok(())
}

fn run_group<F: FnMut(TerminalSample)>(term: &Terminal, cfg: &McConfig, group: usize, count: usize, mut sink: F) {
    let mut rng = cfg.rng(group);
    for _ in 0..count {
        let t = draw_triplet(&mut rng, term.s_var);
        term.emit(&t, cfg.mode, &mut sink);
    }
}

/// Terminal draws, one vector per group. Paired mode yields two samples per
/// triplet, independent mode one.
pub fn terminal_sample_groups(
    params: &NsvhParams<f64>,
    n_triplets: usize,
    cfg: &McConfig,
) -> Result<Vec<Vec<TerminalSample>>> {
    check_counts(n_triplets, cfg)?;
    let term = Terminal::new(params);
    let per = cfg.samples_per_triplet();
    Ok(group_sizes(n_triplets, cfg.n_groups)
        .into_par_iter()
        .enumerate()
        .map(|(g, count)| {
            let mut out = Vec::with_capacity(count * per);
            run_group(&term, cfg, g, count, |s| out.push(s));
            out
        })
        .collect())
}

pub fn terminal_samples(params: &NsvhParams<f64>, n_triplets: usize, cfg: &McConfig) -> Result<Vec<TerminalSample>> {
    Ok(terminal_sample_groups(params, n_triplets, cfg)?
        .into_iter()
        .flatten()
        .collect())
}

/// Terminal prices only, grouped; lighter than [`terminal_sample_groups`].
pub fn terminal_price_groups(params: &NsvhParams<f64>, n_triplets: usize, cfg: &McConfig) -> Result<Vec<Vec<f64>>> {
    check_counts(n_triplets, cfg)?;
    let term = Terminal::new(params);
    let per = cfg.samples_per_triplet();
    Ok(group_sizes(n_triplets, cfg.n_groups)
        .into_par_iter()
        .enumerate()
        .map(|(g, count)| {
            let mut out = Vec::with_capacity(count * per);
            run_group(&term, cfg, g, count, |s| out.push(s.f_t));
            out
        })
        .collect())
}

/// Sum in a fixed binary tree, so the result does not depend on scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Mean of `values` with the standard error of the mean taken over `values`.
pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E[f(F_T, sigma_T)]` with the standard error across groups.
pub fn expectation_mc<F>(params: &NsvhParams<f64>, n_triplets: usize, cfg: &McConfig, f: F) -> Result<McEstimate>
where
    F: Fn(&TerminalSample) -> f64 + Sync,
{
    check_counts(n_triplets, cfg)?;
    let term = Terminal::new(params);
    let partials: Vec<(f64, usize)> = group_sizes(n_triplets, cfg.n_groups)
        .into_par_iter()
        .enumerate()
        .map(|(g, count)| {
            let mut sum = 0.0;
            let mut n = 0usize;
            run_group(&term, cfg, g, count, |s| {
                sum += f(&s);
                n += 1;
            });
            (sum, n)
        })
        .collect();
    let sums: Vec<f64> = partials.iter().map(|p| p.0).collect();
    let total: usize = partials.iter().map(|p| p.1).sum();
    let value = pairwise_sum(&sums) / total as f64;
    let means: Vec<f64> = partials.iter().filter(|p| p.1 > 0).map(|p| p.0 / p.1 as f64).collect();
    let (_, std_err) = mean_and_se(&means);
    Ok(McEstimate {
        value,
        std_err,
        n_groups: means.len(),
    })
}

/// Undiscounted vanilla price; the standard error is computed over groups of
/// whole triplets, so paired samples never straddle two groups.
pub fn price_option_mc(
    params: &NsvhParams<f64>,
    strike: f64,
    is_call: bool,
    n_triplets: usize,
    cfg: &McConfig,
) -> Result<McEstimate> {
    if cfg.n_groups < 2 {
        return Err(NsvhError::param("n_groups", "must be >= 2 for a standard error"));
    }
    if !n_triplets.is_multiple_of(cfg.n_groups) {
        return Err(NsvhError::param(
            "n_triplets",
            format!("{n_triplets} is not divisible by n_groups = {}", cfg.n_groups),
        ));
    }
    expectation_mc(params, n_triplets, cfg, |s| {
        if is_call {
            (s.f_t - strike).max(0.0)
        } else {
            (strike - s.f_t).max(0.0)
        }
    })
}

/// Simulated paths on a time grid; `f[i * times.len() + j]` is path `i` at `times[j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSet {
    pub times: Vec<f64>,
    pub n_paths: usize,
    pub f: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl PathSet {
    pub fn f_at(&self, path: usize, step: usize) -> f64 {
        self.f[path * self.times.len() + step]
    }

    pub fn sigma_at(&self, path: usize, step: usize) -> f64 {
        self.sigma[path * self.times.len() + step]
    }

    /// Values of `F` at the last grid time.
    pub fn terminal(&self) -> Vec<f64> {
        let m = self.times.len();
        (0..self.n_paths).map(|i| self.f[i * m + m - 1]).collect()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(NsvhError::InvalidGrid("empty time grid".into()));
    }
    if !(grid[0] > 0.0) {
        return Err(NsvhError::InvalidGrid(format!(
            "first time must be > 0, got {}",
            grid[0]
        )));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(NsvhError::InvalidGrid(format!(
                "times must increase strictly: {} then {}",
                w[0], w[1]
            )));
        }
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(NsvhError::InvalidGrid("non-finite time".into()));
    }
    Ok(())
}

/// Exact multi-step simulation. Each step draws a fresh triplet at
/// `S = alpha^2 dt` and applies
/// `F += (sigma/alpha)(rho (e^{Z'} - 1) + rho* proj phi(Z', D))`, `sigma *= e^{Z'}`.
///
/// In paired mode consecutive paths `2k, 2k+1` share triplets. `t_expiry`
/// of `params` is ignored; the grid sets the horizon.
pub fn simulate_paths(params: &NsvhParams<f64>, time_grid: &[f64], n_paths: usize, cfg: &McConfig) -> Result<PathSet> {
    check_grid(time_grid)?;
    if n_paths == 0 {
        return Err(NsvhError::param("n_paths", "must be >= 1"));
    }
    if cfg.n_groups == 0 {
        return Err(NsvhError::param("n_groups", "must be >= 1"));
    }
    let per = cfg.samples_per_triplet();
    let n_units = n_paths.div_ceil(per);
    let m = time_grid.len();
    let (alpha, rho, rho_star, lambda) = (params.alpha(), params.rho(), params.rho_star(), params.lambda());
    let steps: Vec<f64> = std::iter::once(time_grid[0])
        .chain(time_grid.windows(2).map(|w| w[1] - w[0]))
        .collect();

    let sizes = group_sizes(n_units, cfg.n_groups);
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = sizes
        .into_par_iter()
        .enumerate()
        .map(|(g, count)| {
            let mut rng = cfg.rng(g);
            let mut fs = Vec::with_capacity(count * per * m);
            let mut ss = Vec::with_capacity(count * per * m);
            for _ in 0..count {
                let mut state = [(params.f0(), params.sigma0()); 2];
                let mut rows = [Vec::with_capacity(m), Vec::with_capacity(m)];
                for &dt in &steps {
                    let s_step = alpha * alpha * dt;
                    let t = draw_triplet(&mut rng, s_step);
                    for k in 0..per {
                        let (proj, horizontal) = if k == 0 {
                            (t.cos_theta, t.x1)
                        } else {
                            (t.sin_theta, t.y1)
                        };
                        let (f, sig) = &mut state[k];
                        if alpha == 0.0 {
                            *f += *sig * dt.sqrt() * (rho * t.z1 + rho_star * horizontal);
                        } else {
                            let zp = t.z + 0.5 * (lambda - 1.0) * s_step;
                            let phi = phi_radial(zp, t.r_sq);
                            *f += *sig / alpha * (rho * zp.exp_m1() + rho_star * proj * phi);
                            *sig *= zp.exp();
                        }
                        rows[k].push((*f, *sig));
                    }
                }
                for row in rows.iter().take(per) {
                    fs.extend(row.iter().map(|r| r.0));
                    ss.extend(row.iter().map(|r| r.1));
                }
            }
            (fs, ss)
        })
        .collect();

    let mut f = Vec::with_capacity(n_units * per * m);
    let mut sigma = Vec::with_capacity(n_units * per * m);
    for (fs, ss) in blocks {
        f.extend(fs);
        sigma.extend(ss);
    }
    // an odd path count in paired mode drops the last companion path
    f.truncate(n_paths * m);
    sigma.truncate(n_paths * m);
    Ok(PathSet {
        times: time_grid.to_vec(),
        n_paths,
        f,
        sigma,
    })
}
