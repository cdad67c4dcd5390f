//! `nsvh` command-line front end.

mod error;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nsvh::calibrate::{calibrate_smile, CalibrationOptions};
use nsvh::mc::{price_option_mc, simulate_paths, DrawMode, McConfig, DEFAULT_GROUPS, DEFAULT_SEED};
use nsvh::moments::{central_moments, fit_nsvh, sample_moments};
use nsvh::oracles::{verify, Suite, VerifyOptions};
use nsvh::risk::{
    empirical_var_es, probability_plot_scores, risk_closed, var_es_mc_with, var_es_normal, QuantileRule, RiskReport,
    RISK_GROUPS,
};
use nsvh::sabr_normal::{bachelier_price, hagan_normal_vol};
use nsvh::{analytic_su, NsvhError, Params};
use serde_json::json;

use error::{CliError, CliResult, EXIT_NOT_CONVERGED, EXIT_NUMERICAL};
use input::{read_params, read_quotes, read_returns};
use output::{emit, Cell, Format, Report, Table};

#[derive(Parser, Debug)]
#[command(
    name = "nsvh",
    version,
    about = "NSVh model: pricing, simulation, fitting, calibration and risk"
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Worker threads for Monte-Carlo work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output format; tables default to csv, documents to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Call and put prices at a list of strikes.
    Price(PriceArgs),
    /// Fit model parameters to the sample moments of a return series.
    Fit(FitArgs),
    /// Calibrate sigma0, alpha and rho to a volatility smile.
    Calibrate(CalibrateArgs),
    /// Value-at-risk and expected shortfall.
    Risk(RiskArgs),
    /// Normal and S_U probability-plot scores of a return series.
    Probplot(ProbplotArgs),
    /// Simulate paths of (F, sigma) on a time grid.
    Simulate(SimulateArgs),
    /// Run the built-in numerical checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PriceMethod {
    Analytic,
    Mc,
}

#[derive(Args, Debug)]
struct PriceArgs {
    #[arg(long)]
    params: PathBuf,
    /// Strike offsets from the expected terminal price, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 1,
        required = true,
        allow_hyphen_values = true
    )]
    strikes: Vec<f64>,
    /// Read --strikes as absolute strikes.
    #[arg(long)]
    absolute: bool,
    /// Override the lambda of the params file.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = PriceMethod::Analytic)]
    method: PriceMethod,
    /// Terminal samples for --method mc.
    #[arg(long, default_value_t = 1_000_000)]
    paths: usize,
    #[arg(long, default_value_t = DEFAULT_GROUPS)]
    groups: usize,
}

#[derive(Args, Debug)]
struct ReturnsArgs {
    /// CSV with one column of percent returns.
    #[arg(long)]
    returns: PathBuf,
    /// The column holds index levels; returns are 100 (P_i / P_{i-1} - 1).
    #[arg(long)]
    levels: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: ReturnsArgs,
    #[arg(long)]
    lambda: f64,
    /// Horizon of one return, in the time unit of the fitted alpha.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long)]
    quotes: PathBuf,
    /// Expected terminal price; overrides the quotes file.
    #[arg(long)]
    forward: Option<f64>,
    /// Expiry in years; overrides the quotes file.
    #[arg(long)]
    expiry: Option<f64>,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = CalibrationOptions::default().tolerance)]
    tolerance: f64,
    #[arg(long, default_value_t = CalibrationOptions::default().max_iterations)]
    max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RiskMethodArg {
    Closed,
    Mc,
    Empirical,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    Hazen,
    Weibull,
}

#[derive(Args, Debug)]
struct RiskArgs {
    /// Model parameters; required except for --method empirical.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Tail probabilities, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1, required = true)]
    p: Vec<f64>,
    #[arg(long, value_enum, default_value_t = RiskMethodArg::Closed)]
    method: RiskMethodArg,
    /// Return series for --method empirical, or for --method normal without --params.
    #[arg(long)]
    returns: Option<PathBuf>,
    #[arg(long, requires = "returns")]
    levels: bool,
    #[arg(long, value_enum, default_value_t = RuleArg::Hazen)]
    rule: RuleArg,
    /// Terminal samples for --method mc.
    #[arg(long, default_value_t = 1_000_000)]
    paths: usize,
}

#[derive(Args, Debug)]
struct ProbplotArgs {
    #[command(flatten)]
    data: ReturnsArgs,
    #[arg(long)]
    params: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Paired,
    Independent,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    params: PathBuf,
    /// Increasing observation times, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1, required = true)]
    grid: Vec<f64>,
    #[arg(long)]
    paths: usize,
    #[arg(long, default_value_t = DEFAULT_GROUPS)]
    groups: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Paired)]
    mode: ModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Kernel,
    Euler,
    Moments,
    All,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
    #[arg(long, default_value_t = VerifyOptions::default().euler_paths)]
    euler_paths: usize,
    #[arg(long, default_value_t = VerifyOptions::default().euler_steps_per_unit)]
    euler_steps_per_unit: usize,
    #[arg(long, default_value_t = VerifyOptions::default().binning_samples)]
    binning_samples: usize,
    #[arg(long, default_value_t = VerifyOptions::default().moment_sets)]
    moment_sets: usize,
}

/// A report plus the exit status to finish with.
struct Outcome {
    report: Report,
    code: i32,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Self { report, code: 0 }
    }
}

/// Triplets for `paths` paired samples, rounded up to a multiple of `groups`.
fn triplets_for(paths: usize, groups: usize) -> CliResult<usize> {
    if paths == 0 {
        return Err(CliError::usage("--paths must be >= 1"));
    }
    if groups < 2 {
        return Err(CliError::usage("--groups must be >= 2"));
    }
    Ok(paths.div_ceil(2).div_ceil(groups) * groups)
}

fn analytic_price(params: &Params, strike: f64, is_call: bool) -> nsvh::Result<f64> {
    let lambda = params.lambda();
    if lambda == 1.0 {
        analytic_su::option_price(strike, is_call, params)
    } else if lambda == 0.0 {
        let vol = hagan_normal_vol(params, strike)?;
        Ok(bachelier_price(params.mean(), strike, vol, params.t_expiry(), is_call))
    } else {
        Err(NsvhError::UnsupportedLambda(lambda))
    }
}

fn cmd_price(a: &PriceArgs, seed: u64) -> CliResult<Outcome> {
    let mut params = read_params(&a.params)?;
    if let Some(l) = a.lambda {
        params = params.with_lambda(l)?;
    }
    if a.strikes.iter().any(|k| !k.is_finite()) {
        return Err(CliError::usage("strikes must be finite"));
    }
    let mean = params.mean();
    let mc = a.method == PriceMethod::Mc;
    let n_triplets = if mc { triplets_for(a.paths, a.groups)? } else { 0 };
    let cfg = McConfig::new(seed, a.groups, DrawMode::Paired);

    let mut cols = vec!["offset", "strike", "side", "price"];
    if mc {
        cols.push("std_err");
    }
    let mut table = Table::new(cols);
    for &k in &a.strikes {
        let (offset, strike) = if a.absolute { (k - mean, k) } else { (k, mean + k) };
        for (side, is_call) in [("call", true), ("put", false)] {
            let mut row: Vec<Cell> = vec![offset.into(), strike.into(), side.into()];
            if mc {
                let est = price_option_mc(&params, strike, is_call, n_triplets, &cfg)?;
                row.push(est.value.into());
                row.push(est.std_err.into());
            } else {
                row.push(analytic_price(&params, strike, is_call)?.into());
            }
            table.push(row);
        }
    }
    Ok(Report::Table(table).into())
}

fn cmd_fit(a: &FitArgs) -> CliResult<Outcome> {
    let data = read_returns(&a.data.returns, a.data.levels)?;
    let moments = sample_moments(&data)?;
    let params = fit_nsvh(&moments, a.horizon, a.lambda)?;
    Ok(Report::Doc(json!({
        "n": data.len(),
        "moments": moments,
        "params": params,
        "mean": params.mean(),
    }))
    .into())
}

fn cmd_calibrate(a: &CalibrateArgs) -> CliResult<Outcome> {
    let set = read_quotes(&a.quotes)?;
    let forward = a
        .forward
        .or(set.forward)
        .ok_or_else(|| CliError::usage("forward missing: give --forward or a \"forward\" field"))?;
    let expiry = a
        .expiry
        .or(set.expiry)
        .ok_or_else(|| CliError::usage("expiry missing: give --expiry or an \"expiry\" field"))?;
    let opts = CalibrationOptions {
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
        initial_guess: None,
    };
    let result = calibrate_smile(&set.quotes, forward, expiry, a.lambda, &opts)?;
    let code = if result.converged { 0 } else { EXIT_NOT_CONVERGED };
    Ok(Outcome {
        report: Report::doc(&result),
        code,
    })
}

fn risk_row(table: &mut Table, r: &RiskReport, method: &str) {
    let (se_var, se_es) = r.std_err.map_or((None, None), |(v, e)| (Some(v), Some(e)));
    table.push(vec![
        r.p.into(),
        method.into(),
        r.var.into(),
        r.es.into(),
        se_var.into(),
        se_es.into(),
    ]);
}

fn cmd_risk(a: &RiskArgs, seed: u64) -> CliResult<Outcome> {
    let params = a.params.as_deref().map(read_params).transpose()?;
    let returns = a.returns.as_deref().map(|p| read_returns(p, a.levels)).transpose()?;
    let need_params = || params.ok_or_else(|| CliError::usage("--params is required for this method"));

    let mut table = Table::new(vec!["p", "method", "var", "es", "var_std_err", "es_std_err"]);
    match a.method {
        RiskMethodArg::Closed => {
            let params = need_params()?;
            for &p in &a.p {
                risk_row(&mut table, &risk_closed(&params, p)?, "closed");
            }
        }
        RiskMethodArg::Mc => {
            let params = need_params()?;
            let n_triplets = triplets_for(a.paths, RISK_GROUPS)?;
            let cfg = McConfig::new(seed, RISK_GROUPS, DrawMode::Paired);
            for &p in &a.p {
                risk_row(&mut table, &var_es_mc_with(&params, p, n_triplets, &cfg)?, "mc");
            }
        }
        RiskMethodArg::Empirical => {
            let data = returns.ok_or_else(|| CliError::usage("--returns is required for --method empirical"))?;
            let rule = match a.rule {
                RuleArg::Hazen => QuantileRule::Hazen,
                RuleArg::Weibull => QuantileRule::Weibull,
            };
            for &p in &a.p {
                risk_row(&mut table, &empirical_var_es(&data, p, rule)?, "empirical");
            }
        }
        RiskMethodArg::Normal => {
            let (mean, mu2) = match (params, returns) {
                (Some(params), _) => {
                    let m = central_moments(&params);
                    (m.mean, m.mu2)
                }
                (None, Some(data)) => {
                    let m = sample_moments(&data)?;
                    (m.mean, m.mu2)
                }
                (None, None) => return Err(CliError::usage("--method normal needs --params or --returns")),
            };
            for &p in &a.p {
                risk_row(&mut table, &var_es_normal(mean, mu2, p)?, "normal");
            }
        }
    }
    Ok(Report::Table(table).into())
}

fn cmd_probplot(a: &ProbplotArgs) -> CliResult<Outcome> {
    let data = read_returns(&a.data.returns, a.data.levels)?;
    let params = read_params(&a.params)?;
    let mut table = Table::new(vec!["x", "z0", "z1", "z2"]);
    for pt in probability_plot_scores(&data, &params)? {
        table.push(vec![pt.x.into(), pt.z0.into(), pt.z1.into(), pt.z2.into()]);
    }
    Ok(Report::Table(table).into())
}

fn cmd_simulate(a: &SimulateArgs, seed: u64) -> CliResult<Outcome> {
    let params = read_params(&a.params)?;
    let mode = match a.mode {
        ModeArg::Paired => DrawMode::Paired,
        ModeArg::Independent => DrawMode::Independent,
    };
    let paths = simulate_paths(&params, &a.grid, a.paths, &McConfig::new(seed, a.groups, mode))?;
    let mut table = Table::new(vec!["path_id", "time", "F", "sigma"]);
    for i in 0..paths.n_paths {
        for (j, &t) in paths.times.iter().enumerate() {
            table.push(vec![
                i.into(),
                t.into(),
                paths.f_at(i, j).into(),
                paths.sigma_at(i, j).into(),
            ]);
        }
    }
    Ok(Report::Table(table).into())
}

fn cmd_verify(a: &VerifyArgs, seed: u64) -> CliResult<Outcome> {
    let suite = match a.suite {
        SuiteArg::Kernel => Suite::Kernel,
        SuiteArg::Euler => Suite::Euler,
        SuiteArg::Moments => Suite::Moments,
        SuiteArg::All => Suite::All,
    };
    let opts = VerifyOptions {
        seed,
        euler_paths: a.euler_paths,
        euler_steps_per_unit: a.euler_steps_per_unit,
        binning_samples: a.binning_samples,
        moment_sets: a.moment_sets,
    };
    let checks = verify(suite, &opts)?;
    let mut table = Table::new(vec!["suite", "name", "passed", "value", "threshold"]);
    for c in &checks {
        table.push(vec![
            c.suite.into(),
            c.name.as_str().into(),
            c.passed.into(),
            c.value.into(),
            c.threshold.into(),
        ]);
    }
    let code = if checks.iter().all(|c| c.passed) {
        0
    } else {
        EXIT_NUMERICAL
    };
    Ok(Outcome {
        report: Report::Table(table),
        code,
    })
}

fn run(cli: &Cli) -> CliResult<i32> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    }
    let outcome = match &cli.command {
        Command::Price(a) => cmd_price(a, cli.seed)?,
        Command::Fit(a) => cmd_fit(a)?,
        Command::Calibrate(a) => cmd_calibrate(a)?,
        Command::Risk(a) => cmd_risk(a, cli.seed)?,
        Command::Probplot(a) => cmd_probplot(a)?,
        Command::Simulate(a) => cmd_simulate(a, cli.seed)?,
        Command::Verify(a) => cmd_verify(a, cli.seed)?,
    };
    let format = cli.format.unwrap_or(match outcome.report {
        Report::Table(_) => Format::Csv,
        Report::Doc(_) => Format::Json,
    });
    match emit(&outcome.report, format, cli.output.as_deref()) {
        // a closed downstream pipe (`| head`) is not a failure
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
        r => r.map_err(|e| CliError::io("writing output", e))?,
    }
    Ok(outcome.code)
}

fn fail(err: &CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail(&CliError::usage(e.render().to_string().trim_end()));
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => fail(&e),
    }
}
