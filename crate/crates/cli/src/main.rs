//! `ngp`: fit, smooth and benchmark with nested Gaussian process regression.

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ngp::report::FitReport;
use ngp::sampler::{McmcConfig, PriorConfig, Variances};
use ngp::simdata::make_dataset;
use ngp::study::{run_study, StudyConfig};
use ngp::{fit_nss, run_chain, BenchmarkSpec, NssConfig, TestFunction};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn from_core(e: ngp::Error, path: Option<&Path>) -> Self {
        let prefix = path.map(|p| format!("{}: ", p.display())).unwrap_or_default();
        let msg = match &e {
            // index 0 is the first data row, which sits on line 2
            ngp::Error::DuplicateTime { index, time } => {
                format!("{prefix}duplicate time {time} on line {}", index + 2)
            }
            ngp::Error::NotIncreasing { index, time, previous } => {
                format!("{prefix}time {time} on line {} is before the previous time {previous}", index + 2)
            }
            _ => format!("{prefix}{e}"),
        };
        if e.is_validation() {
            CliError::Validation(msg)
        } else {
            CliError::Numerical(msg)
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<ngp::Error> for CliError {
    fn from(e: ngp::Error) -> Self {
        CliError::from_core(e, None)
    }
}

#[derive(Parser)]
#[command(name = "ngp", version, about = "Nested Gaussian process regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a `t,y` CSV with the MCMC sampler and write a JSON report.
    Fit(FitArgs),
    /// Fit a nested smoothing spline with fixed smoothing parameters.
    Nss(NssArgs),
    /// Replicated MSE study on the benchmark functions.
    Bench(BenchArgs),
    /// Write a noisy benchmark dataset as CSV (`t,y,truth`).
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct PriorArgs {
    #[arg(long, default_value_t = 0.01)]
    prior_a: f64,
    #[arg(long, default_value_t = 0.01)]
    prior_b: f64,
    #[arg(long, default_value_t = 100.0)]
    sigma_mu: f64,
    #[arg(long, default_value_t = 100.0)]
    sigma_alpha: f64,
}

impl PriorArgs {
    fn config(&self) -> PriorConfig {
        PriorConfig {
            a: self.prior_a,
            b: self.prior_b,
            sigma_mu: self.sigma_mu,
            sigma_alpha: self.sigma_alpha,
        }
    }
}

#[derive(Args)]
struct ChainArgs {
    /// Total iterations [default: 1500, or 11000 above 5000 points]
    #[arg(long)]
    iters: Option<usize>,
    /// Discarded iterations [default: 500, or 1000; a third of --iters when only that is given]
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl ChainArgs {
    fn config(&self, j: usize) -> McmcConfig {
        let mut c = McmcConfig::for_size(j, self.seed);
        if let Some(n) = self.iters {
            c.n_iter = n;
            c.burn_in = self.burnin.unwrap_or(n / 3);
        }
        if let Some(b) = self.burnin {
            c.burn_in = b;
        }
        if let Some(t) = self.thin {
            c.thin = t;
        }
        c
    }
}

#[derive(Args)]
struct FitArgs {
    input: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write pointwise curves and bands as CSV.
    #[arg(long)]
    curves: Option<PathBuf>,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    prior: PriorArgs,
    /// Closed-form Gaussian posterior at fixed variances instead of MCMC.
    #[arg(long, requires_all = ["sigma2_eps", "sigma2_u", "sigma2_a"])]
    oracle: bool,
    #[arg(long)]
    sigma2_eps: Option<f64>,
    #[arg(long)]
    sigma2_u: Option<f64>,
    #[arg(long)]
    sigma2_a: Option<f64>,
    /// Record wall-clock time in the report (makes output run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct NssArgs {
    input: PathBuf,
    #[arg(long)]
    lambda_u: f64,
    #[arg(long)]
    lambda_a: f64,
    /// Fitted-curve CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Coefficient JSON [default: `<out>.coefficients.json` when --out is given]
    #[arg(long)]
    coefficients: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "blocks,bumps,heavisine,doppler")]
    functions: Vec<TestFunction>,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long, default_value_t = 128)]
    j: usize,
    #[arg(long, default_value_t = 7.0)]
    snr: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1500)]
    iters: usize,
    #[arg(long, default_value_t = 500)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[command(flatten)]
    prior: PriorArgs,
    /// Summary CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-replicate CSV path.
    #[arg(long)]
    replicates_out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    function: TestFunction,
    #[arg(long, default_value_t = 128)]
    j: usize,
    #[arg(long, default_value_t = 7.0)]
    snr: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let series = io::read_series(&a.input)?;
    let prior = a.prior.config();
    let start = Instant::now();
    let mut report = if a.oracle {
        let v = Variances {
            sigma2_eps: a.sigma2_eps.expect("required by clap"),
            sigma2_u: a.sigma2_u.expect("required by clap"),
            sigma2_a: a.sigma2_a.expect("required by clap"),
        };
        FitReport::from_oracle(&series, &prior, &v)?
    } else {
        let mcmc = a.chain.config(series.len());
        let draws = run_chain(&series, &prior, &mcmc)?;
        FitReport::from_chain(&draws, &prior, &mcmc)
    };
    if a.timing {
        report.runtime_seconds = Some(start.elapsed().as_secs_f64());
    }
    io::write_output(a.out.as_deref(), &io::json_bytes(&report))?;
    if let Some(p) = &a.curves {
        io::write_output(Some(p), &io::curves_csv(&report)?)?;
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct NssSidecar<'a> {
    config: NssConfig,
    origin: f64,
    mu: &'a [f64],
    nu: &'a [f64],
    alpha: &'a [f64],
    beta: &'a [f64],
}

fn cmd_nss(a: &NssArgs) -> Result<(), CliError> {
    let series = io::read_series(&a.input)?;
    let config = NssConfig::new(a.lambda_u, a.lambda_a);
    let fit = fit_nss(&series, &config)?;
    let curve = io::columns_csv(&["t", "fitted"], &[series.times(), &fit.fitted])?;
    io::write_output(a.out.as_deref(), &curve)?;
    let sidecar_path = a.coefficients.clone().or_else(|| {
        a.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".coefficients.json");
            PathBuf::from(s)
        })
    });
    if let Some(p) = sidecar_path {
        let side = NssSidecar {
            config,
            origin: series.origin(),
            mu: &fit.mu,
            nu: &fit.nu,
            alpha: &fit.alpha,
            beta: &fit.beta,
        };
        io::write_output(Some(&p), &io::json_bytes(&side))?;
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    if a.replicates == 0 {
        return Err(CliError::Validation("--replicates must be at least 1".into()));
    }
    let mut cfg = StudyConfig::new(a.functions.clone(), a.replicates, a.j, a.seed);
    cfg.snr = a.snr;
    cfg.prior = a.prior.config();
    cfg.mcmc = McmcConfig::new(a.iters, a.burnin, a.thin, a.seed);
    let (rows, reps) = run_study(&cfg)?;

    println!("{:<10} {:>5} {:>5} {:>10} {:>10}", "function", "reps", "J", "mean MSE", "IQR");
    for r in &rows {
        println!(
            "{:<10} {:>5} {:>5} {:>10.4} {:>10.4}",
            r.function.name(),
            r.replicates,
            r.j,
            r.mean_mse,
            r.iqr
        );
    }
    if let Some(p) = &a.out {
        let body = rows
            .iter()
            .map(|r| {
                vec![
                    r.function.name().to_string(),
                    r.replicates.to_string(),
                    r.j.to_string(),
                    r.mean_mse.to_string(),
                    r.q25.to_string(),
                    r.q75.to_string(),
                    r.iqr.to_string(),
                ]
            })
            .collect();
        let bytes = io::table_csv(&["function", "replicates", "j", "mean_mse", "q25", "q75", "iqr"], body)?;
        io::write_output(Some(p), &bytes)?;
    }
    if let Some(p) = &a.replicates_out {
        let body = reps
            .iter()
            .map(|r| {
                vec![
                    r.function.name().to_string(),
                    r.replicate.to_string(),
                    r.seed.to_string(),
                    r.mse.to_string(),
                    r.accept_rate.to_string(),
                ]
            })
            .collect();
        let bytes = io::table_csv(&["function", "replicate", "seed", "mse", "accept_rate"], body)?;
        io::write_output(Some(p), &bytes)?;
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut spec = BenchmarkSpec::new(a.function, a.j, a.seed);
    spec.snr = a.snr;
    let d = make_dataset(&spec)?;
    let bytes = io::columns_csv(&["t", "y", "truth"], &[d.series.times(), d.series.values(), &d.truth])?;
    io::write_output(a.out.as_deref(), &bytes)
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("NGP_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Validation(format!("NGP_THREADS must be a positive integer (got `{v}`)")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Nss(a) => cmd_nss(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Simulate(a) => cmd_simulate(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
