//! Replicated benchmark study: simulate, fit, score.

use rayon::prelude::*;

use crate::error::Result;
use crate::sampler::{quantile, run_chain, McmcConfig, PriorConfig, Variances};
use crate::simdata::{make_dataset, mse, BenchmarkSpec, Dataset, TestFunction};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ReplicateResult {
    pub function: TestFunction,
    pub replicate: usize,
    pub seed: u64,
    pub mse: f64,
    pub accept_rate: f64,
    /// Posterior means of the variances.
    pub variances: Variances,
}

/// Average MSE and interquartile range for one function.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StudyRow {
    pub function: TestFunction,
    pub replicates: usize,
    pub j: usize,
    pub mean_mse: f64,
    pub q25: f64,
    pub q75: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub functions: Vec<TestFunction>,
    pub replicates: usize,
    pub j: usize,
    pub snr: f64,
    pub seed: u64,
    pub prior: PriorConfig,
    /// Iteration settings; the seed field is replaced per replicate.
    pub mcmc: McmcConfig,
}

impl StudyConfig {
    pub fn new(functions: Vec<TestFunction>, replicates: usize, j: usize, seed: u64) -> Self {
        Self {
            functions,
            replicates,
            j,
            snr: 7.0,
            seed,
            prior: PriorConfig::default(),
            mcmc: McmcConfig::benchmark(seed),
        }
    }
}

/// Keeps the chain's random stream apart from the data generator's.
const CHAIN_STREAM: u64 = 0x2545_F491_4F6C_DD1D;

/// Per-replicate seed, distinct across functions and replicates.
pub fn replicate_seed(base: u64, function: TestFunction, replicate: usize) -> u64 {
    let f = TestFunction::ALL.iter().position(|&g| g == function).unwrap_or(0) as u64;
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(f + 1))
        .wrapping_add((replicate as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The simulated dataset behind one replicate.
pub fn replicate_data(cfg: &StudyConfig, function: TestFunction, replicate: usize) -> Result<Dataset> {
    let mut spec = BenchmarkSpec::new(function, cfg.j, replicate_seed(cfg.seed, function, replicate));
    spec.snr = cfg.snr;
    make_dataset(&spec)
}

pub fn run_replicate(cfg: &StudyConfig, function: TestFunction, replicate: usize) -> Result<ReplicateResult> {
    let seed = replicate_seed(cfg.seed, function, replicate);
    let data = replicate_data(cfg, function, replicate)?;
    let mut mcmc = cfg.mcmc.clone();
    mcmc.seed = seed ^ CHAIN_STREAM;
    let draws = run_chain(&data.series, &cfg.prior, &mcmc)?;
    let avg = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    Ok(ReplicateResult {
        function,
        replicate,
        seed,
        mse: mse(&draws.posterior_mean_u(), &data.truth)?,
        accept_rate: draws.mh_accept_rate,
        variances: Variances {
            sigma2_eps: avg(&draws.sigma2_eps),
            sigma2_u: avg(&draws.sigma2_u),
            sigma2_a: avg(&draws.sigma2_a),
        },
    })
}

/// All replicates for all functions, in parallel on the current rayon pool.
pub fn run_replicates(cfg: &StudyConfig) -> Result<Vec<ReplicateResult>> {
    let jobs: Vec<(TestFunction, usize)> = cfg
        .functions
        .iter()
        .flat_map(|&f| (0..cfg.replicates).map(move |r| (f, r)))
        .collect();
    jobs.par_iter().map(|&(f, r)| run_replicate(cfg, f, r)).collect()
}

pub fn summarize(function: TestFunction, j: usize, mses: &[f64]) -> StudyRow {
    let mean = mses.iter().sum::<f64>() / mses.len() as f64;
    let q25 = quantile(mses, 0.25);
    let q75 = quantile(mses, 0.75);
    StudyRow {
        function,
        replicates: mses.len(),
        j,
        mean_mse: mean,
        q25,
        q75,
        iqr: q75 - q25,
    }
}

pub fn run_study(cfg: &StudyConfig) -> Result<(Vec<StudyRow>, Vec<ReplicateResult>)> {
    let reps = run_replicates(cfg)?;
    let rows = cfg
        .functions
        .iter()
        .map(|&f| {
            let m: Vec<f64> = reps.iter().filter(|r| r.function == f).map(|r| r.mse).collect();
            summarize(f, cfg.j, &m)
        })
        .collect();
    Ok((rows, reps))
}
