//! Serializable fit report with pointwise credible bands.

use serde::Serialize;

use crate::error::Result;
use crate::kalman::smooth_mean;
use crate::kernels::{gp_posterior_oracle, KernelParams};
use crate::sampler::{quantile, ChainDraws, McmcConfig, PriorConfig, Variances};
use crate::series::TimeSeries;
use crate::statespace::build_model;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Two-sided 95% standard-normal quantile.
const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
}

impl ParamSummary {
    pub fn from_draws(x: &[f64]) -> Self {
        Self {
            mean: x.iter().sum::<f64>() / x.len() as f64,
            q025: quantile(x, 0.025),
            q500: quantile(x, 0.5),
            q975: quantile(x, 0.975),
        }
    }

    fn fixed(v: f64) -> Self {
        Self {
            mean: v,
            q025: v,
            q500: v,
            q975: v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceSummaries {
    pub sigma2_eps: ParamSummary,
    pub sigma2_u: ParamSummary,
    pub sigma2_a: ParamSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Mcmc,
    Oracle,
}

/// Effective configuration echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub mode: FitMode,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub prior: PriorConfig,
    pub rescale_factor: f64,
    pub fixed_variances: Option<Variances>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub config: ReportConfig,
    pub eval_times: Vec<f64>,
    #[serde(rename = "posterior_mean_U")]
    pub posterior_mean_u: Vec<f64>,
    #[serde(rename = "ci_lower_U")]
    pub ci_lower_u: Vec<f64>,
    #[serde(rename = "ci_upper_U")]
    pub ci_upper_u: Vec<f64>,
    #[serde(rename = "posterior_mean_DU")]
    pub posterior_mean_du: Vec<f64>,
    #[serde(rename = "ci_lower_DU")]
    pub ci_lower_du: Vec<f64>,
    #[serde(rename = "ci_upper_DU")]
    pub ci_upper_du: Vec<f64>,
    pub variance_summaries: VarianceSummaries,
    pub acceptance_rate: Option<f64>,
    pub runtime_seconds: Option<f64>,
}

impl FitReport {
    pub fn from_chain(draws: &ChainDraws, prior: &PriorConfig, mcmc: &McmcConfig) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            config: ReportConfig {
                mode: FitMode::Mcmc,
                seed: mcmc.seed,
                iterations: mcmc.n_iter,
                burn_in: mcmc.burn_in,
                thin: mcmc.thin,
                prior: *prior,
                rescale_factor: draws.rescale,
                fixed_variances: None,
            },
            eval_times: draws.times.clone(),
            posterior_mean_u: draws.u.column_means(),
            ci_lower_u: draws.u.column_quantiles(0.025),
            ci_upper_u: draws.u.column_quantiles(0.975),
            posterior_mean_du: draws.du.column_means(),
            ci_lower_du: draws.du.column_quantiles(0.025),
            ci_upper_du: draws.du.column_quantiles(0.975),
            variance_summaries: VarianceSummaries {
                sigma2_eps: ParamSummary::from_draws(&draws.sigma2_eps),
                sigma2_u: ParamSummary::from_draws(&draws.sigma2_u),
                sigma2_a: ParamSummary::from_draws(&draws.sigma2_a),
            },
            acceptance_rate: Some(draws.mh_accept_rate),
            runtime_seconds: None,
        }
    }

    /// Fixed-variance Gaussian posterior: `U` from the dense oracle, `DU` from the smoother.
    pub fn from_oracle(series: &TimeSeries, prior: &PriorConfig, v: &Variances) -> Result<Self> {
        let params = KernelParams::new(
            2,
            1,
            prior.sigma_mu * prior.sigma_mu,
            v.sigma2_u,
            prior.sigma_alpha * prior.sigma_alpha,
            v.sigma2_a,
        )?;
        let post = gp_posterior_oracle(series, &params, v.sigma2_eps, series.times())?;
        let model = build_model(series, &params, v.sigma2_eps)?;
        let sm = smooth_mean(&model, series.values())?;
        let band = |mean: &[f64], var: &[f64], sign: f64| -> Vec<f64> {
            mean.iter().zip(var).map(|(m, s)| m + sign * Z_975 * s.sqrt()).collect()
        };
        let du_mean: Vec<f64> = sm.mean[1..].iter().map(|s| s.du).collect();
        let du_var: Vec<f64> = sm.cov[1..].iter().map(|c| c[(1, 1)].max(0.0)).collect();
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            config: ReportConfig {
                mode: FitMode::Oracle,
                seed: 0,
                iterations: 0,
                burn_in: 0,
                thin: 1,
                prior: *prior,
                rescale_factor: 1.0,
                fixed_variances: Some(*v),
            },
            eval_times: series.times().to_vec(),
            ci_lower_u: band(&post.mean, &post.variance, -1.0),
            ci_upper_u: band(&post.mean, &post.variance, 1.0),
            posterior_mean_u: post.mean,
            ci_lower_du: band(&du_mean, &du_var, -1.0),
            ci_upper_du: band(&du_mean, &du_var, 1.0),
            posterior_mean_du: du_mean,
            variance_summaries: VarianceSummaries {
                sigma2_eps: ParamSummary::fixed(v.sigma2_eps),
                sigma2_u: ParamSummary::fixed(v.sigma2_u),
                sigma2_a: ParamSummary::fixed(v.sigma2_a),
            },
            acceptance_rate: None,
            runtime_seconds: None,
        })
    }

    /// Checks `lower ≤ mean ≤ upper` for both bands.
    pub fn bands_consistent(&self) -> bool {
        let ok = |lo: &[f64], m: &[f64], hi: &[f64]| {
            lo.iter().zip(m).zip(hi).all(|((l, m), h)| l <= m && m <= h)
        };
        ok(&self.ci_lower_u, &self.posterior_mean_u, &self.ci_upper_u)
            && ok(&self.ci_lower_du, &self.posterior_mean_du, &self.ci_upper_du)
    }
}
