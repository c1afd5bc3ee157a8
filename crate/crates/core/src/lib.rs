//! Locally adaptive Bayesian regression with a nested Gaussian process prior.
//!
//! The prior makes the `m`-th derivative of the regression function fluctuate
//! around a local mean function `A`, itself an `n`-times integrated Wiener
//! process, so the smoothness of the fit can change along the axis.
//!
//! * [`kernels`]: covariance functions and a dense O(J³) posterior used as an oracle.
//! * [`statespace`]: exact and Euler discretizations for `m = 2`, `n = 1`.
//! * [`kalman`]: O(J) filter, smoother and simulation smoother.
//! * [`sampler`]: the MCMC sampler over latent states and variances.
//! * [`nss`]: closed-form nested smoothing spline.
//! * [`simdata`]: benchmark functions, noisy datasets, MSE.
//! * [`study`] and [`report`]: replicated studies and fit reports.

pub mod error;
mod gauss;
pub mod kalman;
pub mod kernels;
pub mod nss;
pub mod report;
pub mod sampler;
pub mod series;
pub mod simdata;
pub mod statespace;
pub mod study;

pub use error::{Error, Result};
pub use kalman::{filter, simulate_smoother, smooth_mean, FilterOutput, SmoothDraw, Smoothed};
pub use kernels::{covariance_u, gp_posterior_oracle, reproducing_kernel, KernelParams};
pub use nss::{evaluate_nss, fit_nss, hat_matrix, NssConfig, NssFit};
pub use report::FitReport;
pub use sampler::{run_chain, ChainDraws, McmcConfig, PriorConfig, Variances};
pub use series::TimeSeries;
pub use simdata::{make_dataset, mse, BenchmarkSpec, TestFunction};
pub use statespace::{build_model, ModelSpec, StateVector, TransitionStep};

/// Gaussian log-density helpers, exposed for diagnostics.
pub mod density {
    pub use crate::gauss::{log_density, log_density_1d, noise_factor};
}
