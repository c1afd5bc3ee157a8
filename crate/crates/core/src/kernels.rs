//! Covariance structure of the nested Gaussian process.
//!
//! The prior on `U` splits into four independent pieces: polynomial terms driven by
//! the initial values of `U` and `A`, and integrated Wiener processes of orders `m`
//! and `m + n`. Each integrated process has covariance
//! `R_k(s, t) = ∫ G_k(s, u) G_k(t, u) du` with the Green's function
//! `G_k(s, u) = (s - u)_+^{k-1} / (k-1)!`.
//!
//! The dense posterior in this module is O(J³) and exists to cross-check the
//! state-space path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Largest problem the dense solvers accept by default.
pub const DEFAULT_DENSE_CAP: usize = 2000;

/// Orders and variances of the nested process prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Order of the `U` equation (`D^m U = A + noise`).
    pub m: usize,
    /// Order of the `A` equation.
    pub n: usize,
    pub sigma2_mu: f64,
    pub sigma2_u: f64,
    pub sigma2_alpha: f64,
    pub sigma2_a: f64,
}

impl KernelParams {
    pub fn new(
        m: usize,
        n: usize,
        sigma2_mu: f64,
        sigma2_u: f64,
        sigma2_alpha: f64,
        sigma2_a: f64,
    ) -> Result<Self> {
        let p = Self {
            m,
            n,
            sigma2_mu,
            sigma2_u,
            sigma2_alpha,
            sigma2_a,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n < 1 {
            return Err(Error::InvalidParameter(format!(
                "orders must satisfy m >= 2, n >= 1 (got m = {}, n = {})",
                self.m, self.n
            )));
        }
        for (name, v) in [
            ("sigma2_mu", self.sigma2_mu),
            ("sigma2_u", self.sigma2_u),
            ("sigma2_alpha", self.sigma2_alpha),
            ("sigma2_a", self.sigma2_a),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite (got {v})"
                )));
            }
        }
        Ok(())
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

fn binomial(k: usize, i: usize) -> f64 {
    factorial(k) / (factorial(i) * factorial(k - i))
}

/// `t^i / i!`
pub fn poly_basis(i: usize, t: f64) -> f64 {
    t.powi(i as i32) / factorial(i)
}

/// Green's function `(s - u)_+^{order-1} / (order-1)!`.
pub fn green_kernel(order: usize, s: f64, u: f64) -> f64 {
    debug_assert!(order >= 1);
    if u > s {
        0.0
    } else {
        poly_basis(order - 1, s - u)
    }
}

/// `∫_0^{min(s,t)} G(s,u) G(t,u) du` in closed form.
///
/// With `a = min(s,t)`, `d = |s - t|` and `v = a - u` the integrand becomes
/// `v^k (d + v)^k / (k!)^2`, which expands binomially into positive terms.
pub fn reproducing_kernel(order: usize, s: f64, t: f64) -> f64 {
    debug_assert!(order >= 1);
    let a = s.min(t);
    if a <= 0.0 {
        return 0.0;
    }
    let d = (s - t).abs();
    let k = order - 1;
    let mut sum = 0.0;
    for i in 0..=k {
        let p = (k + i + 1) as i32;
        sum += binomial(k, i) * d.powi((k - i) as i32) * a.powi(p) / p as f64;
    }
    let kf = factorial(k);
    sum / (kf * kf)
}

/// Prior covariance of `U(s)` and `U(t)` (times measured from the origin).
pub fn covariance_u(s: f64, t: f64, p: &KernelParams) -> f64 {
    let mut cov = 0.0;
    for i in 0..p.m {
        cov += p.sigma2_mu * poly_basis(i, s) * poly_basis(i, t);
    }
    cov += p.sigma2_u * reproducing_kernel(p.m, s, t);
    for i in 0..p.n {
        cov += p.sigma2_alpha * poly_basis(p.m + i, s) * poly_basis(p.m + i, t);
    }
    cov += p.sigma2_a * reproducing_kernel(p.m + p.n, s, t);
    cov
}

/// Gram matrix of [`covariance_u`] over a set of times.
pub fn gram_matrix(times: &[f64], p: &KernelParams) -> DMatrix<f64> {
    let n = times.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = covariance_u(times[i], times[j], p);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Pointwise Gaussian posterior of `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpPosterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

fn check_oracle_inputs(series: &TimeSeries, p: &KernelParams, sigma2_eps: f64, cap: usize) -> Result<()> {
    p.validate()?;
    if !(sigma2_eps.is_finite() && sigma2_eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma2_eps must be positive (got {sigma2_eps})"
        )));
    }
    if series.len() > cap {
        return Err(Error::DenseCapExceeded {
            points: series.len(),
            cap,
        });
    }
    Ok(())
}

fn observation_covariance(
    series: &TimeSeries,
    p: &KernelParams,
    sigma2_eps: f64,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let times = series.shifted_times();
    let mut c = gram_matrix(&times, p);
    for i in 0..times.len() {
        c[(i, i)] += sigma2_eps;
    }
    c.cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite("Cov{Y,Y}; check for duplicated or degenerate times".into())
    })
}

/// Dense conditional-normal posterior of `U` at `eval_times` (caller's time units).
pub fn gp_posterior_oracle(
    series: &TimeSeries,
    p: &KernelParams,
    sigma2_eps: f64,
    eval_times: &[f64],
) -> Result<GpPosterior> {
    gp_posterior_oracle_with_cap(series, p, sigma2_eps, eval_times, DEFAULT_DENSE_CAP)
}

pub fn gp_posterior_oracle_with_cap(
    series: &TimeSeries,
    p: &KernelParams,
    sigma2_eps: f64,
    eval_times: &[f64],
    cap: usize,
) -> Result<GpPosterior> {
    check_oracle_inputs(series, p, sigma2_eps, cap)?;
    let chol = observation_covariance(series, p, sigma2_eps)?;
    let times = series.shifted_times();
    let origin = series.origin();
    let y = DVector::from_column_slice(series.values());
    let weights = chol.solve(&y);

    let mut mean = Vec::with_capacity(eval_times.len());
    let mut variance = Vec::with_capacity(eval_times.len());
    for &te in eval_times {
        let s = te - origin;
        let k = DVector::from_iterator(times.len(), times.iter().map(|&t| covariance_u(s, t, p)));
        mean.push(k.dot(&weights));
        let v = chol.solve(&k);
        variance.push((covariance_u(s, s, p) - k.dot(&v)).max(0.0));
    }
    Ok(GpPosterior { mean, variance })
}

/// Log-density of the observations under the marginal `N(0, K + σ²_ε I)`.
pub fn dense_log_likelihood(series: &TimeSeries, p: &KernelParams, sigma2_eps: f64) -> Result<f64> {
    check_oracle_inputs(series, p, sigma2_eps, DEFAULT_DENSE_CAP)?;
    let chol = observation_covariance(series, p, sigma2_eps)?;
    let y = DVector::from_column_slice(series.values());
    let alpha = chol.solve(&y);
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let n = y.len() as f64;
    Ok(-0.5 * (n * (2.0 * std::f64::consts::PI).ln() + log_det + y.dot(&alpha)))
}
