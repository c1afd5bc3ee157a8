//! Nested smoothing spline.
//!
//! Minimizes
//! `(1/J) Σ (Y_j − U(t_j))² + λ_U ∫ (D^m U − A)² + λ_A ∫ (D^n A)²`.
//! The minimizer lives in the span of the polynomial bases and the
//! reproducing kernels of orders `m` and `m + n` centred at the data, and its
//! coefficients have closed forms built from `S = R_U + Jλ_U I + (λ_U/λ_A) R_A`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernels::{poly_basis, reproducing_kernel, DEFAULT_DENSE_CAP};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NssConfig {
    pub m: usize,
    pub n: usize,
    pub lambda_u: f64,
    pub lambda_a: f64,
}

impl NssConfig {
    pub fn new(lambda_u: f64, lambda_a: f64) -> Self {
        Self {
            m: 2,
            n: 1,
            lambda_u,
            lambda_a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n < 1 {
            return Err(Error::InvalidParameter(format!(
                "orders must satisfy m >= 2, n >= 1 (got m = {}, n = {})",
                self.m, self.n
            )));
        }
        if !(self.lambda_u.is_finite() && self.lambda_u > 0.0) || !(self.lambda_a.is_finite() && self.lambda_a > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "smoothing parameters must be positive (got {}, {})",
                self.lambda_u, self.lambda_a
            )));
        }
        Ok(())
    }

    fn ratio(&self) -> f64 {
        self.lambda_u / self.lambda_a
    }
}

/// Coefficients of the fitted spline and its values at the data.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NssFit {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub fitted: Vec<f64>,
}

/// Design matrices of the expansion at the data points.
pub struct NssBasis {
    pub phi_mu: DMatrix<f64>,
    pub phi_alpha: DMatrix<f64>,
    pub r_u: DMatrix<f64>,
    pub r_a: DMatrix<f64>,
}

impl NssBasis {
    pub fn new(times: &[f64], m: usize, n: usize) -> Self {
        let j = times.len();
        let phi_mu = DMatrix::from_fn(j, m, |r, c| poly_basis(c, times[r]));
        let phi_alpha = DMatrix::from_fn(j, n, |r, c| poly_basis(m + c, times[r]));
        let gram = |order: usize| {
            let mut g = DMatrix::zeros(j, j);
            for r in 0..j {
                for c in 0..=r {
                    let v = reproducing_kernel(order, times[r], times[c]);
                    g[(r, c)] = v;
                    g[(c, r)] = v;
                }
            }
            g
        };
        Self {
            phi_mu,
            phi_alpha,
            r_u: gram(m),
            r_a: gram(m + n),
        }
    }
}

/// The linear maps `B_μ`, `B_α`, `B_ν` from data to coefficients.
struct Solver {
    basis: NssBasis,
    s_chol: Cholesky<f64, Dyn>,
    b_mu: DMatrix<f64>,
    b_alpha: DMatrix<f64>,
}

fn spd_inverse(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = (&m + m.transpose()) * 0.5;
    sym.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular(what.to_string()))
}

impl Solver {
    fn new(series: &TimeSeries, config: &NssConfig) -> Result<Self> {
        config.validate()?;
        let j = series.len();
        if j > DEFAULT_DENSE_CAP {
            return Err(Error::DenseCapExceeded {
                points: j,
                cap: DEFAULT_DENSE_CAP,
            });
        }
        if j < config.m + config.n {
            return Err(Error::Singular(format!(
                "{j} points cannot identify {} polynomial coefficients",
                config.m + config.n
            )));
        }
        let basis = NssBasis::new(&series.shifted_times(), config.m, config.n);
        let mut s = &basis.r_u + &basis.r_a * config.ratio();
        for i in 0..j {
            s[(i, i)] += j as f64 * config.lambda_u;
        }
        let s_chol = s
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("spline system matrix".into()))?;

        let sinv_mu = s_chol.solve(&basis.phi_mu);
        let sinv_al = s_chol.solve(&basis.phi_alpha);
        let s_mm = basis.phi_mu.transpose() * &sinv_mu;
        let s_ma = basis.phi_mu.transpose() * &sinv_al;
        let s_aa = basis.phi_alpha.transpose() * &sinv_al;
        let s_am = s_ma.transpose();
        let s_aa_inv = spd_inverse(s_aa.clone(), "Σ_αα")?;
        let s_mm_inv = spd_inverse(s_mm.clone(), "Σ_μμ")?;

        let phi_mu_given_a = basis.phi_mu.transpose() - &s_ma * &s_aa_inv * basis.phi_alpha.transpose();
        let phi_a_given_mu = basis.phi_alpha.transpose() - &s_am * &s_mm_inv * basis.phi_mu.transpose();
        let sig_mu_given_a = spd_inverse(&s_mm - &s_ma * &s_aa_inv * &s_am, "Σ_μ|α")?;
        let sig_a_given_mu = spd_inverse(&s_aa - &s_am * &s_mm_inv * &s_ma, "Σ_α|μ")?;

        // B = Σ⁻¹ φ S⁻¹, formed as (S⁻¹ φᵀ Σ⁻¹)ᵀ since S is symmetric.
        let b_mu = (s_chol.solve(&phi_mu_given_a.transpose()) * sig_mu_given_a).transpose();
        let b_alpha = (s_chol.solve(&phi_a_given_mu.transpose()) * sig_a_given_mu).transpose();
        Ok(Self {
            basis,
            s_chol,
            b_mu,
            b_alpha,
        })
    }
}

pub fn fit_nss(series: &TimeSeries, config: &NssConfig) -> Result<NssFit> {
    let solver = Solver::new(series, config)?;
    let b = &solver.basis;
    let y = DVector::from_column_slice(series.values());
    let mu = &solver.b_mu * &y;
    let alpha = &solver.b_alpha * &y;
    let nu = solver.s_chol.solve(&(&y - &b.phi_mu * &mu - &b.phi_alpha * &alpha));
    let beta = &nu * config.ratio();
    let fitted = &b.phi_mu * &mu + &b.r_u * &nu + &b.phi_alpha * &alpha + &b.r_a * &beta;
    Ok(NssFit {
        mu: mu.as_slice().to_vec(),
        nu: nu.as_slice().to_vec(),
        alpha: alpha.as_slice().to_vec(),
        beta: beta.as_slice().to_vec(),
        fitted: fitted.as_slice().to_vec(),
    })
}

/// `Û(t) = μᵀφ_μ(t) + νᵀR_U(t) + αᵀφ_α(t) + βᵀR_A(t)` at times in the caller's units.
pub fn evaluate_nss(fit: &NssFit, series: &TimeSeries, config: &NssConfig, eval_times: &[f64]) -> Vec<f64> {
    let origin = series.origin();
    let knots = series.shifted_times();
    let (m, n) = (config.m, config.n);
    eval_times
        .iter()
        .map(|&te| {
            let t = te - origin;
            let mut v = 0.0;
            for (i, c) in fit.mu.iter().enumerate() {
                v += c * poly_basis(i, t);
            }
            for (i, c) in fit.alpha.iter().enumerate() {
                v += c * poly_basis(m + i, t);
            }
            for ((tj, nu), beta) in knots.iter().zip(&fit.nu).zip(&fit.beta) {
                v += nu * reproducing_kernel(m, *tj, t) + beta * reproducing_kernel(m + n, *tj, t);
            }
            v
        })
        .collect()
}

/// Smoother matrix `K` with `fitted = K Y`; depends only on the design and config.
pub fn hat_matrix(series: &TimeSeries, config: &NssConfig) -> Result<DMatrix<f64>> {
    let solver = Solver::new(series, config)?;
    let b = &solver.basis;
    let j = series.len();
    let resid_map = DMatrix::identity(j, j) - &b.phi_mu * &solver.b_mu - &b.phi_alpha * &solver.b_alpha;
    let b_nu = solver.s_chol.solve(&resid_map);
    Ok(&b.phi_mu * &solver.b_mu
        + &b.r_u * &b_nu
        + &b.phi_alpha * &solver.b_alpha
        + &b.r_a * &b_nu * config.ratio())
}

/// Matrix form of the penalized objective for arbitrary coefficients.
pub fn npss_objective(fit: &NssFit, series: &TimeSeries, config: &NssConfig) -> f64 {
    let b = NssBasis::new(&series.shifted_times(), config.m, config.n);
    let v = |x: &[f64]| DVector::from_column_slice(x);
    let (mu, nu, alpha, beta) = (v(&fit.mu), v(&fit.nu), v(&fit.alpha), v(&fit.beta));
    let y = v(series.values());
    let resid = y - &b.phi_mu * &mu - &b.r_u * &nu - &b.phi_alpha * &alpha - &b.r_a * &beta;
    let j = series.len() as f64;
    resid.norm_squared() / j + config.lambda_u * nu.dot(&(&b.r_u * &nu)) + config.lambda_a * beta.dot(&(&b.r_a * &beta))
}
