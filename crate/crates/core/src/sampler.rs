//! Posterior sampling for nested-process regression.
//!
//! One iteration:
//! 1. draw all latent states from the exact state-space model with the
//!    simulation smoother;
//! 2. draw the noise variance from its inverse-gamma full conditional;
//! 3. draw fresh latent states under the Euler model, propose both diffusion
//!    variances from the Euler full conditionals, and accept or reject the pair
//!    with a single independence Metropolis–Hastings decision.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::gauss;
use crate::kalman::{simulate_smoother, SmoothDraw};
use crate::statespace::{
    euler_transition, exact_transition, knots_for, ApproxTransitionStep, ModelSpec, ModelVariances,
    StateVector, TransitionStep,
};
use crate::series::TimeSeries;

/// Observations are scaled so the largest absolute value equals this before fitting.
pub const DEFAULT_RESCALE_TARGET: f64 = 10.0;

/// Inverse-gamma priors on the variances and the initial-state scales.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PriorConfig {
    pub a: f64,
    pub b: f64,
    pub sigma_mu: f64,
    pub sigma_alpha: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            a: 0.01,
            b: 0.01,
            sigma_mu: 100.0,
            sigma_alpha: 100.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("sigma_mu", self.sigma_mu),
            ("sigma_alpha", self.sigma_alpha),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "prior {name} must be positive (got {v})"
                )));
            }
        }
        Ok(())
    }
}

/// The three variance parameters of the regression model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Variances {
    pub sigma2_eps: f64,
    pub sigma2_u: f64,
    pub sigma2_a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Starting values in the caller's units; data-driven when `None`.
    pub init: Option<Variances>,
    pub sample_noise_variance: bool,
    pub sample_state_variances: bool,
    pub rescale_target: f64,
}

impl McmcConfig {
    pub fn new(n_iter: usize, burn_in: usize, thin: usize, seed: u64) -> Self {
        Self {
            n_iter,
            burn_in,
            thin,
            seed,
            init: None,
            sample_noise_variance: true,
            sample_state_variances: true,
            rescale_target: DEFAULT_RESCALE_TARGET,
        }
    }

    /// 1,500 iterations with the first 500 discarded.
    pub fn benchmark(seed: u64) -> Self {
        Self::new(1500, 500, 1, seed)
    }

    /// 11,000 iterations, 1,000 burn-in, every 10th draw kept.
    pub fn long_run(seed: u64) -> Self {
        Self::new(11_000, 1000, 10, seed)
    }

    /// Long-run settings above 5,000 points, benchmark settings otherwise.
    pub fn for_size(j: usize, seed: u64) -> Self {
        if j > 5000 {
            Self::long_run(seed)
        } else {
            Self::benchmark(seed)
        }
    }

    pub fn kept_draws(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::InvalidParameter(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.burn_in, self.n_iter
            )));
        }
        if !(self.rescale_target.is_finite() && self.rescale_target > 0.0) {
            return Err(Error::InvalidParameter("rescale target must be positive".into()));
        }
        Ok(())
    }
}

/// Inverse-gamma distribution with shape/scale parameterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InvGamma {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.shape, 1.0 / self.scale).expect("positive parameters");
        1.0 / g.sample(rng)
    }

    /// Defined for `shape > 1`.
    pub fn mean(&self) -> f64 {
        self.scale / (self.shape - 1.0)
    }
}

/// Full conditional of the noise variance given `U` at the observed knots.
pub fn noise_posterior(u: &[f64], y: &[f64], prior: &PriorConfig) -> Result<InvGamma> {
    if u.len() != y.len() {
        return Err(Error::LengthMismatch {
            times: u.len(),
            values: y.len(),
        });
    }
    let ss: f64 = u.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(InvGamma {
        shape: prior.a + 0.5 * y.len() as f64,
        scale: prior.b + 0.5 * ss,
    })
}

pub fn step_sigma_eps<R: Rng + ?Sized>(u: &[f64], y: &[f64], prior: &PriorConfig, rng: &mut R) -> Result<f64> {
    Ok(noise_posterior(u, y, prior)?.sample(rng))
}

/// Euler-model full conditionals of `(σ²_U, σ²_A)` given a latent path.
///
/// `states` covers every knot including the initial one; `deltas[j]` is the gap
/// from knot `j` to knot `j + 1`.
pub fn proposal_posteriors(
    states: &[StateVector],
    deltas: &[f64],
    prior: &PriorConfig,
) -> Result<(InvGamma, InvGamma)> {
    if states.len() != deltas.len() + 1 {
        return Err(Error::LengthMismatch {
            times: deltas.len() + 1,
            values: states.len(),
        });
    }
    let mut ss_u = 0.0;
    let mut ss_a = 0.0;
    for (j, &d) in deltas.iter().enumerate() {
        if d.is_nan() || d <= 0.0 {
            return Err(Error::InvalidParameter(format!("gap {j} is not positive")));
        }
        let (s0, s1) = (&states[j], &states[j + 1]);
        let ru = s1.du - s0.du - s0.a * d;
        let ra = s1.a - s0.a;
        ss_u += ru * ru / d;
        ss_a += ra * ra / d;
    }
    let shape = prior.a + 0.5 * deltas.len() as f64;
    Ok((
        InvGamma {
            shape,
            scale: prior.b + 0.5 * ss_u,
        },
        InvGamma {
            shape,
            scale: prior.b + 0.5 * ss_a,
        },
    ))
}

/// Latent draw under the Euler model followed by a proposal for `(σ²_U, σ²_A)`.
pub fn propose_variances<R: Rng + ?Sized>(
    model_approx: &ModelSpec,
    y: &[f64],
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<(SmoothDraw, f64, f64)> {
    let theta_star = simulate_smoother(model_approx, y, rng)?;
    let deltas: Vec<f64> = model_approx.knots.windows(2).map(|w| w[1] - w[0]).collect();
    let (pu, pa) = proposal_posteriors(&theta_star.states, &deltas, prior)?;
    let su = pu.sample(rng);
    let sa = pa.sample(rng);
    Ok((theta_star, su, sa))
}

/// Log of the Metropolis–Hastings ratio for a joint `(σ²_U, σ²_A)` proposal.
///
/// `theta` is the exact-model path from the current iteration and `theta_star`
/// the Euler-model path that generated the proposal. Each gap contributes
/// `log f₃(θ_{j+1} − Gθ_j | W*) − log f₃(· | W) + log f₂(H̃ᵀ(θ*_{j+1} − G̃θ*_j) | W̃) − log f₂(· | W̃*)`.
/// `Err(Singular)` when a process-noise covariance cannot be factored.
pub fn log_accept_ratio(
    theta: &[StateVector],
    theta_star: &[StateVector],
    exact_current: &[TransitionStep],
    exact_proposed: &[TransitionStep],
    approx_current: &[ApproxTransitionStep],
    approx_proposed: &[ApproxTransitionStep],
) -> Result<f64> {
    let j = exact_current.len();
    if theta.len() != j + 1
        || theta_star.len() != j + 1
        || exact_proposed.len() != j
        || approx_current.len() != j
        || approx_proposed.len() != j
    {
        return Err(Error::LengthMismatch {
            times: j + 1,
            values: theta.len(),
        });
    }
    let mut total = 0.0;
    for i in 0..j {
        let (ec, ep, ac, ap) = (
            &exact_current[i],
            &exact_proposed[i],
            &approx_current[i],
            &approx_proposed[i],
        );
        let resid = theta[i + 1].to_vector() - ec.g * theta[i].to_vector();
        let star = theta_star[i + 1].to_vector() - ac.g_tilde * theta_star[i].to_vector();
        let star2: Vector2<f64> = ac.h_tilde.transpose() * star;
        let singular = || Error::Singular(format!("process noise at gap {i}"));
        let lp_exact = gauss::log_density(&resid, &ep.w).ok_or_else(singular)?;
        let lc_exact = gauss::log_density(&resid, &ec.w).ok_or_else(singular)?;
        let lc_approx = diag2_log_density(&star2, ac)?;
        let lp_approx = diag2_log_density(&star2, ap)?;
        total += (lp_exact - lc_exact) + (lc_approx - lp_approx);
    }
    Ok(total)
}

fn diag2_log_density(x: &Vector2<f64>, step: &ApproxTransitionStep) -> Result<f64> {
    let (vu, va) = (step.w_tilde[(0, 0)], step.w_tilde[(1, 1)]);
    if !(vu > 0.0 && va > 0.0) {
        return Err(Error::Singular("Euler process noise".into()));
    }
    Ok(gauss::log_density_1d(x[0], vu) + gauss::log_density_1d(x[1], va))
}

pub fn accept_probability(
    theta: &[StateVector],
    theta_star: &[StateVector],
    exact_current: &[TransitionStep],
    exact_proposed: &[TransitionStep],
    approx_current: &[ApproxTransitionStep],
    approx_proposed: &[ApproxTransitionStep],
) -> Result<f64> {
    let lr = log_accept_ratio(
        theta,
        theta_star,
        exact_current,
        exact_proposed,
        approx_current,
        approx_proposed,
    )?;
    Ok(lr.min(0.0).exp())
}

/// Row-major matrix of retained draws (rows) by observed knots (columns).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DrawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DrawMatrix {
    fn with_capacity(rows: usize, cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::with_capacity(rows * cols),
        }
    }

    fn push_row(&mut self, row: impl IntoIterator<Item = f64>) {
        self.data.extend(row);
        self.rows += 1;
        debug_assert_eq!(self.data.len(), self.rows * self.cols);
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (acc, v) in m.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.rows as f64);
        m
    }

    /// Per-column sample quantile at probability `q`.
    pub fn column_quantiles(&self, q: f64) -> Vec<f64> {
        (0..self.cols)
            .map(|j| {
                let mut c = self.column(j);
                quantile_in_place(&mut c, q)
            })
            .collect()
    }
}

/// Linear-interpolation sample quantile; sorts `values`.
pub fn quantile_in_place(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    quantile_in_place(&mut v, q)
}

/// Retained draws in the caller's units.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub times: Vec<f64>,
    pub u: DrawMatrix,
    pub du: DrawMatrix,
    pub a_path: DrawMatrix,
    pub sigma2_eps: Vec<f64>,
    pub sigma2_u: Vec<f64>,
    pub sigma2_a: Vec<f64>,
    pub mh_accept_rate: f64,
    /// Proposals rejected because a covariance could not be factored.
    pub mh_singular: usize,
    /// Factor applied to the observations before sampling.
    pub rescale: f64,
}

impl ChainDraws {
    pub fn posterior_mean_u(&self) -> Vec<f64> {
        self.u.column_means()
    }

    pub fn posterior_mean_du(&self) -> Vec<f64> {
        self.du.column_means()
    }
}

/// Multiplier mapping the observations to a maximum absolute value of `target`.
pub fn rescale_factor(y: &[f64], target: f64) -> f64 {
    let max = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        target / max
    } else {
        1.0
    }
}

/// Starting values on the rescaled data.
///
/// Noise from a robust spread of second-difference residuals; diffusion
/// variances matched so the prior spread over the whole range is comparable
/// to the data's.
fn default_init(knots: &[f64], y: &[f64]) -> Variances {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let mean_square = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let var = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).max(1e-4 * mean_square).max(1e-12);
    let mut resid: Vec<f64> = y.windows(3).map(|w| w[1] - 0.5 * (w[0] + w[2])).collect();
    let noise = if resid.len() >= 3 {
        let med = quantile_in_place(&mut resid, 0.5);
        let mut dev: Vec<f64> = resid.iter().map(|r| (r - med).abs()).collect();
        let mad = 1.4826 * quantile_in_place(&mut dev, 0.5);
        (mad * mad / 1.5).max(var * 1e-3)
    } else {
        var * 0.1
    };
    let range = knots[knots.len() - 1] - knots[0];
    Variances {
        sigma2_eps: noise.min(var),
        sigma2_u: 3.0 * var / range.powi(3),
        sigma2_a: 20.0 * var / range.powi(5),
    }
}

fn model_variances(v: &Variances, prior: &PriorConfig) -> ModelVariances {
    ModelVariances {
        sigma2_eps: v.sigma2_eps,
        sigma2_u: v.sigma2_u,
        sigma2_a: v.sigma2_a,
        sigma2_mu: prior.sigma_mu * prior.sigma_mu,
        sigma2_alpha: prior.sigma_alpha * prior.sigma_alpha,
    }
}

/// Runs the full sampler on `series`.
///
/// Observations are rescaled internally and every output is mapped back.
pub fn run_chain(series: &TimeSeries, prior: &PriorConfig, mcmc: &McmcConfig) -> Result<ChainDraws> {
    prior.validate()?;
    mcmc.validate()?;
    let knots = knots_for(series);
    let deltas: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = rescale_factor(series.values(), mcmc.rescale_target);
    let ys: Vec<f64> = series.values().iter().map(|v| v * scale).collect();
    let s2 = scale * scale;

    let mut cur = match mcmc.init {
        Some(v) => Variances {
            sigma2_eps: v.sigma2_eps * s2,
            sigma2_u: v.sigma2_u * s2,
            sigma2_a: v.sigma2_a * s2,
        },
        None => default_init(&knots, &ys),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(mcmc.seed);
    let j = series.len();
    let kept = mcmc.kept_draws();
    let mut draws = ChainDraws {
        times: series.times().to_vec(),
        u: DrawMatrix::with_capacity(kept, j),
        du: DrawMatrix::with_capacity(kept, j),
        a_path: DrawMatrix::with_capacity(kept, j),
        sigma2_eps: Vec::with_capacity(kept),
        sigma2_u: Vec::with_capacity(kept),
        sigma2_a: Vec::with_capacity(kept),
        mh_accept_rate: 0.0,
        mh_singular: 0,
        rescale: scale,
    };
    let mut accepted = 0usize;
    let mut attempts = 0usize;

    for it in 0..mcmc.n_iter {
        let wrap = |e: Error| Error::Sampler {
            iteration: it,
            source: Box::new(e),
        };
        let exact = ModelSpec::exact(knots.clone(), &model_variances(&cur, prior)).map_err(wrap)?;
        let theta = simulate_smoother(&exact, &ys, &mut rng).map_err(wrap)?;

        if mcmc.sample_noise_variance {
            let u_obs = theta.u_at_observed(&exact);
            cur.sigma2_eps = step_sigma_eps(&u_obs, &ys, prior, &mut rng).map_err(wrap)?;
        }

        if mcmc.sample_state_variances {
            let approx = ModelSpec::euler(knots.clone(), &model_variances(&cur, prior)).map_err(wrap)?;
            let (theta_star, su, sa) = propose_variances(&approx, &ys, prior, &mut rng).map_err(wrap)?;
            attempts += 1;
            let steps = |u: f64, a: f64| -> Result<(Vec<TransitionStep>, Vec<ApproxTransitionStep>)> {
                let e = deltas.iter().map(|&d| exact_transition(d, u, a)).collect::<Result<_>>()?;
                let x = deltas.iter().map(|&d| euler_transition(d, u, a)).collect::<Result<_>>()?;
                Ok((e, x))
            };
            let (ec, ac) = steps(cur.sigma2_u, cur.sigma2_a).map_err(wrap)?;
            let (ep, ap) = steps(su, sa).map_err(wrap)?;
            let u: f64 = rng.random();
            match log_accept_ratio(&theta.states, &theta_star.states, &ec, &ep, &ac, &ap) {
                Ok(lr) => {
                    if u.ln() < lr {
                        cur.sigma2_u = su;
                        cur.sigma2_a = sa;
                        accepted += 1;
                    }
                }
                Err(Error::Singular(_)) => draws.mh_singular += 1,
                Err(e) => return Err(wrap(e)),
            }
        }

        if it >= mcmc.burn_in && (it - mcmc.burn_in + 1).is_multiple_of(mcmc.thin) {
            let obs = theta.states[1..].iter();
            draws.u.push_row(obs.clone().map(|s| s.u / scale));
            draws.du.push_row(obs.clone().map(|s| s.du / scale));
            draws.a_path.push_row(obs.map(|s| s.a / scale));
            draws.sigma2_eps.push(cur.sigma2_eps / s2);
            draws.sigma2_u.push(cur.sigma2_u / s2);
            draws.sigma2_a.push(cur.sigma2_a / s2);
        }
    }
    draws.mh_accept_rate = if attempts > 0 {
        accepted as f64 / attempts as f64
    } else {
        0.0
    };
    Ok(draws)
}
