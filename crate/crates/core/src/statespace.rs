//! Discrete-time state-space form of the nested process for `m = 2`, `n = 1`.
//!
//! The state at each knot is `(U, DU, A)`. Between knots separated by `δ` the exact
//! transition is `θ' = G θ + ω` with `G = exp(Cδ)` for the nilpotent drift `C`, and
//! `ω ~ N(0, W)` integrates both white-noise channels over the gap. The Euler
//! transition drops the `δ²/2` coupling and keeps only first-order noise; the
//! sampler uses it to build cheap proposals.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector3};

use crate::error::{Error, Result};
use crate::gauss;
use crate::kernels::KernelParams;
use crate::series::TimeSeries;

/// Latent state `(U, DU, A)` at one knot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVector {
    pub u: f64,
    pub du: f64,
    pub a: f64,
}

impl StateVector {
    pub fn new(u: f64, du: f64, a: f64) -> Self {
        Self { u, du, a }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.u, self.du, self.a)
    }
}

impl From<Vector3<f64>> for StateVector {
    fn from(v: Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Exact transition over one gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionStep {
    pub delta: f64,
    pub g: Matrix3<f64>,
    pub w: Matrix3<f64>,
}

/// Euler transition over one gap: `θ' = G̃ θ + H̃ ω̃`, `ω̃ ~ N(0, W̃)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxTransitionStep {
    pub delta: f64,
    pub g_tilde: Matrix3<f64>,
    pub h_tilde: Matrix3x2<f64>,
    pub w_tilde: Matrix2<f64>,
}

impl ApproxTransitionStep {
    /// Lifted 3×3 covariance `H̃ W̃ H̃ᵀ`.
    pub fn lifted_covariance(&self) -> Matrix3<f64> {
        self.h_tilde * self.w_tilde * self.h_tilde.transpose()
    }
}

fn check_variances(sigma2_u: f64, sigma2_a: f64) -> Result<()> {
    if !(sigma2_u.is_finite() && sigma2_u >= 0.0 && sigma2_a.is_finite() && sigma2_a >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "diffusion variances must be finite and non-negative (got {sigma2_u}, {sigma2_a})"
        )));
    }
    Ok(())
}

fn drift(delta: f64) -> Matrix3<f64> {
    Matrix3::new(
        1.0,
        delta,
        0.5 * delta * delta,
        0.0,
        1.0,
        delta,
        0.0,
        0.0,
        1.0,
    )
}

pub fn exact_transition(delta: f64, sigma2_u: f64, sigma2_a: f64) -> Result<TransitionStep> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time gap must be non-negative (got {delta})"
        )));
    }
    check_variances(sigma2_u, sigma2_a)?;
    let d = delta;
    let d2 = d * d;
    let d3 = d2 * d;
    let d4 = d3 * d;
    let d5 = d4 * d;
    let w11 = d3 / 3.0 * sigma2_u + d5 / 20.0 * sigma2_a;
    let w12 = d2 / 2.0 * sigma2_u + d4 / 8.0 * sigma2_a;
    let w13 = d3 / 6.0 * sigma2_a;
    let w22 = d * sigma2_u + d3 / 3.0 * sigma2_a;
    let w23 = d2 / 2.0 * sigma2_a;
    let w33 = d * sigma2_a;
    Ok(TransitionStep {
        delta,
        g: drift(delta),
        w: Matrix3::new(w11, w12, w13, w12, w22, w23, w13, w23, w33),
    })
}

pub fn euler_transition(delta: f64, sigma2_u: f64, sigma2_a: f64) -> Result<ApproxTransitionStep> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Euler transition needs a positive time gap (got {delta})"
        )));
    }
    check_variances(sigma2_u, sigma2_a)?;
    let mut g_tilde = drift(delta);
    g_tilde[(0, 2)] = 0.0;
    Ok(ApproxTransitionStep {
        delta,
        g_tilde,
        h_tilde: Matrix3x2::new(0.0, 0.0, 1.0, 0.0, 0.0, 1.0),
        w_tilde: Matrix2::new(sigma2_u * delta, 0.0, 0.0, sigma2_a * delta),
    })
}

/// Which discretization a [`ModelSpec`] was built with.
#[derive(Debug, Clone, PartialEq)]
pub enum Transitions {
    Exact(Vec<TransitionStep>),
    Euler(Vec<ApproxTransitionStep>),
}

impl Transitions {
    pub fn len(&self) -> usize {
        match self {
            Transitions::Exact(v) => v.len(),
            Transitions::Euler(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Linear-Gaussian step in the form the filter consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LinearStep {
    pub g: Matrix3<f64>,
    pub q: Matrix3<f64>,
    /// `factor · factorᵀ = q`; draws process noise.
    pub factor: Matrix3<f64>,
}

/// Observation model plus the transition chain over the knot grid.
///
/// Knot 0 is the unobserved initial knot carrying the prior; knots `1..=J` hold
/// the observations in order. Observations load only on `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub knots: Vec<f64>,
    pub observed: Vec<bool>,
    pub sigma2_eps: f64,
    pub init_var: Vector3<f64>,
    pub transitions: Transitions,
    pub(crate) steps: Vec<LinearStep>,
}

/// Variances that parameterize a model on a fixed grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelVariances {
    pub sigma2_eps: f64,
    pub sigma2_u: f64,
    pub sigma2_a: f64,
    pub sigma2_mu: f64,
    pub sigma2_alpha: f64,
}

impl ModelSpec {
    /// Number of observed knots.
    pub fn n_observed(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn n_knots(&self) -> usize {
        self.knots.len()
    }

    /// Exact model over knots `{0} ∪ shifted observation times`.
    pub fn exact(knots: Vec<f64>, v: &ModelVariances) -> Result<Self> {
        let deltas = knot_gaps(&knots)?;
        let steps: Vec<TransitionStep> = deltas
            .iter()
            .map(|&d| exact_transition(d, v.sigma2_u, v.sigma2_a))
            .collect::<Result<_>>()?;
        let linear = steps
            .iter()
            .map(|s| {
                let factor = gauss::noise_factor(&s.w).ok_or_else(|| {
                    Error::NotPositiveDefinite(format!("process noise at gap {}", s.delta))
                })?;
                Ok(LinearStep {
                    g: s.g,
                    q: s.w,
                    factor,
                })
            })
            .collect::<Result<_>>()?;
        Self::assemble(knots, v, Transitions::Exact(steps), linear)
    }

    /// Same grid with the Euler transitions.
    pub fn euler(knots: Vec<f64>, v: &ModelVariances) -> Result<Self> {
        let deltas = knot_gaps(&knots)?;
        let steps: Vec<ApproxTransitionStep> = deltas
            .iter()
            .map(|&d| euler_transition(d, v.sigma2_u, v.sigma2_a))
            .collect::<Result<_>>()?;
        let linear = steps
            .iter()
            .map(|s| {
                let mut factor = Matrix3::zeros();
                factor[(1, 1)] = s.w_tilde[(0, 0)].sqrt();
                factor[(2, 2)] = s.w_tilde[(1, 1)].sqrt();
                LinearStep {
                    g: s.g_tilde,
                    q: s.lifted_covariance(),
                    factor,
                }
            })
            .collect();
        Self::assemble(knots, v, Transitions::Euler(steps), linear)
    }

    fn assemble(
        knots: Vec<f64>,
        v: &ModelVariances,
        transitions: Transitions,
        steps: Vec<LinearStep>,
    ) -> Result<Self> {
        if !(v.sigma2_eps.is_finite() && v.sigma2_eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2_eps must be positive (got {})",
                v.sigma2_eps
            )));
        }
        if !(v.sigma2_mu > 0.0 && v.sigma2_alpha > 0.0) {
            return Err(Error::InvalidParameter(
                "initial-state variances must be positive".into(),
            ));
        }
        let mut observed = vec![true; knots.len()];
        observed[0] = false;
        Ok(Self {
            knots,
            observed,
            sigma2_eps: v.sigma2_eps,
            init_var: Vector3::new(v.sigma2_mu, v.sigma2_mu, v.sigma2_alpha),
            transitions,
            steps,
        })
    }
}

fn knot_gaps(knots: &[f64]) -> Result<Vec<f64>> {
    if knots.len() < 2 {
        return Err(Error::EmptySeries);
    }
    let gaps: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = gaps.iter().position(|&g| g.is_nan() || g <= 0.0) {
        return Err(Error::DuplicateTime {
            index: i,
            time: knots[i + 1],
        });
    }
    Ok(gaps)
}

/// Knot grid for a series: the origin followed by the shifted observation times.
pub fn knots_for(series: &TimeSeries) -> Vec<f64> {
    let mut knots = Vec::with_capacity(series.len() + 1);
    knots.push(0.0);
    knots.extend(series.shifted_times());
    knots
}

/// Exact state-space model for a series under the given prior parameters.
pub fn build_model(series: &TimeSeries, params: &KernelParams, sigma2_eps: f64) -> Result<ModelSpec> {
    if params.m != 2 || params.n != 1 {
        return Err(Error::UnsupportedOrder {
            m: params.m,
            n: params.n,
        });
    }
    params.validate()?;
    ModelSpec::exact(
        knots_for(series),
        &ModelVariances {
            sigma2_eps,
            sigma2_u: params.sigma2_u,
            sigma2_a: params.sigma2_a,
            sigma2_mu: params.sigma2_mu,
            sigma2_alpha: params.sigma2_alpha,
        },
    )
}
