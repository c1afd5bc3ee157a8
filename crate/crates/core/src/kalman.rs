//! Linear-time filtering and smoothing over a [`ModelSpec`].
//!
//! The backward pass uses the `r`/`N` recursions, so no predicted covariance is
//! ever inverted. That matters for the Euler model, whose process noise is
//! singular in the `U` direction.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::statespace::{ModelSpec, StateVector};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Measurement update at an observed knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Innovation {
    pub value: f64,
    pub variance: f64,
    /// Filtered gain `P Zᵀ / F`.
    pub gain: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub pred_mean: Vector3<f64>,
    pub pred_cov: Matrix3<f64>,
    /// `None` at unobserved knots.
    pub innovation: Option<Innovation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub states: Vec<FilterState>,
    pub log_likelihood: f64,
}

/// Posterior mean and marginal covariance of the state at every knot.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub mean: Vec<StateVector>,
    pub cov: Vec<Matrix3<f64>>,
}

impl Smoothed {
    /// `U` component at the observed knots.
    pub fn u_at_observed(&self, model: &ModelSpec) -> Vec<f64> {
        observed_component(&self.mean, model, |s| s.u)
    }
}

/// Joint draw of all knot states given the observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothDraw {
    pub states: Vec<StateVector>,
}

impl SmoothDraw {
    pub fn u_at_observed(&self, model: &ModelSpec) -> Vec<f64> {
        observed_component(&self.states, model, |s| s.u)
    }
}

fn observed_component(states: &[StateVector], model: &ModelSpec, f: impl Fn(&StateVector) -> f64) -> Vec<f64> {
    states
        .iter()
        .zip(&model.observed)
        .filter(|(_, &o)| o)
        .map(|(s, _)| f(s))
        .collect()
}

fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

fn check_inputs(model: &ModelSpec, y: &[f64]) -> Result<()> {
    let n_obs = model.n_observed();
    if y.len() != n_obs {
        return Err(Error::LengthMismatch {
            times: n_obs,
            values: y.len(),
        });
    }
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

/// Forward Kalman recursion with a Joseph-form covariance update.
pub fn filter(model: &ModelSpec, y: &[f64]) -> Result<FilterOutput> {
    check_inputs(model, y)?;
    let h = model.sigma2_eps;
    let n = model.n_knots();
    let mut states = Vec::with_capacity(n);
    let mut a = Vector3::zeros();
    let mut p = Matrix3::from_diagonal(&model.init_var);
    let mut log_lik = 0.0;
    let mut obs = y.iter();

    for j in 0..n {
        let mut af = a;
        let mut pf = p;
        let innovation = if model.observed[j] {
            let yj = *obs.next().expect("length checked");
            let v = yj - a[0];
            let f = p[(0, 0)].max(0.0) + h;
            if f.is_nan() || f <= 0.0 || f.is_infinite() {
                return Err(Error::Conditioning { knot: j, value: f });
            }
            let k = p.column(0) / f;
            af = a + k * v;
            let mut i_kz = Matrix3::identity();
            i_kz.column_mut(0).axpy(-1.0, &k, 1.0);
            pf = symmetrize(&(i_kz * p * i_kz.transpose() + k * k.transpose() * h));
            log_lik -= 0.5 * (LN_2PI + f.ln() + v * v / f);
            Some(Innovation {
                value: v,
                variance: f,
                gain: k,
            })
        } else {
            None
        };
        states.push(FilterState {
            pred_mean: a,
            pred_cov: p,
            innovation,
        });
        if j + 1 < n {
            let step = &model.steps[j];
            a = step.g * af;
            p = symmetrize(&(step.g * pf * step.g.transpose() + step.q));
        }
    }
    Ok(FilterOutput {
        states,
        log_likelihood: log_lik,
    })
}

/// `(I - K Z)` for the observation row `Z = (1, 0, 0)`.
fn i_minus_kz(k: &Vector3<f64>) -> Matrix3<f64> {
    let mut m = Matrix3::identity();
    m.column_mut(0).axpy(-1.0, k, 1.0);
    m
}

/// Backward pass for the smoothed means only.
fn smoothed_means(model: &ModelSpec, out: &FilterOutput) -> Vec<StateVector> {
    let n = model.n_knots();
    let mut means = vec![StateVector::default(); n];
    let mut r = Vector3::zeros();
    for j in (0..n).rev() {
        let st = &out.states[j];
        // r currently carries information from knots after j, at the level of knot j+1.
        let mut carried = if j + 1 < n {
            model.steps[j].g.transpose() * r
        } else {
            Vector3::zeros()
        };
        if let Some(inn) = &st.innovation {
            carried = i_minus_kz(&inn.gain).transpose() * carried;
            carried[0] += inn.value / inn.variance;
        }
        r = carried;
        means[j] = (st.pred_mean + st.pred_cov * r).into();
    }
    means
}

/// Fixed-interval smoother: `E[θ_j | Y]` and `Var[θ_j | Y]` at every knot.
pub fn smooth_mean(model: &ModelSpec, y: &[f64]) -> Result<Smoothed> {
    let out = filter(model, y)?;
    let n = model.n_knots();
    let mut mean = vec![StateVector::default(); n];
    let mut cov = vec![Matrix3::zeros(); n];
    let mut r = Vector3::zeros();
    let mut big_n = Matrix3::zeros();
    for j in (0..n).rev() {
        let st = &out.states[j];
        let (mut rc, mut nc) = if j + 1 < n {
            let g = &model.steps[j].g;
            (g.transpose() * r, g.transpose() * big_n * g)
        } else {
            (Vector3::zeros(), Matrix3::zeros())
        };
        if let Some(inn) = &st.innovation {
            let l = i_minus_kz(&inn.gain);
            rc = l.transpose() * rc;
            rc[0] += inn.value / inn.variance;
            nc = l.transpose() * nc * l;
            nc[(0, 0)] += 1.0 / inn.variance;
        }
        r = rc;
        big_n = symmetrize(&nc);
        let p = &st.pred_cov;
        mean[j] = (st.pred_mean + p * r).into();
        cov[j] = symmetrize(&(p - p * big_n * p));
    }
    Ok(Smoothed { mean, cov })
}

fn standard_normal3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Unconditional draw of states and observations from the model.
pub fn simulate_prior<R: Rng + ?Sized>(model: &ModelSpec, rng: &mut R) -> (Vec<StateVector>, Vec<f64>) {
    let n = model.n_knots();
    let sd_eps = model.sigma2_eps.sqrt();
    let mut states = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(model.n_observed());
    let mut theta = model.init_var.map(f64::sqrt).component_mul(&standard_normal3(rng));
    for j in 0..n {
        if model.observed[j] {
            let e: f64 = rng.sample(StandardNormal);
            ys.push(theta[0] + sd_eps * e);
        }
        states.push(theta.into());
        if j + 1 < n {
            let step = &model.steps[j];
            theta = step.g * theta + step.factor * standard_normal3(rng);
        }
    }
    (states, ys)
}

/// Joint posterior draw by mean correction: `θ⁺ + E[θ | Y] − E[θ | Y⁺]`.
///
/// The smoother mean is linear in the data with a zero prior mean, so the
/// correction is a single smoothing pass on `Y − Y⁺`.
pub fn simulate_smoother<R: Rng + ?Sized>(model: &ModelSpec, y: &[f64], rng: &mut R) -> Result<SmoothDraw> {
    check_inputs(model, y)?;
    let (plus_states, plus_y) = simulate_prior(model, rng);
    let diff: Vec<f64> = y.iter().zip(&plus_y).map(|(a, b)| a - b).collect();
    let out = filter(model, &diff)?;
    let correction = smoothed_means(model, &out);
    let states = plus_states
        .iter()
        .zip(&correction)
        .map(|(p, c)| StateVector::new(p.u + c.u, p.du + c.du, p.a + c.a))
        .collect();
    Ok(SmoothDraw { states })
}

/// Smoothed means without covariances; cheaper than [`smooth_mean`].
pub fn smooth_mean_only(model: &ModelSpec, y: &[f64]) -> Result<Vec<StateVector>> {
    let out = filter(model, y)?;
    Ok(smoothed_means(model, &out))
}
