#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};
use ngp::kalman::simulate_smoother;
use ngp::kernels::{dense_log_likelihood, gp_posterior_oracle, KernelParams};
use ngp::statespace::{build_model, ModelSpec, StateVector};
use ngp::{filter, smooth_mean, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Irregular grid, random variances, random smooth-plus-noise responses.
pub fn random_fixture(seed: u64, j: usize) -> (TimeSeries, KernelParams, f64) {
    let mut r = rng(seed);
    let mut t = Vec::with_capacity(j);
    let mut acc = r.random_range(0.05..0.5);
    for _ in 0..j {
        t.push(acc);
        acc += r.random_range(0.02..0.3);
    }
    let y = t
        .iter()
        .map(|x: &f64| (1.3 * x).sin() * 2.0 + 0.2 * x + r.random_range(-0.3..0.3))
        .collect();
    let p = KernelParams::new(
        2,
        1,
        r.random_range(0.5..4.0),
        r.random_range(0.1..5.0),
        r.random_range(0.5..4.0),
        r.random_range(0.1..5.0),
    )
    .unwrap();
    let eps = r.random_range(0.01..0.5);
    (TimeSeries::new(t, y).unwrap(), p, eps)
}

pub struct OracleGap {
    pub mean_rel: f64,
    pub var_rel: f64,
    pub loglik_rel: f64,
}

/// Relative gaps between the linear-time smoother/filter and the dense oracle.
pub fn oracle_gap(seed: u64, j: usize) -> OracleGap {
    let (s, p, eps) = random_fixture(seed, j);
    let model = build_model(&s, &p, eps).unwrap();
    let sm = smooth_mean(&model, s.values()).unwrap();
    let fast = sm.u_at_observed(&model);
    let fast_var: Vec<f64> = sm.cov[1..].iter().map(|c| c[(0, 0)]).collect();
    let dense = gp_posterior_oracle(&s, &p, eps, s.times()).unwrap();
    let scale = dense.mean.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mean_rel = fast
        .iter()
        .zip(&dense.mean)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max);
    let var_rel = fast_var
        .iter()
        .zip(&dense.variance)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
        .fold(0.0, f64::max);
    let ll_fast = filter(&model, s.values()).unwrap().log_likelihood;
    let ll_dense = dense_log_likelihood(&s, &p, eps).unwrap();
    OracleGap {
        mean_rel,
        var_rel,
        loglik_rel: (ll_fast - ll_dense).abs() / ll_dense.abs(),
    }
}

pub struct SmootherCheck {
    /// Largest |empirical − analytic| mean in Monte Carlo standard errors.
    pub worst_mean_se: f64,
    /// Largest relative error of the empirical U variance.
    pub worst_var_rel: f64,
}

pub fn smoother_monte_carlo(seed: u64, j: usize, draws: usize) -> SmootherCheck {
    let (s, p, eps) = random_fixture(seed, j);
    let model: ModelSpec = build_model(&s, &p, eps).unwrap();
    let exact = smooth_mean(&model, s.values()).unwrap();
    let mut r = rng(seed ^ 0xabcdef);
    let n = model.n_knots();
    let mut sum = vec![Vector3::zeros(); n];
    let mut sq = vec![Vector3::zeros(); n];
    for _ in 0..draws {
        let d = simulate_smoother(&model, s.values(), &mut r).unwrap();
        for (k, st) in d.states.iter().enumerate() {
            let v = st.to_vector();
            sum[k] += v;
            sq[k] += v.component_mul(&v);
        }
    }
    let nd = draws as f64;
    let mut worst_mean_se: f64 = 0.0;
    let mut worst_var_rel: f64 = 0.0;
    for k in 0..n {
        let mean = sum[k] / nd;
        let var = (sq[k] - mean.component_mul(&mean) * nd) / (nd - 1.0);
        let want: Vector3<f64> = exact.mean[k].to_vector();
        let cov: &Matrix3<f64> = &exact.cov[k];
        for c in 0..3 {
            let se = (cov[(c, c)] / nd).sqrt();
            worst_mean_se = worst_mean_se.max((mean[c] - want[c]).abs() / se);
        }
        if model.observed[k] {
            worst_var_rel = worst_var_rel.max((var[0] - cov[(0, 0)]).abs() / cov[(0, 0)]);
        }
    }
    SmootherCheck {
        worst_mean_se,
        worst_var_rel,
    }
}

pub fn state(u: f64, du: f64, a: f64) -> StateVector {
    StateVector::new(u, du, a)
}
