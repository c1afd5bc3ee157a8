//! Small fixed-size Gaussian helpers shared by the filter and the sampler.

use nalgebra::{SMatrix, SVector};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Relative diagonal jitter added when a covariance is only semidefinite.
pub const JITTER: f64 = 1e-15;

/// Cholesky factor of a PSD matrix after Jacobi (unit-diagonal) equilibration.
///
/// Returns `(scale, chol)` with `m = diag(scale) · chol · cholᵀ · diag(scale)`.
/// Directions with a zero diagonal get a zero scale. The jitter is relative to the
/// unit diagonal, so covariances spanning many orders of magnitude (the process
/// noise entries range from δ⁵ to δ) are factored without absolute-jitter bias.
pub fn scaled_cholesky<const D: usize>(
    m: &SMatrix<f64, D, D>,
    jitter: f64,
) -> Option<(SVector<f64, D>, SMatrix<f64, D, D>)> {
    let mut scale = SVector::<f64, D>::zeros();
    for i in 0..D {
        let v = m[(i, i)];
        if !v.is_finite() || v < 0.0 {
            return None;
        }
        scale[i] = v.sqrt();
    }
    let mut unit = SMatrix::<f64, D, D>::identity();
    for i in 0..D {
        for j in 0..D {
            if i != j && scale[i] > 0.0 && scale[j] > 0.0 {
                unit[(i, j)] = m[(i, j)] / (scale[i] * scale[j]);
            }
        }
    }
    if let Some(c) = unit.cholesky() {
        return Some((scale, c.l()));
    }
    if jitter > 0.0 {
        for i in 0..D {
            unit[(i, i)] += jitter;
        }
        return unit.cholesky().map(|c| (scale, c.l()));
    }
    None
}

/// Lower factor `L` with `L Lᵀ ≈ m`, used to draw `N(0, m)` noise.
pub fn noise_factor<const D: usize>(m: &SMatrix<f64, D, D>) -> Option<SMatrix<f64, D, D>> {
    scaled_cholesky(m, JITTER).map(|(s, l)| SMatrix::<f64, D, D>::from_diagonal(&s) * l)
}

/// Log-density of `N(0, cov)` at `x`. `None` if `cov` is singular.
pub fn log_density<const D: usize>(x: &SVector<f64, D>, cov: &SMatrix<f64, D, D>) -> Option<f64> {
    let (scale, l) = scaled_cholesky(cov, JITTER)?;
    let mut z = SVector::<f64, D>::zeros();
    let mut log_det = 0.0;
    for i in 0..D {
        if scale[i] <= 0.0 {
            return None;
        }
        z[i] = x[i] / scale[i];
        log_det += 2.0 * scale[i].ln() + 2.0 * l[(i, i)].ln();
    }
    let w = l.solve_lower_triangular(&z)?;
    Some(-0.5 * (D as f64 * LN_2PI + log_det + w.norm_squared()))
}

/// Log-density of a scalar `N(0, var)`.
pub fn log_density_1d(x: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + x * x / var)
}
