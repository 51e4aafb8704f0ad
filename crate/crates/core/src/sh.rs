//! Real spherical-harmonics basis up to degree 3 for view-dependent color.
//!
//! Basis ordering and signs follow the layout used by common Gaussian
//! splatting tools, so coefficients interoperate with their PLY files.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub const MAX_SH_DEGREE: usize = 3;

/// `Y₀ = 1 / (2√π)`.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Number of basis functions for degree `l`.
pub const fn coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Evaluates every basis function of `degree` at `dir` into `out`.
pub fn basis(degree: usize, dir: &Vector3<f64>, out: &mut [f64]) {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    out[0] = SH_C0;
    if degree == 0 {
        return;
    }
    out[1] = -SH_C1 * y;
    out[2] = SH_C1 * z;
    out[3] = -SH_C1 * x;
    if degree == 1 {
        return;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    out[4] = SH_C2[0] * x * y;
    out[5] = SH_C2[1] * y * z;
    out[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    out[7] = SH_C2[3] * x * z;
    out[8] = SH_C2[4] * (xx - yy);
    if degree == 2 {
        return;
    }
    out[9] = SH_C3[0] * y * (3.0 * xx - yy);
    out[10] = SH_C3[1] * x * y * z;
    out[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    out[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    out[14] = SH_C3[5] * z * (xx - yy);
    out[15] = SH_C3[6] * x * (xx - 3.0 * yy);
}

/// Partial derivatives of each basis function w.r.t. the raw `(x, y, z)`
/// components of `dir` (no unit-norm projection applied).
pub fn basis_gradient(degree: usize, dir: &Vector3<f64>, out: &mut [Vector3<f64>]) {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    out[0] = Vector3::zeros();
    if degree == 0 {
        return;
    }
    out[1] = Vector3::new(0.0, -SH_C1, 0.0);
    out[2] = Vector3::new(0.0, 0.0, SH_C1);
    out[3] = Vector3::new(-SH_C1, 0.0, 0.0);
    if degree == 1 {
        return;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    out[4] = SH_C2[0] * Vector3::new(y, x, 0.0);
    out[5] = SH_C2[1] * Vector3::new(0.0, z, y);
    out[6] = SH_C2[2] * Vector3::new(-2.0 * x, -2.0 * y, 4.0 * z);
    out[7] = SH_C2[3] * Vector3::new(z, 0.0, x);
    out[8] = SH_C2[4] * Vector3::new(2.0 * x, -2.0 * y, 0.0);
    if degree == 2 {
        return;
    }
    out[9] = SH_C3[0] * Vector3::new(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
    out[10] = SH_C3[1] * Vector3::new(y * z, x * z, x * y);
    out[11] = SH_C3[2] * Vector3::new(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
    out[12] = SH_C3[3] * Vector3::new(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = SH_C3[4] * Vector3::new(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
    out[14] = SH_C3[5] * Vector3::new(2.0 * x * z, -2.0 * y * z, xx - yy);
    out[15] = SH_C3[6] * Vector3::new(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
}

/// Degree implied by a coefficient count, if it is a perfect square ≤ 16.
pub fn degree_for_count(count: usize) -> Option<usize> {
    (0..=MAX_SH_DEGREE).find(|&l| coeff_count(l) == count)
}

/// Raw (unclamped) color `Σ_m b_m·Y_m(dir)`.
pub fn eval_sh(coeffs: &[Vector3<f64>], dir: &Vector3<f64>) -> Result<Vector3<f64>> {
    let degree = degree_for_count(coeffs.len())
        .ok_or_else(|| Error::invalid(format!("{} SH coefficients is not (L+1)² for L ≤ 3", coeffs.len())))?;
    let n = dir.norm();
    if !((n - 1.0).abs() <= 1e-6) {
        return Err(Error::invalid(format!("view direction norm {n} is not 1")));
    }
    Ok(eval_unchecked(degree, coeffs, dir))
}

pub(crate) fn eval_unchecked(degree: usize, coeffs: &[Vector3<f64>], dir: &Vector3<f64>) -> Vector3<f64> {
    let mut y = [0.0; 16];
    basis(degree, dir, &mut y);
    coeffs.iter().zip(&y).fold(Vector3::zeros(), |acc, (b, &ym)| acc + b * ym)
}

/// DC coefficient whose constant color equals `rgb`.
pub fn dc_from_rgb(rgb: &Vector3<f64>) -> Vector3<f64> {
    rgb / SH_C0
}

pub fn rgb_from_dc(dc: &Vector3<f64>) -> Vector3<f64> {
    dc * SH_C0
}
