//! Central finite-difference oracle for frame-parameter gradients.
//!
//! The rasterizer is piecewise smooth: hard kernel cutoffs, the alpha floor,
//! early termination and color clamping all create seams. A finite difference
//! is only a valid oracle when both probes stay on the same smooth piece, so
//! scenes whose probes cross a seam are reported as unusable rather than
//! compared.

#![allow(dead_code)]

use nalgebra::{Vector3, Vector4};
use rand::Rng;
use warmsplat::gaussian::{Gaussian, GaussianFrame};
use warmsplat::geometry::{look_at, Camera, CameraIntrinsics};
use warmsplat::render::{active_set_fingerprint, ImageBuffer};

pub struct Mismatch {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

pub struct CheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub mismatches: Vec<Mismatch>,
}

fn fingerprints(frame: &GaussianFrame, cameras: &[Camera]) -> Vec<u64> {
    cameras.iter().map(|c| active_set_fingerprint(frame, c).unwrap()).collect()
}

/// Compares `analytic` against central differences of `loss` at step `h`.
///
/// Returns `None` when some probe changes the discrete render state.
pub fn check_gradients(
    frame: &GaussianFrame,
    cameras: &[Camera],
    analytic: &[f64],
    loss: impl Fn(&GaussianFrame) -> f64,
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Option<CheckReport> {
    let base = frame.to_flat();
    assert_eq!(base.len(), analytic.len());
    let base_fp = fingerprints(frame, cameras);
    let mut probe = frame.clone();
    let mut report = CheckReport {
        checked: 0,
        max_rel_error: 0.0,
        mismatches: Vec::new(),
    };
    for i in 0..base.len() {
        let mut eval = |delta: f64| {
            let mut flat = base.clone();
            flat[i] += delta;
            probe.set_from_flat(&flat);
            (loss(&probe), fingerprints(&probe, cameras))
        };
        let (lp, fp_p) = eval(h);
        let (lm, fp_m) = eval(-h);
        if fp_p != base_fp || fp_m != base_fp {
            return None;
        }
        let numeric = (lp - lm) / (2.0 * h);
        let a = analytic[i];
        let err = (numeric - a).abs();
        let rel = err / numeric.abs().max(a.abs()).max(f64::MIN_POSITIVE);
        report.checked += 1;
        if err >= abs_tol {
            report.max_rel_error = report.max_rel_error.max(rel);
        }
        if !(err < abs_tol || rel < rel_tol) {
            report.mismatches.push(Mismatch {
                index: i,
                analytic: a,
                numeric,
            });
        }
    }
    Some(report)
}

/// Cameras on a ring of radius `dist` around the origin, all looking at it.
pub fn ring_cameras(count: usize, size: u32, dist: f64) -> Vec<Camera> {
    let intr = CameraIntrinsics::new(40.0, 40.0, size as f64 / 2.0, size as f64 / 2.0, size, size).unwrap();
    (0..count)
        .map(|i| {
            let a = 0.4 + i as f64 * 2.1;
            let eye = Vector3::new(dist * a.cos(), dist * a.sin(), 0.8 + 0.3 * i as f64);
            let pose = look_at(&eye, &Vector3::zeros(), &Vector3::z()).unwrap();
            Camera::new(format!("cam_{i:03}"), intr, pose)
        })
        .collect()
}

pub fn random_gaussian(rng: &mut impl Rng, sh_degree: usize) -> Gaussian {
    let mut g = Gaussian::zeros(sh_degree);
    g.mean = Vector3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
    g.rotation = Vector4::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
    .normalize();
    g.log_scale = Vector3::new(
        rng.random_range(-2.4..-1.2),
        rng.random_range(-2.4..-1.2),
        rng.random_range(-2.4..-1.2),
    );
    g.opacity_logit = rng.random_range(-1.5..2.0);
    for (m, b) in g.sh.iter_mut().enumerate() {
        *b = if m == 0 {
            Vector3::new(rng.random_range(0.8..2.8), rng.random_range(0.8..2.8), rng.random_range(0.8..2.8))
        } else {
            Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3))
        };
    }
    g
}

pub fn random_frame(rng: &mut impl Rng, count: usize, sh_degree: usize) -> GaussianFrame {
    GaussianFrame::new(0, sh_degree, (0..count).map(|_| random_gaussian(rng, sh_degree)).collect()).unwrap()
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> ImageBuffer {
    ImageBuffer::from_data(w, h, (0..w * h * 3).map(|_| rng.random::<f64>()).collect()).unwrap()
}
