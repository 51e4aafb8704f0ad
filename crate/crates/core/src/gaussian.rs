//! Gaussian primitives and fixed-size frames.

use nalgebra::{Vector3, Vector4};

use crate::error::{Error, Result};
use crate::geometry::sigmoid;
use crate::sh;

/// One anisotropic 3D Gaussian in its unconstrained parameterization.
///
/// Scales are stored as logarithms, opacity as a logit and rotation as a
/// `(w, x, y, z)` quaternion.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: Vector3<f64>,
    pub rotation: Vector4<f64>,
    pub log_scale: Vector3<f64>,
    pub opacity_logit: f64,
    pub sh: Vec<Vector3<f64>>,
}

impl Gaussian {
    pub fn zeros(sh_degree: usize) -> Self {
        Self {
            mean: Vector3::zeros(),
            rotation: Vector4::zeros(),
            log_scale: Vector3::zeros(),
            opacity_logit: 0.0,
            sh: vec![Vector3::zeros(); sh::coeff_count(sh_degree)],
        }
    }

    pub fn scale(&self) -> Vector3<f64> {
        self.log_scale.map(f64::exp)
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.mean.as_slice());
        out.extend_from_slice(self.rotation.as_slice());
        out.extend_from_slice(self.log_scale.as_slice());
        out.push(self.opacity_logit);
        for b in &self.sh {
            out.extend_from_slice(b.as_slice());
        }
    }

    fn read_flat(&mut self, v: &[f64]) {
        self.mean = Vector3::new(v[0], v[1], v[2]);
        self.rotation = Vector4::new(v[3], v[4], v[5], v[6]);
        self.log_scale = Vector3::new(v[7], v[8], v[9]);
        self.opacity_logit = v[10];
        for (i, b) in self.sh.iter_mut().enumerate() {
            let o = 11 + 3 * i;
            *b = Vector3::new(v[o], v[o + 1], v[o + 2]);
        }
    }

    fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite())
            && self.rotation.iter().all(|v| v.is_finite())
            && self.log_scale.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
            && self.sh.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Parameter groups sharing a learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Mean,
    Rotation,
    LogScale,
    OpacityLogit,
    Sh,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::Mean,
        ParamGroup::Rotation,
        ParamGroup::LogScale,
        ParamGroup::OpacityLogit,
        ParamGroup::Sh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Mean => "mean",
            ParamGroup::Rotation => "rotation",
            ParamGroup::LogScale => "log_scale",
            ParamGroup::OpacityLogit => "opacity_logit",
            ParamGroup::Sh => "sh",
        }
    }

    /// Group of the `offset`-th scalar inside one Gaussian's flat block.
    pub fn of_offset(offset: usize) -> ParamGroup {
        match offset {
            0..=2 => ParamGroup::Mean,
            3..=6 => ParamGroup::Rotation,
            7..=9 => ParamGroup::LogScale,
            10 => ParamGroup::OpacityLogit,
            _ => ParamGroup::Sh,
        }
    }
}

/// Scalars per Gaussian in the flat layout for the given SH degree.
pub const fn params_per_gaussian(sh_degree: usize) -> usize {
    11 + 3 * sh::coeff_count(sh_degree)
}

/// The scene state at one time index: exactly `K` Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFrame {
    pub t: i64,
    pub sh_degree: usize,
    pub gaussians: Vec<Gaussian>,
}

impl GaussianFrame {
    pub fn new(t: i64, sh_degree: usize, gaussians: Vec<Gaussian>) -> Result<Self> {
        let frame = Self {
            t,
            sh_degree,
            gaussians,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sh_degree > sh::MAX_SH_DEGREE {
            return Err(Error::invalid(format!("SH degree {} exceeds {}", self.sh_degree, sh::MAX_SH_DEGREE)));
        }
        let n = sh::coeff_count(self.sh_degree);
        if let Some(i) = self.gaussians.iter().position(|g| g.sh.len() != n) {
            return Err(Error::invalid(format!(
                "gaussian {i} has {} SH coefficients, degree {} needs {n}",
                self.gaussians[i].sh.len(),
                self.sh_degree
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.gaussians.iter().all(Gaussian::is_finite)
    }

    /// A frame of the same shape with every parameter zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            t: self.t,
            sh_degree: self.sh_degree,
            gaussians: vec![Gaussian::zeros(self.sh_degree); self.len()],
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * params_per_gaussian(self.sh_degree));
        for g in &self.gaussians {
            g.write_flat(&mut out);
        }
        out
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) {
        let stride = params_per_gaussian(self.sh_degree);
        assert_eq!(flat.len(), stride * self.len(), "flat parameter vector has the wrong length");
        for (g, chunk) in self.gaussians.iter_mut().zip(flat.chunks_exact(stride)) {
            g.read_flat(chunk);
        }
    }

    /// Parameter group of every scalar of [`to_flat`](Self::to_flat).
    pub fn flat_groups(&self) -> Vec<ParamGroup> {
        let stride = params_per_gaussian(self.sh_degree);
        (0..self.len() * stride).map(|i| ParamGroup::of_offset(i % stride)).collect()
    }

    pub fn normalize_rotations(&mut self) {
        for g in &mut self.gaussians {
            let n = g.rotation.norm();
            if n > 0.0 && n.is_finite() {
                g.rotation /= n;
            } else {
                g.rotation = Vector4::new(1.0, 0.0, 0.0, 0.0);
            }
        }
    }

    pub fn clamp_log_scales(&mut self, min: f64, max: f64) {
        for g in &mut self.gaussians {
            g.log_scale = g.log_scale.map(|v| v.clamp(min, max));
        }
    }

    /// Rounds every parameter to the nearest `f32`, the archive storage precision.
    pub fn round_to_f32(&mut self) {
        let mut flat = self.to_flat();
        for v in &mut flat {
            *v = *v as f32 as f64;
        }
        self.set_from_flat(&flat);
    }

    pub fn centers(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.gaussians.iter().map(|g| g.mean)
    }
}

/// Per-Gaussian partial derivatives, laid out exactly like the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderGradients {
    pub sh_degree: usize,
    pub gaussians: Vec<Gaussian>,
}

impl RenderGradients {
    pub fn zeros(sh_degree: usize, count: usize) -> Self {
        Self {
            sh_degree,
            gaussians: vec![Gaussian::zeros(sh_degree); count],
        }
    }

    pub fn zeros_like(frame: &GaussianFrame) -> Self {
        Self::zeros(frame.sh_degree, frame.len())
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * params_per_gaussian(self.sh_degree));
        for g in &self.gaussians {
            g.write_flat(&mut out);
        }
        out
    }

    pub fn add_assign(&mut self, other: &RenderGradients) {
        self.add_scaled(other, 1.0);
    }

    /// `self += w * other`.
    pub fn add_scaled(&mut self, other: &RenderGradients, w: f64) {
        assert_eq!(self.len(), other.len());
        for (a, b) in self.gaussians.iter_mut().zip(&other.gaussians) {
            a.mean += b.mean * w;
            a.rotation += b.rotation * w;
            a.log_scale += b.log_scale * w;
            a.opacity_logit += b.opacity_logit * w;
            for (x, y) in a.sh.iter_mut().zip(&b.sh) {
                *x += y * w;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.gaussians.iter().all(Gaussian::is_finite)
    }

    /// First parameter group holding a non-finite entry, if any.
    pub fn non_finite_group(&self) -> Option<ParamGroup> {
        let stride = params_per_gaussian(self.sh_degree);
        self.to_flat()
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| ParamGroup::of_offset(i % stride))
    }

    pub fn is_zero(&self) -> bool {
        self.to_flat().iter().all(|&v| v == 0.0)
    }
}
