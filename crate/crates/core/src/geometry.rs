//! Cameras, covariance assembly and perspective projection.
//!
//! Conventions: world-to-camera extrinsics (`x_cam = R·x + t`), camera looks
//! down +z with +y pointing down, and pixel centers sit at integer
//! coordinates measured from the top-left corner of the image.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector2, Vector3, Vector4};

use crate::error::{Error, Result};

/// Points at or in front of this camera-space depth are culled.
pub const Z_NEAR: f64 = 0.01;

/// Added to both diagonal entries of every projected 2D covariance (px²).
pub const COV2D_DILATION: f64 = 0.3;

const UNIT_QUAT_TOL: f64 = 1e-6;
const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// Pinhole camera with the principal point at the image center and a
    /// horizontal field of view of `fov_x` radians.
    pub fn from_fov(fov_x: f64, width: u32, height: u32) -> Result<Self> {
        if !(fov_x > 0.0 && fov_x < std::f64::consts::PI) {
            return Err(Error::invalid(format!("field of view {fov_x} rad out of (0, pi)")));
        }
        let f = width as f64 / (2.0 * (fov_x / 2.0).tan());
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::invalid(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be nonzero"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::invalid(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Horizontal field of view in radians.
    pub fn fov_x(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.fx)).atan()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let pose = Self {
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        let det = r.determinant();
        if !(err <= ORTHONORMAL_TOL) || !((det - 1.0).abs() <= ORTHONORMAL_TOL) {
            return Err(Error::invalid(format!(
                "rotation is not a proper orthonormal matrix (|RᵀR−I|={err:e}, det={det})"
            )));
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("translation is not finite"));
        }
        Ok(())
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn inverse(&self) -> CameraPose {
        let rt = self.rotation.transpose();
        CameraPose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// 4×4 homogeneous world-to-camera matrix.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        Self::new(m.fixed_view::<3, 3>(0, 0).into_owned(), m.fixed_view::<3, 1>(0, 3).into_owned())
    }

    /// Rotation as a unit quaternion `(w, x, y, z)` with `w ≥ 0`.
    pub fn quaternion(&self) -> Vector4<f64> {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation));
        let mut v = Vector4::new(q.w, q.i, q.j, q.k);
        if v[0] < 0.0 {
            v = -v;
        }
        v
    }

    pub fn from_quaternion(q: &Vector4<f64>, translation: Vector3<f64>) -> Result<Self> {
        let n = q.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("zero or non-finite quaternion"));
        }
        Self::new(quat_to_rotation(&(q / n)), translation)
    }
}

/// A calibrated pinhole camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub name: String,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

impl Camera {
    pub fn new(name: impl Into<String>, intrinsics: CameraIntrinsics, pose: CameraPose) -> Self {
        Self {
            name: name.into(),
            intrinsics,
            pose,
        }
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width as usize
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height as usize
    }

    /// Back-projects pixel `(u, v)` at camera-space depth `depth` to world coordinates.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        let x_cam = Vector3::new((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth);
        camera_to_world(&self.pose, &x_cam)
    }
}

/// World-to-camera pose looking from `eye` at `target`.
///
/// The camera +z axis points at the target, +x is `forward × up` and +y
/// completes a right-handed frame (pointing "down" in the image). When the
/// view direction is parallel to `up`, `+x` is used as the up vector instead.
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> Result<CameraPose> {
    let forward = target - eye;
    let dist = forward.norm();
    if !(dist > 1e-12) {
        return Err(Error::invalid("camera eye coincides with its look-at target"));
    }
    let forward = forward / dist;
    let mut right = forward.cross(up);
    if right.norm() < 1e-9 {
        right = forward.cross(&Vector3::x());
        if right.norm() < 1e-9 {
            right = forward.cross(&Vector3::y());
        }
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let translation = -(rotation * eye);
    Ok(CameraPose {
        rotation,
        translation,
    })
}

/// Rotation matrix of the quaternion `(w, x, y, z)`.
///
/// Uses the unit-quaternion formula without renormalizing; callers keep the
/// quaternion normalized between optimizer steps.
pub fn quat_to_rotation(q: &Vector4<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Gradient of a scalar w.r.t. `q` given its gradient w.r.t. `quat_to_rotation(q)`.
pub fn quat_to_rotation_backward(q: &Vector4<f64>, d_rot: &Matrix3<f64>) -> Vector4<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let g = d_rot;
    let dw = Matrix3::new(0.0, -2.0 * z, 2.0 * y, 2.0 * z, 0.0, -2.0 * x, -2.0 * y, 2.0 * x, 0.0);
    let dx = Matrix3::new(0.0, 2.0 * y, 2.0 * z, 2.0 * y, -4.0 * x, -2.0 * w, 2.0 * z, 2.0 * w, -4.0 * x);
    let dy = Matrix3::new(-4.0 * y, 2.0 * x, 2.0 * w, 2.0 * x, 0.0, 2.0 * z, -2.0 * w, 2.0 * z, -4.0 * y);
    let dz = Matrix3::new(-4.0 * z, -2.0 * w, 2.0 * x, 2.0 * w, -4.0 * z, 2.0 * y, 2.0 * x, 2.0 * y, 0.0);
    Vector4::new(g.dot(&dw), g.dot(&dx), g.dot(&dy), g.dot(&dz))
}

/// `R(q)·diag(s²)·R(q)ᵀ` for a unit quaternion `q` and positive scales `s`.
pub fn build_covariance(q: &Vector4<f64>, s: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let n = q.norm();
    if !((n - 1.0).abs() <= UNIT_QUAT_TOL) {
        return Err(Error::invalid(format!("quaternion norm {n} is not 1")));
    }
    if !s.iter().all(|&v| v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("scales must be positive, got {s:?}")));
    }
    Ok(covariance_from_params(q, s))
}

/// Unchecked covariance assembly used on the rendering path.
pub(crate) fn covariance_from_params(q: &Vector4<f64>, s: &Vector3<f64>) -> Matrix3<f64> {
    let m = quat_to_rotation(q) * Matrix3::from_diagonal(s);
    let cov = m * m.transpose();
    // exact symmetry regardless of summation order
    (cov + cov.transpose()) * 0.5
}

pub fn world_to_camera(pose: &CameraPose, mu: &Vector3<f64>) -> Vector3<f64> {
    pose.rotation * mu + pose.translation
}

pub fn camera_to_world(pose: &CameraPose, x_cam: &Vector3<f64>) -> Vector3<f64> {
    pose.rotation.transpose() * (x_cam - pose.translation)
}

fn check_depth(x_cam: &Vector3<f64>) -> Result<()> {
    if x_cam.z > Z_NEAR {
        Ok(())
    } else {
        Err(Error::BehindCamera { depth: x_cam.z })
    }
}

/// Pixel coordinates of a camera-space point.
pub fn project(intr: &CameraIntrinsics, x_cam: &Vector3<f64>) -> Result<Vector2<f64>> {
    check_depth(x_cam)?;
    Ok(project_unchecked(intr, x_cam))
}

pub(crate) fn project_unchecked(intr: &CameraIntrinsics, x_cam: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(
        intr.fx * x_cam.x / x_cam.z + intr.cx,
        intr.fy * x_cam.y / x_cam.z + intr.cy,
    )
}

/// Jacobian of [`project`] at `x_cam`.
pub fn projection_jacobian(intr: &CameraIntrinsics, x_cam: &Vector3<f64>) -> Result<Matrix2x3<f64>> {
    check_depth(x_cam)?;
    Ok(projection_jacobian_unchecked(intr, x_cam))
}

pub(crate) fn projection_jacobian_unchecked(intr: &CameraIntrinsics, x_cam: &Vector3<f64>) -> Matrix2x3<f64> {
    let (x, y, z) = (x_cam.x, x_cam.y, x_cam.z);
    let iz = 1.0 / z;
    let iz2 = iz * iz;
    Matrix2x3::new(
        intr.fx * iz,
        0.0,
        -intr.fx * x * iz2,
        0.0,
        intr.fy * iz,
        -intr.fy * y * iz2,
    )
}

/// `J·(R·Σ·Rᵀ)·Jᵀ` followed by the low-pass dilation.
pub fn project_covariance(j: &Matrix2x3<f64>, r: &Matrix3<f64>, sigma: &Matrix3<f64>) -> Matrix2<f64> {
    let cov = j * (r * sigma * r.transpose()) * j.transpose();
    let sym = (cov + cov.transpose()) * 0.5;
    sym + Matrix2::identity() * COV2D_DILATION
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
