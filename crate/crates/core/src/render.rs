//! Tile-based differentiable Gaussian rasterizer.
//!
//! Splats are globally depth-sorted per view (ties broken by index), binned
//! into 16×16 tiles and composited front to back over a black background.
//! The backward pass replays each pixel's contribution list and propagates
//! gradients through compositing, the 2D kernel, covariance projection,
//! perspective projection, spherical harmonics and the log/logit/quaternion
//! parameterizations. Per-tile partial gradients are reduced in tile order,
//! so results do not depend on the number of worker threads.

use std::hash::{Hash, Hasher};

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianFrame, RenderGradients};
use crate::geometry::{
    covariance_from_params, project_covariance, project_unchecked, projection_jacobian_unchecked,
    quat_to_rotation, quat_to_rotation_backward, sigmoid, world_to_camera, Camera, Z_NEAR,
};
use crate::sh;

pub const TILE_SIZE: usize = 16;
/// Contributions with `α·G` below this are skipped.
pub const MIN_ALPHA: f64 = 1.0 / 255.0;
/// Compositing stops once transmittance falls below this.
pub const MIN_TRANSMITTANCE: f64 = 1e-4;
/// Kernel support radius in standard deviations of the major axis.
pub const KERNEL_SIGMAS: f64 = 3.0;
const DEPTH_WEIGHT_FLOOR: f64 = 1e-6;

/// Row-major RGB image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "{} values cannot form a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut img = Self::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let o = (y * self.width + x) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Values quantized to 8 bits, as stored in PNG files.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::from_data(width, height, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }
}

/// Per-pixel expected depth, zero where nothing contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthBuffer {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl DepthBuffer {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// A Gaussian after projection into one view.
#[derive(Debug, Clone)]
struct Splat {
    index: usize,
    depth: f64,
    x_cam: Vector3<f64>,
    mean2d: Vector2<f64>,
    jacobian: Matrix2x3<f64>,
    cov_cam: Matrix3<f64>,
    conic: Matrix2<f64>,
    radius: f64,
    opacity: f64,
    color: Vector3<f64>,
    /// Whether each color channel passed through the [0, 1] clamp unchanged.
    color_live: [bool; 3],
    view_dir: Vector3<f64>,
    view_dist: f64,
}

struct Prepared {
    width: usize,
    height: usize,
    splats: Vec<Splat>,
    tiles_x: usize,
    tiles_y: usize,
    /// Per tile, indices into `splats` in front-to-back order.
    tile_lists: Vec<Vec<u32>>,
}

fn check_camera(camera: &Camera) -> Result<()> {
    camera.intrinsics.validate()?;
    camera.pose.validate()
}

fn prepare(frame: &GaussianFrame, camera: &Camera) -> Result<Prepared> {
    frame.validate()?;
    if frame.is_empty() {
        return Err(Error::invalid("cannot render an empty frame"));
    }
    check_camera(camera)?;
    let intr = &camera.intrinsics;
    let (width, height) = (camera.width(), camera.height());
    let w_rot = camera.pose.rotation;
    let center = camera.pose.center();
    let degree = frame.sh_degree;

    let mut splats: Vec<Splat> = frame
        .gaussians
        .iter()
        .enumerate()
        .filter_map(|(index, g)| {
            let x_cam = world_to_camera(&camera.pose, &g.mean);
            if !(x_cam.z > Z_NEAR) {
                return None;
            }
            let mean2d = project_unchecked(intr, &x_cam);
            let jacobian = projection_jacobian_unchecked(intr, &x_cam);
            let cov3 = covariance_from_params(&g.rotation, &g.scale());
            let cov2 = project_covariance(&jacobian, &w_rot, &cov3);
            let det = cov2[(0, 0)] * cov2[(1, 1)] - cov2[(0, 1)] * cov2[(1, 0)];
            if !(det > 0.0) || !det.is_finite() {
                return None;
            }
            let conic = Matrix2::new(cov2[(1, 1)], -cov2[(0, 1)], -cov2[(1, 0)], cov2[(0, 0)]) / det;
            let mid = 0.5 * (cov2[(0, 0)] + cov2[(1, 1)]);
            let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
            let radius = KERNEL_SIGMAS * lambda_max.sqrt();
            if mean2d.x + radius < 0.0
                || mean2d.y + radius < 0.0
                || mean2d.x - radius > (width - 1) as f64
                || mean2d.y - radius > (height - 1) as f64
            {
                return None;
            }
            let offset = g.mean - center;
            let view_dist = offset.norm();
            let view_dir = if view_dist > 0.0 { offset / view_dist } else { Vector3::z() };
            let raw = sh::eval_unchecked(degree, &g.sh, &view_dir);
            let color_live = [0, 1, 2].map(|c| (0.0..=1.0).contains(&raw[c]));
            Some(Splat {
                index,
                depth: x_cam.z,
                x_cam,
                mean2d,
                jacobian,
                cov_cam: w_rot * cov3 * w_rot.transpose(),
                conic,
                radius,
                opacity: sigmoid(g.opacity_logit),
                color: raw.map(|v| v.clamp(0.0, 1.0)),
                color_live,
                view_dir,
                view_dist,
            })
        })
        .collect();

    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));

    let tiles_x = width.div_ceil(TILE_SIZE);
    let tiles_y = height.div_ceil(TILE_SIZE);
    let mut tile_lists = vec![Vec::new(); tiles_x * tiles_y];
    for (slot, s) in splats.iter().enumerate() {
        let x0 = (s.mean2d.x - s.radius).ceil().max(0.0) as usize;
        let y0 = (s.mean2d.y - s.radius).ceil().max(0.0) as usize;
        let x1 = (s.mean2d.x + s.radius).floor().min((width - 1) as f64);
        let y1 = (s.mean2d.y + s.radius).floor().min((height - 1) as f64);
        if x1 < 0.0 || y1 < 0.0 || (x0 as f64) > x1 || (y0 as f64) > y1 {
            continue;
        }
        let (x1, y1) = (x1 as usize, y1 as usize);
        for ty in y0 / TILE_SIZE..=y1 / TILE_SIZE {
            for tx in x0 / TILE_SIZE..=x1 / TILE_SIZE {
                tile_lists[ty * tiles_x + tx].push(slot as u32);
            }
        }
    }

    Ok(Prepared {
        width,
        height,
        splats,
        tiles_x,
        tiles_y,
        tile_lists,
    })
}

/// Kernel value of splat `s` at pixel `(px, py)`, or `None` outside its support.
#[inline]
fn kernel(s: &Splat, px: f64, py: f64) -> Option<(f64, f64, f64)> {
    let dx = px - s.mean2d.x;
    let dy = py - s.mean2d.y;
    if dx * dx + dy * dy > s.radius * s.radius {
        return None;
    }
    let power = -0.5 * (s.conic[(0, 0)] * dx * dx + 2.0 * s.conic[(0, 1)] * dx * dy + s.conic[(1, 1)] * dy * dy);
    if power > 0.0 {
        return None;
    }
    Some((power.exp(), dx, dy))
}

impl Prepared {
    fn tile_bounds(&self, tile: usize) -> (usize, usize, usize, usize) {
        let tx = tile % self.tiles_x;
        let ty = tile / self.tiles_x;
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        (x0, y0, (x0 + TILE_SIZE).min(self.width), (y0 + TILE_SIZE).min(self.height))
    }

    /// Walks the contributions of one pixel front to back, calling `visit`
    /// with `(list position, splat, kernel value, alpha, transmittance before)`.
    #[inline]
    fn composite_pixel(
        &self,
        list: &[u32],
        px: usize,
        py: usize,
        mut visit: impl FnMut(usize, &Splat, f64, f64, f64, f64, f64),
    ) {
        let (fx, fy) = (px as f64, py as f64);
        let mut t = 1.0;
        for (pos, &slot) in list.iter().enumerate() {
            let s = &self.splats[slot as usize];
            let Some((g, dx, dy)) = kernel(s, fx, fy) else {
                continue;
            };
            let alpha = s.opacity * g;
            if alpha < MIN_ALPHA {
                continue;
            }
            visit(pos, s, g, alpha, t, dx, dy);
            t *= 1.0 - alpha;
            if t < MIN_TRANSMITTANCE {
                break;
            }
        }
    }

    fn forward(&self, with_depth: bool) -> (ImageBuffer, Option<DepthBuffer>) {
        let tiles: Vec<(Vec<f64>, Vec<f64>)> = (0..self.tiles_x * self.tiles_y)
            .into_par_iter()
            .map(|tile| {
                let (x0, y0, x1, y1) = self.tile_bounds(tile);
                let list = &self.tile_lists[tile];
                let mut rgb = Vec::with_capacity((x1 - x0) * (y1 - y0) * 3);
                let mut depth = Vec::new();
                for py in y0..y1 {
                    for px in x0..x1 {
                        let mut c = Vector3::zeros();
                        let mut d = 0.0;
                        let mut wsum = 0.0;
                        self.composite_pixel(list, px, py, |_, s, _, alpha, t, _, _| {
                            let w = t * alpha;
                            c += s.color * w;
                            d += w * s.depth;
                            wsum += w;
                        });
                        rgb.extend_from_slice(c.as_slice());
                        if with_depth {
                            depth.push(if wsum < DEPTH_WEIGHT_FLOOR { 0.0 } else { d / wsum });
                        }
                    }
                }
                (rgb, depth)
            })
            .collect();

        let mut image = ImageBuffer::new(self.width, self.height);
        let mut depth = with_depth.then(|| DepthBuffer {
            width: self.width,
            height: self.height,
            data: vec![0.0; self.width * self.height],
        });
        for (tile, (rgb, dep)) in tiles.iter().enumerate() {
            let (x0, y0, x1, y1) = self.tile_bounds(tile);
            let tw = x1 - x0;
            for py in y0..y1 {
                let row = (py - y0) * tw;
                let dst = (py * self.width + x0) * 3;
                image.data[dst..dst + tw * 3].copy_from_slice(&rgb[row * 3..(row + tw) * 3]);
                if let Some(depth) = depth.as_mut() {
                    let dst = py * self.width + x0;
                    depth.data[dst..dst + tw].copy_from_slice(&dep[row..row + tw]);
                }
            }
        }
        (image, depth)
    }
}

/// Renders `frame` through `camera`.
pub fn rasterize(frame: &GaussianFrame, camera: &Camera) -> Result<ImageBuffer> {
    Ok(prepare(frame, camera)?.forward(false).0)
}

/// Renders the image together with the alpha-weighted expected depth.
pub fn rasterize_with_depth(frame: &GaussianFrame, camera: &Camera) -> Result<(ImageBuffer, DepthBuffer)> {
    let (image, depth) = prepare(frame, camera)?.forward(true);
    Ok((image, depth.expect("depth requested")))
}

/// Hash of the discrete state of a render: which splats are culled, which
/// color channels are clamped, and the exact contribution list of every
/// pixel. Two parameter settings with equal fingerprints lie on the same
/// smooth piece of the (piecewise smooth) rendering function.
pub fn active_set_fingerprint(frame: &GaussianFrame, camera: &Camera) -> Result<u64> {
    let prep = prepare(frame, camera)?;
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for s in &prep.splats {
        s.index.hash(&mut h);
        s.color_live.hash(&mut h);
    }
    for tile in 0..prep.tiles_x * prep.tiles_y {
        let (x0, y0, x1, y1) = prep.tile_bounds(tile);
        for py in y0..y1 {
            for px in x0..x1 {
                prep.composite_pixel(&prep.tile_lists[tile], px, py, |_, s, _, _, _, _, _| {
                    s.index.hash(&mut h);
                });
                u32::MAX.hash(&mut h);
            }
        }
    }
    Ok(h.finish())
}

/// Screen-space partials accumulated for one splat.
#[derive(Debug, Clone, Copy, Default)]
struct SplatGrad {
    color: Vector3<f64>,
    opacity: f64,
    mean2d: Vector2<f64>,
    /// Gradient w.r.t. the full (symmetric) conic matrix.
    conic: Matrix2<f64>,
}

impl std::ops::AddAssign for SplatGrad {
    fn add_assign(&mut self, o: Self) {
        self.color += o.color;
        self.opacity += o.opacity;
        self.mean2d += o.mean2d;
        self.conic += o.conic;
    }
}

struct Contribution {
    pos: usize,
    g: f64,
    alpha: f64,
    t: f64,
    dx: f64,
    dy: f64,
}

/// Analytic gradient of `Σ d_loss_d_image · rasterize(frame, camera)` with
/// respect to every Gaussian parameter.
pub fn rasterize_backward(frame: &GaussianFrame, camera: &Camera, d_loss_d_image: &ImageBuffer) -> Result<RenderGradients> {
    let prep = prepare(frame, camera)?;
    if d_loss_d_image.width != prep.width || d_loss_d_image.height != prep.height {
        return Err(Error::invalid(format!(
            "gradient image is {}x{}, render is {}x{}",
            d_loss_d_image.width, d_loss_d_image.height, prep.width, prep.height
        )));
    }
    if !d_loss_d_image.data.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("gradient image contains non-finite values"));
    }

    let per_tile: Vec<Vec<SplatGrad>> = (0..prep.tiles_x * prep.tiles_y)
        .into_par_iter()
        .map(|tile| {
            let list = &prep.tile_lists[tile];
            let mut acc = vec![SplatGrad::default(); list.len()];
            if list.is_empty() {
                return acc;
            }
            let (x0, y0, x1, y1) = prep.tile_bounds(tile);
            let mut contribs: Vec<Contribution> = Vec::new();
            for py in y0..y1 {
                for px in x0..x1 {
                    let o = (py * prep.width + px) * 3;
                    let dl = Vector3::new(d_loss_d_image.data[o], d_loss_d_image.data[o + 1], d_loss_d_image.data[o + 2]);
                    if dl == Vector3::zeros() {
                        continue;
                    }
                    contribs.clear();
                    prep.composite_pixel(list, px, py, |pos, _, g, alpha, t, dx, dy| {
                        contribs.push(Contribution { pos, g, alpha, t, dx, dy });
                    });
                    // colour composited behind the current splat, normalized by its transmittance
                    let mut behind = Vector3::zeros();
                    for c in contribs.iter().rev() {
                        let s = &prep.splats[list[c.pos] as usize];
                        let grad = &mut acc[c.pos];
                        grad.color += dl * (c.t * c.alpha);
                        let d_alpha = c.t * (s.color - behind).dot(&dl);
                        behind = s.color * c.alpha + behind * (1.0 - c.alpha);

                        grad.opacity += d_alpha * c.g;
                        let d_power = d_alpha * s.opacity * c.g;
                        let a = &s.conic;
                        grad.mean2d += Vector2::new(a[(0, 0)] * c.dx + a[(0, 1)] * c.dy, a[(1, 0)] * c.dx + a[(1, 1)] * c.dy) * d_power;
                        grad.conic += Matrix2::new(c.dx * c.dx, c.dx * c.dy, c.dx * c.dy, c.dy * c.dy) * (-0.5 * d_power);
                    }
                }
            }
            acc
        })
        .collect();

    let mut splat_grads = vec![SplatGrad::default(); prep.splats.len()];
    for (tile, acc) in per_tile.into_iter().enumerate() {
        for (pos, g) in acc.into_iter().enumerate() {
            splat_grads[prep.tile_lists[tile][pos] as usize] += g;
        }
    }

    let mut out = RenderGradients::zeros_like(frame);
    let intr = &camera.intrinsics;
    let w_rot = camera.pose.rotation;
    let degree = frame.sh_degree;
    let n_coeffs = sh::coeff_count(degree);
    let mut basis = [0.0; 16];
    let mut basis_grad = [Vector3::zeros(); 16];
    for (s, sg) in prep.splats.iter().zip(&splat_grads) {
        let g = &frame.gaussians[s.index];
        let dst = &mut out.gaussians[s.index];

        // colour: clamp, then spherical harmonics
        let d_raw = Vector3::from_fn(|c, _| if s.color_live[c] { sg.color[c] } else { 0.0 });
        sh::basis(degree, &s.view_dir, &mut basis);
        sh::basis_gradient(degree, &s.view_dir, &mut basis_grad);
        let mut d_dir = Vector3::zeros();
        for m in 0..n_coeffs {
            dst.sh[m] += d_raw * basis[m];
            d_dir += basis_grad[m] * g.sh[m].dot(&d_raw);
        }
        let d_offset = (d_dir - s.view_dir * s.view_dir.dot(&d_dir)) / s.view_dist;
        let mut d_mean = d_offset;

        // opacity
        dst.opacity_logit += sg.opacity * s.opacity * (1.0 - s.opacity);

        // conic = cov2d⁻¹  ⇒  dL/dcov2d = −A·dL/dA·A
        let a = &s.conic;
        let d_cov2 = -(a * sg.conic * a);
        let d_cov2 = (d_cov2 + d_cov2.transpose()) * 0.5;
        let j = &s.jacobian;
        let d_cov_cam = j.transpose() * d_cov2 * j;
        let d_jac = d_cov2 * j * s.cov_cam * 2.0;
        let d_cov3 = w_rot.transpose() * d_cov_cam * w_rot;

        let rot = quat_to_rotation(&g.rotation);
        let scale = g.scale();
        let m = rot * Matrix3::from_diagonal(&scale);
        let d_m = d_cov3 * m * 2.0;
        let d_rot = d_m * Matrix3::from_diagonal(&scale);
        for i in 0..3 {
            let d_s = (0..3).map(|r| d_m[(r, i)] * rot[(r, i)]).sum::<f64>();
            dst.log_scale[i] += d_s * scale[i];
        }
        dst.rotation += quat_to_rotation_backward(&g.rotation, &d_rot);

        // projection: mean2d and Jacobian both depend on the camera-space position
        let (x, y, z) = (s.x_cam.x, s.x_cam.y, s.x_cam.z);
        let iz2 = 1.0 / (z * z);
        let iz3 = iz2 / z;
        let mut d_xcam = j.transpose() * sg.mean2d;
        d_xcam.x += d_jac[(0, 2)] * (-intr.fx * iz2);
        d_xcam.y += d_jac[(1, 2)] * (-intr.fy * iz2);
        d_xcam.z += d_jac[(0, 0)] * (-intr.fx * iz2)
            + d_jac[(0, 2)] * (2.0 * intr.fx * x * iz3)
            + d_jac[(1, 1)] * (-intr.fy * iz2)
            + d_jac[(1, 2)] * (2.0 * intr.fy * y * iz3);
        d_mean += w_rot.transpose() * d_xcam;
        dst.mean += d_mean;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Gaussian;
    use crate::geometry::{CameraIntrinsics, CameraPose};
    use nalgebra::Vector4;

    fn camera(w: u32, h: u32) -> Camera {
        let intr = CameraIntrinsics::new(50.0, 50.0, (w / 2) as f64, (h / 2) as f64, w, h).unwrap();
        Camera::new("cam_000", intr, CameraPose::identity())
    }

    /// A splat large enough that its kernel is ~1 over the centre pixel.
    fn blob(mean: Vector3<f64>, opacity_logit: f64, rgb: Vector3<f64>, log_scale: f64) -> Gaussian {
        Gaussian {
            mean,
            rotation: Vector4::new(1.0, 0.0, 0.0, 0.0),
            log_scale: Vector3::repeat(log_scale),
            opacity_logit,
            sh: vec![sh::dc_from_rgb(&rgb)],
        }
    }

    #[test]
    fn everything_behind_camera_renders_black() {
        let f = GaussianFrame::new(0, 0, vec![blob(Vector3::new(0.0, 0.0, -2.0), 2.0, Vector3::repeat(0.5), -1.0)]).unwrap();
        let img = rasterize(&f, &camera(32, 32)).unwrap();
        assert!(img.data.iter().all(|&v| v == 0.0));
        let (_, depth) = rasterize_with_depth(&f, &camera(32, 32)).unwrap();
        assert!(depth.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_splat_centre_pixel() {
        let c = Vector3::new(0.2, 0.6, 0.9);
        let logit = crate::geometry::logit(0.999);
        let f = GaussianFrame::new(0, 0, vec![blob(Vector3::new(0.0, 0.0, 5.0), logit, c, -1.0)]).unwrap();
        let (img, depth) = rasterize_with_depth(&f, &camera(32, 32)).unwrap();
        let p = img.pixel(16, 16);
        for ch in 0..3 {
            assert!((p[ch] - 0.999 * c[ch]).abs() < 1e-9, "{p:?}");
        }
        assert!((depth.at(16, 16) - 5.0).abs() < 1e-6);
        assert_eq!(depth.at(0, 0), 0.0);
    }

    #[test]
    fn two_coincident_splats_composite() {
        let front = blob(Vector3::new(0.0, 0.0, 2.0), 0.0, Vector3::new(1.0, 0.0, 0.0), 0.0);
        let back = blob(Vector3::new(0.0, 0.0, 4.0), 40.0, Vector3::new(0.0, 1.0, 0.0), 0.0);
        // back listed first: ordering must come from depth, not index
        let f = GaussianFrame::new(0, 0, vec![back, front]).unwrap();
        let (img, depth) = rasterize_with_depth(&f, &camera(32, 32)).unwrap();
        let p = img.pixel(16, 16);
        assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9 && p[2].abs() < 1e-12, "{p:?}");
        assert!((depth.at(16, 16) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero() {
        let f = GaussianFrame::new(0, 0, vec![blob(Vector3::new(0.1, 0.0, 3.0), 0.3, Vector3::repeat(0.4), -2.0)]).unwrap();
        let cam = camera(32, 32);
        let g = rasterize_backward(&f, &cam, &ImageBuffer::new(32, 32)).unwrap();
        assert!(g.is_zero());
        assert!(rasterize_backward(&f, &cam, &ImageBuffer::new(16, 32)).is_err());
    }

    #[test]
    fn occluded_splat_gets_no_gradient() {
        let front = blob(Vector3::new(0.0, 0.0, 2.0), 40.0, Vector3::new(1.0, 0.0, 0.0), 5.0);
        let back = blob(Vector3::new(0.0, 0.0, 4.0), 0.0, Vector3::new(0.0, 1.0, 0.0), -1.5);
        let f = GaussianFrame::new(0, 0, vec![front, back]).unwrap();
        let cam = camera(16, 16);
        let g = rasterize_backward(&f, &cam, &ImageBuffer::filled(16, 16, [1.0, -0.5, 0.25])).unwrap();
        assert!(g.gaussians[1].to_owned() == Gaussian::zeros(0));
        assert!(!g.gaussians[0].sh[0].iter().all(|&v| v == 0.0));
    }
}
