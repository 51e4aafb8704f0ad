//! Per-time-step training objective: photometric + structural image loss
//! summed over views, plus a small regularizer on scales, opacities and
//! appearance coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianFrame, RenderGradients};
use crate::geometry::{sigmoid, Camera};
use crate::metrics;
use crate::render::{rasterize, rasterize_backward, ImageBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Photometric {
    L1,
    Charbonnier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub photometric: Photometric,
    pub charbonnier_eps: f64,
    pub ssim_weight: f64,
    pub lambda_reg: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            photometric: Photometric::Charbonnier,
            charbonnier_eps: 1e-3,
            ssim_weight: 0.2,
            lambda_reg: 1e-6,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.ssim_weight) || !ok(self.lambda_reg) {
            return Err(Error::invalid("loss weights must be finite and non-negative"));
        }
        if !(self.charbonnier_eps > 0.0 && self.charbonnier_eps.is_finite()) {
            return Err(Error::invalid("charbonnier_eps must be positive"));
        }
        Ok(())
    }
}

/// Image loss and its gradient with respect to `pred`.
pub fn photometric_loss(pred: &ImageBuffer, gt: &ImageBuffer, cfg: &LossConfig) -> Result<(f64, ImageBuffer)> {
    if !pred.same_shape(gt) || pred.data.len() != gt.data.len() {
        return Err(Error::invalid(format!(
            "prediction is {}x{}, target is {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let n = pred.data.len() as f64;
    let mut grad = ImageBuffer::new(pred.width, pred.height);
    let mut loss = 0.0;
    match cfg.photometric {
        Photometric::L1 => {
            for ((g, p), t) in grad.data.iter_mut().zip(&pred.data).zip(&gt.data) {
                let r = p - t;
                loss += r.abs();
                *g = if r > 0.0 {
                    1.0 / n
                } else if r < 0.0 {
                    -1.0 / n
                } else {
                    0.0
                };
            }
        }
        Photometric::Charbonnier => {
            let e2 = cfg.charbonnier_eps * cfg.charbonnier_eps;
            for ((g, p), t) in grad.data.iter_mut().zip(&pred.data).zip(&gt.data) {
                let r = p - t;
                let v = (r * r + e2).sqrt();
                loss += v;
                *g = r / v / n;
            }
        }
    }
    loss /= n;
    if cfg.ssim_weight > 0.0 {
        let (s, ds) = metrics::ssim_with_grad(pred, gt)?;
        loss += cfg.ssim_weight * (1.0 - s);
        for (g, d) in grad.data.iter_mut().zip(&ds.data) {
            *g -= cfg.ssim_weight * d;
        }
    }
    Ok((loss, grad))
}

/// `λ·Σ_k (‖s_k‖² + α_k² + ‖b_k‖²)` on constrained values, with gradients
/// w.r.t. the unconstrained parameters.
pub fn regularizer(frame: &GaussianFrame, lambda_reg: f64) -> (f64, RenderGradients) {
    let mut grads = RenderGradients::zeros_like(frame);
    if lambda_reg == 0.0 {
        return (0.0, grads);
    }
    let mut total = 0.0;
    for (g, d) in frame.gaussians.iter().zip(grads.gaussians.iter_mut()) {
        let s = g.scale();
        let a = sigmoid(g.opacity_logit);
        total += s.norm_squared() + a * a + g.sh.iter().map(|b| b.norm_squared()).sum::<f64>();
        d.log_scale = s.component_mul(&s) * (2.0 * lambda_reg);
        d.opacity_logit = 2.0 * a * a * (1.0 - a) * lambda_reg;
        for (db, b) in d.sh.iter_mut().zip(&g.sh) {
            *db = b * (2.0 * lambda_reg);
        }
    }
    (lambda_reg * total, grads)
}

/// Photometric loss of a single view and its parameter gradient.
pub fn view_loss(frame: &GaussianFrame, camera: &Camera, gt: &ImageBuffer, cfg: &LossConfig) -> Result<(f64, RenderGradients)> {
    let pred = rasterize(frame, camera)?;
    let (loss, d_image) = photometric_loss(&pred, gt, cfg)?;
    let grads = rasterize_backward(frame, camera, &d_image)?;
    Ok((loss, grads))
}

/// Multi-view objective: `Σ_i L_img(render(frame, cam_i), gt_i) + λ·R(frame)`.
pub fn total_loss(
    frame: &GaussianFrame,
    cameras: &[Camera],
    gt_images: &[ImageBuffer],
    cfg: &LossConfig,
) -> Result<(f64, RenderGradients)> {
    if cameras.is_empty() {
        return Err(Error::invalid("objective needs at least one view"));
    }
    if cameras.len() != gt_images.len() {
        return Err(Error::invalid(format!(
            "{} cameras but {} target images",
            cameras.len(),
            gt_images.len()
        )));
    }
    let (mut loss, mut grads) = regularizer(frame, cfg.lambda_reg);
    let mut photometric = 0.0;
    for (cam, gt) in cameras.iter().zip(gt_images) {
        let (l, g) = view_loss(frame, cam, gt, cfg)?;
        photometric += l;
        grads.add_assign(&g);
    }
    loss += photometric;
    Ok((loss, grads))
}

/// Loss value only (no gradient), summed over views and regularizer.
pub fn total_loss_value(frame: &GaussianFrame, cameras: &[Camera], gt_images: &[ImageBuffer], cfg: &LossConfig) -> Result<f64> {
    if cameras.is_empty() || cameras.len() != gt_images.len() {
        return Err(Error::invalid("cameras and target images must be aligned and nonempty"));
    }
    let mut loss = regularizer(frame, cfg.lambda_reg).0;
    for (cam, gt) in cameras.iter().zip(gt_images) {
        loss += photometric_loss(&rasterize(frame, cam)?, gt, cfg)?.0;
    }
    Ok(loss)
}
