//! Fixed-budget training: point-cloud initialization, per-frame optimization
//! and forward/backward warm chains.

use std::num::NonZeroUsize;
use std::time::Instant;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{Vector3, Vector4};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{params_per_gaussian, Gaussian, GaussianFrame, ParamGroup, RenderGradients};
use crate::geometry::{logit, project, world_to_camera, Camera};
use crate::objective::{regularizer, total_loss_value, view_loss, LossConfig};
use crate::optim::{adam_step, AdamState};
use crate::render::ImageBuffer;
use crate::sh;

/// Smallest and largest isotropic scale, as fractions of the scene extent.
pub const MIN_SCALE_FRACTION: f64 = 1e-6;
pub const MAX_SCALE_FRACTION: f64 = 0.5;
const PAD_JITTER_FRACTION: f64 = 1e-3;
const GRAY: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub colors: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self { points, colors: None }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid(format!("point {i} is not finite")));
        }
        if let Some(c) = &self.colors {
            if c.len() != self.points.len() {
                return Err(Error::invalid("point colors do not match point count"));
            }
        }
        Ok(())
    }

    /// Radius of the bounding sphere centered on the axis-aligned bounding box.
    /// Degenerate clouds report 1.0 so that extent-relative settings stay usable.
    pub fn extent(&self) -> f64 {
        scene_extent(&self.points)
    }
}

pub fn scene_extent(points: &[Vector3<f64>]) -> f64 {
    let Some(first) = points.first() else {
        return 1.0;
    };
    let (mut lo, mut hi) = (*first, *first);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let c = (lo + hi) * 0.5;
    let r = points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    if r > 0.0 && r.is_finite() {
        r
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// Gaussian budget `K`.
    pub budget: usize,
    pub alpha0: f64,
    /// Neighbor rank used for the initial isotropic scale.
    pub scale_neighbor: usize,
    pub sh_degree: usize,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            budget: 100_000,
            alpha0: 0.1,
            scale_neighbor: 3,
            sh_degree: 3,
            seed: 0,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("Gaussian budget must be positive"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(Error::invalid("alpha0 must lie in (0, 1)"));
        }
        if self.scale_neighbor == 0 {
            return Err(Error::invalid("scale_neighbor must be positive"));
        }
        if self.sh_degree > sh::MAX_SH_DEGREE {
            return Err(Error::invalid(format!("SH degree must be at most {}", sh::MAX_SH_DEGREE)));
        }
        Ok(())
    }
}

/// Per-group learning rates. `mean` is multiplied by the scene extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    pub mean: f64,
    pub log_scale: f64,
    pub rotation: f64,
    pub opacity_logit: f64,
    pub sh: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            mean: 1.6e-4,
            log_scale: 5e-3,
            rotation: 1e-3,
            opacity_logit: 5e-2,
            sh: 2.5e-3,
        }
    }
}

impl LearningRates {
    pub fn for_group(&self, group: ParamGroup, extent: f64) -> f64 {
        match group {
            ParamGroup::Mean => self.mean * extent,
            ParamGroup::Rotation => self.rotation,
            ParamGroup::LogScale => self.log_scale,
            ParamGroup::OpacityLogit => self.opacity_logit,
            ParamGroup::Sh => self.sh,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.mean, self.log_scale, self.rotation, self.opacity_logit, self.sh];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("learning rates must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChainDirection {
    #[default]
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iters_init: usize,
    pub iters_warm: usize,
    /// Views rendered per optimizer step.
    pub views_per_step: usize,
    pub lr: LearningRates,
    pub loss: LossConfig,
    pub chain_direction: ChainDirection,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iters_init: 8000,
            iters_warm: 8000,
            views_per_step: 1,
            lr: LearningRates::default(),
            loss: LossConfig::default(),
            chain_direction: ChainDirection::Forward,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters_init == 0 || self.iters_warm == 0 {
            return Err(Error::invalid("iteration counts must be positive"));
        }
        if self.views_per_step == 0 {
            return Err(Error::invalid("views_per_step must be positive"));
        }
        self.lr.validate()?;
        self.loss.validate()
    }
}

/// Nearest-pixel color of `p` in every view that sees it in front of the camera.
fn observed_colors(p: &Vector3<f64>, images: &[ImageBuffer], cameras: &[Camera]) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for (img, cam) in images.iter().zip(cameras) {
        let x_cam = world_to_camera(&cam.pose, p);
        let Ok(uv) = project(&cam.intrinsics, &x_cam) else {
            continue;
        };
        let (u, v) = (uv.x.round(), uv.y.round());
        if u < 0.0 || v < 0.0 || u >= img.width as f64 || v >= img.height as f64 {
            continue;
        }
        out.push(img.pixel(u as usize, v as usize));
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Builds the `K`-Gaussian frame at the first time step from a point cloud.
pub fn init_from_points(
    cloud: &PointCloud,
    images: &[ImageBuffer],
    cameras: &[Camera],
    cfg: &InitConfig,
) -> Result<GaussianFrame> {
    cfg.validate()?;
    cloud.validate()?;
    if cloud.points.is_empty() {
        return Err(Error::invalid("point cloud is empty"));
    }
    if images.len() != cameras.len() {
        return Err(Error::invalid(format!("{} images but {} cameras", images.len(), cameras.len())));
    }
    let extent = cloud.extent();
    let k = cfg.budget;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let positions: Vec<Vector3<f64>> = if cloud.points.len() >= k {
        let mut idx: Vec<usize> = (0..cloud.points.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(k);
        idx.iter().map(|&i| cloud.points[i]).collect()
    } else {
        let jitter = Normal::new(0.0, PAD_JITTER_FRACTION * extent).expect("positive jitter");
        let mut pts = cloud.points.clone();
        while pts.len() < k {
            let base = *cloud.points.choose(&mut rng).expect("nonempty cloud");
            pts.push(base + Vector3::from_fn(|_, _| jitter.sample(&mut rng)));
        }
        pts
    };

    let (min_s, max_s) = (MIN_SCALE_FRACTION * extent, MAX_SCALE_FRACTION * extent);
    let coords: Vec<[f64; 3]> = positions.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&coords);
    let want = NonZeroUsize::new(cfg.scale_neighbor + 1).expect("nonzero");

    let n = sh::coeff_count(cfg.sh_degree);
    let gaussians = positions
        .iter()
        .zip(&coords)
        .map(|(p, q)| {
            let nn = tree.nearest_n::<SquaredEuclidean>(q, want);
            let s0 = if nn.len() > cfg.scale_neighbor {
                nn[cfg.scale_neighbor].distance.sqrt()
            } else {
                nn.last().map(|n| n.distance.sqrt()).unwrap_or(0.0)
            };
            let s0 = if s0 > 0.0 { s0.clamp(min_s, max_s) } else { min_s };

            let obs = observed_colors(p, images, cameras);
            let rgb = if obs.is_empty() {
                Vector3::repeat(GRAY)
            } else {
                Vector3::from_fn(|c, _| median(&mut obs.iter().map(|o| o[c]).collect::<Vec<_>>()))
            };

            let mut shc = vec![Vector3::zeros(); n];
            shc[0] = sh::dc_from_rgb(&rgb);
            Gaussian {
                mean: *p,
                rotation: Vector4::new(1.0, 0.0, 0.0, 0.0),
                log_scale: Vector3::repeat(s0.ln()),
                opacity_logit: logit(cfg.alpha0),
                sh: shc,
            }
        })
        .collect();
    GaussianFrame::new(0, cfg.sh_degree, gaussians)
}

/// Bookkeeping for one optimized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub t: i64,
    pub steps: usize,
    /// Full multi-view objective before the first and after the last step.
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Per-step estimate of the full objective from the sampled views.
    pub step_losses: Vec<f64>,
    pub seconds: f64,
}

/// Optimizer settings derived from a frame: per-element learning rates and
/// log-scale bounds.
pub struct FrameOptimizer {
    lrs: Vec<f64>,
    log_scale_bounds: (f64, f64),
}

impl FrameOptimizer {
    pub fn new(frame: &GaussianFrame, cfg: &TrainConfig, extent: f64) -> Self {
        let lrs = frame.flat_groups().into_iter().map(|g| cfg.lr.for_group(g, extent)).collect();
        Self {
            lrs,
            log_scale_bounds: ((MIN_SCALE_FRACTION * extent).ln(), (MAX_SCALE_FRACTION * extent).ln()),
        }
    }
}

fn check_finite(loss: f64, grads: &RenderGradients, t: i64, step: usize) -> Result<()> {
    if let Some(g) = grads.non_finite_group() {
        return Err(Error::NonFinite {
            frame: t,
            step,
            group: g.name().to_string(),
        });
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            frame: t,
            step,
            group: "loss".to_string(),
        });
    }
    Ok(())
}

/// Runs exactly `steps` Adam updates on the multi-view objective with
/// per-epoch shuffled view sampling. The Gaussian count never changes.
pub fn optimize_frame(
    init: &GaussianFrame,
    images: &[ImageBuffer],
    cameras: &[Camera],
    cfg: &TrainConfig,
    steps: usize,
    extent: f64,
) -> Result<(GaussianFrame, FrameReport)> {
    optimize_frame_partial(init, 0, images, cameras, cfg, steps, extent)
}

/// Like [`optimize_frame`], but the first `frozen` Gaussians keep their
/// parameters bit-exactly while still being rendered.
pub fn optimize_frame_partial(
    init: &GaussianFrame,
    frozen: usize,
    images: &[ImageBuffer],
    cameras: &[Camera],
    cfg: &TrainConfig,
    steps: usize,
    extent: f64,
) -> Result<(GaussianFrame, FrameReport)> {
    cfg.validate()?;
    if frozen > init.len() {
        return Err(Error::invalid(format!("cannot freeze {frozen} of {} Gaussians", init.len())));
    }
    let started = Instant::now();
    let t = init.t;
    let initial_loss = total_loss_value(init, cameras, images, &cfg.loss)?;
    if !initial_loss.is_finite() {
        return Err(Error::NonFinite {
            frame: t,
            step: 0,
            group: "loss".to_string(),
        });
    }
    let mut frame = init.clone();
    let mut opt = FrameOptimizer::new(&frame, cfg, extent);
    let frozen_len = frozen * params_per_gaussian(frame.sh_degree);
    opt.lrs[..frozen_len].iter_mut().for_each(|v| *v = 0.0);
    let frozen_params = frame.gaussians[..frozen].to_vec();
    let mut state = AdamState::new(opt.lrs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = Vec::new();
    let mut step_losses = Vec::with_capacity(steps);
    let per_step = cfg.views_per_step.min(cameras.len());
    // Sampled views stand in for the full view sum, so the regularizer keeps
    // its weight relative to the multi-view objective.
    let view_weight = cameras.len() as f64 / per_step as f64;

    for step in 0..steps {
        let (mut loss, mut grads) = regularizer(&frame, cfg.loss.lambda_reg);
        for _ in 0..per_step {
            if order.is_empty() {
                order = (0..cameras.len()).collect();
                order.shuffle(&mut rng);
            }
            let v = order.pop().expect("refilled above");
            let (l, g) = view_loss(&frame, &cameras[v], &images[v], &cfg.loss)?;
            loss += view_weight * l;
            grads.add_scaled(&g, view_weight);
        }
        check_finite(loss, &grads, t, step)?;
        step_losses.push(loss);
        let mut params = frame.to_flat();
        adam_step(&mut params, &grads.to_flat(), &mut state, &opt.lrs);
        frame.set_from_flat(&params);
        frame.normalize_rotations();
        frame.clamp_log_scales(opt.log_scale_bounds.0, opt.log_scale_bounds.1);
        frame.gaussians[..frozen].clone_from_slice(&frozen_params);
        if !frame.is_finite() {
            let bad = frame.to_flat().iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(Error::NonFinite {
                frame: t,
                step,
                group: frame.flat_groups()[bad].name().to_string(),
            });
        }
    }
    let final_loss = if steps == 0 {
        initial_loss
    } else {
        total_loss_value(&frame, cameras, images, &cfg.loss)?
    };
    let report = FrameReport {
        t,
        steps,
        initial_loss,
        final_loss,
        step_losses,
        seconds: started.elapsed().as_secs_f64(),
    };
    Ok((frame, report))
}

/// Multi-view observations of one time step.
#[derive(Debug, Clone)]
pub struct TimeStepViews {
    pub t: i64,
    pub cameras: Vec<Camera>,
    pub images: Vec<ImageBuffer>,
}

fn same_rig(a: &[Camera], b: &[Camera]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.name == y.name && x.intrinsics == y.intrinsics && x.pose.rotation == y.pose.rotation && x.pose.translation == y.pose.translation
        })
}

/// Order in which time steps are visited for a chain direction.
pub fn chain_order(len: usize, direction: ChainDirection) -> Vec<usize> {
    match direction {
        ChainDirection::Forward => (0..len).collect(),
        ChainDirection::Backward => (0..len).rev().collect(),
    }
}

/// Trains every time step in chain order. The first visited step starts from
/// the point cloud; each later step starts from its neighbor's converged
/// parameters with a fresh optimizer. Each finished frame is rounded to
/// storage precision and handed to `sink` before the next step starts.
pub fn warm_chain(
    steps: &[TimeStepViews],
    cfg: &TrainConfig,
    init_cfg: &InitConfig,
    cloud: &PointCloud,
    mut sink: impl FnMut(&GaussianFrame, &FrameReport) -> Result<()>,
) -> Result<()> {
    cfg.validate()?;
    let Some(first) = steps.first() else {
        return Err(Error::invalid("dataset has no time steps"));
    };
    for s in steps {
        if !same_rig(&s.cameras, &first.cameras) {
            return Err(Error::invalid(format!("camera set at t={} differs from t={}", s.t, first.t)));
        }
        if s.images.len() != s.cameras.len() {
            return Err(Error::invalid(format!("t={} has {} images for {} cameras", s.t, s.images.len(), s.cameras.len())));
        }
    }
    let extent = cloud.extent();
    let order = chain_order(steps.len(), cfg.chain_direction);
    let mut prev: Option<GaussianFrame> = None;
    for (n, &i) in order.iter().enumerate() {
        let s = &steps[i];
        let (mut init, iters) = match prev.take() {
            None => (init_from_points(cloud, &s.images, &s.cameras, init_cfg)?, cfg.iters_init),
            Some(f) => (f, cfg.iters_warm),
        };
        init.t = s.t;
        if n == 0 {
            init.round_to_f32();
        }
        let (mut frame, report) = optimize_frame(&init, &s.images, &s.cameras, cfg, iters, extent)?;
        frame.round_to_f32();
        sink(&frame, &report)?;
        prev = Some(frame);
    }
    Ok(())
}
