//! Static/dynamic training pipeline.
//!
//! The static model A is fitted once to static-only imagery. The dynamic
//! model B is then chained over time with A rendered alongside it but held
//! fixed, so B only has to explain what A cannot. Each B frame is voted
//! against residual masks and the survivors are merged with A.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianFrame;
use crate::render::{rasterize, ImageBuffer};
use crate::scene_split::{aabb_filter, build_residual_mask, merge_ab, multi_view_vote, vote_points, ResidualMask, VoteConfig};
use crate::trainer::{chain_order, init_from_points, optimize_frame, optimize_frame_partial, InitConfig, PointCloud, TimeStepViews, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbConfig {
    pub static_budget: usize,
    pub dynamic_budget: usize,
    /// Optimizer steps for the static component.
    pub iters_static: usize,
    pub vote: VoteConfig,
}

impl Default for AbConfig {
    fn default() -> Self {
        Self {
            static_budget: 400,
            dynamic_budget: 100,
            iters_static: 2000,
            vote: VoteConfig::default(),
        }
    }
}

impl AbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.static_budget == 0 || self.dynamic_budget == 0 || self.iters_static == 0 {
            return Err(Error::invalid("budgets and iters_static must be positive"));
        }
        self.vote.validate()
    }
}

#[derive(Debug, Clone)]
pub struct AbFrame {
    pub t: i64,
    /// Trained dynamic model, `dynamic_budget` Gaussians.
    pub dynamic: GaussianFrame,
    pub masks: Vec<ResidualMask>,
    /// Indices into `dynamic` that survived voting and the box filter.
    pub retained: Vec<usize>,
    pub merged: GaussianFrame,
}

pub fn residual_masks(views: &TimeStepViews, static_renders: &[ImageBuffer], cfg: &VoteConfig) -> Result<Vec<ResidualMask>> {
    views
        .cameras
        .iter()
        .zip(&views.images)
        .zip(static_renders)
        .map(|((c, gt), a)| build_residual_mask(&c.name, gt, a, cfg))
        .collect()
}

/// Fits A to static-only images of the first time step's rig.
pub fn train_static(
    cloud: &PointCloud,
    background: &TimeStepViews,
    init_cfg: &InitConfig,
    train_cfg: &TrainConfig,
    ab: &AbConfig,
) -> Result<GaussianFrame> {
    ab.validate()?;
    let init = InitConfig {
        budget: ab.static_budget,
        ..init_cfg.clone()
    };
    let mut a = init_from_points(cloud, &background.images, &background.cameras, &init)?;
    a.round_to_f32();
    let (mut a, _) = optimize_frame(&a, &background.images, &background.cameras, train_cfg, ab.iters_static, cloud.extent())?;
    a.round_to_f32();
    Ok(a)
}

/// Runs the dynamic chain against a fixed static model and hands every
/// decomposed frame to `sink` in chain order.
pub fn decompose(
    steps: &[TimeStepViews],
    a: &GaussianFrame,
    cloud: &PointCloud,
    init_cfg: &InitConfig,
    train_cfg: &TrainConfig,
    ab: &AbConfig,
    mut sink: impl FnMut(&AbFrame) -> Result<()>,
) -> Result<()> {
    ab.validate()?;
    train_cfg.validate()?;
    let Some(first) = steps.first() else {
        return Err(Error::invalid("dataset has no time steps"));
    };
    if a.sh_degree != init_cfg.sh_degree {
        return Err(Error::invalid("static model and init config disagree on SH degree"));
    }
    let cams = &first.cameras;
    let a_renders: Vec<ImageBuffer> = cams.iter().map(|c| rasterize(a, c)).collect::<Result<_>>()?;
    let extent = cloud.extent();
    let order = chain_order(steps.len(), train_cfg.chain_direction);
    let mut prev: Option<GaussianFrame> = None;
    for &i in &order {
        let s = &steps[i];
        if s.cameras.len() != cams.len() || s.cameras.iter().zip(cams).any(|(x, y)| x.name != y.name) {
            return Err(Error::invalid(format!("camera set at t={} differs from the static model's rig", s.t)));
        }
        let masks = residual_masks(s, &a_renders, &ab.vote)?;
        let (b_init, iters) = match prev.take() {
            Some(b) => (b, train_cfg.iters_warm),
            None => {
                // Seed B from the cloud points that vote as dynamic.
                let picked = vote_points(&cloud.points, cams, &masks, ab.vote.quorum);
                let seed = if picked.is_empty() {
                    cloud.clone()
                } else {
                    PointCloud {
                        points: picked.iter().map(|&k| cloud.points[k]).collect(),
                        colors: cloud.colors.as_ref().map(|c| picked.iter().map(|&k| c[k]).collect()),
                    }
                };
                let init = InitConfig {
                    budget: ab.dynamic_budget,
                    ..init_cfg.clone()
                };
                let mut b = init_from_points(&seed, &s.images, cams, &init)?;
                b.round_to_f32();
                (b, train_cfg.iters_init)
            }
        };
        let mut joint = a.clone();
        joint.t = s.t;
        joint.gaussians.extend(b_init.gaussians);
        let (joint, _) = optimize_frame_partial(&joint, a.len(), &s.images, cams, train_cfg, iters, extent)?;
        let mut b = GaussianFrame::new(s.t, a.sh_degree, joint.gaussians[a.len()..].to_vec())?;
        b.round_to_f32();
        let mut retained = multi_view_vote(&b, cams, &masks, &ab.vote)?;
        if let Some(bbox) = &ab.vote.aabb {
            retained = aabb_filter(&retained, &b, bbox)?;
        }
        let merged = merge_ab(a, &b, &retained)?;
        sink(&AbFrame {
            t: s.t,
            dynamic: b.clone(),
            masks,
            retained,
            merged,
        })?;
        prev = Some(b);
    }
    Ok(())
}
