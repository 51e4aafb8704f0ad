//! Procedural Gaussian-native ground truth: a static backdrop cluster plus
//! rigid clusters moving on horizontal circles.

use nalgebra::{Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, GaussianFrame};
use crate::geometry::logit;
use crate::sh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    pub sh_degree: usize,
    /// Gaussians in the static backdrop.
    pub static_count: usize,
    pub static_radius: f64,
    pub clusters: usize,
    pub cluster_size: usize,
    pub cluster_radius: f64,
    /// Radius of the circles the cluster centers travel on.
    pub orbit_radius: f64,
    pub orbit_height: f64,
    /// Distance a cluster center moves between adjacent time steps.
    pub max_step: f64,
    pub scale_range: [f64; 2],
    pub opacity_range: [f64; 2],
    /// Magnitude of the random higher-order SH coefficients.
    pub view_dependence: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sh_degree: 1,
            static_count: 400,
            static_radius: 0.8,
            clusters: 2,
            cluster_size: 50,
            cluster_radius: 0.2,
            orbit_radius: 0.9,
            orbit_height: 0.3,
            max_step: 0.03,
            scale_range: [0.04, 0.12],
            opacity_range: [0.6, 0.95],
            view_dependence: 0.05,
        }
    }
}

impl SceneConfig {
    pub fn budget(&self) -> usize {
        self.static_count + self.clusters * self.cluster_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.sh_degree > sh::MAX_SH_DEGREE {
            return Err(Error::invalid(format!("SH degree must be at most {}", sh::MAX_SH_DEGREE)));
        }
        if self.budget() == 0 {
            return Err(Error::invalid("scene has no Gaussians"));
        }
        let pos = [self.static_radius, self.cluster_radius, self.orbit_radius];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("scene radii must be positive"));
        }
        if !(self.max_step >= 0.0 && self.max_step <= 2.0 * self.orbit_radius) {
            return Err(Error::invalid("max_step must lie in [0, 2 * orbit_radius]"));
        }
        let [s0, s1] = self.scale_range;
        if !(s0 > 0.0 && s0 <= s1 && s1.is_finite()) {
            return Err(Error::invalid("scale_range must be positive and ordered"));
        }
        let [a0, a1] = self.opacity_range;
        if !(a0 > 0.0 && a0 <= a1 && a1 < 1.0) {
            return Err(Error::invalid("opacity_range must be ordered within (0, 1)"));
        }
        if !(self.view_dependence >= 0.0 && self.view_dependence.is_finite()) {
            return Err(Error::invalid("view_dependence must be non-negative"));
        }
        Ok(())
    }
}

/// Time-parameterized ground truth. Static Gaussians come first; every
/// dynamic Gaussian keeps its index for all time steps.
#[derive(Debug, Clone)]
pub struct GroundTruthScene {
    pub config: SceneConfig,
    /// Gaussians at rest; dynamic members are stored relative to their cluster center.
    base: Vec<Gaussian>,
    cluster_of: Vec<Option<usize>>,
    phases: Vec<f64>,
    heights: Vec<f64>,
    angular_step: f64,
}

fn uniform_in_ball(rng: &mut impl Rng, radius: f64) -> Vector3<f64> {
    loop {
        let p = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if p.norm_squared() <= 1.0 {
            return p * radius;
        }
    }
}

fn random_gaussian(rng: &mut impl Rng, cfg: &SceneConfig, mean: Vector3<f64>) -> Gaussian {
    let mut g = Gaussian::zeros(cfg.sh_degree);
    g.mean = mean;
    g.rotation = Vector4::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let n = g.rotation.norm();
    g.rotation = if n > 1e-6 { g.rotation / n } else { Vector4::new(1.0, 0.0, 0.0, 0.0) };
    let [s0, s1] = cfg.scale_range;
    g.log_scale = Vector3::from_fn(|_, _| rng.random_range(s0.ln()..=s1.ln()));
    let [a0, a1] = cfg.opacity_range;
    g.opacity_logit = logit(rng.random_range(a0..=a1));
    let rgb = Vector3::from_fn(|_, _| rng.random_range(0.1..0.9));
    g.sh[0] = sh::dc_from_rgb(&rgb);
    let v = cfg.view_dependence;
    for b in g.sh.iter_mut().skip(1) {
        *b = Vector3::from_fn(|_, _| if v > 0.0 { rng.random_range(-v..=v) } else { 0.0 });
    }
    g
}

impl GroundTruthScene {
    pub fn new(config: SceneConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut base = Vec::with_capacity(config.budget());
        let mut cluster_of = Vec::with_capacity(config.budget());
        for _ in 0..config.static_count {
            let p = uniform_in_ball(&mut rng, config.static_radius);
            base.push(random_gaussian(&mut rng, &config, p));
            cluster_of.push(None);
        }
        let mut phases = Vec::new();
        let mut heights = Vec::new();
        for c in 0..config.clusters {
            phases.push(2.0 * std::f64::consts::PI * c as f64 / config.clusters as f64 + rng.random_range(0.0..0.5));
            heights.push(config.orbit_height + rng.random_range(-0.1..0.1));
            for _ in 0..config.cluster_size {
                let p = uniform_in_ball(&mut rng, config.cluster_radius);
                base.push(random_gaussian(&mut rng, &config, p));
                cluster_of.push(Some(c));
            }
        }
        // A chord of length max_step on the orbit circle.
        let angular_step = 2.0 * (config.max_step / (2.0 * config.orbit_radius)).asin();
        Ok(Self {
            config,
            base,
            cluster_of,
            phases,
            heights,
            angular_step,
        })
    }

    pub fn budget(&self) -> usize {
        self.base.len()
    }

    /// `true` for Gaussians that belong to a moving cluster.
    pub fn dynamic_labels(&self) -> Vec<bool> {
        self.cluster_of.iter().map(Option::is_some).collect()
    }

    pub fn cluster_center(&self, cluster: usize, t: i64) -> Vector3<f64> {
        let a = self.phases[cluster] + self.angular_step * t as f64;
        let r = self.config.orbit_radius;
        Vector3::new(r * a.cos(), r * a.sin(), self.heights[cluster])
    }

    /// Ground-truth frame at time `t`, rounded to storage precision.
    pub fn frame(&self, t: i64) -> GaussianFrame {
        let gaussians = self
            .base
            .iter()
            .zip(&self.cluster_of)
            .map(|(g, c)| {
                let mut g = g.clone();
                if let Some(c) = c {
                    g.mean += self.cluster_center(*c, t);
                }
                g
            })
            .collect();
        let mut f = GaussianFrame {
            t,
            sh_degree: self.config.sh_degree,
            gaussians,
        };
        f.round_to_f32();
        f
    }

    /// Static-only frame: the backdrop Gaussians without any cluster.
    pub fn static_frame(&self) -> GaussianFrame {
        let mut f = self.frame(0);
        let keep = self.dynamic_labels();
        f.gaussians = f.gaussians.into_iter().zip(keep).filter(|(_, d)| !d).map(|(g, _)| g).collect();
        f
    }
}
