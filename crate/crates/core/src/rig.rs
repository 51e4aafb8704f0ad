//! Synthetic capture rigs and deterministic train/val/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{look_at, Camera, CameraIntrinsics};

/// Scene up direction used by every generated camera.
pub fn world_up() -> Vector3<f64> {
    Vector3::z()
}

pub fn camera_name(index: usize) -> String {
    format!("cam_{index:03}")
}

/// Numeric suffix of a camera name such as `cam_017`.
pub fn camera_index(name: &str) -> Option<usize> {
    let digits: String = name.chars().rev().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    digits.chars().rev().collect::<String>().parse().ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RigLayout {
    Hemisphere {
        count: usize,
        radius: f64,
    },
    Sphere {
        count: usize,
        radius: f64,
    },
    EllipseRing {
        count: usize,
        semi_x: f64,
        semi_y: f64,
        height: f64,
    },
    Stadium {
        field_length: f64,
        field_width: f64,
        ring_count: usize,
        #[serde(default = "default_margin")]
        ring_margin: f64,
        #[serde(default = "default_stand_height")]
        stand_height: f64,
        #[serde(default)]
        tile_rows: usize,
        #[serde(default)]
        tile_cols: usize,
        #[serde(default = "default_tile_height")]
        tile_height: f64,
        #[serde(default)]
        goal_line: bool,
    },
}

fn default_margin() -> f64 {
    5.0
}

fn default_stand_height() -> f64 {
    10.0
}

fn default_tile_height() -> f64 {
    25.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigSpec {
    pub layout: RigLayout,
    #[serde(default)]
    pub target: [f64; 3],
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view in degrees.
    pub fov_x_deg: f64,
}

impl RigSpec {
    pub fn target(&self) -> Vector3<f64> {
        Vector3::from(self.target)
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::from_fov(self.fov_x_deg.to_radians(), self.width, self.height)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {v}")))
            }
        };
        let count_ok = |n: usize| {
            if n >= 2 {
                Ok(())
            } else {
                Err(Error::invalid(format!("rig needs at least 2 cameras, got {n}")))
            }
        };
        if !self.target.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("rig target must be finite"));
        }
        match &self.layout {
            RigLayout::Hemisphere { count, radius } | RigLayout::Sphere { count, radius } => {
                count_ok(*count)?;
                pos(*radius, "radius")?;
            }
            RigLayout::EllipseRing {
                count,
                semi_x,
                semi_y,
                height,
            } => {
                count_ok(*count)?;
                pos(*semi_x, "semi_x")?;
                pos(*semi_y, "semi_y")?;
                if !height.is_finite() {
                    return Err(Error::invalid("ring height must be finite"));
                }
            }
            RigLayout::Stadium {
                field_length,
                field_width,
                ring_count,
                ring_margin,
                stand_height,
                tile_rows,
                tile_cols,
                tile_height,
                goal_line,
            } => {
                pos(*field_length, "field_length")?;
                pos(*field_width, "field_width")?;
                pos(*stand_height, "stand_height")?;
                pos(*tile_height, "tile_height")?;
                if !(*ring_margin >= 0.0 && ring_margin.is_finite()) {
                    return Err(Error::invalid("ring_margin must be non-negative"));
                }
                count_ok(ring_count + tile_rows * tile_cols + if *goal_line { 2 } else { 0 })?;
            }
        }
        self.intrinsics().map(|_| ())
    }
}

/// Unit directions on a Fibonacci spiral; `upper` restricts them to z > 0.
pub fn fibonacci_directions(count: usize, upper: bool) -> Vec<Vector3<f64>> {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let f = (i as f64 + 0.5) / count as f64;
            let z = if upper { 1.0 - f } else { 1.0 - 2.0 * f };
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = i as f64 * golden_angle;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Camera centers and their look-at points for a layout.
fn placements(spec: &RigSpec) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let c = spec.target();
    match &spec.layout {
        RigLayout::Hemisphere { count, radius } => fibonacci_directions(*count, true)
            .into_iter()
            .map(|d| (c + d * *radius, c))
            .collect(),
        RigLayout::Sphere { count, radius } => fibonacci_directions(*count, false)
            .into_iter()
            .map(|d| (c + d * *radius, c))
            .collect(),
        RigLayout::EllipseRing {
            count,
            semi_x,
            semi_y,
            height,
        } => (0..*count)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / *count as f64;
                (c + Vector3::new(semi_x * a.cos(), semi_y * a.sin(), *height), c)
            })
            .collect(),
        RigLayout::Stadium {
            field_length,
            field_width,
            ring_count,
            ring_margin,
            stand_height,
            tile_rows,
            tile_cols,
            tile_height,
            goal_line,
        } => {
            let (hl, hw) = (field_length / 2.0, field_width / 2.0);
            let mut out = Vec::new();
            for i in 0..*ring_count {
                let a = 2.0 * PI * i as f64 / *ring_count as f64;
                let eye = c + Vector3::new((hl + ring_margin) * a.cos(), (hw + ring_margin) * a.sin(), *stand_height);
                out.push((eye, c));
            }
            for r in 0..*tile_rows {
                for k in 0..*tile_cols {
                    let x = -hl + field_length * (k as f64 + 0.5) / *tile_cols as f64;
                    let y = -hw + field_width * (r as f64 + 0.5) / *tile_rows as f64;
                    let ground = c + Vector3::new(x, y, 0.0);
                    out.push((ground + Vector3::new(0.0, 0.0, *tile_height), ground));
                }
            }
            if *goal_line {
                for sx in [-1.0, 1.0] {
                    let goal = c + Vector3::new(sx * hl, 0.0, 0.0);
                    out.push((c + Vector3::new(sx * hl, hw + ring_margin, *stand_height), goal));
                }
            }
            out
        }
    }
}

/// Cameras of a rig, named `cam_000`, `cam_001`, ... in placement order.
pub fn make_rig(spec: &RigSpec) -> Result<Vec<Camera>> {
    spec.validate()?;
    let intr = spec.intrinsics()?;
    placements(spec)
        .into_iter()
        .enumerate()
        .map(|(i, (eye, at))| Ok(Camera::new(camera_name(i), intr, look_at(&eye, &at, &world_up())?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::invalid(format!("unknown split {s:?}"))),
        }
    }
}

/// Split of every camera, keyed by name. The split depends only on the
/// numeric suffix of each name.
pub fn assign_splits(cameras: &[Camera], test_indices: &[usize], val_indices: &[usize]) -> Result<BTreeMap<String, Split>> {
    let test: BTreeSet<usize> = test_indices.iter().copied().collect();
    let val: BTreeSet<usize> = val_indices.iter().copied().collect();
    if let Some(i) = test.intersection(&val).next() {
        return Err(Error::invalid(format!("camera index {i} is in both test and val")));
    }
    let known: BTreeSet<usize> = cameras.iter().filter_map(|c| camera_index(&c.name)).collect();
    if let Some(i) = test.union(&val).find(|i| !known.contains(i)) {
        return Err(Error::invalid(format!("split index {i} matches no camera")));
    }
    Ok(cameras
        .iter()
        .map(|c| {
            let split = match camera_index(&c.name) {
                Some(i) if test.contains(&i) => Split::Test,
                Some(i) if val.contains(&i) => Split::Val,
                _ => Split::Train,
            };
            (c.name.clone(), split)
        })
        .collect())
}

pub fn split_counts(splits: &BTreeMap<String, Split>) -> [usize; 3] {
    let mut n = [0; 3];
    for s in splits.values() {
        n[*s as usize] += 1;
    }
    n
}
