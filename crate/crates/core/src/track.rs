//! Virtual camera paths for rendering an archived time step from many views.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{look_at, Camera, CameraIntrinsics, CameraPose};
use crate::rig::world_up;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrackSpec {
    /// Equal angular steps on a horizontal circle around `target`.
    Orbit {
        #[serde(default)]
        target: [f64; 3],
        radius: f64,
        #[serde(default)]
        height: f64,
    },
    /// Straight segment from `from` to `to`, always looking at `target`.
    Lerp {
        from: [f64; 3],
        to: [f64; 3],
        #[serde(default)]
        target: [f64; 3],
    },
}

pub fn make_camera_track(spec: &TrackSpec, intrinsics: CameraIntrinsics, frame_count: usize) -> Result<Vec<Camera>> {
    if frame_count < 2 {
        return Err(Error::invalid("a camera track needs at least 2 frames"));
    }
    intrinsics.validate()?;
    let (eyes, target): (Vec<Vector3<f64>>, Vector3<f64>) = match spec {
        TrackSpec::Orbit { target, radius, height } => {
            if !(*radius > 0.0 && radius.is_finite()) {
                return Err(Error::invalid("orbit radius must be positive"));
            }
            let c = Vector3::from(*target);
            let eyes = (0..frame_count)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / frame_count as f64;
                    c + Vector3::new(radius * a.cos(), radius * a.sin(), *height)
                })
                .collect();
            (eyes, c)
        }
        TrackSpec::Lerp { from, to, target } => {
            let (a, b) = (Vector3::from(*from), Vector3::from(*to));
            let eyes = (0..frame_count)
                .map(|i| {
                    let s = i as f64 / (frame_count - 1) as f64;
                    a * (1.0 - s) + b * s
                })
                .collect();
            (eyes, Vector3::from(*target))
        }
    };
    eyes.iter()
        .enumerate()
        .map(|(i, eye)| Ok(Camera::new(format!("track_{i:03}"), intrinsics, look_at(eye, &target, &world_up())?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackFrame {
    index: usize,
    camera_name: String,
    width: u32,
    height: u32,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    /// Row-major OpenCV world-to-camera matrix.
    world_to_camera: [[f64; 4]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackFile {
    convention: String,
    frames: Vec<TrackFrame>,
}

const CONVENTION: &str = "opencv_world_to_camera";

pub fn track_to_json(cameras: &[Camera]) -> Result<String> {
    let frames = cameras
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let m = c.pose.to_matrix();
            TrackFrame {
                index,
                camera_name: c.name.clone(),
                width: c.intrinsics.width,
                height: c.intrinsics.height,
                fx: c.intrinsics.fx,
                fy: c.intrinsics.fy,
                cx: c.intrinsics.cx,
                cy: c.intrinsics.cy,
                world_to_camera: std::array::from_fn(|r| std::array::from_fn(|k| m[(r, k)])),
            }
        })
        .collect();
    serde_json::to_string_pretty(&TrackFile {
        convention: CONVENTION.into(),
        frames,
    })
    .map_err(|e| Error::format(format!("track: {e}")))
}

pub fn track_from_json(text: &[u8]) -> Result<Vec<Camera>> {
    let file: TrackFile = serde_json::from_slice(text).map_err(|e| Error::format(format!("track: {e}")))?;
    if file.convention != CONVENTION {
        return Err(Error::format(format!("track convention {:?} is not {CONVENTION}", file.convention)));
    }
    file.frames
        .into_iter()
        .map(|f| {
            let intr = CameraIntrinsics::new(f.fx, f.fy, f.cx, f.cy, f.width, f.height)
                .map_err(|e| Error::format(format!("track frame {}: {e}", f.index)))?;
            let m = Matrix4::from_fn(|r, k| f.world_to_camera[r][k]);
            let pose = CameraPose::from_matrix(&m).map_err(|e| Error::format(format!("track frame {}: {e}", f.index)))?;
            Ok(Camera::new(f.camera_name, intr, pose))
        })
        .collect()
}
