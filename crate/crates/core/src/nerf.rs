//! NeRF-synthetic `transforms_<split>.json` files.
//!
//! Internally poses are OpenCV world-to-camera (camera looks down +z, image
//! y points down). The files store OpenGL camera-to-world matrices (camera
//! looks down -z, y up):
//!
//! ```text
//! c2w_gl = inverse(w2c_cv) * diag(1, -1, -1, 1)
//! ```

use std::path::Path;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraIntrinsics, CameraPose};

/// The axis flip between the OpenCV and OpenGL camera frames.
pub fn axis_flip() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, -1.0, 1.0))
}

pub fn nerf_from_opencv(pose: &CameraPose) -> Matrix4<f64> {
    pose.inverse().to_matrix() * axis_flip()
}

pub fn opencv_from_nerf(c2w_gl: &Matrix4<f64>) -> Result<CameraPose> {
    let c2w_cv = c2w_gl * axis_flip();
    Ok(CameraPose::from_matrix(&c2w_cv)?.inverse())
}

/// One image entry of a transforms file.
#[derive(Debug, Clone, PartialEq)]
pub struct NerfFrame {
    /// Image path relative to the file, without extension.
    pub file_path: String,
    pub camera: Camera,
    pub time_index: i64,
    pub time: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameJson {
    file_path: String,
    transform_matrix: [[f64; 4]; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    camera_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_index: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fl_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fl_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TransformsJson {
    camera_angle_x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fl_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fl_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cy: Option<f64>,
    frames: Vec<FrameJson>,
}

fn rows(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
}

/// Serializes frames. `camera_angle_x` is taken from the first frame; each
/// frame also carries its own intrinsics.
pub fn encode_transforms(frames: &[NerfFrame]) -> Result<String> {
    let angle = frames.first().map(|f| f.camera.intrinsics.fov_x()).unwrap_or(0.0);
    let doc = TransformsJson {
        camera_angle_x: angle,
        w: None,
        h: None,
        fl_x: None,
        fl_y: None,
        cx: None,
        cy: None,
        frames: frames
            .iter()
            .map(|f| {
                let k = &f.camera.intrinsics;
                FrameJson {
                    file_path: f.file_path.clone(),
                    transform_matrix: rows(&nerf_from_opencv(&f.camera.pose)),
                    camera_name: Some(f.camera.name.clone()),
                    time_index: Some(f.time_index),
                    time: Some(f.time),
                    fl_x: Some(k.fx),
                    fl_y: Some(k.fy),
                    cx: Some(k.cx),
                    cy: Some(k.cy),
                    w: Some(k.width),
                    h: Some(k.height),
                }
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::format(format!("transforms: {e}")))
}

fn file_stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

/// Parses a transforms file. Per-frame intrinsics override file-level ones;
/// the focal length falls back to `camera_angle_x`.
pub fn decode_transforms(text: &[u8]) -> Result<Vec<NerfFrame>> {
    let doc: TransformsJson = serde_json::from_slice(text).map_err(|e| Error::format(format!("transforms: {e}")))?;
    doc.frames
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let field = |name: &str| Error::format(format!("transforms frame {i}: missing field `{name}`"));
            let w = f.w.or(doc.w).ok_or_else(|| field("w"))?;
            let h = f.h.or(doc.h).ok_or_else(|| field("h"))?;
            let fx = match f.fl_x.or(doc.fl_x) {
                Some(v) => v,
                None => w as f64 / (2.0 * (doc.camera_angle_x / 2.0).tan()),
            };
            let fy = f.fl_y.or(doc.fl_y).unwrap_or(fx);
            let cx = f.cx.or(doc.cx).unwrap_or(w as f64 / 2.0);
            let cy = f.cy.or(doc.cy).unwrap_or(h as f64 / 2.0);
            let intr = CameraIntrinsics::new(fx, fy, cx, cy, w, h).map_err(|e| Error::format(format!("transforms frame {i}: {e}")))?;
            let m = Matrix4::from_fn(|r, c| f.transform_matrix[r][c]);
            let pose = opencv_from_nerf(&m).map_err(|e| Error::format(format!("transforms frame {i}: transform_matrix: {e}")))?;
            let name = f.camera_name.unwrap_or_else(|| file_stem(&f.file_path));
            Ok(NerfFrame {
                camera: Camera::new(name, intr, pose),
                file_path: f.file_path,
                time_index: f.time_index.unwrap_or(0),
                time: f.time.unwrap_or(0.0),
            })
        })
        .collect()
}
