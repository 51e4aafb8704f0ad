//! Static/dynamic decomposition: residual masks, multi-view voting over a
//! dynamic model's Gaussians, box filtering and merging with the static model.

use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianFrame;
use crate::geometry::{project, world_to_camera, Camera};
use crate::render::ImageBuffer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
    #[serde(default)]
    pub margin: f64,
}

impl Aabb {
    pub fn validate(&self) -> Result<()> {
        let ordered = (0..3).all(|i| self.min[i] < self.max[i]);
        let finite = self.min.iter().chain(&self.max).all(|v| v.is_finite());
        if !ordered || !finite {
            return Err(Error::invalid(format!("degenerate box {:?}..{:?}", self.min, self.max)));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::invalid("box margin must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - self.margin && p[i] <= self.max[i] + self.margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoteConfig {
    pub diff_threshold: f64,
    pub morph_radius: usize,
    pub quorum: f64,
    pub aabb: Option<Aabb>,
}

impl Default for VoteConfig {
    fn default() -> Self {
        Self {
            diff_threshold: 0.05,
            morph_radius: 2,
            quorum: 0.6,
            aabb: None,
        }
    }
}

impl VoteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.diff_threshold > 0.0 && self.diff_threshold < 1.0) {
            return Err(Error::invalid("diff_threshold must lie in (0, 1)"));
        }
        if !(self.quorum > 0.0 && self.quorum <= 1.0) {
            return Err(Error::invalid("quorum must lie in (0, 1]"));
        }
        if let Some(b) = &self.aabb {
            b.validate()?;
        }
        Ok(())
    }
}

/// Binary per-view mask, row-major, one byte per pixel (0 or 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMask {
    pub camera: String,
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl ResidualMask {
    pub fn zeros(camera: impl Into<String>, width: usize, height: usize) -> Self {
        Self {
            camera: camera.into(),
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let px: Vec<u8> = self.data.iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
        image::save_buffer(path, &px, self.width as u32, self.height as u32, image::ExtendedColorType::L8)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))
    }

    pub fn load_png(camera: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?
            .into_luma8();
        Ok(Self {
            camera: camera.into(),
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.into_raw().into_iter().map(|v| u8::from(v >= 128)).collect(),
        })
    }
}

fn disk(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Erosion (`all`) or dilation (`any`) with the structuring element.
/// Neighbors outside the image are ignored.
fn morph(data: &[u8], w: usize, h: usize, se: &[(isize, isize)], erode: bool) -> Vec<u8> {
    let mut out = vec![0u8; data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut hit = erode;
            for &(dx, dy) in se {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let v = data[ny as usize * w + nx as usize] != 0;
                if erode && !v {
                    hit = false;
                    break;
                }
                if !erode && v {
                    hit = true;
                    break;
                }
            }
            out[y * w + x] = u8::from(hit);
        }
    }
    out
}

/// Morphological opening then closing with a disk of `radius` pixels.
pub fn open_close(data: &[u8], w: usize, h: usize, radius: usize) -> Vec<u8> {
    if radius == 0 {
        return data.to_vec();
    }
    let se = disk(radius);
    let opened = morph(&morph(data, w, h, &se, true), w, h, &se, false);
    morph(&morph(&opened, w, h, &se, false), w, h, &se, true)
}

/// Thresholded max-channel difference between the observed image and the
/// static-only render, cleaned by opening and closing.
pub fn build_residual_mask(camera: &str, gt: &ImageBuffer, a_only: &ImageBuffer, cfg: &VoteConfig) -> Result<ResidualMask> {
    if !gt.same_shape(a_only) || gt.data.len() != a_only.data.len() {
        return Err(Error::invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            gt.width, gt.height, a_only.width, a_only.height
        )));
    }
    let raw: Vec<u8> = gt
        .data
        .chunks_exact(3)
        .zip(a_only.data.chunks_exact(3))
        .map(|(a, b)| {
            let d = (0..3).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max);
            u8::from(d > cfg.diff_threshold)
        })
        .collect();
    Ok(ResidualMask {
        camera: camera.to_string(),
        width: gt.width,
        height: gt.height,
        data: open_close(&raw, gt.width, gt.height, cfg.morph_radius),
    })
}

/// Nearest pixel of a world point in a camera, if in front and in bounds.
pub fn center_pixel(p: &Vector3<f64>, camera: &Camera) -> Option<(usize, usize)> {
    let uv = project(&camera.intrinsics, &world_to_camera(&camera.pose, p)).ok()?;
    let (u, v) = (uv.x.round(), uv.y.round());
    let (w, h) = (camera.width() as f64, camera.height() as f64);
    if u < 0.0 || v < 0.0 || u >= w || v >= h {
        return None;
    }
    Some((u as usize, v as usize))
}

/// Indices of Gaussians whose projected centers land on the mask in at least
/// a `quorum` fraction of the views that see them.
pub fn multi_view_vote(b_frame: &GaussianFrame, cameras: &[Camera], masks: &[ResidualMask], cfg: &VoteConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    if cameras.is_empty() {
        return Err(Error::invalid("voting needs at least one camera"));
    }
    if cameras.len() != masks.len() {
        return Err(Error::invalid(format!("{} cameras but {} masks", cameras.len(), masks.len())));
    }
    for (c, m) in cameras.iter().zip(masks) {
        if m.width != c.width() as usize || m.height != c.height() as usize {
            return Err(Error::invalid(format!("mask for {} does not match the camera size", c.name)));
        }
    }
    let centers: Vec<Vector3<f64>> = b_frame.centers().collect();
    Ok(vote_points(&centers, cameras, masks, cfg.quorum))
}

/// Point-level vote shared by [`multi_view_vote`]; inputs are assumed checked.
pub fn vote_points(points: &[Vector3<f64>], cameras: &[Camera], masks: &[ResidualMask], quorum: f64) -> Vec<usize> {
    let keep: Vec<bool> = points
        .par_iter()
        .map(|p| {
            let (mut seen, mut hits) = (0usize, 0usize);
            for (cam, mask) in cameras.iter().zip(masks) {
                if let Some((x, y)) = center_pixel(p, cam) {
                    seen += 1;
                    hits += usize::from(mask.get(x, y));
                }
            }
            seen > 0 && hits as f64 / seen as f64 >= quorum
        })
        .collect();
    keep.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect()
}

pub fn aabb_filter(indices: &[usize], b_frame: &GaussianFrame, bbox: &Aabb) -> Result<Vec<usize>> {
    bbox.validate()?;
    Ok(indices
        .iter()
        .copied()
        .filter(|&i| b_frame.gaussians.get(i).is_some_and(|g| bbox.contains(&g.mean)))
        .collect())
}

/// Static Gaussians followed by the retained dynamic ones, parameters untouched.
pub fn merge_ab(a_frame: &GaussianFrame, b_frame: &GaussianFrame, retained: &[usize]) -> Result<GaussianFrame> {
    if a_frame.sh_degree != b_frame.sh_degree {
        return Err(Error::invalid(format!(
            "static model has SH degree {}, dynamic model {}",
            a_frame.sh_degree, b_frame.sh_degree
        )));
    }
    let mut gs = a_frame.gaussians.clone();
    for &i in retained {
        let g = b_frame
            .gaussians
            .get(i)
            .ok_or_else(|| Error::invalid(format!("retained index {i} exceeds {}", b_frame.len())))?;
        gs.push(g.clone());
    }
    GaussianFrame::new(b_frame.t, a_frame.sh_degree, gs)
}
