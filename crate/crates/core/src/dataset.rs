//! Synthetic multi-view dataset bundles and their on-disk layout.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/transforms_{train,val,test}.json
//! <dir>/images/t0000/cam_000.png
//! <dir>/images/background/cam_000.png   (optional static-only plates)
//! <dir>/depth/depth_cam_000_0000.npy     (optional)
//! <dir>/colmap/{cameras,images,points3D}.txt (optional)
//! <dir>/ground_truth.wsa                 (optional)
//! ```
//!
//! Images are quantized to 8 bits and depth to float32 when a bundle is
//! synthesized, so a bundle loaded from disk equals the one that was saved.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix4, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::archive::{Archive, ArchiveManifest, ArchiveWriter};
use crate::colmap::{self, ColmapMode};
use crate::error::{Error, Result};
use crate::gaussian::GaussianFrame;
use crate::geometry::{Camera, CameraIntrinsics, CameraPose};
use crate::nerf::{self, NerfFrame};
use crate::npy;
use crate::render::{rasterize_with_depth, DepthBuffer, ImageBuffer};
use crate::rig::Split;
use crate::scene::GroundTruthScene;
use crate::trainer::{PointCloud, TimeStepViews};

pub const FORMAT: &str = "warmsplat-dataset";
pub const FORMAT_VERSION: u32 = 1;
pub const BACKGROUND: [f64; 3] = [0.0, 0.0, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub extrinsics: String,
    pub image_origin: String,
    pub pixel_centers: String,
    pub world_up: [f64; 3],
    pub nerf_export: String,
    pub colmap_principal_point: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            extrinsics: "OpenCV/COLMAP-style world-to-camera".into(),
            image_origin: "top-left image-origin".into(),
            pixel_centers: "integer pixel coordinates are pixel centers".into(),
            world_up: [0.0, 0.0, 1.0],
            nerf_export: "OpenGL camera-to-world: c2w_gl = inverse(w2c_cv) * diag(1,-1,-1,1)".into(),
            colmap_principal_point: "cx, cy shifted by +0.5 (COLMAP pixel-center convention)".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCamera {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Row-major world-to-camera matrix.
    pub world_to_camera: [[f64; 4]; 4],
}

impl ManifestCamera {
    pub fn from_camera(c: &Camera) -> Self {
        let m = c.pose.to_matrix();
        let k = &c.intrinsics;
        Self {
            name: c.name.clone(),
            width: k.width,
            height: k.height,
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            world_to_camera: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
        }
    }

    pub fn to_camera(&self) -> Result<Camera> {
        let k = CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)?;
        let pose = CameraPose::from_matrix(&Matrix4::from_fn(|r, c| self.world_to_camera[r][c]))?;
        Ok(Camera::new(self.name.clone(), k, pose))
    }
}

/// Which files besides images and the manifest are written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub nerf: bool,
    pub colmap: Option<ColmapMode>,
    pub depth: bool,
    /// Voxel edge for `depth_fused` point clouds, in scene units.
    pub voxel_size: f64,
    pub ground_truth: bool,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            nerf: true,
            colmap: Some(ColmapMode::Surface),
            depth: false,
            voxel_size: 0.01,
            ground_truth: true,
        }
    }
}

impl ExportConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(Error::invalid("voxel_size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub conventions: Conventions,
    pub background: [f64; 3],
    pub camera_count: usize,
    pub times: Vec<i64>,
    pub cameras: Vec<ManifestCamera>,
    pub splits: BTreeMap<String, Split>,
    pub exports: ExportConfig,
    /// Lowercase hex SHA-256 over cameras and 8-bit image content.
    pub fingerprint: String,
    /// Static-only renders are stored under `images/background/`.
    #[serde(default)]
    pub background_plates: bool,
    /// Indices of moving ground-truth Gaussians, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamic_indices: Option<Vec<usize>>,
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub manifest: DatasetManifest,
    pub cameras: Vec<Camera>,
    /// `images[time][camera]`, same order as `manifest.times` and `cameras`.
    pub images: Vec<Vec<ImageBuffer>>,
    pub depths: Option<Vec<Vec<DepthBuffer>>>,
    /// Static-content render per camera.
    pub background: Option<Vec<ImageBuffer>>,
    pub points: Option<PointCloud>,
    pub ground_truth: Option<Vec<GaussianFrame>>,
}

fn image_rel(t: i64, camera: &str) -> String {
    format!("images/t{t:04}/{camera}")
}

fn background_rel(camera: &str) -> String {
    format!("images/background/{camera}.png")
}

fn depth_rel(t: i64, camera: &str) -> String {
    format!("depth/depth_{camera}_{t:04}.npy")
}

pub fn write_png(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    image::save_buffer(path, &img.to_rgb8(), img.width as u32, img.height as u32, image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

pub fn read_png(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?
        .into_rgb8();
    ImageBuffer::from_rgb8(img.width() as usize, img.height() as usize, img.as_raw())
}

/// Content hash over camera parameters and 8-bit images.
pub fn fingerprint(cameras: &[Camera], images: &[Vec<ImageBuffer>], background: Option<&[ImageBuffer]>) -> String {
    let mut h = Sha256::new();
    for c in cameras {
        h.update(c.name.as_bytes());
        h.update([0]);
        let k = &c.intrinsics;
        for v in [k.fx, k.fy, k.cx, k.cy] {
            h.update(v.to_le_bytes());
        }
        h.update(k.width.to_le_bytes());
        h.update(k.height.to_le_bytes());
        for v in c.pose.to_matrix().iter() {
            h.update(v.to_le_bytes());
        }
    }
    for row in images {
        for img in row {
            h.update(img.to_rgb8());
        }
    }
    if let Some(bg) = background {
        h.update(b"background");
        for img in bg {
            h.update(img.to_rgb8());
        }
    }
    hex::encode(h.finalize())
}

fn quantize(img: &ImageBuffer) -> ImageBuffer {
    ImageBuffer::from_rgb8(img.width, img.height, &img.to_rgb8()).expect("same shape")
}

/// Renders every ground-truth frame through every camera.
pub fn synthesize_dataset(
    scene: &GroundTruthScene,
    cameras: Vec<Camera>,
    splits: BTreeMap<String, Split>,
    time_steps: usize,
    exports: ExportConfig,
    config: serde_json::Value,
) -> Result<DatasetBundle> {
    if time_steps == 0 {
        return Err(Error::invalid("time_steps must be at least 1"));
    }
    exports.validate()?;
    if cameras.is_empty() {
        return Err(Error::invalid("rig has no cameras"));
    }
    if let Some(c) = cameras.iter().find(|c| !splits.contains_key(&c.name)) {
        return Err(Error::invalid(format!("camera {} has no split", c.name)));
    }
    let times: Vec<i64> = (0..time_steps as i64).collect();
    let frames: Vec<GaussianFrame> = times.iter().map(|&t| scene.frame(t)).collect();
    let jobs: Vec<(usize, usize)> = (0..times.len()).flat_map(|t| (0..cameras.len()).map(move |c| (t, c))).collect();
    let rendered: Vec<(ImageBuffer, DepthBuffer)> = jobs
        .par_iter()
        .map(|&(t, c)| {
            let (img, mut depth) = rasterize_with_depth(&frames[t], &cameras[c])?;
            depth.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
            Ok((quantize(&img), depth))
        })
        .collect::<Result<_>>()?;
    let n = cameras.len();
    let mut images = vec![Vec::with_capacity(n); times.len()];
    let mut depths = vec![Vec::with_capacity(n); times.len()];
    for ((t, _), (img, depth)) in jobs.iter().zip(rendered) {
        images[*t].push(img);
        depths[*t].push(depth);
    }
    let statics = scene.static_frame();
    let background: Vec<ImageBuffer> = cameras
        .par_iter()
        .map(|c| Ok(quantize(&crate::render::rasterize(&statics, c)?)))
        .collect::<Result<_>>()?;
    let points = match exports.colmap {
        Some(ColmapMode::DepthFused) => {
            let pts = colmap::fuse_depth(&cameras, &depths[0], &images[0], exports.voxel_size)?;
            Some(cloud_from_colmap(&pts))
        }
        Some(ColmapMode::Surface) => Some(cloud_from_colmap(&colmap::surface_points(&frames[0]))),
        _ => None,
    };
    let dynamic: Vec<usize> = scene
        .dynamic_labels()
        .iter()
        .enumerate()
        .filter(|(_, d)| **d)
        .map(|(i, _)| i)
        .collect();
    let manifest = DatasetManifest {
        format: FORMAT.into(),
        version: FORMAT_VERSION,
        conventions: Conventions::default(),
        background: BACKGROUND,
        camera_count: n,
        times,
        cameras: cameras.iter().map(ManifestCamera::from_camera).collect(),
        splits,
        fingerprint: fingerprint(&cameras, &images, Some(&background)),
        background_plates: true,
        dynamic_indices: Some(dynamic),
        config,
        exports,
    };
    Ok(DatasetBundle {
        manifest,
        cameras,
        images,
        depths: Some(depths),
        background: Some(background),
        points,
        ground_truth: Some(frames),
    })
}

fn cloud_from_colmap(points: &[colmap::ColmapPoint]) -> PointCloud {
    PointCloud {
        points: points.iter().map(|p| p.xyz).collect(),
        colors: Some(points.iter().map(|p| Vector3::from(p.rgb.map(|c| c as f64 / 255.0))).collect()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl DatasetBundle {
    pub fn split_of(&self, camera: &str) -> Option<Split> {
        self.manifest.splits.get(camera).copied()
    }

    /// Camera indices assigned to `split`, in rig order.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.cameras
            .iter()
            .enumerate()
            .filter(|(_, c)| self.split_of(&c.name) == Some(split))
            .map(|(i, _)| i)
            .collect()
    }

    /// Per-time views restricted to one split. Training loaders use
    /// `Split::Train` so held-out views never reach the optimizer.
    pub fn views(&self, split: Split) -> Vec<TimeStepViews> {
        let idx = self.split_indices(split);
        self.manifest
            .times
            .iter()
            .zip(&self.images)
            .map(|(&t, row)| TimeStepViews {
                t,
                cameras: idx.iter().map(|&i| self.cameras[i].clone()).collect(),
                images: idx.iter().map(|&i| row[i].clone()).collect(),
            })
            .collect()
    }

    pub fn train_views(&self) -> Vec<TimeStepViews> {
        self.views(Split::Train)
    }

    pub fn time_index(&self, t: i64) -> Option<usize> {
        self.manifest.times.iter().position(|&x| x == t)
    }

    pub fn image_count(&self) -> usize {
        self.images.iter().map(Vec::len).sum()
    }

    fn nerf_frames(&self, split: Split) -> Vec<NerfFrame> {
        let idx = self.split_indices(split);
        let last = self.manifest.times.len().saturating_sub(1).max(1) as f64;
        self.manifest
            .times
            .iter()
            .enumerate()
            .flat_map(|(ti, &t)| {
                idx.iter().map(move |&i| NerfFrame {
                    file_path: image_rel(t, &self.cameras[i].name),
                    camera: self.cameras[i].clone(),
                    time_index: t,
                    time: ti as f64 / last,
                })
            })
            .collect()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (&t, row) in self.manifest.times.iter().zip(&self.images) {
            for (cam, img) in self.cameras.iter().zip(row) {
                write_png(dir.join(format!("{}.png", image_rel(t, &cam.name))), img)?;
            }
        }
        if self.manifest.background_plates {
            let bg = self.background.as_ref().ok_or_else(|| Error::invalid("manifest declares background plates the bundle lacks"))?;
            for (cam, img) in self.cameras.iter().zip(bg) {
                write_png(dir.join(background_rel(&cam.name)), img)?;
            }
        }
        let ex = &self.manifest.exports;
        if ex.nerf {
            for split in Split::ALL {
                let text = nerf::encode_transforms(&self.nerf_frames(split))?;
                write_text(&dir.join(format!("transforms_{}.json", split.name())), &text)?;
            }
        }
        if ex.depth {
            let depths = self.depths.as_ref().ok_or_else(|| Error::invalid("depth export requested but the bundle has no depth"))?;
            std::fs::create_dir_all(dir.join("depth")).map_err(|e| Error::io(dir.join("depth"), e))?;
            for (&t, row) in self.manifest.times.iter().zip(depths) {
                for (cam, d) in self.cameras.iter().zip(row) {
                    let data: Vec<f32> = d.data.iter().map(|&v| v as f32).collect();
                    npy::write_f32_2d(dir.join(depth_rel(t, &cam.name)), d.height, d.width, &data)?;
                }
            }
        }
        if let Some(mode) = ex.colmap {
            let t0 = self.manifest.times[0];
            let names: Vec<String> = self.cameras.iter().map(|c| format!("{}.png", image_rel(t0, &c.name))).collect();
            let points = match mode {
                ColmapMode::PosesOnly => Vec::new(),
                ColmapMode::Surface => {
                    let gt = self.ground_truth.as_ref().ok_or_else(|| Error::invalid("surface export needs the ground-truth scene"))?;
                    colmap::surface_points(&gt[0])
                }
                ColmapMode::DepthFused => {
                    let depths = self.depths.as_ref().ok_or_else(|| Error::invalid("depth_fused export needs depth maps"))?;
                    colmap::fuse_depth(&self.cameras, &depths[0], &self.images[0], ex.voxel_size)?
                }
            };
            colmap::write_colmap(dir.join("colmap"), &self.cameras, &names, &points)?;
        }
        if ex.ground_truth {
            if let Some(gt) = &self.ground_truth {
                let first = &gt[0];
                let mut m = ArchiveManifest::new(first.len(), first.sh_degree, first.t, 1);
                m.dataset_fingerprint = self.manifest.fingerprint.clone();
                let path = dir.join("ground_truth.wsa");
                let mut w = ArchiveWriter::create(&path, m)?;
                for f in gt {
                    w.append_frame(f)?;
                }
            }
        }
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::format(format!("manifest: {e}")))?;
        write_text(&dir.join("manifest.json"), &text)
    }

    /// Loads a saved bundle and checks its fingerprint.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = read_manifest(dir)?;
        let cameras: Vec<Camera> = manifest
            .cameras
            .iter()
            .map(|c| c.to_camera().map_err(|e| Error::format(format!("camera {}: {e}", c.name))))
            .collect::<Result<_>>()?;
        let images: Vec<Vec<ImageBuffer>> = manifest
            .times
            .par_iter()
            .map(|&t| {
                cameras
                    .iter()
                    .map(|c| {
                        let img = read_png(dir.join(format!("{}.png", image_rel(t, &c.name))))?;
                        if img.width != c.width() || img.height != c.height() {
                            return Err(Error::format(format!("image {} at t={t} does not match its camera size", c.name)));
                        }
                        Ok(img)
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let background: Option<Vec<ImageBuffer>> = if manifest.background_plates {
            Some(cameras.iter().map(|c| read_png(dir.join(background_rel(&c.name)))).collect::<Result<_>>()?)
        } else {
            None
        };
        let fp = fingerprint(&cameras, &images, background.as_deref());
        if fp != manifest.fingerprint {
            return Err(Error::Integrity(format!("dataset fingerprint {fp} does not match manifest {}", manifest.fingerprint)));
        }
        let depths = if manifest.exports.depth {
            Some(
                manifest
                    .times
                    .iter()
                    .map(|&t| cameras.iter().map(|c| load_depth(&dir.join(depth_rel(t, &c.name)), c)).collect())
                    .collect::<Result<_>>()?,
            )
        } else {
            None
        };
        let points = match manifest.exports.colmap {
            Some(ColmapMode::Surface | ColmapMode::DepthFused) => Some(cloud_from_colmap(&colmap::read_colmap(dir.join("colmap"))?.points)),
            _ => None,
        };
        let gt_path = dir.join("ground_truth.wsa");
        let ground_truth = if manifest.exports.ground_truth && gt_path.exists() {
            let a = Archive::open(&gt_path)?;
            Some(a.times().into_iter().map(|t| a.load_frame(t)).collect::<Result<_>>()?)
        } else {
            None
        };
        Ok(Self {
            manifest,
            cameras,
            images,
            depths,
            background,
            points,
            ground_truth,
        })
    }
}

/// Reads and checks `manifest.json` of a bundle without touching its images.
pub fn read_manifest(dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let mpath = dir.as_ref().join("manifest.json");
    let text = std::fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: DatasetManifest =
        serde_json::from_slice(&text).map_err(|e| Error::format(format!("{}: {e}", mpath.display())))?;
    if manifest.format != FORMAT || manifest.version != FORMAT_VERSION {
        return Err(Error::format(format!("{}: unsupported dataset format", mpath.display())));
    }
    if manifest.times.is_empty() || manifest.cameras.len() != manifest.camera_count {
        return Err(Error::format(format!("{}: inconsistent counts", mpath.display())));
    }
    Ok(manifest)
}

fn load_depth(path: &Path, cam: &Camera) -> Result<DepthBuffer> {
    let a = npy::read_f32_2d(path)?;
    if a.rows != cam.height() || a.cols != cam.width() {
        return Err(Error::format(format!("{}: shape does not match camera {}", path.display(), cam.name)));
    }
    Ok(DepthBuffer {
        width: a.cols,
        height: a.rows,
        data: a.data.into_iter().map(f64::from).collect(),
    })
}

/// Reads `transforms_{train,val,test}.json` and the referenced images.
/// Returns cameras per split name and images keyed by `(time_index, camera)`.
pub fn import_nerf_synthetic(dir: impl AsRef<Path>) -> Result<NerfImport> {
    let dir = dir.as_ref();
    let mut out = NerfImport::default();
    for split in Split::ALL {
        let path = dir.join(format!("transforms_{}.json", split.name()));
        if !path.exists() {
            continue;
        }
        let text = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let frames = nerf::decode_transforms(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        for f in frames {
            let img_path = resolve_image(dir, &f.file_path);
            let img = read_png(&img_path)?;
            out.splits.insert(f.camera.name.clone(), split);
            out.images.insert((f.time_index, f.camera.name.clone()), img);
            out.cameras.entry(f.camera.name.clone()).or_insert(f.camera);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct NerfImport {
    pub cameras: BTreeMap<String, Camera>,
    pub splits: BTreeMap<String, Split>,
    pub images: BTreeMap<(i64, String), ImageBuffer>,
}

fn resolve_image(dir: &Path, file_path: &str) -> PathBuf {
    let p = dir.join(file_path);
    if p.extension().is_some() && p.exists() {
        p
    } else {
        dir.join(format!("{file_path}.png"))
    }
}
