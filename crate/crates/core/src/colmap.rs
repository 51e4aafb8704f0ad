//! COLMAP text models: `cameras.txt`, `images.txt`, `points3D.txt`.
//!
//! COLMAP puts the center of the top-left pixel at (0.5, 0.5) while this
//! crate puts it at (0, 0), so principal points are shifted by +0.5 on
//! export and by -0.5 on import. Poses are world-to-camera in both.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianFrame;
use crate::geometry::{Camera, CameraIntrinsics, CameraPose};
use crate::render::{DepthBuffer, ImageBuffer};
use crate::sh;

pub const PIXEL_CENTER_SHIFT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColmapMode {
    PosesOnly,
    Surface,
    DepthFused,
}

impl ColmapMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "poses_only" | "poses" => Ok(Self::PosesOnly),
            "surface" => Ok(Self::Surface),
            "depth_fused" | "depth" => Ok(Self::DepthFused),
            _ => Err(Error::invalid(format!("unknown COLMAP mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColmapPoint {
    pub xyz: Vector3<f64>,
    pub rgb: [u8; 3],
}

/// A parsed text model. Each image carries its own camera; `image_names`
/// holds the NAME column in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColmapModel {
    pub cameras: Vec<Camera>,
    pub image_names: Vec<String>,
    pub points: Vec<ColmapPoint>,
}

/// One PINHOLE camera per entry, ids starting at 1.
pub fn encode_cameras(cameras: &[Camera]) -> String {
    let mut s = String::from("# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    let _ = writeln!(s, "# Number of cameras: {}", cameras.len());
    for (i, c) in cameras.iter().enumerate() {
        let k = &c.intrinsics;
        let _ = writeln!(
            s,
            "{} PINHOLE {} {} {} {} {} {}",
            i + 1,
            k.width,
            k.height,
            k.fx,
            k.fy,
            k.cx + PIXEL_CENTER_SHIFT,
            k.cy + PIXEL_CENTER_SHIFT
        );
    }
    s
}

/// Image `i` uses camera `i + 1`. The POINTS2D line is left empty.
pub fn encode_images(cameras: &[Camera], names: &[String]) -> Result<String> {
    if cameras.len() != names.len() {
        return Err(Error::invalid("one image name per camera is required"));
    }
    let mut s = String::from(
        "# Image list with two lines of data per image:\n#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n",
    );
    let _ = writeln!(s, "# Number of images: {}, mean observations per image: 0", cameras.len());
    for (i, (c, name)) in cameras.iter().zip(names).enumerate() {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!("image name {name:?} must be non-empty without whitespace")));
        }
        let q = c.pose.quaternion();
        let t = c.pose.translation;
        let _ = writeln!(s, "{} {} {} {} {} {} {} {} {} {}", i + 1, q[0], q[1], q[2], q[3], t.x, t.y, t.z, i + 1, name);
        s.push('\n');
    }
    Ok(s)
}

pub fn encode_points(points: &[ColmapPoint]) -> String {
    let mut s = String::from(
        "# 3D point list with one line of data per point:\n#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n",
    );
    let _ = writeln!(s, "# Number of points: {}, mean track length: 0", points.len());
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {} {} {} {} 0", i + 1, p.xyz.x, p.xyz.y, p.xyz.z, p.rgb[0], p.rgb[1], p.rgb[2]);
    }
    s
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.starts_with('#'))
}

fn num<T: std::str::FromStr>(file: &str, line: usize, what: &str, tok: Option<&str>) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::format(format!("{file}:{line}: missing {what}")))?;
    tok.parse().map_err(|_| Error::format(format!("{file}:{line}: bad {what} {tok:?}")))
}

fn decode_cameras(text: &str) -> Result<BTreeMap<u32, CameraIntrinsics>> {
    let f = "cameras.txt";
    let mut out = BTreeMap::new();
    for (ln, line) in data_lines(text).filter(|(_, l)| !l.is_empty()) {
        let mut it = line.split_whitespace();
        let id: u32 = num(f, ln, "CAMERA_ID", it.next())?;
        let model = it.next().ok_or_else(|| Error::format(format!("{f}:{ln}: missing MODEL")))?;
        let w: u32 = num(f, ln, "WIDTH", it.next())?;
        let h: u32 = num(f, ln, "HEIGHT", it.next())?;
        let (fx, fy) = match model {
            "PINHOLE" => (num(f, ln, "fx", it.next())?, num(f, ln, "fy", it.next())?),
            "SIMPLE_PINHOLE" => {
                let v: f64 = num(f, ln, "f", it.next())?;
                (v, v)
            }
            other => return Err(Error::format(format!("{f}:{ln}: unsupported camera model {other:?}"))),
        };
        let cx: f64 = num(f, ln, "cx", it.next())?;
        let cy: f64 = num(f, ln, "cy", it.next())?;
        if it.next().is_some() {
            return Err(Error::format(format!("{f}:{ln}: too many parameters for {model}")));
        }
        let k = CameraIntrinsics::new(fx, fy, cx - PIXEL_CENTER_SHIFT, cy - PIXEL_CENTER_SHIFT, w, h)
            .map_err(|e| Error::format(format!("{f}:{ln}: {e}")))?;
        if out.insert(id, k).is_some() {
            return Err(Error::format(format!("{f}:{ln}: duplicate CAMERA_ID {id}")));
        }
    }
    Ok(out)
}

fn stem(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_string())
}

fn decode_images(text: &str, intrinsics: &BTreeMap<u32, CameraIntrinsics>) -> Result<(Vec<Camera>, Vec<String>)> {
    let f = "images.txt";
    let mut cams = Vec::new();
    let mut names = Vec::new();
    let mut lines = data_lines(text);
    while let Some((ln, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let _id: u32 = num(f, ln, "IMAGE_ID", it.next())?;
        let mut q = Vector4::zeros();
        for (i, what) in ["QW", "QX", "QY", "QZ"].iter().enumerate() {
            q[i] = num(f, ln, what, it.next())?;
        }
        let mut t = Vector3::zeros();
        for (i, what) in ["TX", "TY", "TZ"].iter().enumerate() {
            t[i] = num(f, ln, what, it.next())?;
        }
        let cam_id: u32 = num(f, ln, "CAMERA_ID", it.next())?;
        let name = it.next().ok_or_else(|| Error::format(format!("{f}:{ln}: missing NAME")))?;
        let k = intrinsics
            .get(&cam_id)
            .ok_or_else(|| Error::format(format!("{f}:{ln}: unknown CAMERA_ID {cam_id}")))?;
        let pose = CameraPose::from_quaternion(&q, t).map_err(|e| Error::format(format!("{f}:{ln}: {e}")))?;
        cams.push(Camera::new(stem(name), *k, pose));
        names.push(name.to_string());
        // POINTS2D line; its observations are not used.
        lines.next();
    }
    Ok((cams, names))
}

fn decode_points(text: &str) -> Result<Vec<ColmapPoint>> {
    let f = "points3D.txt";
    data_lines(text)
        .filter(|(_, l)| !l.is_empty())
        .map(|(ln, line)| {
            let mut it = line.split_whitespace();
            let _id: u64 = num(f, ln, "POINT3D_ID", it.next())?;
            let xyz = Vector3::new(num(f, ln, "X", it.next())?, num(f, ln, "Y", it.next())?, num(f, ln, "Z", it.next())?);
            if !xyz.iter().all(|v: &f64| v.is_finite()) {
                return Err(Error::format(format!("{f}:{ln}: non-finite point")));
            }
            let rgb = [num(f, ln, "R", it.next())?, num(f, ln, "G", it.next())?, num(f, ln, "B", it.next())?];
            let _err: f64 = num(f, ln, "ERROR", it.next())?;
            Ok(ColmapPoint { xyz, rgb })
        })
        .collect()
}

/// Parses the text triplet.
pub fn decode_colmap(cameras_txt: &str, images_txt: &str, points_txt: &str) -> Result<ColmapModel> {
    let intr = decode_cameras(cameras_txt)?;
    let (cameras, image_names) = decode_images(images_txt, &intr)?;
    Ok(ColmapModel {
        cameras,
        image_names,
        points: decode_points(points_txt)?,
    })
}

pub fn write_colmap(dir: impl AsRef<Path>, cameras: &[Camera], names: &[String], points: &[ColmapPoint]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("cameras.txt", encode_cameras(cameras)),
        ("images.txt", encode_images(cameras, names)?),
        ("points3D.txt", encode_points(points)),
    ];
    for (name, text) in files {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

pub fn read_colmap(dir: impl AsRef<Path>) -> Result<ColmapModel> {
    let dir = dir.as_ref();
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
    };
    decode_colmap(&read("cameras.txt")?, &read("images.txt")?, &read("points3D.txt")?)
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Gaussian centers with their DC colors.
pub fn surface_points(frame: &GaussianFrame) -> Vec<ColmapPoint> {
    frame
        .gaussians
        .iter()
        .map(|g| {
            let rgb = sh::rgb_from_dc(&g.sh[0]);
            ColmapPoint {
                xyz: g.mean,
                rgb: [to_u8(rgb.x), to_u8(rgb.y), to_u8(rgb.z)],
            }
        })
        .collect()
}

/// Back-projects every pixel with positive depth and averages position and
/// color per voxel of edge `voxel_size`. Output is ordered by voxel key.
pub fn fuse_depth(cameras: &[Camera], depths: &[DepthBuffer], images: &[ImageBuffer], voxel_size: f64) -> Result<Vec<ColmapPoint>> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::invalid("voxel_size must be positive"));
    }
    if depths.len() != cameras.len() || images.len() != cameras.len() {
        return Err(Error::invalid("one depth map and one image per camera are required"));
    }
    let mut cells: BTreeMap<[i64; 3], (Vector3<f64>, Vector3<f64>, usize)> = BTreeMap::new();
    for ((cam, depth), img) in cameras.iter().zip(depths).zip(images) {
        if depth.width != cam.width() || depth.height != cam.height() || img.width != depth.width || img.height != depth.height {
            return Err(Error::invalid(format!("depth/image size does not match camera {}", cam.name)));
        }
        for y in 0..depth.height {
            for x in 0..depth.width {
                let d = depth.at(x, y);
                if !(d > 0.0) {
                    continue;
                }
                let p = cam.unproject(x as f64, y as f64, d);
                let key = [0, 1, 2].map(|i| (p[i] / voxel_size).floor() as i64);
                let cell = cells.entry(key).or_insert((Vector3::zeros(), Vector3::zeros(), 0));
                cell.0 += p;
                cell.1 += Vector3::from(img.pixel(x, y));
                cell.2 += 1;
            }
        }
    }
    Ok(cells
        .into_values()
        .map(|(p, c, n)| {
            let c = c / n as f64;
            ColmapPoint {
                xyz: p / n as f64,
                rgb: [to_u8(c.x), to_u8(c.y), to_u8(c.z)],
            }
        })
        .collect())
}
