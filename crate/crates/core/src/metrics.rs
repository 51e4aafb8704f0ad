//! Image-quality and efficiency metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::archive::Archive;
use crate::error::{Error, Result};
use crate::render::ImageBuffer;

/// Reported PSNR for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn check_same(pred: &ImageBuffer, gt: &ImageBuffer) -> Result<()> {
    if !pred.same_shape(gt) || pred.data.len() != gt.data.len() {
        return Err(Error::invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    Ok(())
}

pub fn mse(pred: &ImageBuffer, gt: &ImageBuffer) -> Result<f64> {
    check_same(pred, gt)?;
    let sum: f64 = pred.data.iter().zip(&gt.data).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / pred.data.len() as f64)
}

/// Peak signal-to-noise ratio in dB for images in `[0, 1]`, capped at [`PSNR_CAP_DB`].
pub fn psnr(pred: &ImageBuffer, gt: &ImageBuffer) -> Result<f64> {
    let m = mse(pred, gt)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP_DB))
}

/// Resolution-normalized rendering throughput in megapixels per second.
pub fn throughput_mpix(fps: f64, width: u32, height: u32) -> f64 {
    fps * width as f64 * height as f64 / 1e6
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable "valid" filtering of a `h×w` plane with the SSIM window.
fn filter_valid(plane: &[f64], w: usize, h: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (vw, vh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut tmp = vec![0.0; h * vw];
    for r in 0..h {
        let row = &plane[r * w..(r + 1) * w];
        for j in 0..vw {
            tmp[r * vw + j] = win.iter().zip(&row[j..j + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; vh * vw];
    for i in 0..vh {
        for (k, wk) in win.iter().enumerate() {
            let src = &tmp[(i + k) * vw..(i + k + 1) * vw];
            let dst = &mut out[i * vw..(i + 1) * vw];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wk * s;
            }
        }
    }
    out
}

/// Adjoint of [`filter_valid`]: scatters a valid-size map back to `h×w`.
fn filter_valid_adjoint(map: &[f64], w: usize, h: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (vw, vh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut tmp = vec![0.0; h * vw];
    for i in 0..vh {
        for (k, wk) in win.iter().enumerate() {
            let src = &map[i * vw..(i + 1) * vw];
            let dst = &mut tmp[(i + k) * vw..(i + k + 1) * vw];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wk * s;
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for j in 0..vw {
            let v = tmp[r * vw + j];
            for (k, wk) in win.iter().enumerate() {
                out[r * w + j + k] += wk * v;
            }
        }
    }
    out
}

fn channel_plane(img: &ImageBuffer, c: usize) -> Vec<f64> {
    img.data.iter().skip(c).step_by(3).copied().collect()
}

fn ssim_impl(pred: &ImageBuffer, gt: &ImageBuffer, want_grad: bool) -> Result<(f64, Option<ImageBuffer>)> {
    check_same(pred, gt)?;
    let (w, h) = (pred.width, pred.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "{w}x{h} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let win = gaussian_window();
    let count = ((w + 1 - SSIM_WINDOW) * (h + 1 - SSIM_WINDOW) * 3) as f64;
    let mut total = 0.0;
    let mut grad = want_grad.then(|| ImageBuffer::new(w, h));
    for c in 0..3 {
        let x = channel_plane(pred, c);
        let y = channel_plane(gt, c);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let mx = filter_valid(&x, w, h, &win);
        let my = filter_valid(&y, w, h, &win);
        let exx = filter_valid(&xx, w, h, &win);
        let eyy = filter_valid(&yy, w, h, &win);
        let exy = filter_valid(&xy, w, h, &win);
        let n = mx.len();
        let (mut d_mx, mut d_exx, mut d_exy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for p in 0..n {
            let (ux, uy) = (mx[p], my[p]);
            let vx = exx[p] - ux * ux;
            let vy = eyy[p] - uy * uy;
            let cxy = exy[p] - ux * uy;
            let a1 = 2.0 * ux * uy + SSIM_C1;
            let a2 = 2.0 * cxy + SSIM_C2;
            let b1 = ux * ux + uy * uy + SSIM_C1;
            let b2 = vx + vy + SSIM_C2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            if want_grad {
                let bb = b1 * b2;
                d_mx[p] = (2.0 * uy * a2 - 2.0 * uy * a1) / bb - s * (2.0 * ux / b1 - 2.0 * ux / b2);
                d_exx[p] = -s / b2;
                d_exy[p] = 2.0 * a1 / bb;
            }
        }
        if let Some(g) = grad.as_mut() {
            let gm = filter_valid_adjoint(&d_mx, w, h, &win);
            let gxx = filter_valid_adjoint(&d_exx, w, h, &win);
            let gxy = filter_valid_adjoint(&d_exy, w, h, &win);
            for i in 0..w * h {
                g.data[i * 3 + c] = (gm[i] + 2.0 * x[i] * gxx[i] + y[i] * gxy[i]) / count;
            }
        }
    }
    Ok((total / count, grad))
}

/// Single-scale SSIM with an 11×11 Gaussian window (σ = 1.5), valid
/// positions only, averaged over positions and channels.
pub fn ssim(pred: &ImageBuffer, gt: &ImageBuffer) -> Result<f64> {
    Ok(ssim_impl(pred, gt, false)?.0)
}

/// SSIM and its gradient with respect to `pred`.
pub fn ssim_with_grad(pred: &ImageBuffer, gt: &ImageBuffer) -> Result<(f64, ImageBuffer)> {
    let (v, g) = ssim_impl(pred, gt, true)?;
    Ok((v, g.expect("gradient requested")))
}

/// Storage and training statistics of one archived frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub t: i64,
    pub splats: usize,
    pub record_bytes: u64,
    pub train_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveStats {
    pub header_bytes: u64,
    pub total_bytes: u64,
    pub frames: Vec<FrameStats>,
}

impl ArchiveStats {
    pub fn to_csv(&self) -> Result<String> {
        write_csv(&self.frames)
    }

    pub fn frames_from_csv(text: &str) -> Result<Vec<FrameStats>> {
        read_csv(text)
    }
}

/// Per-frame byte accounting for an archive. Splat counts come from the
/// manifest; `train_seconds` maps a time index to its logged training time.
pub fn archive_stats(archive: &Archive, train_seconds: &BTreeMap<i64, f64>) -> ArchiveStats {
    let m = archive.manifest();
    let frames = archive
        .times()
        .into_iter()
        .map(|t| FrameStats {
            t,
            splats: m.k,
            record_bytes: m.record_size() as u64,
            train_seconds: train_seconds.get(&t).copied(),
        })
        .collect();
    ArchiveStats {
        header_bytes: archive.header_len() as u64,
        total_bytes: archive.file_size(),
        frames,
    }
}

/// One row of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub t: i64,
    pub camera: String,
    pub psnr: f64,
    pub ssim: f64,
}

pub fn write_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::format(format!("csv: {e}")))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| Error::format(format!("csv: {e}"))))
        .collect()
}
