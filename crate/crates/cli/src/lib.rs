//! Subcommands of the `warmsplat` binary as plain functions.
//!
//! Every command reads its inputs from disk, writes machine outputs to files
//! and logs progress to standard error. Commands run inside a rayon pool of
//! the requested size; results do not depend on the worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use warmsplat::archive::{Archive, ArchiveManifest, ArchiveWriter};
use warmsplat::colmap::ColmapMode;
use warmsplat::config::{read_toml, GenerateConfig, TrainFileConfig};
use warmsplat::dataset::{read_manifest, synthesize_dataset, write_png, DatasetBundle, ExportConfig};
use warmsplat::decompose::{decompose, train_static};
use warmsplat::geometry::Camera;
use warmsplat::metrics::{archive_stats, psnr, read_csv, ssim, write_csv, EvalRow, FrameStats};
use warmsplat::ply::write_ply_file;
use warmsplat::rig::{assign_splits, make_rig, Split};
use warmsplat::scene::GroundTruthScene;
use warmsplat::track::track_from_json;
use warmsplat::trainer::{chain_order, warm_chain, ChainDirection, TimeStepViews};
use warmsplat::{Error, Result};

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => 2,
        Error::NonFinite { .. } => 4,
        _ => 3,
    }
}

/// Runs `f` on a dedicated pool; `None` uses the available parallelism.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if workers == Some(0) {
        return Err(Error::InvalidInput("worker count must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        }),
        None => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Format(format!("json: {e}")))
}

/// `path` with `suffix` appended to its file name, e.g. `run.wsa` → `run.wsa.loss.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Applies one `--export` override: `nerf`, `depth`, `ground_truth`, `none`
/// or `colmap:<poses_only|surface|depth_fused>`.
pub fn apply_export(cfg: &mut ExportConfig, spec: &str) -> Result<()> {
    let bad = |message: String| Error::Config {
        key: "export".into(),
        message,
    };
    match spec.split_once(':') {
        Some(("colmap", mode)) => cfg.colmap = Some(ColmapMode::parse(mode).map_err(|e| bad(e.to_string()))?),
        None => match spec {
            "nerf" => cfg.nerf = true,
            "depth" => cfg.depth = true,
            "ground_truth" => cfg.ground_truth = true,
            "none" => {
                *cfg = ExportConfig {
                    nerf: false,
                    colmap: None,
                    depth: false,
                    ground_truth: false,
                    ..cfg.clone()
                }
            }
            _ => return Err(bad(format!("unknown export `{spec}`"))),
        },
        Some(_) => return Err(bad(format!("unknown export `{spec}`"))),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerateSummary {
    pub images: usize,
    pub time_steps: usize,
    pub splits: BTreeMap<String, usize>,
}

pub fn cmd_generate(config: &Path, out: &Path, exports: &[String]) -> Result<GenerateSummary> {
    let mut cfg: GenerateConfig = read_toml(config)?;
    for e in exports {
        apply_export(&mut cfg.export, e)?;
    }
    cfg.validate()?;
    let scene = GroundTruthScene::new(cfg.scene.clone())?;
    let cameras = make_rig(&cfg.rig)?;
    let splits = assign_splits(&cameras, &cfg.dataset.test, &cfg.dataset.val)?;
    let echo = to_json(&cfg)?;
    let bundle = synthesize_dataset(&scene, cameras, splits, cfg.dataset.time_steps, cfg.export.clone(), echo)?;
    bundle.save(out)?;
    let mut counts = BTreeMap::new();
    for s in Split::ALL {
        counts.insert(s.name().to_string(), bundle.split_indices(s).len());
    }
    info!(
        "wrote {} images over {} time steps to {} (train {}, val {}, test {})",
        bundle.image_count(),
        bundle.manifest.times.len(),
        out.display(),
        counts["train"],
        counts["val"],
        counts["test"]
    );
    Ok(GenerateSummary {
        images: bundle.image_count(),
        time_steps: bundle.manifest.times.len(),
        splits: counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub t: i64,
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub t: i64,
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub seconds: f64,
}

/// Trains the warm chain over the training views and writes the archive,
/// a per-step loss log (`<out>.loss.csv`) and per-frame timings
/// (`<out>.frames.csv`).
pub fn cmd_train(dataset: &Path, config: &Path, out: &Path) -> Result<Vec<FrameRow>> {
    let cfg: TrainFileConfig = read_toml(config)?;
    cfg.validate()?;
    let bundle = DatasetBundle::load(dataset)?;
    let cloud = bundle.points.clone().ok_or_else(|| {
        Error::Format(format!(
            "{}: no point cloud; generate the dataset with a surface or depth_fused colmap export",
            dataset.display()
        ))
    })?;
    let steps = bundle.train_views();
    let times: Vec<i64> = steps.iter().map(|s| s.t).collect();
    if times.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::Format("archive chains need consecutive time indices".into()));
    }
    let order = chain_order(steps.len(), cfg.train.chain_direction);
    let t_step = match cfg.train.chain_direction {
        ChainDirection::Forward => 1,
        ChainDirection::Backward => -1,
    };
    let mut manifest = ArchiveManifest::new(cfg.init.budget, cfg.init.sh_degree, times[order[0]], t_step);
    manifest.dataset_fingerprint = bundle.manifest.fingerprint.clone();
    manifest.config = to_json(&cfg)?;
    ensure_parent(out)?;
    let mut writer = ArchiveWriter::create(out, manifest)?;
    let mut losses = Vec::new();
    let mut frames = Vec::new();
    warm_chain(&steps, &cfg.train, &cfg.init, &cloud, |frame, report| {
        writer.append_frame(frame)?;
        info!(
            "t={} steps={} loss {:.6} -> {:.6} ({:.1}s)",
            report.t, report.steps, report.initial_loss, report.final_loss, report.seconds
        );
        losses.extend(report.step_losses.iter().enumerate().map(|(step, &loss)| LossRow { t: report.t, step, loss }));
        frames.push(FrameRow {
            t: report.t,
            steps: report.steps,
            initial_loss: report.initial_loss,
            final_loss: report.final_loss,
            seconds: report.seconds,
        });
        Ok(())
    })?;
    write_text(&sibling(out, ".loss.csv"), &write_csv(&losses)?)?;
    write_text(&sibling(out, ".frames.csv"), &write_csv(&frames)?)?;
    Ok(frames)
}

/// Viewpoint source for `cmd_render`.
#[derive(Debug, Clone)]
pub enum View {
    /// A named camera of a dataset bundle.
    Camera { dataset: PathBuf, name: String },
    /// A camera track JSON; one image per track camera.
    Track(PathBuf),
}

pub fn dataset_camera(dataset: &Path, name: &str) -> Result<Camera> {
    let m = read_manifest(dataset)?;
    let c = m
        .cameras
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::NotFound(format!("camera `{name}` is not in {}", dataset.display())))?;
    c.to_camera()
}

/// Renders time `t`. A single camera writes `out` as a PNG; a track writes
/// `out/frame_NNNN.png` per track camera. Returns the written paths.
pub fn cmd_render(archive: &Path, t: i64, view: &View, out: &Path) -> Result<Vec<PathBuf>> {
    let a = Archive::open(archive)?;
    let frame = a.load_frame(t)?;
    match view {
        View::Camera { dataset, name } => {
            let cam = dataset_camera(dataset, name)?;
            let img = warmsplat::render::rasterize(&frame, &cam)?;
            write_png(out, &img)?;
            Ok(vec![out.to_path_buf()])
        }
        View::Track(path) => {
            let bytes = std::fs::read(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let cams = track_from_json(&bytes)?;
            use rayon::prelude::*;
            let imgs = cams
                .par_iter()
                .map(|c| warmsplat::render::rasterize(&frame, c))
                .collect::<Result<Vec<_>>>()?;
            let mut paths = Vec::new();
            for (i, img) in imgs.iter().enumerate() {
                let p = out.join(format!("frame_{i:04}.png"));
                write_png(&p, img)?;
                paths.push(p);
            }
            info!("rendered {} track frames at t={t}", paths.len());
            Ok(paths)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub split: String,
    pub rows: usize,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub note: String,
}

/// Scores every (split camera, time) pair. Writes the per-view CSV to
/// `out` and the summary to `<out>.summary.json`.
pub fn cmd_eval(archive: &Path, dataset: &Path, split: Split, out: &Path) -> Result<(Vec<EvalRow>, EvalSummary)> {
    use rayon::prelude::*;
    let a = Archive::open(archive)?;
    let bundle = DatasetBundle::load(dataset)?;
    let views = bundle.views(split);
    if views.first().is_none_or(|v| v.cameras.is_empty()) {
        return Err(Error::Format(format!("split `{}` has no cameras", split.name())));
    }
    if a.manifest().dataset_fingerprint != bundle.manifest.fingerprint {
        warn!("archive was trained on a different dataset fingerprint");
    }
    let pairs: Vec<(&TimeStepViews, usize)> = views.iter().flat_map(|v| (0..v.cameras.len()).map(move |i| (v, i))).collect();
    let mut frames = BTreeMap::new();
    for v in &views {
        frames.insert(v.t, a.load_frame(v.t)?);
    }
    let rows: Vec<EvalRow> = pairs
        .par_iter()
        .map(|&(v, i)| {
            let pred = warmsplat::render::rasterize(&frames[&v.t], &v.cameras[i])?;
            let gt = &v.images[i];
            Ok(EvalRow {
                t: v.t,
                camera: v.cameras[i].name.clone(),
                psnr: psnr(&pred, gt)?,
                ssim: ssim(&pred, gt)?,
            })
        })
        .collect::<Result<_>>()?;
    let n = rows.len() as f64;
    let summary = EvalSummary {
        split: split.name().to_string(),
        rows: rows.len(),
        mean_psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
        mean_ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        note: "LPIPS not computed".into(),
    };
    write_text(out, &write_csv(&rows)?)?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(format!("json: {e}")))?;
    write_text(&sibling(out, ".summary.json"), &json)?;
    info!("{} views: mean PSNR {:.3} dB, mean SSIM {:.4}", rows.len(), summary.mean_psnr, summary.mean_ssim);
    Ok((rows, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchiveInfo {
    pub k: usize,
    pub frames: u64,
    pub sh_degree: usize,
    pub t0: i64,
    pub t_step: i64,
    pub header_bytes: u64,
    pub record_bytes: u64,
    pub expected_bytes: u64,
    pub file_bytes: u64,
}

/// Checks an archive end to end and optionally writes per-frame stats.
/// Any size deviation or failed record checksum is an integrity error.
pub fn cmd_archive_info(archive: &Path, frames_csv: Option<&Path>, out_csv: Option<&Path>) -> Result<ArchiveInfo> {
    let a = Archive::open(archive)?;
    let m = a.manifest();
    let file_bytes = std::fs::metadata(archive)
        .map_err(|e| Error::Io {
            path: archive.to_path_buf(),
            source: e,
        })?
        .len();
    let info = ArchiveInfo {
        k: m.k,
        frames: a.len(),
        sh_degree: m.sh_degree,
        t0: m.t0,
        t_step: m.t_step,
        header_bytes: a.header_len() as u64,
        record_bytes: m.record_size() as u64,
        expected_bytes: a.file_size(),
        file_bytes,
    };
    info!(
        "K={} T={} sh_degree={} record={} bytes header={} bytes total={} bytes",
        info.k, info.frames, info.sh_degree, info.record_bytes, info.header_bytes, info.file_bytes
    );
    if file_bytes != info.expected_bytes {
        return Err(Error::Integrity(format!(
            "file is {file_bytes} bytes, {} frames of {} bytes need {}",
            info.frames, info.record_bytes, info.expected_bytes
        )));
    }
    for t in a.times() {
        a.load_frame(t)?;
    }
    if let Some(out) = out_csv {
        let seconds: BTreeMap<i64, f64> = match frames_csv {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                read_csv::<FrameRow>(&text)?.into_iter().map(|r| (r.t, r.seconds)).collect()
            }
            None => BTreeMap::new(),
        };
        write_text(out, &archive_stats(&a, &seconds).to_csv()?)?;
    }
    Ok(info)
}

/// Reads a stats CSV written by [`cmd_archive_info`].
pub fn read_stats_csv(path: &Path) -> Result<Vec<FrameStats>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    warmsplat::metrics::ArchiveStats::frames_from_csv(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbRow {
    pub t: i64,
    pub dynamic_budget: usize,
    pub retained: usize,
    pub merged_splats: usize,
}

/// Static/dynamic decomposition. Writes `static.ply`, `dynamic.wsa`,
/// `merged/tNNNN.ply`, `masks/tNNNN/<camera>.png` and `report.csv`.
pub fn cmd_ab(dataset: &Path, config: &Path, out: &Path) -> Result<Vec<AbRow>> {
    let cfg: TrainFileConfig = read_toml(config)?;
    cfg.validate()?;
    let bundle = DatasetBundle::load(dataset)?;
    let cloud = bundle
        .points
        .clone()
        .ok_or_else(|| Error::Format(format!("{}: no point cloud", dataset.display())))?;
    let plates = bundle
        .background
        .as_ref()
        .ok_or_else(|| Error::Format(format!("{}: no background plates", dataset.display())))?;
    let steps = bundle.train_views();
    let train = bundle.split_indices(Split::Train);
    let background = TimeStepViews {
        t: steps[0].t,
        cameras: steps[0].cameras.clone(),
        images: train.iter().map(|&i| plates[i].clone()).collect(),
    };
    let a = train_static(&cloud, &background, &cfg.init, &cfg.train, &cfg.ab)?;
    ensure_parent(&out.join("merged/x"))?;
    write_ply_file(&a, out.join("static.ply"))?;
    info!("static model trained ({} Gaussians)", a.len());

    let order = chain_order(steps.len(), cfg.train.chain_direction);
    let t_step = match cfg.train.chain_direction {
        ChainDirection::Forward => 1,
        ChainDirection::Backward => -1,
    };
    let mut manifest = ArchiveManifest::new(cfg.ab.dynamic_budget, cfg.init.sh_degree, steps[order[0]].t, t_step);
    manifest.dataset_fingerprint = bundle.manifest.fingerprint.clone();
    manifest.config = to_json(&cfg)?;
    let mut writer = ArchiveWriter::create(out.join("dynamic.wsa"), manifest)?;
    let mut rows = Vec::new();
    decompose(&steps, &a, &cloud, &cfg.init, &cfg.train, &cfg.ab, |f| {
        writer.append_frame(&f.dynamic)?;
        write_ply_file(&f.merged, out.join(format!("merged/t{:04}.ply", f.t)))?;
        ensure_parent(&out.join(format!("masks/t{:04}/x", f.t)))?;
        for m in &f.masks {
            m.save_png(out.join(format!("masks/t{:04}/{}.png", f.t, m.camera)))?;
        }
        info!("t={} retained {} of {} dynamic Gaussians", f.t, f.retained.len(), f.dynamic.len());
        rows.push(AbRow {
            t: f.t,
            dynamic_budget: f.dynamic.len(),
            retained: f.retained.len(),
            merged_splats: f.merged.len(),
        });
        Ok(())
    })?;
    write_text(&out.join("report.csv"), &write_csv(&rows)?)?;
    Ok(rows)
}
