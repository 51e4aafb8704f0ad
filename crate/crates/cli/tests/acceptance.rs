//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

#[path = "../../core/tests/support/fd.rs"]
mod fd;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use warmsplat::archive::{encode_record, Archive, ArchiveManifest, ArchiveWriter};
use warmsplat::colmap::{decode_colmap, read_colmap, write_colmap, ColmapPoint, PIXEL_CENTER_SHIFT};
use warmsplat::config::{parse_toml, TrainFileConfig};
use warmsplat::dataset::{import_nerf_synthetic, DatasetBundle};
use warmsplat::gaussian::{Gaussian, GaussianFrame};
use warmsplat::geometry::{Camera, CameraIntrinsics, CameraPose};
use warmsplat::metrics::{psnr, throughput_mpix};
use warmsplat::objective::{total_loss, total_loss_value, LossConfig};
use warmsplat::ply::read_ply_file;
use warmsplat::render::{rasterize, rasterize_with_depth, ImageBuffer};
use warmsplat::rig::{assign_splits, camera_name, split_counts, Split};
use warmsplat::scene_split::{multi_view_vote, ResidualMask};
use warmsplat::trainer::{init_from_points, optimize_frame};
use warmsplat_cli::{cmd_ab, cmd_eval, cmd_generate, cmd_train, with_workers};

type Outcome = (bool, String);

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Writes `text` with `edits` applied and returns its path.
fn variant(dir: &Path, name: &str, text: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut s = text.to_string();
    for (from, to) in edits {
        assert!(s.contains(from), "`{from}` missing from {name}");
        s = s.replacen(from, to, 1);
    }
    let p = dir.join(name);
    std::fs::write(&p, s).unwrap();
    p
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn gradient_correctness() -> Outcome {
    let started = Instant::now();
    let cameras = fd::ring_cameras(2, 32, 4.0);
    let cfg = LossConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut accepted, mut rejected, mut bad, mut worst, mut fine_worst) = (0, 0, 0, 0.0f64, 0.0f64);
    while accepted < 20 && rejected < 1000 {
        let degree = rng.random_range(0..=1);
        let frame = fd::random_frame(&mut rng, 10, degree);
        let gts: Vec<ImageBuffer> = (0..2).map(|_| fd::random_image(&mut rng, 32, 32)).collect();
        let (_, grads) = total_loss(&frame, &cameras, &gts, &cfg).unwrap();
        let loss = |f: &GaussianFrame| total_loss_value(f, &cameras, &gts, &cfg).unwrap();
        match fd::check_gradients(&frame, &cameras, &grads.to_flat(), loss, 1e-4, 1e-3, 1e-6) {
            None => rejected += 1,
            Some(r) => {
                accepted += 1;
                bad += r.mismatches.len();
                worst = worst.max(r.max_rel_error);
                // Re-probe mismatches with a finer step to tell truncation error from a wrong gradient.
                let base = frame.to_flat();
                for m in &r.mismatches {
                    let mut probe = frame.clone();
                    let mut at = |d: f64| {
                        let mut flat = base.clone();
                        flat[m.index] += d;
                        probe.set_from_flat(&flat);
                        loss(&probe)
                    };
                    let fine = (at(1e-6) - at(-1e-6)) / 2e-6;
                    fine_worst = fine_worst.max((fine - m.analytic).abs() / m.analytic.abs().max(fine.abs()));
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let fine = if bad > 0 {
        format!(", mismatches at step 1e-6: max rel error {fine_worst:.1e}")
    } else {
        String::new()
    };
    (
        accepted == 20 && bad == 0 && secs < 120.0,
        format!("{accepted} scenes, {bad} mismatching parameters at step 1e-4, max rel error {worst:.2e}{fine}, {rejected} scenes skipped at seams, {secs:.1}s"),
    )
}

fn archive_size_arithmetic() -> Outcome {
    let m = ArchiveManifest::new(100_000, 3, 0, 1);
    let mut g = Gaussian::zeros(3);
    g.rotation = nalgebra::Vector4::new(1.0, 0.0, 0.0, 0.0);
    let frame = GaussianFrame::new(0, 3, vec![g; 100_000]).unwrap();
    let record = encode_record(&frame, &m).unwrap();
    let mb = m.payload_size() as f64 / 1e6;
    let rel = (mb - 23.65).abs() / 23.65;
    (
        rel < 0.01 && record.len() == m.record_size() && m.record_size() == m.payload_size() + 16,
        format!("payload {mb:.3} MB ({:.2}% from 23.65), record {} bytes", rel * 100.0, record.len()),
    )
}

fn metric_checks() -> Outcome {
    let a = throughput_mpix(65.8, 1920, 1080);
    let b = throughput_mpix(82.0, 800, 800);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x = fd::random_image(&mut rng, 8, 8);
        let y = fd::random_image(&mut rng, 8, 8);
        let mut sq = 0.0;
        for (p, q) in x.data.iter().zip(&y.data) {
            sq += (p - q) * (p - q);
        }
        let direct = 10.0 * (1.0 / (sq / x.data.len() as f64)).log10();
        worst = worst.max((psnr(&x, &y).unwrap() - direct).abs());
    }
    (
        (a - 136.4).abs() <= 0.05 && (b - 52.5).abs() <= 0.05 && worst <= 1e-9,
        format!("{a:.3} MPix/s, {b:.3} MPix/s, PSNR max deviation {worst:.1e} dB"),
    )
}

fn split_protocols() -> Result<String, String> {
    let intr = CameraIntrinsics::new(10.0, 10.0, 5.0, 5.0, 10, 10).unwrap();
    let rig = |n: usize| -> Vec<Camera> { (0..n).map(|i| Camera::new(camera_name(i), intr, CameraPose::identity())).collect() };
    let spk = assign_splits(&rig(60), &[21, 37, 40, 56], &[0]).unwrap();
    let dws = assign_splits(&rig(100), &[0, 30, 60, 90], &[1]).unwrap();
    let spk_test: Vec<&String> = spk.iter().filter(|(_, s)| **s == Split::Test).map(|(n, _)| n).collect();
    if split_counts(&spk) != [55, 1, 4] || split_counts(&dws) != [95, 1, 4] {
        return Err("split counts differ".into());
    }
    if spk_test != ["cam_021", "cam_037", "cam_040", "cam_056"] || spk["cam_000"] != Split::Val || dws["cam_001"] != Split::Val {
        return Err("split membership differs".into());
    }
    Ok("splits 55/1/4 and 95/1/4".into())
}

fn colmap_schema(dir: &Path, cameras: usize) -> Result<(), String> {
    let cams = read(&dir.join("cameras.txt"));
    let data = |t: &str| t.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect::<Vec<_>>();
    let mut ids = BTreeSet::new();
    for l in data(&cams) {
        let f: Vec<&str> = l.split(' ').collect();
        let ok = f.len() == 8
            && f[1] == "PINHOLE"
            && f[0].parse::<u32>().is_ok()
            && f[2..4].iter().all(|v| v.parse::<u32>().is_ok_and(|v| v > 0))
            && f[4..].iter().all(|v| v.parse::<f64>().is_ok_and(f64::is_finite));
        if !ok {
            return Err(format!("cameras.txt line `{l}`"));
        }
        ids.insert(f[0].to_string());
    }
    let lines = data(&read(&dir.join("images.txt")));
    if lines.len() != 2 * cameras {
        return Err(format!("images.txt has {} data lines for {cameras} images", lines.len()));
    }
    for pair in lines.chunks(2) {
        let f: Vec<&str> = pair[0].split(' ').collect();
        let nums: Vec<f64> = f.iter().skip(1).take(7).filter_map(|v| v.parse().ok()).collect();
        let ok = f.len() == 10 && nums.len() == 7 && (nums[..4].iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-9 && ids.contains(f[8]);
        if !ok || pair[1].split_whitespace().count() % 3 != 0 {
            return Err(format!("images.txt entry `{}`", pair[0]));
        }
    }
    for l in data(&read(&dir.join("points3D.txt"))) {
        let f: Vec<&str> = l.split(' ').collect();
        let ok = f.len() >= 8
            && f[1..4].iter().all(|v| v.parse::<f64>().is_ok_and(f64::is_finite))
            && f[4..7].iter().all(|v| v.parse::<u8>().is_ok())
            && (f.len() - 8) % 2 == 0;
        if !ok {
            return Err(format!("points3D.txt line `{l}`"));
        }
    }
    Ok(())
}

fn format_round_trips(closed_loop: &Path, work: &Path) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, r: Result<String, String>| match r {
        Ok(s) => notes.push(s),
        Err(e) => {
            ok = false;
            notes.push(format!("{name} FAILED: {e}"));
        }
    };

    let bundle = DatasetBundle::load(closed_loop).unwrap();
    check("nerf", {
        let imp = import_nerf_synthetic(closed_loop).unwrap();
        let mut worst = 0.0f64;
        for c in &bundle.cameras {
            let got = &imp.cameras[&c.name];
            worst = worst.max((got.pose.to_matrix() - c.pose.to_matrix()).amax());
            worst = worst.max((got.intrinsics.fx - c.intrinsics.fx).abs());
        }
        let splits_match = imp.splits == bundle.manifest.splits;
        if worst <= 1e-6 && splits_match && imp.cameras.len() == bundle.cameras.len() {
            Ok(format!("NeRF poses within {worst:.1e}"))
        } else {
            Err(format!("pose error {worst:.1e}, splits match {splits_match}"))
        }
    });

    check("colmap", {
        let intr = CameraIntrinsics::new(40.0, 42.0, 16.0, 12.0, 32, 24).unwrap();
        let rig = vec![
            Camera::new("cam_000", intr, CameraPose::new(nalgebra::Matrix3::identity(), nalgebra::Vector3::new(0.0, 0.0, 2.0)).unwrap()),
            Camera::new("cam_001", intr, CameraPose::new(nalgebra::Matrix3::identity(), nalgebra::Vector3::new(1.0, -0.5, 3.0)).unwrap()),
        ];
        let names = vec!["images/t0000/cam_000.png".to_string(), "images/t0000/cam_001.png".to_string()];
        let pts = [ColmapPoint {
            xyz: nalgebra::Vector3::new(0.25, -0.5, 1.0),
            rgb: [255, 128, 0],
        }];
        let out = work.join("colmap_golden");
        write_colmap(&out, &rig, &names, &pts).unwrap();
        let gold = golden().join("colmap");
        let same = ["cameras.txt", "images.txt", "points3D.txt"].iter().all(|f| read(&out.join(f)) == read(&gold.join(f)));
        let parsed = decode_colmap(&read(&gold.join("cameras.txt")), &read(&gold.join("images.txt")), &read(&gold.join("points3D.txt")));
        let back = parsed.as_ref().is_ok_and(|m| {
            m.cameras.iter().zip(&rig).all(|(a, b)| a.intrinsics == b.intrinsics && a.pose == b.pose && a.name == b.name) && m.points.len() == 1
        });
        let exported = colmap_schema(&closed_loop.join("colmap"), bundle.cameras.len());
        let model = read_colmap(closed_loop.join("colmap")).unwrap();
        let cx_shift = bundle.cameras.iter().zip(&model.cameras).all(|(a, b)| a.intrinsics == b.intrinsics)
            && read(&closed_loop.join("colmap/cameras.txt")).contains(&format!(" {} ", bundle.cameras[0].intrinsics.fx));
        match (same, back, colmap_schema(&gold, 2), exported) {
            (true, true, Ok(()), Ok(())) if cx_shift => Ok(format!(
                "COLMAP golden triplet byte-identical, export schema valid ({} points, principal point +{PIXEL_CENTER_SHIFT})",
                model.points.len()
            )),
            (s, b, g, e) => Err(format!("golden identical {s}, parsed back {b}, golden schema {g:?}, export schema {e:?}, intrinsics {cx_shift}")),
        }
    });

    check("npy", {
        let smoke = work.join("smoke_depth");
        cmd_generate(&configs().join("smoke.generate.toml"), &smoke, &["depth".into()]).unwrap();
        let b = DatasetBundle::load(&smoke).unwrap();
        let gt = b.ground_truth.as_ref().unwrap();
        let mut files = 0;
        let mut mismatched = 0;
        for (ti, &t) in b.manifest.times.iter().enumerate() {
            for c in &b.cameras {
                let bytes = std::fs::read(smoke.join(format!("depth/depth_{}_{t:04}.npy", c.name))).unwrap();
                let npy = npyz::NpyFile::new(&bytes[..]).unwrap();
                let shape = npy.shape().to_vec();
                let fortran = npy.order() == npyz::Order::Fortran;
                let values: Vec<f32> = npy.into_vec().unwrap();
                let (_, depth) = rasterize_with_depth(&gt[ti], c).unwrap();
                let want: Vec<u32> = depth.data.iter().map(|&d| (d as f32).to_bits()).collect();
                let got: Vec<u32> = values.iter().map(|v| v.to_bits()).collect();
                files += 1;
                if fortran || shape != [c.height() as u64, c.width() as u64] || got != want {
                    mismatched += 1;
                }
            }
        }
        if mismatched == 0 {
            Ok(format!("{files} NPY depth files bit-exact under npyz"))
        } else {
            Err(format!("{mismatched} of {files} NPY files differ"))
        }
    });

    check("splits", split_protocols());
    (ok, notes.join("; "))
}

fn determinism(work: &Path) -> Outcome {
    let gen = configs().join("closed-loop.generate.toml");
    let train_text = read(&configs().join("closed-loop.train.toml"));
    let short = variant(work, "short.train.toml", &train_text, &[("iters_init = 2000", "iters_init = 60"), ("iters_warm = 1000", "iters_warm = 30")]);
    let runs = [Some(1), Some(4), Some(4)];
    let mut bundles = Vec::new();
    let mut archives = Vec::new();
    for (i, w) in runs.iter().enumerate() {
        let data = work.join(format!("det_data_{i}"));
        let arc = work.join(format!("det_{i}.wsa"));
        with_workers(*w, || cmd_generate(&gen, &data, &[])).unwrap();
        with_workers(*w, || cmd_train(&data, &short, &arc)).unwrap();
        bundles.push(tree(&data));
        archives.push(std::fs::read(&arc).unwrap());
    }
    let same_b = bundles.windows(2).all(|w| w[0] == w[1]);
    let same_a = archives.windows(2).all(|w| w[0] == w[1]);
    (
        same_b && same_a,
        format!(
            "3 runs (workers 1, 4, 4): bundles identical {same_b} ({} files), archives identical {same_a} ({} bytes)",
            bundles[0].len(),
            archives[0].len()
        ),
    )
}

struct ClosedLoop {
    data: PathBuf,
    archive: PathBuf,
    mean_psnr: f64,
}

fn train_closed_loop(work: &Path, seed: u64) -> ClosedLoop {
    let g = read(&configs().join("closed-loop.generate.toml"));
    let t = read(&configs().join("closed-loop.train.toml"));
    let s = format!("seed = {seed}");
    let gen = variant(work, &format!("gen_{seed}.toml"), &g, &[("seed = 0", &s)]);
    let train = variant(work, &format!("train_{seed}.toml"), &t, &[("seed = 0", &s)]);
    let data = work.join(format!("closed_loop_{seed}"));
    let archive = work.join(format!("closed_loop_{seed}.wsa"));
    cmd_generate(&gen, &data, &[]).unwrap();
    cmd_train(&data, &train, &archive).unwrap();
    let (_, summary) = cmd_eval(&archive, &data, Split::Test, &work.join(format!("eval_{seed}.csv"))).unwrap();
    ClosedLoop {
        data,
        archive,
        mean_psnr: summary.mean_psnr,
    }
}

fn closed_loop_recovery(run: &ClosedLoop, secs: f64) -> Outcome {
    let rows: Vec<warmsplat::metrics::EvalRow> =
        warmsplat::metrics::read_csv(&read(&run.archive.with_file_name("eval_0.csv"))).unwrap();
    let per_t: Vec<String> = (0..8)
        .map(|t| {
            let v: Vec<f64> = rows.iter().filter(|r| r.t == t).map(|r| r.psnr).collect();
            format!("{:.2}", mean(&v))
        })
        .collect();
    (
        run.mean_psnr >= 35.0 && rows.len() == 32,
        format!(
            "mean test PSNR {:.2} dB over {} views (per t: {}), {:.0}s",
            run.mean_psnr,
            rows.len(),
            per_t.join(" "),
            secs
        ),
    )
}

fn fixed_budget(run: &ClosedLoop, work: &Path) -> Outcome {
    let a = Archive::open(&run.archive).unwrap();
    let m = a.manifest().clone();
    let frames: Vec<GaussianFrame> = a.times().into_iter().map(|t| a.load_frame(t).unwrap()).collect();
    let all_k = frames.iter().all(|f| f.len() == m.k);
    let same_len = frames.iter().map(|f| encode_record(f, &m).unwrap().len()).collect::<BTreeSet<_>>().len() == 1;
    let mut sizes = Vec::new();
    for n in 1..=frames.len() {
        let p = work.join(format!("prefix_{n}.wsa"));
        let mut w = ArchiveWriter::create(&p, m.clone()).unwrap();
        for f in &frames[..n] {
            w.append_frame(f).unwrap();
        }
        sizes.push(std::fs::metadata(&p).unwrap().len());
    }
    let steps: BTreeSet<u64> = sizes.windows(2).map(|w| w[1] - w[0]).collect();
    let affine = steps.len() == 1 && steps.contains(&(m.record_size() as u64)) && sizes.last() == Some(&std::fs::metadata(&run.archive).unwrap().len());
    (
        all_k && same_len && affine,
        format!(
            "{} frames of K={}, record {} bytes, size = {} + {}·T",
            frames.len(),
            m.k,
            m.record_size(),
            sizes[0] - m.record_size() as u64,
            m.record_size()
        ),
    )
}

/// (t, near, far) triples with near = t±1 and far = t±5 inside `0..len`.
fn locality_pairs(len: i64) -> Vec<(i64, i64, i64)> {
    let mut out = Vec::new();
    for t in 0..len {
        for d in [-1, 1] {
            let far = t + 5 * d;
            if (0..len).contains(&far) {
                out.push((t, t + d, far));
            }
        }
    }
    out
}

fn warm_start_locality(runs: &[&ClosedLoop]) -> Outcome {
    let mut total = 0;
    let mut strict = 0;
    let mut worst = f64::INFINITY;
    for run in runs {
        let b = DatasetBundle::load(&run.data).unwrap();
        let a = Archive::open(&run.archive).unwrap();
        let cfg: TrainFileConfig = serde_json::from_value(a.manifest().config.clone()).unwrap();
        let loss_cfg = cfg.train.loss;
        let views = b.train_views();
        let loss_at = |t: i64, from: i64| {
            let mut f = a.load_frame(from).unwrap();
            f.t = t;
            let v = &views[t as usize];
            total_loss_value(&f, &v.cameras, &v.images, &loss_cfg).unwrap()
        };
        for (t, near, far) in locality_pairs(views.len() as i64) {
            let (ln, lf) = (loss_at(t, near), loss_at(t, far));
            total += 1;
            if ln < lf {
                strict += 1;
            }
            worst = worst.min(lf / ln);
        }
    }
    (
        total > 0 && strict == total,
        format!("{strict}/{total} (t, seed) pairs have lower initial loss from t±1 than t±5, smallest far/near ratio {worst:.2}"),
    )
}

fn warm_reaches_cold_loss(run: &ClosedLoop) -> Outcome {
    let b = DatasetBundle::load(&run.data).unwrap();
    let a = Archive::open(&run.archive).unwrap();
    let cfg: TrainFileConfig = serde_json::from_value(a.manifest().config.clone()).unwrap();
    let cloud = b.points.clone().unwrap();
    let views = b.train_views();
    let mut notes = Vec::new();
    let mut ok = true;
    for t in [1i64, 4, 7] {
        let v = &views[t as usize];
        let mut init = init_from_points(&cloud, &v.images, &v.cameras, &cfg.init).unwrap();
        init.t = t;
        init.round_to_f32();
        let (_, cold) = optimize_frame(&init, &v.images, &v.cameras, &cfg.train, cfg.train.iters_init, cloud.extent()).unwrap();
        let warm = total_loss_value(&a.load_frame(t).unwrap(), &v.cameras, &v.images, &cfg.train.loss).unwrap();
        ok &= warm <= cold.final_loss;
        notes.push(format!("t={t} warm {warm:.5} vs cold {:.5}", cold.final_loss));
    }
    let ratio = cfg.train.iters_warm as f64 / cfg.train.iters_init as f64;
    (ok && ratio <= 0.5, format!("warm frames use {:.0}% of cold iterations: {}", ratio * 100.0, notes.join(", ")))
}

fn ab_decomposition(run: &ClosedLoop, work: &Path) -> Outcome {
    let out = work.join("ab");
    let started = Instant::now();
    let rows = cmd_ab(&run.data, &configs().join("closed-loop.train.toml"), &out).unwrap();
    let cfg: TrainFileConfig = parse_toml(&read(&configs().join("closed-loop.train.toml"))).unwrap();
    let b = DatasetBundle::load(&run.data).unwrap();
    let truth: BTreeSet<usize> = b.manifest.dynamic_indices.clone().unwrap().into_iter().collect();
    let gt = b.ground_truth.as_ref().unwrap();
    let train = b.train_views();
    let test = b.views(Split::Test);
    let (mut tp, mut kept, mut relevant) = (0, 0, 0);
    let mut worst_p = 1.0f64;
    let mut worst_r = 1.0f64;
    let mut merged_psnr = Vec::new();
    for (ti, v) in train.iter().enumerate() {
        let masks: Vec<ResidualMask> = v
            .cameras
            .iter()
            .map(|c| ResidualMask::load_png(c.name.clone(), out.join(format!("masks/t{:04}/{}.png", v.t, c.name))).unwrap())
            .collect();
        let voted: BTreeSet<usize> = multi_view_vote(&gt[ti], &v.cameras, &masks, &cfg.ab.vote).unwrap().into_iter().collect();
        let hit = voted.intersection(&truth).count();
        tp += hit;
        kept += voted.len();
        relevant += truth.len();
        worst_p = worst_p.min(hit as f64 / voted.len().max(1) as f64);
        worst_r = worst_r.min(hit as f64 / truth.len() as f64);
        let merged = read_ply_file(out.join(format!("merged/t{:04}.ply", v.t))).unwrap();
        for (c, img) in test[ti].cameras.iter().zip(&test[ti].images) {
            merged_psnr.push(psnr(&rasterize(&merged, c).unwrap(), img).unwrap());
        }
    }
    let precision = tp as f64 / kept.max(1) as f64;
    let recall = tp as f64 / relevant as f64;
    let merged = mean(&merged_psnr);
    let retained: Vec<String> = rows.iter().map(|r| r.retained.to_string()).collect();
    (
        precision >= 0.95 && recall >= 0.90 && merged >= run.mean_psnr - 1.0,
        format!(
            "label oracle precision {precision:.3} recall {recall:.3} (worst frame {worst_p:.3}/{worst_r:.3}); merged PSNR {merged:.2} dB vs joint {:.2} dB; retained per frame [{}]; {:.0}s",
            run.mean_psnr,
            retained.join(" "),
            started.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let work = tempfile::tempdir().unwrap();
    let work = work.path();
    let mut failed = Vec::new();
    let mut report = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let started = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(p) => {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        println!("{} {name}: {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, started.elapsed().as_secs_f64());
        if !ok {
            failed.push(name.to_string());
        }
    };

    report("metric checks", &mut metric_checks);
    report("archive size arithmetic", &mut archive_size_arithmetic);
    report("gradient correctness", &mut gradient_correctness);
    report("determinism", &mut || determinism(work));

    let started = Instant::now();
    let main_run = train_closed_loop(work, 0);
    let secs = started.elapsed().as_secs_f64();
    report("closed-loop recovery", &mut || closed_loop_recovery(&main_run, secs));
    report("fixed-budget invariants", &mut || fixed_budget(&main_run, work));
    report("format round trips", &mut || format_round_trips(&main_run.data, work));
    let others: Vec<ClosedLoop> = [1, 2].into_iter().map(|s| train_closed_loop(work, s)).collect();
    report("warm-start locality", &mut || warm_start_locality(&[&main_run, &others[0], &others[1]]));
    report("warm-start iterations (companion)", &mut || warm_reaches_cold_loss(&main_run));
    report("A/B decomposition", &mut || ab_decomposition(&main_run, work));

    if !failed.is_empty() {
        println!("{} criteria failed: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
    println!("all criteria passed");
}
