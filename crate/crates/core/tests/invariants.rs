mod support;

use nalgebra::{Matrix3, Vector3, Vector4};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::fd::{random_frame, random_image, ring_cameras};
use warmsplat::archive::{Archive, ArchiveManifest, ArchiveWriter};
use warmsplat::gaussian::{Gaussian, GaussianFrame};
use warmsplat::geometry::*;
use warmsplat::metrics::{psnr, throughput_mpix};
use warmsplat::nerf::{nerf_from_opencv, opencv_from_nerf};
use warmsplat::objective::{regularizer, total_loss, LossConfig};
use warmsplat::render::{rasterize, ImageBuffer};
use warmsplat::rig::{assign_splits, camera_name};
use warmsplat::scene::{GroundTruthScene, SceneConfig};
use warmsplat::scene_split::{build_residual_mask, merge_ab, multi_view_vote, ResidualMask, VoteConfig};
use warmsplat::sh::eval_sh;
use warmsplat::trainer::{optimize_frame, TrainConfig};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_quat(r: &mut impl Rng) -> Vector4<f64> {
    Vector4::from_fn(|_, _| r.random_range(-1.0..1.0)).normalize()
}

fn random_pose(r: &mut impl Rng) -> CameraPose {
    let q = unit_quat(r);
    let t = Vector3::from_fn(|_, _| r.random_range(-5.0..5.0));
    CameraPose::new(quat_to_rotation(&q), t).unwrap()
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_ignores_quaternion_sign(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = unit_quat(&mut r);
        let s = Vector3::from_fn(|_, _| r.random_range(0.01..2.0));
        prop_assert_eq!(build_covariance(&q, &s).unwrap(), build_covariance(&-q, &s).unwrap());
    }

    #[test]
    fn projected_covariance_is_dilated(seed in any::<u64>()) {
        let mut r = rng(seed);
        let intr = CameraIntrinsics::new(50.0, 55.0, 16.0, 16.0, 32, 32).unwrap();
        let x = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(0.1..5.0));
        let s = Vector3::from_fn(|_, _| 10f64.powf(r.random_range(-4.0..0.5)));
        let sigma = build_covariance(&unit_quat(&mut r), &s).unwrap();
        let j = projection_jacobian(&intr, &x).unwrap();
        let cov = project_covariance(&j, &quat_to_rotation(&unit_quat(&mut r)), &sigma);
        let eig = cov.symmetric_eigenvalues();
        prop_assert!(eig.min() >= COV2D_DILATION - 1e-12 * eig.max(), "{}", eig);
    }

    #[test]
    fn pose_inverse_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let pose = random_pose(&mut r);
        let inv = pose.inverse();
        let p = Vector3::from_fn(|_, _| r.random_range(-10.0..10.0));
        let back = world_to_camera(&inv, &world_to_camera(&pose, &p));
        prop_assert!((back - p).amax() < 1e-12);
    }

    #[test]
    fn degree_zero_sh_ignores_direction(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dc = [Vector3::from_fn(|_, _| r.random_range(-3.0..3.0))];
        let a = eval_sh(&dc, &Vector3::from_fn(|_, _| r.random_range(-1.0..1.0)).normalize()).unwrap();
        let b = eval_sh(&dc, &Vector3::from_fn(|_, _| r.random_range(-1.0..1.0)).normalize()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn pixels_stay_in_unit_range(seed in any::<u64>()) {
        let mut r = rng(seed);
        let deg = r.random_range(0..=2);
        let frame = random_frame(&mut r, 12, deg);
        for cam in ring_cameras(2, 24, 3.0) {
            let img = rasterize(&frame, &cam).unwrap();
            prop_assert!(img.data.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn regularizer_ignores_sign_and_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let frame = random_frame(&mut r, 8, 1);
        let (base, _) = regularizer(&frame, 0.3);
        let mut flipped = frame.clone();
        for g in &mut flipped.gaussians {
            g.rotation = -g.rotation;
        }
        let mut shuffled = frame.clone();
        shuffled.gaussians.shuffle(&mut r);
        prop_assert_eq!(regularizer(&flipped, 0.3).0, base);
        prop_assert!((regularizer(&shuffled, 0.3).0 - base).abs() <= 1e-12 * base.abs());
    }

    #[test]
    fn psnr_is_symmetric_and_shift_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_image(&mut r, 6, 5);
        let b = random_image(&mut r, 6, 5);
        let c = r.random_range(-0.5..0.5);
        let shift = |img: &ImageBuffer| ImageBuffer::from_data(img.width, img.height, img.data.iter().map(|v| v + c).collect()).unwrap();
        let p = psnr(&a, &b).unwrap();
        prop_assert_eq!(p, psnr(&b, &a).unwrap());
        prop_assert!((psnr(&shift(&a), &shift(&b)).unwrap() - p).abs() < 1e-9);
    }

    #[test]
    fn throughput_is_linear(fps in 0.1f64..500.0, k in 1u32..8, w in 1u32..4000, h in 1u32..3000) {
        let base = throughput_mpix(fps, w, h);
        prop_assert!((throughput_mpix(fps * k as f64, w, h) - k as f64 * base).abs() <= 1e-9 * base * k as f64);
        prop_assert!((throughput_mpix(fps, w * k, h) - k as f64 * base).abs() <= 1e-9 * base * k as f64);
    }

    #[test]
    fn nerf_convention_round_trips(seed in any::<u64>()) {
        let pose = random_pose(&mut rng(seed));
        let back = opencv_from_nerf(&nerf_from_opencv(&pose)).unwrap();
        prop_assert!((back.to_matrix() - pose.to_matrix()).amax() < 1e-9);
    }

    #[test]
    fn splits_depend_on_names_only(seed in any::<u64>(), n in 5usize..40) {
        let mut r = rng(seed);
        let intr = CameraIntrinsics::new(10.0, 10.0, 5.0, 5.0, 10, 10).unwrap();
        let mut cams: Vec<Camera> = (0..n).map(|i| Camera::new(camera_name(i), intr, random_pose(&mut r))).collect();
        let test = [0, n / 2];
        let val = [n - 1];
        let a = assign_splits(&cams, &test, &val).unwrap();
        cams.shuffle(&mut r);
        for c in &mut cams {
            c.pose = random_pose(&mut r);
        }
        prop_assert_eq!(assign_splits(&cams, &test, &val).unwrap(), a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn render_is_independent_of_worker_count(seed in any::<u64>()) {
        let mut r = rng(seed);
        let frame = random_frame(&mut r, 30, 1);
        let cam = ring_cameras(1, 48, 3.0).remove(0);
        let one = with_pool(1, || rasterize(&frame, &cam).unwrap());
        let three = with_pool(3, || rasterize(&frame, &cam).unwrap());
        prop_assert_eq!(one.data, three.data);
    }

    #[test]
    fn denser_front_splat_never_brightens_the_back(seed in any::<u64>(), lo in -3.0f64..2.0, step in 0.01f64..3.0) {
        let mut r = rng(seed);
        let cam = ring_cameras(1, 24, 3.0).remove(0);
        let eye = cam.pose.center();
        let mut front = Gaussian::zeros(0);
        front.mean = eye * 0.3;
        front.rotation = Vector4::new(1.0, 0.0, 0.0, 0.0);
        front.log_scale = Vector3::repeat(r.random_range(-2.0..-1.0));
        // Zero SH means a black splat that only attenuates what is behind it.
        let mut back = front.clone();
        back.mean = Vector3::from_fn(|_, _| r.random_range(-0.1..0.1));
        back.opacity_logit = r.random_range(-1.0..3.0);
        back.sh[0] = Vector3::repeat(r.random_range(0.5..2.5));
        let render = |logit: f64| {
            let mut f = front.clone();
            f.opacity_logit = logit;
            rasterize(&GaussianFrame::new(0, 0, vec![f, back.clone()]).unwrap(), &cam).unwrap()
        };
        let (a, b) = (render(lo), render(lo + step));
        prop_assert!(a.data.iter().zip(&b.data).all(|(x, y)| y <= x));
    }

    #[test]
    fn total_loss_adds_over_views(seed in any::<u64>()) {
        let mut r = rng(seed);
        let frame = random_frame(&mut r, 8, 1);
        let cams = ring_cameras(3, 24, 4.0);
        let gts: Vec<ImageBuffer> = (0..3).map(|_| random_image(&mut r, 24, 24)).collect();
        let cfg = LossConfig::default();
        let (all, _) = total_loss(&frame, &cams, &gts, &cfg).unwrap();
        let reg = regularizer(&frame, cfg.lambda_reg).0;
        let parts: f64 = (0..3).map(|i| total_loss(&frame, &cams[i..=i], &gts[i..=i], &cfg).unwrap().0 - reg).sum();
        prop_assert!((all - reg - parts).abs() <= 1e-12 * all.abs());
    }

    #[test]
    fn residual_mask_is_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_image(&mut r, 20, 14);
        let mut b = a.clone();
        for v in b.data.iter_mut() {
            if r.random_bool(0.3) {
                *v = r.random();
            }
        }
        let cfg = VoteConfig::default();
        prop_assert_eq!(build_residual_mask("c", &a, &b, &cfg).unwrap().data, build_residual_mask("c", &b, &a, &cfg).unwrap().data);
    }

    #[test]
    fn voting_is_monotone_in_quorum(seed in any::<u64>(), q in 0.05f64..0.95, dq in 0.0f64..0.5) {
        let mut r = rng(seed);
        let frame = random_frame(&mut r, 40, 0);
        let cams = ring_cameras(4, 24, 3.0);
        let masks: Vec<ResidualMask> = cams
            .iter()
            .map(|c| {
                let mut m = ResidualMask::zeros(c.name.clone(), 24, 24);
                m.data.iter_mut().for_each(|v| *v = r.random_bool(0.4) as u8);
                m
            })
            .collect();
        let vote = |quorum: f64| {
            let cfg = VoteConfig { quorum: quorum.min(1.0), ..VoteConfig::default() };
            multi_view_vote(&frame, &cams, &masks, &cfg).unwrap()
        };
        let (low, high) = (vote(q), vote(q + dq));
        prop_assert!(high.iter().all(|i| low.contains(i)));
    }

    #[test]
    fn merge_keeps_parameters_bit_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_frame(&mut r, 6, 1);
        let b = random_frame(&mut r, 9, 1);
        let keep: Vec<usize> = (0..9).filter(|_| r.random_bool(0.5)).collect();
        let m = merge_ab(&a, &b, &keep).unwrap();
        prop_assert_eq!(&m.gaussians[..6], &a.gaussians[..]);
        for (g, &k) in m.gaussians[6..].iter().zip(&keep) {
            prop_assert_eq!(g, &b.gaussians[k]);
        }
    }

    #[test]
    fn archive_size_is_affine_and_records_are_checked(k in 1usize..20, deg in 0usize..=3, frames in 1usize..6, flip in any::<prop::sample::Index>()) {
        let dir = tempfile::tempdir().unwrap();
        let m = ArchiveManifest::new(k, deg, 0, 1);
        let mut sizes = Vec::new();
        let path = dir.path().join("a.wsa");
        let mut w = ArchiveWriter::create(&path, m.clone()).unwrap();
        let mut r = rng(k as u64);
        for t in 0..frames as i64 {
            let mut f = random_frame(&mut r, k, deg);
            f.t = t;
            w.append_frame(&f).unwrap();
            sizes.push(std::fs::metadata(&path).unwrap().len());
        }
        prop_assert!(sizes.windows(2).all(|s| s[1] - s[0] == m.record_size() as u64));
        let header = sizes[0] - m.record_size() as u64;
        let mut bytes = std::fs::read(&path).unwrap();
        let at = header as usize + flip.index(bytes.len() - header as usize);
        bytes[at] ^= 0x01;
        std::fs::write(&path, &bytes).unwrap();
        let a = Archive::open(&path).unwrap();
        let slot = (at - header as usize) / m.record_size();
        prop_assert!(a.load_frame(slot as i64).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn optimization_keeps_budget_and_is_reproducible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let frame = random_frame(&mut r, 15, 1);
        let cams = ring_cameras(3, 20, 3.0);
        let gts: Vec<ImageBuffer> = (0..3).map(|_| random_image(&mut r, 20, 20)).collect();
        let cfg = TrainConfig { seed, ..TrainConfig::default() };
        let (a, _) = optimize_frame(&frame, &gts, &cams, &cfg, 15, 1.0).unwrap();
        let (b, _) = with_pool(2, || optimize_frame(&frame, &gts, &cams, &cfg, 15, 1.0).unwrap());
        prop_assert_eq!(a.len(), 15);
        prop_assert_eq!(a.to_flat(), b.to_flat());
    }

    #[test]
    fn nearby_frames_are_better_starts_than_distant_ones(seed in 0u64..1000) {
        let cfg = SceneConfig { seed, sh_degree: 0, static_count: 60, cluster_size: 30, max_step: 0.05, ..SceneConfig::default() };
        let scene = GroundTruthScene::new(cfg).unwrap();
        let cams = ring_cameras(3, 32, 3.0);
        let t = 10;
        let images: Vec<ImageBuffer> = cams.iter().map(|c| rasterize(&scene.frame(t), c).unwrap()).collect();
        let loss = |from: i64| {
            let mut f = scene.frame(from);
            f.t = t;
            warmsplat::objective::total_loss_value(&f, &cams, &images, &LossConfig::default()).unwrap()
        };
        for d in [1, -1] {
            prop_assert!(loss(t + d) < loss(t + 10 * d));
            prop_assert!(loss(t + d) < loss(t + 15 * d));
        }
    }
}

#[test]
fn rotation_matrix_has_unit_determinant() {
    let mut r = rng(3);
    let m: Matrix3<f64> = quat_to_rotation(&unit_quat(&mut r));
    assert!((m.determinant() - 1.0).abs() < 1e-12);
}
