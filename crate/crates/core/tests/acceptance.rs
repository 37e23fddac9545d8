//! Acceptance suite. Each test prints one `PASS`/`FAIL` line straight to
//! stdout (bypassing the test harness capture) and then asserts.

use std::io::Write as _;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use physcon_core::collision::{
    distance_gradient, epa_penetration, signed_distance, smoothing_noise, ConvexPart,
};
use physcon_core::costs::{pose_cost_and_grad, ActiveSet, CostEvaluation, Evaluator, GradientMode};
use physcon_core::eval::{eval_mspd, eval_mssd, SymmetrySet};
use physcon_core::optimizer::{refine_scene, OptimizerConfig, RefinementReport};
use physcon_core::scene::{MovableObject, StaticObject};
use physcon_core::scenegeom::{
    estimate_scale_ransac, estimate_scene_geometry, fit_plane_ransac, CorrespondencePair, PointCloud,
    SceneGeomParams,
};
use physcon_core::se3::{exp_se3, exp_so3, log_so3};
use physcon_core::synth::{generate_synthetic_scene, NoiseModel};
use physcon_core::{CostWeights, CovarianceParams, Pose, Scene, Vec3, Vec6};

fn verdict(name: &str, ok: bool, detail: String) {
    let line = format!("{} {name}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "{name}: {detail}");
}

fn rel_err(a: &Vec6, fd: &Vec6) -> f64 {
    (a - fd).norm() / fd.norm().max(1e-6)
}

fn rand_vec(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec3 {
    Vec3::from_fn(|_, _| rng.random_range(lo..hi))
}

/// Random rotation vector with angle uniform in `[0, max_angle)`.
fn rand_rotvec(rng: &mut ChaCha8Rng, max_angle: f64) -> Vec3 {
    let axis = loop {
        let v = rand_vec(rng, -1.0, 1.0);
        if v.norm() > 0.1 && v.norm() < 1.0 {
            break v.normalize();
        }
    };
    axis * rng.random_range(0.0..max_angle)
}

// Gradient fidelity -------------------------------------------------------

/// Table with its top face at z = 0, gravity along -z.
fn flat_table() -> StaticObject {
    StaticObject {
        name: "table".into(),
        parts: vec![ConvexPart::cuboid(Vec3::new(0.5, 0.5, 0.025)).unwrap()],
        pose: Pose::from_translation(Vec3::new(0.0, 0.0, -0.025)),
    }
}

fn random_part(rng: &mut ChaCha8Rng) -> ConvexPart {
    if rng.random_bool(0.5) {
        ConvexPart::cuboid(rand_vec(rng, 0.02, 0.05)).unwrap()
    } else {
        ConvexPart::cylinder(rng.random_range(0.02..0.04), rng.random_range(0.04..0.1), 12).unwrap()
    }
}

/// Two or three objects near the table, overlapping each other and the
/// table in some configurations and floating in others. The priors sit at
/// a random rotation and translation away from the current poses.
fn random_config(seed: u64) -> (Scene, Vec<Pose>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=3);
    let mut movables = Vec::new();
    let mut poses = Vec::new();
    for k in 0..n {
        let parts = if rng.random_bool(0.3) {
            let a = random_part(&mut rng);
            let offset = rand_vec(&mut rng, -0.03, 0.03);
            let b: Vec<Vec3> = random_part(&mut rng).vertices().iter().map(|v| v + offset).collect();
            vec![a, ConvexPart::from_points(&b).unwrap()]
        } else {
            vec![random_part(&mut rng)]
        };
        let pose = Pose::new(
            exp_so3(&rand_rotvec(&mut rng, 3.0)),
            Vec3::new(
                rng.random_range(-0.06..0.06),
                rng.random_range(-0.06..0.06),
                rng.random_range(-0.01..0.12),
            ),
        );
        let prior = Pose::new(
            pose.rotation.compose(&exp_so3(&rand_rotvec(&mut rng, std::f64::consts::PI))),
            pose.translation + rand_vec(&mut rng, -0.05, 0.05),
        );
        movables.push(MovableObject::new(format!("m{k}"), parts, prior, CovarianceParams::default()).unwrap());
        poses.push(pose);
    }
    let scene = Scene::new(movables, vec![flat_table()], -Vec3::z(), CostWeights::default()).unwrap();
    (scene, poses)
}

/// Central differences of `f` along the right tangent of `poses[i]`.
fn fd<F: Fn(&[Pose]) -> Vec<f64>>(poses: &[Pose], i: usize, f: F) -> Vec<Vec6> {
    let h = 1e-6;
    let mut out: Vec<Vec6> = Vec::new();
    for k in 0..6 {
        let mut e = Vec6::zeros();
        e[k] = h;
        let mut plus = poses.to_vec();
        plus[i] = poses[i].retract(&e);
        let mut minus = poses.to_vec();
        minus[i] = poses[i].retract(&-e);
        let (a, b) = (f(&plus), f(&minus));
        if out.is_empty() {
            out = vec![Vec6::zeros(); a.len()];
        }
        for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(&b)) {
            o[k] = (x - y) / (2.0 * h);
        }
    }
    out
}

/// Every part-pair signed distance between object `i` and anything else.
fn pair_distances(scene: &Scene, poses: &[Pose], i: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut others: Vec<(&[ConvexPart], Pose)> = Vec::new();
    for (j, m) in scene.movables.iter().enumerate() {
        if j != i {
            others.push((&m.parts, poses[j]));
        }
    }
    for s in &scene.statics {
        others.push((&s.parts, s.pose));
    }
    for a in &scene.movables[i].parts {
        for (parts, pose) in &others {
            for b in *parts {
                out.push(signed_distance(a, &poses[i], b, pose).unwrap().signed_distance);
            }
        }
    }
    out
}

#[derive(Default)]
struct GradStats {
    checked: usize,
    worst: f64,
    failures: usize,
}

impl GradStats {
    fn add(&mut self, err: f64, tol: f64) {
        self.checked += 1;
        self.worst = self.worst.max(err);
        if err.is_nan() || err >= tol {
            self.failures += 1;
        }
    }
}

#[test]
fn gradient_fidelity() {
    let start = Instant::now();
    let mut pose = GradStats::default();
    let mut gravity = GradStats::default();
    let mut collision = GradStats::default();
    let mut total = GradStats::default();
    let mut smoothed = GradStats::default();
    let mode = GradientMode::Deterministic;
    for seed in 0..200u64 {
        let (scene, poses) = random_config(seed);
        let eval = Evaluator::new(&scene);
        let at = eval.evaluate(&poses, None, true, &mode, 0).unwrap();
        let frozen = |p: &[Pose], active: &ActiveSet| -> CostEvaluation {
            eval.evaluate(p, Some(active), false, &mode, 0).unwrap()
        };
        for i in 0..scene.movables.len() {
            let prior = &scene.movables[i].prior;
            let theta = log_so3(&prior.estimate.rotation.transpose().compose(&poses[i].rotation));
            if theta.norm() <= std::f64::consts::PI - 0.1 {
                let g = pose_cost_and_grad(&poses[i], prior).1;
                let num = fd(&poses, i, |p| vec![pose_cost_and_grad(&p[i], prior).0]);
                pose.add(rel_err(&g, &num[0]), 1e-3);
            }

            let dists = pair_distances(&scene, &poses, i);
            let near_kink = dists.iter().any(|d| d.abs() < 1e-4);
            let num = fd(&poses, i, |p| {
                let e = frozen(p, &at.active);
                vec![e.collision[i], e.gravity[i], e.total]
            });
            if !near_kink && at.collision[i] > 0.0 {
                collision.add(rel_err(&at.collision_grads[i], &num[0]), 1e-3);
            }
            if !near_kink && at.gravity[i] > 0.0 {
                gravity.add(rel_err(&at.gravity_grads[i], &num[1]), 1e-3);
            }
            let all_kinks = (0..scene.movables.len())
                .flat_map(|j| pair_distances(&scene, &poses, j))
                .any(|d| d.abs() < 1e-4);
            if !all_kinks && theta.norm() <= std::f64::consts::PI - 0.1 {
                total.add(rel_err(&at.grads[i], &num[2]), 1e-3);
            }
        }

        // Smoothed gradient of the first overlapping movable/table part pair.
        let table = &scene.statics[0];
        'pairs: for (i, m) in scene.movables.iter().enumerate() {
            for part in &m.parts {
                let d = signed_distance(part, &poses[i], &table.parts[0], &table.pose)
                    .unwrap()
                    .signed_distance;
                if d < -1e-4 {
                    let (scale, samples) = (1e-3, 64);
                    let g = distance_gradient(part, &poses[i], &table.parts[0], &table.pose, scale, samples, seed)
                        .unwrap();
                    let noise = smoothing_noise(seed, scale, samples);
                    let num = fd(&poses, i, |p| {
                        let v = noise
                            .iter()
                            .map(|e| {
                                signed_distance(part, &p[i].retract(e), &table.parts[0], &table.pose)
                                    .unwrap()
                                    .signed_distance
                            })
                            .sum::<f64>()
                            / noise.len() as f64;
                        vec![v]
                    });
                    smoothed.add(rel_err(&g.grad_a, &num[0]), 0.05);
                    break 'pairs;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let groups = [
        ("pose", &pose),
        ("gravity", &gravity),
        ("collision", &collision),
        ("total", &total),
        ("smoothed", &smoothed),
    ];
    let ok = groups.iter().all(|(_, g)| g.failures == 0 && g.checked >= 50) && elapsed < Duration::from_secs(60);
    let detail = groups
        .iter()
        .map(|(n, g)| format!("{n} {}/{} worst {:.1e}", g.checked - g.failures, g.checked, g.worst))
        .collect::<Vec<_>>()
        .join(", ");
    verdict("gradient_fidelity", ok, format!("{detail}; {:.1} s", elapsed.as_secs_f64()));
}

// Analytic geometry -------------------------------------------------------

#[test]
fn box_box_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_sd = 0.0f64;
    let mut worst_epa = 0.0f64;
    let mut cases = [0usize; 3];
    for k in 0..100 {
        let a = Vec3::new(0.05, 0.04, 0.03) + rand_vec(&mut rng, 0.0, 0.03);
        let b = Vec3::new(0.03, 0.05, 0.04) + rand_vec(&mut rng, 0.0, 0.03);
        let sum = a + b;
        let sign = Vec3::from_fn(|_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
        // Per-axis gap between the faces; negative is overlap.
        let kind = k % 3;
        let gap = match kind {
            0 => {
                // Separated across one, two or three axes.
                let mut g = Vec3::from_fn(|i, _| -sum[i] * rng.random_range(0.1..0.9));
                for i in 0..=(k / 3) % 3 {
                    g[i] = rng.random_range(0.005..0.1);
                }
                g
            }
            1 => {
                // Touching across one or two axes.
                let mut g = Vec3::from_fn(|i, _| -sum[i] * rng.random_range(0.1..0.9));
                for i in 0..=(k / 3) % 2 {
                    g[i] = 0.0;
                }
                g
            }
            _ => Vec3::from_fn(|i, _| -sum[i] * rng.random_range(0.05..0.95)),
        };
        cases[kind] += 1;
        let center = Vec3::from_fn(|i, _| sign[i] * (sum[i] + gap[i]));
        let expected = if gap.max() > 0.0 {
            gap.map(|g| g.max(0.0)).norm()
        } else {
            gap.max()
        };
        // The closed form is invariant under a common rigid motion.
        let w = exp_se3(&Vec6::from_fn(|_, _| rng.random_range(-2.0..2.0)));
        let (pa, pb) = (w, w.compose(&Pose::from_translation(center)));
        let (ca, cb) = (ConvexPart::cuboid(a).unwrap(), ConvexPart::cuboid(b).unwrap());
        let sd = signed_distance(&ca, &pa, &cb, &pb).unwrap().signed_distance;
        worst_sd = worst_sd.max((sd - expected).abs());
        if kind == 2 {
            let depth = epa_penetration(&ca, &pa, &cb, &pb).unwrap().signed_distance;
            worst_epa = worst_epa.max((depth - expected).abs());
        }
    }
    let ok = worst_sd <= 1e-5 && worst_epa <= 1e-4;
    verdict(
        "box_box_closed_form",
        ok,
        format!(
            "{} separated, {} touching, {} overlapping; max signed-distance error {:.1e}, max EPA depth error {:.1e}",
            cases[0], cases[1], cases[2], worst_sd, worst_epa
        ),
    );
}

// Fixed points and stacking -----------------------------------------------

const TABLE_TOP: f64 = 1.0;
const HALF: f64 = 0.05;

/// Camera looking down at a table whose top is 1 m away; gravity is +z.
fn tabletop(movables: Vec<MovableObject>) -> Scene {
    let table = StaticObject {
        name: "table".into(),
        parts: vec![ConvexPart::cuboid(Vec3::new(0.5, 0.5, 0.025)).unwrap()],
        pose: Pose::from_translation(Vec3::new(0.0, 0.0, TABLE_TOP + 0.025)),
    };
    Scene::new(movables, vec![table], Vec3::z(), CostWeights::default()).unwrap()
}

fn cube_at(name: &str, center: Vec3, yaw: f64) -> MovableObject {
    MovableObject::new(
        name,
        vec![ConvexPart::cuboid(Vec3::repeat(HALF)).unwrap()],
        Pose::new(exp_so3(&Vec3::new(0.0, 0.0, yaw)), center),
        CovarianceParams::default(),
    )
    .unwrap()
}

fn distance_between(a: &Pose, part_a: &ConvexPart, b: &Pose, part_b: &ConvexPart) -> f64 {
    signed_distance(part_a, a, part_b, b).unwrap().signed_distance
}

struct FixedPointCase {
    name: &'static str,
    /// Signed distance to the table at the prior.
    initial: f64,
}

#[test]
fn fixed_points() {
    let cases = [
        FixedPointCase {
            name: "levitating 5 cm",
            initial: 0.05,
        },
        FixedPointCase {
            name: "penetrating 2 cm",
            initial: -0.02,
        },
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (k, c) in cases.iter().enumerate() {
        let center = Vec3::new(0.1 - 0.15 * k as f64, -0.05, TABLE_TOP - HALF - c.initial);
        let scene = tabletop(vec![cube_at("box", center, 0.3)]);
        let start = Instant::now();
        let report = refine_scene(&scene, &OptimizerConfig::default()).unwrap();
        let elapsed = start.elapsed();
        let table = &scene.statics[0];
        let part = &scene.movables[0].parts[0];
        let fin = report.final_poses[0];
        let d = distance_between(&fin, part, &table.pose, &table.parts[0]);
        // Lateral means perpendicular to the viewing ray, the direction the
        // prior pins down; motion along the ray is what its loose depth
        // uncertainty allows.
        let shift = fin.translation - center;
        let ray = center.normalize();
        let drift = (shift - ray * ray.dot(&shift)).norm();
        let horizontal = shift.xy().norm();
        let resolved = if c.initial > 0.0 { d <= 1e-3 } else { d >= -1e-3 };
        let case_ok = resolved && drift <= 2e-3 && report.iterations <= 300 && elapsed < Duration::from_secs(5);
        ok &= case_ok;
        details.push(format!(
            "{}: distance {:+.6} mm, lateral drift {:.2} mm (horizontal {:.2} mm), {} iterations ({:?}), {:.3} s",
            c.name,
            d * 1e3,
            drift * 1e3,
            horizontal * 1e3,
            report.iterations,
            report.termination,
            elapsed.as_secs_f64()
        ));
    }
    verdict("fixed_points", ok, details.join("; "));
}

#[test]
fn stacking() {
    // Bottom box resting on the table, top box sunk 2 mm into it. The top
    // box is in contact, so its gravity term is off from the start.
    let bottom = Vec3::new(0.02, 0.01, TABLE_TOP - HALF - 1e-4);
    let top = Vec3::new(0.025, 0.012, bottom.z - 2.0 * HALF + 2e-3);
    let scene = tabletop(vec![cube_at("top", top, 0.2), cube_at("bottom", bottom, 0.1)]);
    let eval = Evaluator::new(&scene);
    let initial = eval
        .evaluate(&scene.poses(), None, false, &GradientMode::Deterministic, 0)
        .unwrap();
    let report = refine_scene(&scene, &OptimizerConfig::default()).unwrap();
    let part = &scene.movables[0].parts[0];
    let table = &scene.statics[0];
    let (pt, pb) = (report.final_poses[0], report.final_poses[1]);
    let between = distance_between(&pt, part, &pb, part);
    let top_to_table = distance_between(&pt, part, &table.pose, &table.parts[0]);
    let bottom_to_table = distance_between(&pb, part, &table.pose, &table.parts[0]);
    let ok = !initial.active.free[0] && between >= -1e-3 && top_to_table >= 2.0 * HALF - 3e-3;
    verdict(
        "stacking",
        ok,
        format!(
            "top-bottom {:+.2} mm, top-table {:.1} mm, bottom-table {:+.2} mm, {} iterations",
            between * 1e3,
            top_to_table * 1e3,
            bottom_to_table * 1e3,
            report.iterations
        ),
    );
}

// Desk-scale synthetic scenes ---------------------------------------------

const ABLATIONS: [&str; 4] = ["full", "no pose", "no collision", "no gravity"];

struct DeskResults {
    prior_mssd: f64,
    prior_mspd: f64,
    /// Mean MSSD/MSPD per entry of `ABLATIONS`.
    mssd: [f64; 4],
    mspd: [f64; 4],
    objects: usize,
    full_time: Duration,
}

fn weights(ablation: usize) -> CostWeights {
    let mut w = CostWeights::default();
    match ablation {
        1 => w.pose = 0.0,
        2 => w.collision = 0.0,
        3 => w.gravity = 0.0,
        _ => {}
    }
    w
}

fn desk_results() -> &'static DeskResults {
    static RESULTS: OnceLock<DeskResults> = OnceLock::new();
    RESULTS.get_or_init(|| {
        let noise = NoiseModel::default();
        let id = SymmetrySet::identity();
        let mut r = DeskResults {
            prior_mssd: 0.0,
            prior_mspd: 0.0,
            mssd: [0.0; 4],
            mspd: [0.0; 4],
            objects: 0,
            full_time: Duration::ZERO,
        };
        for seed in 0..50u64 {
            let s = generate_synthetic_scene(seed, 3 + (seed % 4) as usize, &noise).unwrap();
            let camera = s.scene.camera.unwrap();
            let points: Vec<Vec<Vec3>> = s.scene.movables.iter().map(|m| m.model_points()).collect();
            for (i, m) in s.scene.movables.iter().enumerate() {
                r.prior_mssd += eval_mssd(&m.pose, &s.ground_truth[i], &points[i], &id);
                r.prior_mspd += eval_mspd(&m.pose, &s.ground_truth[i], &points[i], &id, &camera).unwrap();
                r.objects += 1;
            }
            for a in 0..ABLATIONS.len() {
                let mut scene = s.scene.clone();
                scene.weights = weights(a);
                let start = Instant::now();
                let report = refine_scene(&scene, &OptimizerConfig::default()).unwrap();
                if a == 0 {
                    r.full_time += start.elapsed();
                }
                for (i, est) in report.final_poses.iter().enumerate() {
                    r.mssd[a] += eval_mssd(est, &s.ground_truth[i], &points[i], &id);
                    r.mspd[a] += eval_mspd(est, &s.ground_truth[i], &points[i], &id, &camera).unwrap();
                }
            }
        }
        let n = r.objects as f64;
        r.prior_mssd /= n;
        r.prior_mspd /= n;
        for a in 0..ABLATIONS.len() {
            r.mssd[a] /= n;
            r.mspd[a] /= n;
        }
        r
    })
}

#[test]
fn desk_scale_refinement() {
    let r = desk_results();
    let d_mssd = r.mssd[0] / r.prior_mssd - 1.0;
    let d_mspd = r.mspd[0] / r.prior_mspd - 1.0;
    let ok = d_mssd <= -0.2 && d_mspd.abs() < d_mssd.abs() && r.full_time < Duration::from_secs(300);
    verdict(
        "desk_scale_refinement",
        ok,
        format!(
            "{} objects in 50 scenes; MSSD {:.4} -> {:.4} m ({:+.1}%), MSPD {:.2} -> {:.2} px ({:+.1}%), {:.1} s",
            r.objects,
            r.prior_mssd,
            r.mssd[0],
            100.0 * d_mssd,
            r.prior_mspd,
            r.mspd[0],
            100.0 * d_mspd,
            r.full_time.as_secs_f64()
        ),
    );
}

#[test]
fn cost_term_ablation() {
    let r = desk_results();
    let no_better = (1..4).all(|a| r.mssd[a] >= r.mssd[0]);
    let pose_worst = (2..4).all(|a| r.mssd[1] > r.mssd[a]);
    let detail = ABLATIONS
        .iter()
        .zip(&r.mssd)
        .map(|(n, m)| format!("{n} {m:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict("cost_term_ablation", no_better && pose_worst, format!("mean MSSD (m): {detail}"));
}

// Scene geometry ----------------------------------------------------------

/// Ten points per object: cloud coordinates and their metric counterparts.
fn correspondences(rng: &mut ChaCha8Rng, scale: f64, objects: usize) -> Vec<CorrespondencePair> {
    let mut out = Vec::new();
    for o in 0..objects {
        let center = rand_vec(rng, -0.3, 0.3) + Vec3::new(0.0, 0.0, 1.0);
        for _ in 0..10 {
            let metric = center + rand_vec(rng, -0.08, 0.08);
            out.push(CorrespondencePair {
                object_id: format!("obj{o}"),
                cloud: metric / scale,
                metric,
            });
        }
    }
    out
}

#[test]
fn scale_ransac() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let clean = correspondences(&mut rng, 1.7, 3);
    let clean_err = (estimate_scale_ransac(&clean, 1000, 0.05, 0).unwrap() - 1.7).abs();

    let mut worst = 0.0f64;
    let noise = Normal::new(0.0, 5e-4).unwrap();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = rng.random_range(0.5..3.0);
        let mut pairs = correspondences(&mut rng, scale, 3);
        for (k, p) in pairs.iter_mut().enumerate() {
            if k % 5 == seed as usize % 5 {
                // One in five correspondences is a wrong match.
                p.metric = rand_vec(&mut rng, -0.5, 0.5) + Vec3::new(0.0, 0.0, 1.0);
            } else {
                p.metric += Vec3::from_fn(|_, _| noise.sample(&mut rng));
            }
        }
        let est = estimate_scale_ransac(&pairs, 1000, 0.05, seed).unwrap();
        worst = worst.max((est / scale - 1.0).abs());
    }
    let ok = clean_err <= 1e-9 && worst <= 0.005;
    verdict(
        "scale_ransac",
        ok,
        format!(
            "clean error {clean_err:.1e}; 20% outliers, 100 seeds, worst relative error {:.3}%",
            100.0 * worst
        ),
    );
}

#[test]
fn plane_ransac() {
    let mut passed = 0;
    let mut worst_angle = 0.0f64;
    let mut worst_offset = 0.0f64;
    let noise = Normal::new(0.0, 1e-3).unwrap();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        // A table 0.5-1 m below the camera, seen at up to 60 degrees of tilt.
        let tilt = rand_rotvec(&mut rng, 60f64.to_radians());
        let normal = exp_so3(&Vec3::new(tilt.x, tilt.y, 0.0)).rotate(&-Vec3::z());
        let offset = -rng.random_range(0.5..1.0);
        let helper = if normal.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let u = helper.cross(&normal).normalize();
        let v = normal.cross(&u);
        let origin = normal * offset;
        let mut points = Vec::with_capacity(1000);
        for k in 0..1000 {
            if k % 10 < 3 {
                points.push(origin + rand_vec(&mut rng, -0.5, 0.5));
            } else {
                let (a, b) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
                points.push(origin + u * a + v * b + normal * noise.sample(&mut rng));
            }
        }
        let plane = fit_plane_ransac(&PointCloud::from_points(points), 1000, 0.005, seed).unwrap();
        let angle = plane.normal.dot(&normal).clamp(-1.0, 1.0).acos().to_degrees();
        let off = (plane.offset - offset).abs();
        worst_angle = worst_angle.max(angle);
        worst_offset = worst_offset.max(off);
        if angle <= 1.0 && off <= 3e-3 {
            passed += 1;
        }
    }
    verdict(
        "plane_ransac",
        passed >= 99,
        format!(
            "{passed}/100 seeds within 1 deg / 3 mm; worst {worst_angle:.3} deg, {:.2} mm",
            worst_offset * 1e3
        ),
    );
}

// Determinism -------------------------------------------------------------

fn report_bytes(report: &RefinementReport) -> String {
    let poses: Vec<String> = report.final_poses.iter().map(|p| format!("{p:?}")).collect();
    format!("{}\n{}", serde_json::to_string(report).unwrap(), poses.join("\n"))
}

fn determinism_run() -> Vec<String> {
    let mut out = Vec::new();
    for (seed, smoothed) in [(11u64, false), (12, true)] {
        let s = generate_synthetic_scene(seed, 6, &NoiseModel::default()).unwrap();
        let config = OptimizerConfig {
            seed,
            smoothed_collisions: smoothed,
            ..OptimizerConfig::default()
        };
        out.push(report_bytes(&refine_scene(&s.scene, &config).unwrap()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs = correspondences(&mut rng, 2.0, 2);
    let cloud: Vec<Vec3> = (0..2000)
        .map(|k| {
            let p = rand_vec(&mut rng, -0.25, 0.25);
            if k % 4 == 0 {
                p
            } else {
                Vec3::new(p.x, 0.2 + 1e-4 * p.y, 0.5 + p.z)
            }
        })
        .collect();
    let geom = estimate_scene_geometry(&PointCloud::from_points(cloud), &pairs, &SceneGeomParams::default()).unwrap();
    out.push(serde_json::to_string(&geom).unwrap());
    out
}

#[test]
fn determinism() {
    let pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(determinism_run)
    };
    let first = determinism_run();
    let second = determinism_run();
    let single = pool(1);
    let four = pool(4);
    let ok = first == second && first == single && first == four;
    verdict(
        "determinism",
        ok,
        format!(
            "{} outputs (deterministic refine, smoothed refine, scene geometry): repeat {}, 1 thread {}, 4 threads {}",
            first.len(),
            if first == second { "identical" } else { "differs" },
            if first == single { "identical" } else { "differs" },
            if first == four { "identical" } else { "differs" },
        ),
    );
}
