//! Scene cost and its gradient with respect to every movable pose.
//!
//! Per movable object `i` the cost is
//! `w_P P_i + w_C C_i + w_G G_i` where `P_i` is the Mahalanobis pose cost,
//! `C_i` the sum of hinge penetration costs against every other object, and
//! `G_i` the mean positive distance of its parts to the static part below it,
//! switched off while the object touches anything. A movable-movable pair
//! therefore enters the total twice, once through each endpoint.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{
    signed_distance_placed, smoothed_gradient, smoothing_noise, witness_gradient, ConvexPart,
    PlacedPart, ACTIVATION_MARGIN,
};
use crate::error::Result;
use crate::scene::{PosePrior, Scene};
use crate::se3::{log_jacobian_inv, log_so3, Pose, Vec6};
use crate::util::mix_seed;

/// How collision gradients are computed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum GradientMode {
    /// Exact witness-point gradient.
    #[default]
    Deterministic,
    /// Gaussian smoothing of the moving part's pose.
    Smoothed {
        noise_scale: f64,
        samples: usize,
        seed: u64,
    },
}

impl GradientMode {
    pub fn smoothed(seed: u64) -> GradientMode {
        GradientMode::Smoothed {
            noise_scale: 1e-3,
            samples: 32,
            seed,
        }
    }
}

/// A convex part of a static object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartRef {
    pub object: usize,
    pub part: usize,
}

/// Discrete state held fixed while differentiating: the support indicator
/// and the static part each object is pulled toward.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    /// `true` when the object touches nothing (gravity cost enabled).
    pub free: Vec<bool>,
    pub gravity_target: Vec<Option<PartRef>>,
}

#[derive(Debug, Clone)]
pub struct CostEvaluation {
    pub total: f64,
    /// Unweighted per-object terms.
    pub pose: Vec<f64>,
    pub collision: Vec<f64>,
    pub gravity: Vec<f64>,
    /// Gradient of `total` for each movable (empty if not requested).
    pub grads: Vec<Vec6>,
    /// Gradient of each object's own collision term `C_i` w.r.t. its pose.
    pub collision_grads: Vec<Vec6>,
    /// Gradient of each object's gravity term `G_i` w.r.t. its pose.
    pub gravity_grads: Vec<Vec6>,
    pub active: ActiveSet,
}

/// `P = 1/2 e^T H e` with `e = [t - t~; log(R~^T R)]`, and its gradient in
/// the right tangent of the current pose.
pub fn pose_cost_and_grad(current: &Pose, prior: &PosePrior) -> (f64, Vec6) {
    let est = &prior.estimate;
    let dt = current.translation - est.translation;
    let theta = log_so3(&est.rotation.transpose().compose(&current.rotation));
    let e = Vec6::new(dt.x, dt.y, dt.z, theta.x, theta.y, theta.z);
    let he = prior.precision * e;
    let cost = 0.5 * e.dot(&he);
    let gt = current.rotation.transpose().rotate(&he.fixed_rows::<3>(0).into_owned());
    let gr = log_jacobian_inv(&theta).transpose() * he.fixed_rows::<3>(3);
    (cost, Vec6::new(gt.x, gt.y, gt.z, gr.x, gr.y, gr.z))
}

/// Hinge cost between two objects, averaged over the colliding part pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCost {
    pub cost: f64,
    pub grad_a: Vec6,
    pub grad_b: Vec6,
    pub colliding_pairs: usize,
}

/// Collision cost of two part sets with deterministic gradients.
pub fn pairwise_collision_cost(
    a: &[ConvexPart],
    pose_a: &Pose,
    b: &[ConvexPart],
    pose_b: &Pose,
) -> Result<PairCost> {
    let pa: Vec<PlacedPart> = a.iter().map(|p| p.place(pose_a)).collect();
    let pb: Vec<PlacedPart> = b.iter().map(|p| p.place(pose_b)).collect();
    let mut samples = Vec::new();
    for x in &pa {
        for y in &pb {
            if x.sphere_gap(y) < ACTIVATION_MARGIN {
                let r = signed_distance_placed(x, y)?;
                let g = witness_gradient(&r, pose_a, pose_b);
                samples.push((r.signed_distance, Some(g)));
            }
        }
    }
    Ok(hinge(&samples))
}

fn hinge(samples: &[(f64, Option<(Vec6, Vec6)>)]) -> PairCost {
    let mut out = PairCost {
        cost: 0.0,
        grad_a: Vec6::zeros(),
        grad_b: Vec6::zeros(),
        colliding_pairs: 0,
    };
    for (d, g) in samples {
        if *d < 0.0 {
            out.colliding_pairs += 1;
            out.cost -= d;
            if let Some((ga, gb)) = g {
                out.grad_a -= ga;
                out.grad_b -= gb;
            }
        }
    }
    if out.colliding_pairs > 0 {
        let n = out.colliding_pairs as f64;
        out.cost /= n;
        out.grad_a /= n;
        out.grad_b /= n;
    }
    out
}

#[derive(Debug, Clone, Copy)]
enum Other {
    Movable(usize),
    Static(usize),
}

struct Job {
    i: usize,
    other: Other,
    p: usize,
    q: usize,
}

/// Evaluates the scene cost at arbitrary movable poses. Holds the static
/// parts already placed.
pub struct Evaluator<'a> {
    scene: &'a Scene,
    statics: Vec<Vec<PlacedPart>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(scene: &'a Scene) -> Evaluator<'a> {
        let statics = scene
            .statics
            .iter()
            .map(|s| s.parts.iter().map(|p| p.place(&s.pose)).collect())
            .collect();
        Evaluator { scene, statics }
    }

    pub fn scene(&self) -> &Scene {
        self.scene
    }

    /// Nearest static part hit by the ray from the object's centroid along
    /// gravity. Ties go to the lowest index.
    pub fn gravity_target(&self, i: usize, pose: &Pose) -> Option<PartRef> {
        let obj = &self.scene.movables[i];
        let origin = pose.act(&obj.centroid());
        let mut best: Option<(f64, PartRef)> = None;
        for (k, s) in self.scene.statics.iter().enumerate() {
            for (q, part) in s.parts.iter().enumerate() {
                if let Some(hit) = part.ray_cast(&s.pose, &origin, &self.scene.gravity) {
                    if best.is_none_or(|(b, _)| hit < b) {
                        best = Some((hit, PartRef { object: k, part: q }));
                    }
                }
            }
        }
        best.map(|(_, r)| r)
    }

    /// Cost (and optionally gradients) at `poses`. When `active` is `None`
    /// the support indicator and gravity targets are derived from `poses`.
    pub fn evaluate(
        &self,
        poses: &[Pose],
        active: Option<&ActiveSet>,
        want_grad: bool,
        mode: &GradientMode,
        iteration: u64,
    ) -> Result<CostEvaluation> {
        let scene = self.scene;
        let n = scene.movables.len();
        assert_eq!(poses.len(), n, "one pose per movable object");
        let w = scene.weights;

        let placed: Vec<Vec<PlacedPart>> = scene
            .movables
            .iter()
            .zip(poses)
            .map(|(m, pose)| m.parts.iter().map(|p| p.place(pose)).collect())
            .collect();

        // Candidate part pairs in a fixed order.
        let mut jobs = Vec::new();
        for i in 0..n {
            let others = (i + 1..n)
                .map(Other::Movable)
                .chain((0..scene.statics.len()).map(Other::Static));
            for other in others {
                let parts_b = match other {
                    Other::Movable(j) => &placed[j],
                    Other::Static(k) => &self.statics[k],
                };
                for (p, pa) in placed[i].iter().enumerate() {
                    for (q, pb) in parts_b.iter().enumerate() {
                        if pa.sphere_gap(pb) < ACTIVATION_MARGIN {
                            jobs.push(Job { i, other, p, q });
                        }
                    }
                }
            }
        }

        let grad_collision = want_grad && w.collision > 0.0;
        let results: Vec<(f64, Option<(Vec6, Vec6)>)> = jobs
            .par_iter()
            .map(|job| {
                let pa = &placed[job.i][job.p];
                let (pb, pose_b) = match job.other {
                    Other::Movable(j) => (&placed[j][job.q], poses[j]),
                    Other::Static(k) => (&self.statics[k][job.q], scene.statics[k].pose),
                };
                let r = signed_distance_placed(pa, pb)?;
                let d = r.signed_distance;
                if !(grad_collision && d < 0.0) {
                    return Ok((d, None));
                }
                let g = match mode {
                    GradientMode::Deterministic => witness_gradient(&r, &poses[job.i], &pose_b),
                    GradientMode::Smoothed {
                        noise_scale,
                        samples,
                        seed,
                    } => {
                        let other_id = match job.other {
                            Other::Movable(j) => j as u64,
                            Other::Static(k) => (n + k) as u64,
                        };
                        let s = mix_seed(
                            *seed,
                            &[iteration, job.i as u64, other_id, job.p as u64, job.q as u64],
                        );
                        let noise = smoothing_noise(s, *noise_scale, *samples);
                        let part = &scene.movables[job.i].parts[job.p];
                        let sg = smoothed_gradient(part, &poses[job.i], pb, &noise)?;
                        (sg.grad_a, sg.grad_b)
                    }
                };
                Ok((d, Some(g)))
            })
            .collect::<Result<_>>()?;

        let mut collision = vec![0.0; n];
        let mut collision_grads = vec![Vec6::zeros(); n];
        let mut grads = vec![Vec6::zeros(); n];
        let mut min_dist = vec![f64::INFINITY; n];

        let mut start = 0;
        while start < jobs.len() {
            let (i, other) = (jobs[start].i, jobs[start].other);
            let same = |j: &Job| {
                j.i == i
                    && match (j.other, other) {
                        (Other::Movable(a), Other::Movable(b)) => a == b,
                        (Other::Static(a), Other::Static(b)) => a == b,
                        _ => false,
                    }
            };
            let mut end = start;
            while end < jobs.len() && same(&jobs[end]) {
                end += 1;
            }
            let pc = hinge(&results[start..end]);
            for (d, _) in &results[start..end] {
                min_dist[i] = min_dist[i].min(*d);
                if let Other::Movable(j) = other {
                    min_dist[j] = min_dist[j].min(*d);
                }
            }
            collision[i] += pc.cost;
            collision_grads[i] += pc.grad_a;
            match other {
                Other::Movable(j) => {
                    collision[j] += pc.cost;
                    collision_grads[j] += pc.grad_b;
                    // The pair appears in both C_i and C_j.
                    grads[i] += 2.0 * w.collision * pc.grad_a;
                    grads[j] += 2.0 * w.collision * pc.grad_b;
                }
                Other::Static(_) => grads[i] += w.collision * pc.grad_a,
            }
            start = end;
        }

        let active = match active {
            Some(a) => a.clone(),
            None => ActiveSet {
                free: min_dist
                    .iter()
                    .map(|d| !(*d < scene.contact_tolerance))
                    .collect(),
                gravity_target: (0..n).map(|i| self.gravity_target(i, &poses[i])).collect(),
            },
        };

        let gravity_terms: Vec<(f64, Vec6)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let target = match (active.free[i], active.gravity_target[i]) {
                    (true, Some(t)) => t,
                    _ => return Ok((0.0, Vec6::zeros())),
                };
                let pb = &self.statics[target.object][target.part];
                let pose_b = scene.statics[target.object].pose;
                let m = placed[i].len() as f64;
                let mut cost = 0.0;
                let mut grad = Vec6::zeros();
                for pa in &placed[i] {
                    let r = signed_distance_placed(pa, pb)?;
                    if r.signed_distance > 0.0 {
                        cost += r.signed_distance / m;
                        if want_grad {
                            grad += witness_gradient(&r, &poses[i], &pose_b).0 / m;
                        }
                    }
                }
                Ok((cost, grad))
            })
            .collect::<Result<_>>()?;

        let mut pose = vec![0.0; n];
        let mut gravity = vec![0.0; n];
        let mut gravity_grads = vec![Vec6::zeros(); n];
        let mut total = 0.0;
        for i in 0..n {
            let (pc, pg) = pose_cost_and_grad(&poses[i], &scene.movables[i].prior);
            pose[i] = pc;
            gravity[i] = gravity_terms[i].0;
            gravity_grads[i] = gravity_terms[i].1;
            grads[i] += w.pose * pg + w.gravity * gravity_grads[i];
            total += w.pose * pc + w.collision * collision[i] + w.gravity * gravity[i];
        }
        if !want_grad {
            grads.clear();
        }

        Ok(CostEvaluation {
            total,
            pose,
            collision,
            gravity,
            grads,
            collision_grads,
            gravity_grads,
            active,
        })
    }
}

/// Total cost and gradients at the scene's current poses.
pub fn total_cost_and_grad(scene: &Scene) -> Result<CostEvaluation> {
    Evaluator::new(scene).evaluate(&scene.poses(), None, true, &GradientMode::Deterministic, 0)
}

/// Same, at `poses` with the discrete state frozen to `active`.
pub fn total_cost_with(scene: &Scene, poses: &[Pose], active: &ActiveSet) -> Result<CostEvaluation> {
    Evaluator::new(scene).evaluate(poses, Some(active), true, &GradientMode::Deterministic, 0)
}

/// `C_i` and its gradient with respect to object `i`'s pose.
pub fn collision_cost_and_grad(scene: &Scene, i: usize) -> Result<(f64, Vec6)> {
    let e = total_cost_and_grad(scene)?;
    Ok((e.collision[i], e.collision_grads[i]))
}

/// `true` when object `i` touches nothing, i.e. its gravity term is enabled.
pub fn support_indicator(scene: &Scene, i: usize) -> Result<bool> {
    let e = Evaluator::new(scene).evaluate(
        &scene.poses(),
        None,
        false,
        &GradientMode::Deterministic,
        0,
    )?;
    Ok(e.active.free[i])
}

/// `G_i`, its gradient, and the static part it was measured against.
/// `None` as target means nothing lies below the object; the cost is then 0.
pub fn gravity_cost_and_grad(scene: &Scene, i: usize) -> Result<(f64, Vec6, Option<PartRef>)> {
    let e = total_cost_and_grad(scene)?;
    Ok((e.gravity[i], e.gravity_grads[i], e.active.gravity_target[i]))
}

/// Smallest signed distance from each movable to any other object, without
/// broad-phase culling.
pub fn min_distances(scene: &Scene, poses: &[Pose]) -> Result<Vec<f64>> {
    let placed: Vec<Vec<PlacedPart>> = scene
        .movables
        .iter()
        .zip(poses)
        .map(|(m, pose)| m.parts.iter().map(|p| p.place(pose)).collect())
        .collect();
    let statics: Vec<PlacedPart> = scene
        .statics
        .iter()
        .flat_map(|s| s.parts.iter().map(|p| p.place(&s.pose)))
        .collect();
    (0..placed.len())
        .into_par_iter()
        .map(|i| {
            let mut best = f64::INFINITY;
            for pa in &placed[i] {
                let others = placed
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .flat_map(|(_, parts)| parts.iter())
                    .chain(statics.iter());
                for pb in others {
                    best = best.min(signed_distance_placed(pa, pb)?.signed_distance);
                }
            }
            Ok(best)
        })
        .collect()
}
