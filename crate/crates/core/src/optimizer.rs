//! Gradient descent over all movable poses.
//!
//! Each accepted update is `T_i <- T_i exp(-alpha g_i)`. The step length
//! comes from a backtracking line search on the true scene cost, so the
//! support indicator and gravity targets are re-derived at every trial pose
//! and the recorded cost never increases.

use serde::{Deserialize, Serialize};

use crate::costs::{min_distances, CostEvaluation, Evaluator, GradientMode};
use crate::error::{Error, Result};
use crate::scene::Scene;
use crate::se3::{Pose, PoseRecord, Vec6};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 8;
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by no more than this.
    pub cost_tolerance: f64,
    /// Stop when the largest gradient component is at most this.
    pub gradient_tolerance: f64,
    pub smoothed_collisions: bool,
    pub smoothing_noise: f64,
    pub smoothing_samples: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            step_size: 1e-3,
            max_iterations: 300,
            cost_tolerance: 1e-8,
            gradient_tolerance: 1e-5,
            smoothed_collisions: false,
            smoothing_noise: 1e-3,
            smoothing_samples: 32,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.cost_tolerance >= 0.0 && self.gradient_tolerance >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if self.smoothed_collisions && (self.smoothing_samples == 0 || !(self.smoothing_noise >= 0.0)) {
            return bad("smoothing needs at least one sample and a non-negative scale");
        }
        Ok(())
    }

    /// Collision gradient mode; `draw` selects a fresh noise stream.
    pub fn gradient_mode(&self, draw: u64) -> GradientMode {
        if self.smoothed_collisions {
            GradientMode::Smoothed {
                noise_scale: self.smoothing_noise,
                samples: self.smoothing_samples,
                seed: crate::util::mix_seed(self.seed, &[draw]),
            }
        } else {
            GradientMode::Deterministic
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    CostTolerance,
    MaxIterations,
    /// The line search found no acceptable step.
    NoProgress,
    /// A cost became NaN/infinite or blew up; the last finite state is kept.
    NonFiniteCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectWarning {
    /// No static part lies below the object along gravity.
    NoSupportBelow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectReport {
    pub name: String,
    pub pose: PoseRecord,
    /// Deepest penetration into any other object, meters.
    pub penetration: f64,
    /// Distance to the nearest other object when not touching, meters.
    /// `None` when the scene holds nothing else.
    pub support_gap: Option<f64>,
    /// Whether the gravity term was active at the final pose.
    pub gravity_active: bool,
    pub warnings: Vec<ObjectWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub iterations: usize,
    pub termination: Termination,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Cost after each accepted iteration; entry 0 is the starting cost.
    pub cost_trace: Vec<f64>,
    pub objects: Vec<ObjectReport>,
    #[serde(skip)]
    pub final_poses: Vec<Pose>,
}

/// Applies `T_i <- T_i exp(-alpha g_i)` to every movable.
pub fn step(poses: &[Pose], grads: &[Vec6], alpha: f64) -> Vec<Pose> {
    poses
        .iter()
        .zip(grads)
        .map(|(p, g)| if alpha == 0.0 || *g == Vec6::zeros() { *p } else { p.retract(&(-alpha * g)) })
        .collect()
}

/// Accepted step of a backtracking line search.
pub struct LineSearchStep {
    pub alpha: f64,
    pub poses: Vec<Pose>,
    pub cost: f64,
}

/// Backtracking from `initial_step`, halving up to 8 times until the
/// Armijo condition holds. `None` means no step was acceptable (or the
/// gradient is zero).
pub fn line_search(
    eval: &Evaluator,
    poses: &[Pose],
    cost: f64,
    grads: &[Vec6],
    initial_step: f64,
) -> Result<Option<LineSearchStep>> {
    let g2: f64 = grads.iter().map(|g| g.norm_squared()).sum();
    if g2 == 0.0 {
        return Ok(None);
    }
    let mut alpha = initial_step;
    for _ in 0..=MAX_HALVINGS {
        let trial = step(poses, grads, alpha);
        if trial.iter().all(Pose::is_finite) {
            let c = eval
                .evaluate(&trial, None, false, &GradientMode::Deterministic, 0)?
                .total;
            if c.is_finite() && c <= cost - ARMIJO * alpha * g2 {
                return Ok(Some(LineSearchStep {
                    alpha,
                    poses: trial,
                    cost: c,
                }));
            }
        }
        alpha *= 0.5;
    }
    Ok(None)
}

fn max_abs(grads: &[Vec6]) -> f64 {
    grads.iter().map(|g| g.amax()).fold(0.0, f64::max)
}

/// Refines all movable poses of `scene`, starting from their current values.
///
/// One iteration is a sweep over the movables in index order. Each object
/// takes its own gradient step with its own backtracking line search while
/// the others hold still, and the gradient is refreshed after every
/// accepted move. Objects pressed against a contact need tiny steps; with
/// per-object step lengths they no longer stall the rest of the scene.
pub fn refine_scene(scene: &Scene, config: &OptimizerConfig) -> Result<RefinementReport> {
    config.validate()?;
    let eval = Evaluator::new(scene);
    let n = scene.movables.len();
    let mut poses = scene.poses();
    let mut draws = 0u64;
    let mut current = eval.evaluate(&poses, None, true, &config.gradient_mode(draws), 0)?;
    let initial_cost = current.total;
    let mut trace = vec![current.total];
    let mut last_alpha = vec![config.step_size; n];
    let mut iterations = 0;

    let termination = if !initial_cost.is_finite() {
        Termination::NonFiniteCost
    } else {
        loop {
            if iterations >= config.max_iterations {
                break Termination::MaxIterations;
            }
            if max_abs(&current.grads) <= config.gradient_tolerance {
                break Termination::GradientTolerance;
            }
            let sweep_start = current.total;
            let mut moved = false;
            let mut diverged = false;
            #[allow(clippy::needless_range_loop)]
            for i in 0..n {
                let alpha0 = config.step_size.min(2.0 * last_alpha[i]);
                let mut found = block_line_search(&eval, &poses, &current, i, alpha0)?;
                if found.is_none() && config.smoothed_collisions {
                    draws += 1;
                    current = eval.evaluate(&poses, None, true, &config.gradient_mode(draws), iterations as u64)?;
                    found = block_line_search(&eval, &poses, &current, i, alpha0)?;
                }
                let Some(accepted) = found else {
                    last_alpha[i] = alpha0 * 0.5f64.powi(MAX_HALVINGS as i32);
                    continue;
                };
                draws += 1;
                let next = eval.evaluate(
                    &accepted.poses,
                    None,
                    true,
                    &config.gradient_mode(draws),
                    iterations as u64 + 1,
                )?;
                if !next.total.is_finite() || next.total > DIVERGENCE_FACTOR * initial_cost.max(f64::MIN_POSITIVE) {
                    diverged = true;
                    break;
                }
                poses = accepted.poses;
                last_alpha[i] = accepted.alpha;
                current = next;
                moved = true;
            }
            if diverged {
                break Termination::NonFiniteCost;
            }
            if !moved {
                break Termination::NoProgress;
            }
            iterations += 1;
            trace.push(current.total);
            if sweep_start - current.total <= config.cost_tolerance {
                break Termination::CostTolerance;
            }
        }
    };

    build_report(scene, &poses, &current, iterations, termination, initial_cost, trace)
}

/// Line search along object `i`'s gradient with the other poses fixed.
fn block_line_search(
    eval: &Evaluator,
    poses: &[Pose],
    current: &CostEvaluation,
    i: usize,
    initial_step: f64,
) -> Result<Option<LineSearchStep>> {
    let mut masked = vec![Vec6::zeros(); poses.len()];
    masked[i] = current.grads[i];
    line_search(eval, poses, current.total, &masked, initial_step)
}

fn build_report(
    scene: &Scene,
    poses: &[Pose],
    eval: &CostEvaluation,
    iterations: usize,
    termination: Termination,
    initial_cost: f64,
    cost_trace: Vec<f64>,
) -> Result<RefinementReport> {
    let dists = if poses.iter().all(Pose::is_finite) {
        min_distances(scene, poses)?
    } else {
        vec![f64::NAN; poses.len()]
    };
    let objects = scene
        .movables
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let d = dists[i];
            let mut warnings = Vec::new();
            if eval.active.gravity_target[i].is_none() {
                warnings.push(ObjectWarning::NoSupportBelow);
            }
            ObjectReport {
                name: m.name.clone(),
                pose: PoseRecord::from(&poses[i]),
                penetration: if d.is_finite() { (-d).max(0.0) } else { 0.0 },
                support_gap: d.is_finite().then(|| d.max(0.0)),
                gravity_active: eval.active.free[i],
                warnings,
            }
        })
        .collect();
    Ok(RefinementReport {
        iterations,
        termination,
        initial_cost,
        final_cost: *cost_trace.last().expect("trace starts with the initial cost"),
        cost_trace,
        objects,
        final_poses: poses.to_vec(),
    })
}
