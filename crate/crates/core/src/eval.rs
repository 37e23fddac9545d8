//! Symmetry-aware pose error metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Intrinsics, Scene};
use crate::se3::{exp_so3, Pose, Vec3};

/// Continuous rotational symmetry, sampled at `samples` equally spaced angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSymmetry {
    pub axis: [f64; 3],
    /// A point on the axis, object frame. Defaults to the origin.
    #[serde(default)]
    pub offset: [f64; 3],
    pub samples: usize,
}

/// Object-frame transforms that leave the object's appearance unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrySet {
    transforms: Vec<Pose>,
}

impl Default for SymmetrySet {
    fn default() -> Self {
        SymmetrySet::identity()
    }
}

impl SymmetrySet {
    pub fn identity() -> SymmetrySet {
        SymmetrySet {
            transforms: vec![Pose::identity()],
        }
    }

    /// Every discrete transform combined with every continuous sample. The
    /// identity is added when missing.
    pub fn new(discrete: &[Pose], continuous: Option<&ContinuousSymmetry>) -> Result<SymmetrySet> {
        let mut base = vec![Pose::identity()];
        for d in discrete {
            if !d.is_finite() {
                return Err(Error::InvalidConfig("non-finite symmetry transform".into()));
            }
            if !is_identity(d) {
                base.push(*d);
            }
        }
        let Some(c) = continuous else {
            return Ok(SymmetrySet { transforms: base });
        };
        let axis = Vec3::from(c.axis);
        let n = axis.norm();
        if !(n.is_finite() && n > 1e-9) || c.samples == 0 {
            return Err(Error::InvalidConfig(
                "continuous symmetry needs a non-zero axis and at least one sample".into(),
            ));
        }
        let axis = axis / n;
        let offset = Vec3::from(c.offset);
        let mut transforms = Vec::with_capacity(base.len() * c.samples);
        for s in &base {
            for k in 0..c.samples {
                let angle = std::f64::consts::TAU * k as f64 / c.samples as f64;
                let r = exp_so3(&(axis * angle));
                // Rotation about the axis through `offset`.
                let spin = Pose::new(r, offset - r.rotate(&offset));
                transforms.push(s.compose(&spin));
            }
        }
        Ok(SymmetrySet { transforms })
    }

    pub fn transforms(&self) -> &[Pose] {
        &self.transforms
    }
}

fn is_identity(p: &Pose) -> bool {
    p.translation.norm() < 1e-12 && (p.rotation.matrix() - crate::se3::Mat3::identity()).abs().max() < 1e-12
}

/// Maximum symmetric surface distance in meters.
pub fn eval_mssd(estimate: &Pose, ground_truth: &Pose, vertices: &[Vec3], symmetries: &SymmetrySet) -> f64 {
    let moved: Vec<Vec3> = vertices.iter().map(|v| estimate.act(v)).collect();
    symmetries
        .transforms()
        .iter()
        .map(|s| {
            let gt = ground_truth.compose(s);
            vertices
                .iter()
                .zip(&moved)
                .map(|(v, e)| (e - gt.act(v)).norm())
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Maximum symmetric projection distance in pixels.
pub fn eval_mspd(
    estimate: &Pose,
    ground_truth: &Pose,
    vertices: &[Vec3],
    symmetries: &SymmetrySet,
    intrinsics: &Intrinsics,
) -> Result<f64> {
    let projected = vertices
        .iter()
        .map(|v| intrinsics.project(&estimate.act(v)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = f64::INFINITY;
    for s in symmetries.transforms() {
        let gt = ground_truth.compose(s);
        let mut worst = 0.0f64;
        for (v, e) in vertices.iter().zip(&projected) {
            let g = intrinsics.project(&gt.act(v))?;
            worst = worst.max((e[0] - g[0]).hypot(e[1] - g[1]));
        }
        best = best.min(worst);
    }
    Ok(best)
}

/// Largest distance between two vertices.
pub fn object_diameter(vertices: &[Vec3]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in vertices.iter().enumerate() {
        for b in &vertices[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// MSSD thresholds as fractions of the object diameter.
pub const MSSD_THRESHOLDS: [f64; 10] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50];
/// MSPD thresholds in pixels for a 640 px wide image; scaled by `640 / width`.
pub const MSPD_THRESHOLDS: [f64; 10] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub object_id: String,
    pub mssd_m: f64,
    pub mspd_px: f64,
    /// `mssd < t * diameter` for each of [`MSSD_THRESHOLDS`].
    pub mssd_recall: Vec<bool>,
    /// `mspd < t * 640 / image_width` for each of [`MSPD_THRESHOLDS`].
    pub mspd_recall: Vec<bool>,
}

impl EvalRecord {
    pub fn new(object_id: impl Into<String>, mssd: f64, mspd: f64, diameter: f64, image_width: f64) -> EvalRecord {
        EvalRecord {
            object_id: object_id.into(),
            mssd_m: mssd,
            mspd_px: mspd,
            mssd_recall: MSSD_THRESHOLDS.iter().map(|t| mssd < t * diameter).collect(),
            mspd_recall: MSPD_THRESHOLDS
                .iter()
                .map(|t| mspd < t * 640.0 / image_width)
                .collect(),
        }
    }
}

/// MSSD/MSPD of every movable of `scene` at `estimates`. Image width for
/// the pixel thresholds is taken as `2 cx`.
pub fn evaluate_scene(
    scene: &Scene,
    estimates: &[Pose],
    ground_truth: &BTreeMap<String, Pose>,
    symmetries: &BTreeMap<String, SymmetrySet>,
) -> Result<Vec<EvalRecord>> {
    let camera = scene
        .camera
        .ok_or_else(|| Error::InvalidConfig("evaluation needs camera intrinsics".into()))?;
    if estimates.len() != scene.movables.len() {
        return Err(Error::InvalidConfig(format!(
            "{} poses for {} objects",
            estimates.len(),
            scene.movables.len()
        )));
    }
    let identity = SymmetrySet::identity();
    scene
        .movables
        .iter()
        .zip(estimates)
        .map(|(m, est)| {
            let gt = ground_truth
                .get(&m.name)
                .ok_or_else(|| Error::InvalidConfig(format!("no ground truth for {}", m.name)))?;
            let sym = symmetries.get(&m.name).unwrap_or(&identity);
            let pts = m.model_points();
            let mssd = eval_mssd(est, gt, &pts, sym);
            let mspd = eval_mspd(est, gt, &pts, sym, &camera)?;
            Ok(EvalRecord::new(
                m.name.clone(),
                mssd,
                mspd,
                object_diameter(&pts),
                2.0 * camera.cx,
            ))
        })
        .collect()
}
