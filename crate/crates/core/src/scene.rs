use serde::{Deserialize, Serialize};

use crate::collision::ConvexPart;
use crate::error::{Error, Result};
use crate::se3::{Mat3, Mat6, Pose, Vec3};

/// Standard deviations of the image-based pose estimate. Depth along the
/// viewing ray is usually far less certain than the lateral position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceParams {
    pub sigma_xy: f64,
    pub sigma_z: f64,
    pub sigma_theta: f64,
}

impl Default for CovarianceParams {
    fn default() -> Self {
        CovarianceParams {
            sigma_xy: 0.01,
            sigma_z: 0.05,
            sigma_theta: 0.1,
        }
    }
}

impl CovarianceParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.sigma_xy) && ok(self.sigma_z) && ok(self.sigma_theta) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "covariance parameters must be positive: {self:?}"
            )))
        }
    }
}

/// Initial estimate and the precision (inverse covariance) of its error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosePrior {
    pub estimate: Pose,
    /// `[translation; rotation]` block-diagonal, m^-2 and rad^-2.
    pub precision: Mat6,
}

/// Relative weights of the cost terms. `pose` is 1 in normal use; setting
/// any weight to 0 removes that term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub pose: f64,
    pub collision: f64,
    pub gravity: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            pose: 1.0,
            collision: 100.0,
            gravity: 50.0,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.pose, self.collision, self.gravity]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("weights must be non-negative: {self:?}")))
        }
    }
}

/// Precision matrix with the translational block aligned to the ray from
/// the camera to the estimated object center.
pub fn build_covariance(estimate: &Pose, params: &CovarianceParams) -> Result<PosePrior> {
    params.validate()?;
    let t = estimate.translation;
    let len = t.norm();
    if !(len > 1e-6) {
        return Err(Error::DegenerateRay);
    }
    let z = t / len;
    let helper = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let x = helper.cross(&z).normalize();
    let y = z.cross(&x);
    let frame = Mat3::from_columns(&[x, y, z]);
    let inv = Mat3::from_diagonal(&Vec3::new(
        params.sigma_xy.powi(-2),
        params.sigma_xy.powi(-2),
        params.sigma_z.powi(-2),
    ));
    let mut precision = Mat6::zeros();
    let ht = frame * inv * frame.transpose();
    // Exact symmetry keeps the quadratic form well defined.
    let ht = (ht + ht.transpose()) * 0.5;
    precision.fixed_view_mut::<3, 3>(0, 0).copy_from(&ht);
    precision
        .fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(Mat3::identity() * params.sigma_theta.powi(-2)));
    Ok(PosePrior {
        estimate: *estimate,
        precision,
    })
}

#[derive(Debug, Clone)]
pub struct MovableObject {
    pub name: String,
    pub parts: Vec<ConvexPart>,
    /// Current pose in the camera frame.
    pub pose: Pose,
    pub prior: PosePrior,
    pub covariance: CovarianceParams,
}

impl MovableObject {
    /// Starts at the estimate.
    pub fn new(
        name: impl Into<String>,
        parts: Vec<ConvexPart>,
        estimate: Pose,
        covariance: CovarianceParams,
    ) -> Result<MovableObject> {
        let name = name.into();
        if parts.is_empty() {
            return Err(Error::InvalidConfig(format!("object {name} has no convex parts")));
        }
        Ok(MovableObject {
            prior: build_covariance(&estimate, &covariance)?,
            name,
            parts,
            pose: estimate,
            covariance,
        })
    }

    /// Object-frame centroid: mean of the part centroids.
    pub fn centroid(&self) -> Vec3 {
        self.parts.iter().map(|p| p.centroid()).sum::<Vec3>() / self.parts.len() as f64
    }

    /// All part vertices in the object frame.
    pub fn model_points(&self) -> Vec<Vec3> {
        self.parts.iter().flat_map(|p| p.vertices().iter().copied()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct StaticObject {
    pub name: String,
    pub parts: Vec<ConvexPart>,
    pub pose: Pose,
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Pixel coordinates of a camera-frame point.
    pub fn project(&self, p: &Vec3) -> Result<[f64; 2]> {
        if !(p.z > 1e-6) {
            return Err(Error::BehindCamera { z: p.z });
        }
        Ok([self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy])
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub movables: Vec<MovableObject>,
    pub statics: Vec<StaticObject>,
    /// Unit vector in the camera frame.
    pub gravity: Vec3,
    pub weights: CostWeights,
    /// Objects closer than this to anything count as being in contact.
    pub contact_tolerance: f64,
    pub camera: Option<Intrinsics>,
}

pub const DEFAULT_CONTACT_TOLERANCE: f64 = 1e-3;

impl Scene {
    pub fn new(
        movables: Vec<MovableObject>,
        statics: Vec<StaticObject>,
        gravity: Vec3,
        weights: CostWeights,
    ) -> Result<Scene> {
        weights.validate()?;
        let g = gravity.norm();
        if !(g.is_finite() && g > 1e-9) {
            return Err(Error::InvalidConfig("gravity direction must be non-zero".into()));
        }
        Ok(Scene {
            movables,
            statics,
            gravity: gravity / g,
            weights,
            contact_tolerance: DEFAULT_CONTACT_TOLERANCE,
            camera: None,
        })
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.movables.iter().map(|m| m.pose).collect()
    }

    pub fn set_poses(&mut self, poses: &[Pose]) {
        for (m, p) in self.movables.iter_mut().zip(poses) {
            m.pose = *p;
        }
    }

    /// Resets every movable to its prior estimate.
    pub fn reset_to_priors(&mut self) {
        for m in &mut self.movables {
            m.pose = m.prior.estimate;
        }
    }
}
