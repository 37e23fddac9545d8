//! Seeded tabletop scenes with known ground truth and camera-like noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::collision::ConvexPart;
use crate::error::{Error, Result};
use crate::scene::{CostWeights, CovarianceParams, Intrinsics, MovableObject, Scene};
use crate::scenegeom::{gravity_from_plane, plane_to_static_object_at, PlaneModel};
use crate::se3::{exp_so3, Pose, Rotation, Vec3};

pub const PLACEMENT_ATTEMPTS: usize = 1000;
/// Ground-truth objects float this far (m) above the table and each other.
pub const GT_CLEARANCE: f64 = 1e-4;
pub const CAMERA_HEIGHT: f64 = 0.6;
pub const TABLE_EXTENT: f64 = 1.5;
pub const TABLE_THICKNESS: f64 = 0.05;
/// Half-width (m) of the square of the table where objects are placed.
pub const WORKSPACE_HALF: f64 = 0.2;
pub const CYLINDER_SEGMENTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Lateral (perpendicular to the viewing ray) standard deviation, m.
    pub sigma_xy: f64,
    /// Standard deviation along the viewing ray, m.
    pub sigma_z: f64,
    /// Rotation standard deviation per axis, rad.
    pub sigma_theta: f64,
    /// Probability that an object is pushed into the table.
    pub penetration_fraction: f64,
    /// Range (m) of that push, applied along the viewing ray.
    pub penetration_range: (f64, f64),
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma_xy: 0.01,
            sigma_z: 0.05,
            sigma_theta: 0.1,
            penetration_fraction: 0.3,
            penetration_range: (0.005, 0.03),
        }
    }
}

impl NoiseModel {
    pub fn none() -> NoiseModel {
        NoiseModel {
            sigma_xy: 0.0,
            sigma_z: 0.0,
            sigma_theta: 0.0,
            penetration_fraction: 0.0,
            penetration_range: (0.0, 0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.penetration_range;
        let ok = [self.sigma_xy, self.sigma_z, self.sigma_theta, lo, hi]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
            && lo <= hi
            && (0.0..=1.0).contains(&self.penetration_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid noise model: {self:?}")))
        }
    }

    /// Covariance handed to the refiner. Zero sigmas are replaced by the
    /// defaults since the prior needs a finite precision.
    pub fn covariance(&self) -> CovarianceParams {
        let d = CovarianceParams::default();
        let pick = |v: f64, fallback: f64| if v > 0.0 { v } else { fallback };
        CovarianceParams {
            sigma_xy: pick(self.sigma_xy, d.sigma_xy),
            sigma_z: pick(self.sigma_z, d.sigma_z),
            sigma_theta: pick(self.sigma_theta, d.sigma_theta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Box { half_extents: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
}

impl Shape {
    pub fn part(&self) -> Result<ConvexPart> {
        match *self {
            Shape::Box { half_extents } => ConvexPart::cuboid(Vec3::from(half_extents)),
            Shape::Cylinder { radius, height } => ConvexPart::cylinder(radius, height, CYLINDER_SEGMENTS),
        }
    }

    fn footprint_radius(&self) -> f64 {
        match *self {
            Shape::Box { half_extents } => half_extents[0].hypot(half_extents[1]),
            Shape::Cylinder { radius, .. } => radius,
        }
    }

    fn half_height(&self) -> f64 {
        match *self {
            Shape::Box { half_extents } => half_extents[2],
            Shape::Cylinder { height, .. } => 0.5 * height,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    /// Movables start at their noisy priors.
    pub scene: Scene,
    pub shapes: Vec<Shape>,
    pub ground_truth: Vec<Pose>,
    /// Translation offset of each prior from the ground truth, m.
    pub translation_noise: Vec<Vec3>,
    /// Whether the object was pushed into the table.
    pub forced_penetration: Vec<bool>,
    pub table: PlaneModel,
}

pub fn default_intrinsics() -> Intrinsics {
    Intrinsics {
        fx: 600.0,
        fy: 600.0,
        cx: 320.0,
        cy: 240.0,
    }
}

/// Camera looking down at a table from [`CAMERA_HEIGHT`], pitched 45 to 50
/// degrees. Objects are boxes and cylinders standing upright.
pub fn generate_synthetic_scene(seed: u64, object_count: usize, noise: &NoiseModel) -> Result<SyntheticScene> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pitch = rng.random_range(45f64..50.0).to_radians();
    // World up in the camera frame (x right, y down, z forward).
    let up = Vec3::new(0.0, -pitch.cos(), -pitch.sin());
    let table = PlaneModel {
        normal: up,
        offset: -CAMERA_HEIGHT,
        inliers: 0,
        inlier_rms: 0.0,
    };
    let center = Vec3::z() * (CAMERA_HEIGHT / pitch.sin());
    let table_obj = plane_to_static_object_at(&table, &center, TABLE_EXTENT, TABLE_THICKNESS)?;
    let table_rot = table_obj.pose.rotation;
    let (ex, ey) = (table_rot.matrix().column(0).into_owned(), table_rot.matrix().column(1).into_owned());

    let mut shapes = Vec::with_capacity(object_count);
    let mut placed: Vec<(f64, f64, f64)> = Vec::with_capacity(object_count);
    let mut ground_truth = Vec::with_capacity(object_count);
    for object in 0..object_count {
        let shape = if rng.random_bool(0.5) {
            Shape::Box {
                half_extents: [
                    rng.random_range(0.02..0.06),
                    rng.random_range(0.02..0.06),
                    rng.random_range(0.02..0.06),
                ],
            }
        } else {
            Shape::Cylinder {
                radius: rng.random_range(0.025..0.05),
                height: rng.random_range(0.05..0.15),
            }
        };
        let r = shape.footprint_radius();
        let mut spot = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let a = rng.random_range(-WORKSPACE_HALF..WORKSPACE_HALF);
            let b = rng.random_range(-WORKSPACE_HALF..WORKSPACE_HALF);
            if placed
                .iter()
                .all(|&(pa, pb, pr)| (a - pa).hypot(b - pb) >= r + pr + GT_CLEARANCE)
            {
                spot = Some((a, b));
                break;
            }
        }
        let Some((a, b)) = spot else {
            return Err(Error::PlacementFailure {
                object,
                attempts: PLACEMENT_ATTEMPTS,
            });
        };
        placed.push((a, b, r));
        let yaw = rng.random_range(0.0..std::f64::consts::TAU);
        let rotation = table_rot.compose(&Rotation::about_axis(&Vec3::z(), yaw));
        let foot = center - up * table.signed_distance(&center);
        let t = foot + ex * a + ey * b + up * (shape.half_height() + GT_CLEARANCE);
        ground_truth.push(Pose::new(rotation, t));
        shapes.push(shape);
    }

    let std = |s: f64| Normal::new(0.0, s).map_err(|e| Error::InvalidConfig(e.to_string()));
    let (n_xy, n_z, n_th) = (std(noise.sigma_xy)?, std(noise.sigma_z)?, std(noise.sigma_theta)?);
    let cov = noise.covariance();
    let mut movables = Vec::with_capacity(object_count);
    let mut translation_noise = Vec::with_capacity(object_count);
    let mut forced = Vec::with_capacity(object_count);
    for (k, (gt, shape)) in ground_truth.iter().zip(&shapes).enumerate() {
        let ray = gt.translation.normalize();
        let helper = if ray.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let lx = helper.cross(&ray).normalize();
        let ly = ray.cross(&lx);
        let mut dt = ray * n_z.sample(&mut rng) + lx * n_xy.sample(&mut rng) + ly * n_xy.sample(&mut rng);
        let omega = Vec3::from_fn(|_, _| n_th.sample(&mut rng));
        let push = noise.penetration_fraction > 0.0 && rng.random_bool(noise.penetration_fraction);
        if push {
            let (lo, hi) = noise.penetration_range;
            let depth = if hi > lo { rng.random_range(lo..hi) } else { lo };
            // Away from the camera along the ray is into the table.
            dt += ray * depth;
        }
        let rotation = if omega == Vec3::zeros() {
            gt.rotation
        } else {
            gt.rotation.compose(&exp_so3(&omega))
        };
        let prior = Pose::new(rotation, gt.translation + dt);
        translation_noise.push(dt);
        forced.push(push);
        movables.push(MovableObject::new(format!("obj{k}"), vec![shape.part()?], prior, cov)?);
    }

    let mut scene = Scene::new(movables, vec![table_obj], gravity_from_plane(&table), CostWeights::default())?;
    scene.camera = Some(default_intrinsics());
    Ok(SyntheticScene {
        scene,
        shapes,
        ground_truth,
        translation_noise,
        forced_penetration: forced,
        table,
    })
}
