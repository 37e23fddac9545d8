use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mesh::load_mesh;
use super::{read_json, write_json_atomic};
use crate::collision::ConvexPart;
use crate::error::{Error, Result};
use crate::optimizer::OptimizerConfig;
use crate::scene::{
    CostWeights, CovarianceParams, Intrinsics, MovableObject, Scene, StaticObject, DEFAULT_CONTACT_TOLERANCE,
};
use crate::scenegeom::{gravity_from_plane, plane_to_static_object_at, PlaneModel};
use crate::se3::{Pose, PoseRecord, Rotation, Vec3};

/// Quaternions further than this from unit norm are renormalized with a
/// warning.
pub const QUATERNION_NORM_TOL: f64 = 1e-6;
pub const DEFAULT_CYLINDER_SEGMENTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Mesh file. With `parts`, each listed file is one convex piece;
    /// otherwise the hull of the mesh is used when `hull` is set.
    Mesh {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        parts: Vec<PathBuf>,
        #[serde(default = "yes")]
        hull: bool,
    },
    Box {
        half_extents: [f64; 3],
    },
    Cylinder {
        radius: f64,
        height: f64,
        #[serde(default = "default_segments")]
        segments: usize,
    },
    /// Explicit convex pieces as vertex lists.
    Convex {
        parts: Vec<Vec<[f64; 3]>>,
    },
}

fn yes() -> bool {
    true
}

fn default_segments() -> usize {
    DEFAULT_CYLINDER_SEGMENTS
}

fn default_contact_tolerance() -> f64 {
    DEFAULT_CONTACT_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GravityTag {
    #[serde(rename = "from-plane")]
    FromPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GravitySpec {
    Vector([f64; 3]),
    Tag(GravityTag),
}

/// Table slab generated from `plane`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub extent: f64,
    pub thickness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovableEntry {
    pub name: String,
    pub geometry: Geometry,
    /// Initial estimate, camera frame.
    pub pose: PoseRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticEntry {
    pub name: String,
    pub geometry: Geometry,
    pub pose: PoseRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<Intrinsics>,
    pub gravity: GravitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<PlaneModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableSpec>,
    #[serde(default)]
    pub weights: CostWeights,
    /// Used for movables without their own `covariance`.
    #[serde(default)]
    pub covariance: CovarianceParams,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_contact_tolerance")]
    pub contact_tolerance: f64,
    pub movables: Vec<MovableEntry>,
    #[serde(default)]
    pub statics: Vec<StaticEntry>,
}

/// Pose from its serialized form. A rotation matrix `r`, when present, is
/// used as is; otherwise `q` is normalized, with a warning if it was off
/// by more than [`QUATERNION_NORM_TOL`].
pub fn pose_from_record(record: &PoseRecord, object: &str) -> Result<Pose> {
    let invalid = |reason: String| Error::InvalidQuaternion {
        object: object.to_string(),
        reason,
    };
    let t = Vec3::from(record.t);
    if !t.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidConfig(format!("{object}: non-finite translation")));
    }
    let rotation = match record.r {
        Some(r) => {
            let m = crate::se3::Mat3::from_row_slice(&r);
            Rotation::from_matrix(m).map_err(|e| invalid(e.to_string()))?
        }
        None => {
            let q = record.q;
            let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !n.is_finite() || n < 1e-12 {
                return Err(invalid(format!("norm {n}")));
            }
            if (n - 1.0).abs() > QUATERNION_NORM_TOL {
                log::warn!("{object}: quaternion norm {n:.6}, renormalized");
            }
            Rotation::from_quaternion_wxyz(q).map_err(|e| invalid(e.to_string()))?
        }
    };
    Ok(Pose::new(rotation, t))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Convex parts of a geometry entry; relative paths are taken from `base`.
pub fn build_parts(geometry: &Geometry, base: &Path, object: &str) -> Result<Vec<ConvexPart>> {
    let hull_of = |path: &Path| -> Result<ConvexPart> {
        let mesh = load_mesh(path)?;
        ConvexPart::from_points(&mesh.vertices)
    };
    match geometry {
        Geometry::Mesh { path, parts, hull } => {
            let path = resolve(base, path);
            if !path.is_file() {
                return Err(Error::MissingMesh(path));
            }
            if !parts.is_empty() {
                parts.iter().map(|p| hull_of(&resolve(base, p))).collect()
            } else if *hull {
                Ok(vec![hull_of(&path)?])
            } else {
                Err(Error::InvalidConfig(format!(
                    "{object}: mesh needs decomposition parts or hull: true"
                )))
            }
        }
        Geometry::Box { half_extents } => Ok(vec![ConvexPart::cuboid(Vec3::from(*half_extents))?]),
        Geometry::Cylinder {
            radius,
            height,
            segments,
        } => Ok(vec![ConvexPart::cylinder(*radius, *height, *segments)?]),
        Geometry::Convex { parts } => {
            if parts.is_empty() {
                return Err(Error::InvalidConfig(format!("{object}: no convex parts")));
            }
            parts
                .iter()
                .map(|pts| ConvexPart::from_points(&pts.iter().map(|p| Vec3::from(*p)).collect::<Vec<_>>()))
                .collect()
        }
    }
}

/// Builds the scene described by `file`. Relative mesh paths are resolved
/// against `base`.
pub fn scene_from_file(file: &SceneFile, base: &Path) -> Result<Scene> {
    let mut movables = Vec::with_capacity(file.movables.len());
    for m in &file.movables {
        let parts = build_parts(&m.geometry, base, &m.name)?;
        let pose = pose_from_record(&m.pose, &m.name)?;
        let cov = m.covariance.unwrap_or(file.covariance);
        movables.push(MovableObject::new(m.name.clone(), parts, pose, cov)?);
    }
    let mut statics = Vec::with_capacity(file.statics.len());
    for s in &file.statics {
        statics.push(StaticObject {
            name: s.name.clone(),
            parts: build_parts(&s.geometry, base, &s.name)?,
            pose: pose_from_record(&s.pose, &s.name)?,
        });
    }
    let gravity = match file.gravity {
        GravitySpec::Vector(g) => Vec3::from(g),
        GravitySpec::Tag(GravityTag::FromPlane) => {
            let plane = file
                .plane
                .ok_or_else(|| Error::InvalidConfig("gravity \"from-plane\" needs a plane".into()))?;
            gravity_from_plane(&plane)
        }
    };
    if let Some(table) = file.table {
        let plane = file
            .plane
            .ok_or_else(|| Error::InvalidConfig("table needs a plane".into()))?;
        let center = if movables.is_empty() {
            Vec3::zeros()
        } else {
            movables.iter().map(|m| m.pose.translation).sum::<Vec3>() / movables.len() as f64
        };
        statics.push(plane_to_static_object_at(&plane, &center, table.extent, table.thickness)?);
    }
    let mut scene = Scene::new(movables, statics, gravity, file.weights)?;
    if !(file.contact_tolerance.is_finite() && file.contact_tolerance >= 0.0) {
        return Err(Error::InvalidConfig("contact_tolerance must be non-negative".into()));
    }
    scene.contact_tolerance = file.contact_tolerance;
    scene.camera = file.camera;
    Ok(scene)
}

pub fn read_scene_file(path: &Path) -> Result<SceneFile> {
    read_json(path)
}

/// Scene plus the optimizer settings stored with it.
pub fn load_scene_with_config(path: &Path) -> Result<(Scene, OptimizerConfig)> {
    let file = read_scene_file(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let scene = scene_from_file(&file, base)?;
    file.optimizer.validate()?;
    Ok((scene, file.optimizer))
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    load_scene_with_config(path).map(|(s, _)| s)
}

fn convex_geometry(parts: &[ConvexPart]) -> Geometry {
    Geometry::Convex {
        parts: parts
            .iter()
            .map(|p| p.vertices().iter().map(|v| [v.x, v.y, v.z]).collect())
            .collect(),
    }
}

/// Self-contained description of `scene`: geometry is written as explicit
/// convex vertex lists and movables at their prior estimates.
pub fn scene_to_file(scene: &Scene, optimizer: &OptimizerConfig) -> SceneFile {
    SceneFile {
        camera: scene.camera,
        gravity: GravitySpec::Vector([scene.gravity.x, scene.gravity.y, scene.gravity.z]),
        plane: None,
        table: None,
        weights: scene.weights,
        covariance: CovarianceParams::default(),
        optimizer: optimizer.clone(),
        contact_tolerance: scene.contact_tolerance,
        movables: scene
            .movables
            .iter()
            .map(|m| MovableEntry {
                name: m.name.clone(),
                geometry: convex_geometry(&m.parts),
                pose: PoseRecord::from(&m.prior.estimate),
                covariance: Some(m.covariance),
            })
            .collect(),
        statics: scene
            .statics
            .iter()
            .map(|s| StaticEntry {
                name: s.name.clone(),
                geometry: convex_geometry(&s.parts),
                pose: PoseRecord::from(&s.pose),
            })
            .collect(),
    }
}

pub fn write_scene(path: &Path, scene: &Scene, optimizer: &OptimizerConfig) -> Result<()> {
    write_json_atomic(path, &scene_to_file(scene, optimizer))
}
