//! File formats: scenes, meshes, point clouds, correspondences, ground
//! truth, symmetries, reports. All writes go through a temporary file in
//! the target directory followed by a rename.

mod cloud;
mod mesh;
mod scene_file;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use cloud::{load_correspondences, load_point_cloud};
pub use mesh::{load_mesh, Mesh};
pub use scene_file::{
    build_parts, load_scene, load_scene_with_config, pose_from_record, read_scene_file, scene_from_file,
    scene_to_file, write_scene, Geometry, GravitySpec, GravityTag, MovableEntry, SceneFile, StaticEntry,
    TableSpec, DEFAULT_CYLINDER_SEGMENTS, QUATERNION_NORM_TOL,
};

use crate::collision::{signed_distance_placed, PlacedPart};
use crate::error::{Error, Result};
use crate::eval::{ContinuousSymmetry, EvalRecord, SymmetrySet};
use crate::optimizer::RefinementReport;
use crate::scene::Scene;
use crate::se3::{Pose, PoseRecord};

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, Some(e.line()), e.to_string()))
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_report(path: &Path, report: &RefinementReport) -> Result<()> {
    write_json_atomic(path, report)
}

pub fn read_report(path: &Path) -> Result<RefinementReport> {
    let mut report: RefinementReport = read_json(path)?;
    report.final_poses = report
        .objects
        .iter()
        .map(|o| pose_from_record(&o.pose, &o.name))
        .collect::<Result<_>>()?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPose {
    pub name: String,
    pub pose: PoseRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub objects: Vec<NamedPose>,
}

pub fn write_ground_truth(path: &Path, names: &[String], poses: &[Pose]) -> Result<()> {
    let file = GroundTruthFile {
        objects: names
            .iter()
            .zip(poses)
            .map(|(n, p)| NamedPose {
                name: n.clone(),
                pose: PoseRecord::from(p),
            })
            .collect(),
    };
    write_json_atomic(path, &file)
}

/// Ground-truth poses by object name.
pub fn load_ground_truth(path: &Path) -> Result<BTreeMap<String, Pose>> {
    let file: GroundTruthFile = read_json(path)?;
    file.objects
        .iter()
        .map(|o| Ok((o.name.clone(), pose_from_record(&o.pose, &o.name)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryEntry {
    #[serde(default)]
    pub discrete: Vec<PoseRecord>,
    #[serde(default)]
    pub continuous: Option<ContinuousSymmetry>,
}

/// Symmetries by object name; objects not listed get the identity only.
pub fn load_symmetries(path: &Path) -> Result<BTreeMap<String, SymmetrySet>> {
    let file: BTreeMap<String, SymmetryEntry> = read_json(path)?;
    file.into_iter()
        .map(|(name, e)| {
            let discrete = e
                .discrete
                .iter()
                .map(|r| pose_from_record(r, &name))
                .collect::<Result<Vec<_>>>()?;
            let set = SymmetrySet::new(&discrete, e.continuous.as_ref())?;
            Ok((name, set))
        })
        .collect()
}

/// CSV with columns `object_id,mssd_m,mspd_px`.
pub fn write_eval_csv(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(["object_id", "mssd_m", "mspd_px"]).map_err(to_io)?;
    for r in records {
        w.write_record([r.object_id.clone(), r.mssd_m.to_string(), r.mspd_px.to_string()])
            .map_err(to_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionRow {
    pub object_a: String,
    pub part_a: usize,
    pub object_b: String,
    pub part_b: usize,
    /// Penetration depth, meters (positive).
    pub depth: f64,
}

/// Every part pair with negative signed distance at the current poses,
/// deepest first. Pairs are movable-movable (a before b) and
/// movable-static.
pub fn collision_report(scene: &Scene) -> Result<Vec<CollisionRow>> {
    let place = |parts: &[crate::collision::ConvexPart], pose: &Pose| -> Vec<PlacedPart> {
        parts.iter().map(|p| p.place(pose)).collect()
    };
    let movables: Vec<(&str, Vec<PlacedPart>)> = scene
        .movables
        .iter()
        .map(|m| (m.name.as_str(), place(&m.parts, &m.pose)))
        .collect();
    let statics: Vec<(&str, Vec<PlacedPart>)> = scene
        .statics
        .iter()
        .map(|s| (s.name.as_str(), place(&s.parts, &s.pose)))
        .collect();
    // (order key, row)
    let mut rows: Vec<((usize, usize, usize, usize), CollisionRow)> = Vec::new();
    let n = movables.len();
    for (i, (name_a, parts_a)) in movables.iter().enumerate() {
        let others = movables
            .iter()
            .enumerate()
            .skip(i + 1)
            .chain(statics.iter().enumerate().map(|(k, s)| (n + k, s)));
        for (j, (name_b, parts_b)) in others {
            for (pa_idx, pa) in parts_a.iter().enumerate() {
                for (pb_idx, pb) in parts_b.iter().enumerate() {
                    if pa.sphere_gap(pb) > 0.0 {
                        continue;
                    }
                    let d = signed_distance_placed(pa, pb)?.signed_distance;
                    if d < 0.0 {
                        rows.push((
                            (i, pa_idx, j, pb_idx),
                            CollisionRow {
                                object_a: name_a.to_string(),
                                part_a: pa_idx,
                                object_b: name_b.to_string(),
                                part_b: pb_idx,
                                depth: -d,
                            },
                        ));
                    }
                }
            }
        }
    }
    rows.sort_by(|a, b| b.1.depth.total_cmp(&a.1.depth).then(a.0.cmp(&b.0)));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}
