use std::path::Path;

use serde::Deserialize;

use super::mesh::{ply_points, read_ply, scalar};
use crate::error::{Error, Result};
use crate::scenegeom::{CorrespondencePair, PointCloud, PointLabel};
use crate::se3::Vec3;

/// Reads the `vertex` element of a PLY file. `confidence` defaults to 1
/// when absent; `label` (0 unknown, 1 object, 2 background) and `in_bbox`
/// (non-zero means inside) are optional.
pub fn load_point_cloud(path: &Path) -> Result<PointCloud> {
    if !path.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("point cloud not found: {}", path.display()),
        )));
    }
    let ply = read_ply(path)?;
    let points = ply_points(path, &ply)?;
    let rows = &ply.payload["vertex"];
    let channel = |name: &str| -> Result<Option<Vec<f64>>> {
        if !rows.first().is_some_and(|r| r.contains_key(name)) {
            return Ok(None);
        }
        rows.iter()
            .enumerate()
            .map(|(k, r)| {
                r.get(name)
                    .and_then(scalar)
                    .ok_or_else(|| Error::parse(path, None, format!("vertex {k}: bad {name}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    };
    let confidence = channel("confidence")?.unwrap_or_else(|| vec![1.0; points.len()]);
    let labels = channel("label")?
        .map(|codes| {
            codes
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    PointLabel::from_code(c as i64)
                        .ok_or_else(|| Error::parse(path, None, format!("vertex {k}: unknown label {c}")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let in_bbox = channel("in_bbox")?.map(|v| v.iter().map(|&b| b != 0.0).collect());
    let cloud = PointCloud {
        points,
        confidence,
        labels,
        in_bbox,
    };
    cloud
        .validate()
        .map_err(|e| Error::parse(path, None, e.to_string()))?;
    Ok(cloud)
}

#[derive(Deserialize)]
struct CorrespondenceRow {
    object_id: String,
    cx: f64,
    cy: f64,
    cz: f64,
    mx: f64,
    my: f64,
    mz: f64,
}

/// CSV with header `object_id,cx,cy,cz,mx,my,mz`: reconstruction-frame and
/// metric coordinates of the same point.
pub fn load_correspondences(path: &Path) -> Result<Vec<CorrespondencePair>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    for h in ["object_id", "cx", "cy", "cz", "mx", "my", "mz"] {
        if !headers.iter().any(|x| x == h) {
            return Err(Error::parse(path, Some(1), format!("missing column {h}")));
        }
    }
    let mut pairs = Vec::new();
    for row in reader.deserialize::<CorrespondenceRow>() {
        let r = row.map_err(|e| csv_error(path, e))?;
        pairs.push(CorrespondencePair {
            object_id: r.object_id,
            cloud: Vec3::new(r.cx, r.cy, r.cz),
            metric: Vec3::new(r.mx, r.my, r.mz),
        });
    }
    Ok(pairs)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::parse(path, line, format!("{kind:?}")),
    }
}
