use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use ply_rs_bw::parser::Parser;
use ply_rs_bw::ply::{DefaultElement, Ply, Property};

use crate::error::{Error, Result};
use crate::se3::Vec3;

/// Triangle mesh in meters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

/// Loads an OBJ or PLY file, chosen by extension. Polygons are
/// fan-triangulated.
pub fn load_mesh(path: &Path) -> Result<Mesh> {
    if !path.is_file() {
        return Err(Error::MissingMesh(path.to_path_buf()));
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let mesh = match ext.as_str() {
        "obj" => load_obj(path)?,
        "ply" => load_ply_mesh(path)?,
        _ => return Err(Error::parse(path, None, "unknown mesh format (expected .obj or .ply)")),
    };
    if let Some(v) = mesh.vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
        return Err(Error::parse(path, None, format!("non-finite vertex {v:?}")));
    }
    Ok(mesh)
}

fn load_obj(path: &Path) -> Result<Mesh> {
    let opts = tobj::LoadOptions {
        triangulate: true,
        ..Default::default()
    };
    let (models, _materials) =
        tobj::load_obj(path, &opts).map_err(|e| Error::parse(path, None, e.to_string()))?;
    let mut mesh = Mesh::default();
    for m in models {
        let base = mesh.vertices.len();
        let pos = &m.mesh.positions;
        mesh.vertices
            .extend(pos.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])));
        mesh.triangles.extend(
            m.mesh
                .indices
                .chunks_exact(3)
                .map(|t| [base + t[0] as usize, base + t[1] as usize, base + t[2] as usize]),
        );
    }
    Ok(mesh)
}

pub(crate) fn read_ply(path: &Path) -> Result<Ply<DefaultElement>> {
    let mut reader = BufReader::new(File::open(path)?);
    Parser::<DefaultElement>::new()
        .read_ply(&mut reader)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

pub(crate) fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn index_list(p: &Property) -> Option<Vec<i64>> {
    Some(match p {
        Property::ListChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUChar(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUShort(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListInt(v) => v.iter().map(|&x| x as i64).collect(),
        Property::ListUInt(v) => v.iter().map(|&x| x as i64).collect(),
        _ => return None,
    })
}

pub(crate) fn ply_points(path: &Path, ply: &Ply<DefaultElement>) -> Result<Vec<Vec3>> {
    let Some(vertices) = ply.payload.get("vertex") else {
        return Err(Error::parse(path, None, "no vertex element"));
    };
    vertices
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let get = |name: &str| {
                v.get(name)
                    .and_then(scalar)
                    .ok_or_else(|| Error::parse(path, None, format!("vertex {k}: missing or non-scalar {name}")))
            };
            Ok(Vec3::new(get("x")?, get("y")?, get("z")?))
        })
        .collect()
}

fn load_ply_mesh(path: &Path) -> Result<Mesh> {
    let ply = read_ply(path)?;
    let vertices = ply_points(path, &ply)?;
    let mut triangles = Vec::new();
    for (k, f) in ply.payload.get("face").into_iter().flatten().enumerate() {
        let idx = f
            .get("vertex_indices")
            .or_else(|| f.get("vertex_index"))
            .and_then(index_list)
            .ok_or_else(|| Error::parse(path, None, format!("face {k}: missing vertex_indices")))?;
        if idx.len() < 3 {
            return Err(Error::parse(path, None, format!("face {k} has {} vertices", idx.len())));
        }
        if let Some(bad) = idx.iter().find(|&&i| i < 0 || i as usize >= vertices.len()) {
            return Err(Error::parse(path, None, format!("face {k}: vertex index {bad} out of range")));
        }
        for j in 1..idx.len() - 1 {
            triangles.push([idx[0] as usize, idx[j] as usize, idx[j + 1] as usize]);
        }
    }
    Ok(Mesh { vertices, triangles })
}
