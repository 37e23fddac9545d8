use std::f64::consts::PI;

use crate::error::Result;
use crate::se3::{Pose, Vec3};

use super::hull::quickhull;

/// A convex polytope given by its corner vertices in the part-local frame.
#[derive(Debug, Clone)]
pub struct ConvexPart {
    vertices: Vec<Vec3>,
    centroid: Vec3,
    radius: f64,
    planes: Vec<(Vec3, f64)>,
}

impl ConvexPart {
    /// Convex hull of `points`; fails with `DegenerateInput` on flat sets.
    pub fn from_points(points: &[Vec3]) -> Result<ConvexPart> {
        let hull = quickhull(points)?;
        let n = hull.vertices.len() as f64;
        let centroid = hull.vertices.iter().sum::<Vec3>() / n;
        let radius = hull
            .vertices
            .iter()
            .map(|v| (v - centroid).norm())
            .fold(0.0, f64::max);
        Ok(ConvexPart {
            vertices: hull.vertices,
            centroid,
            radius,
            planes: hull.planes,
        })
    }

    /// Axis-aligned box centred at the origin.
    pub fn cuboid(half_extents: Vec3) -> Result<ConvexPart> {
        let mut pts = Vec::with_capacity(8);
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    pts.push(half_extents.component_mul(&Vec3::new(sx, sy, sz)));
                }
            }
        }
        ConvexPart::from_points(&pts)
    }

    /// Prism approximating a z-aligned cylinder centred at the origin.
    pub fn cylinder(radius: f64, height: f64, segments: usize) -> Result<ConvexPart> {
        let mut pts = Vec::with_capacity(2 * segments);
        for z in [-0.5 * height, 0.5 * height] {
            for k in 0..segments {
                let a = 2.0 * PI * k as f64 / segments as f64;
                pts.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
            }
        }
        ConvexPart::from_points(&pts)
    }

    /// Subdivided icosahedron; 2 subdivisions give 162 vertices.
    pub fn icosphere(radius: f64, subdivisions: usize) -> Result<ConvexPart> {
        let (verts, _) = icosphere_mesh(subdivisions);
        let pts: Vec<Vec3> = verts.iter().map(|v| v * radius).collect();
        ConvexPart::from_points(&pts)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn centroid(&self) -> Vec3 {
        self.centroid
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Outward face planes `(n, c)`, inside where `n . x <= c`.
    pub fn planes(&self) -> &[(Vec3, f64)] {
        &self.planes
    }

    pub fn place(&self, pose: &Pose) -> PlacedPart {
        PlacedPart {
            vertices: self.vertices.iter().map(|v| pose.act(v)).collect(),
            center: pose.act(&self.centroid),
            radius: self.radius,
            pose: *pose,
        }
    }

    /// Intersects the ray `origin + s * dir` (s >= 0) with the posed part.
    /// Returns the entry parameter, clamped at 0 when the origin is inside.
    pub fn ray_cast(&self, pose: &Pose, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let rt = pose.rotation.transpose();
        let o = rt.rotate(&(origin - pose.translation));
        let d = rt.rotate(dir);
        let mut enter = f64::NEG_INFINITY;
        let mut exit = f64::INFINITY;
        for (n, c) in &self.planes {
            let denom = n.dot(&d);
            let num = c - n.dot(&o);
            if denom.abs() < 1e-15 {
                if num < 0.0 {
                    return None;
                }
                continue;
            }
            let s = num / denom;
            if denom < 0.0 {
                enter = enter.max(s);
            } else {
                exit = exit.min(s);
            }
        }
        (enter <= exit && exit >= 0.0).then(|| enter.max(0.0))
    }
}

/// A part with its vertices already transformed into the world frame.
#[derive(Debug, Clone)]
pub struct PlacedPart {
    pub(crate) vertices: Vec<Vec3>,
    pub(crate) center: Vec3,
    pub(crate) radius: f64,
    pub(crate) pose: Pose,
}

impl PlacedPart {
    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    /// Lower bound on the distance between the two parts from their
    /// bounding spheres.
    pub fn sphere_gap(&self, other: &PlacedPart) -> f64 {
        (self.center - other.center).norm() - self.radius - other.radius
    }

    #[inline]
    pub(crate) fn support(&self, dir: &Vec3) -> Vec3 {
        let mut best = self.vertices[0];
        let mut best_d = best.dot(dir);
        for v in &self.vertices[1..] {
            let d = v.dot(dir);
            if d > best_d {
                best_d = d;
                best = *v;
            }
        }
        best
    }
}

/// Unit icosphere vertices and triangles.
pub fn icosphere_mesh(subdivisions: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint = std::collections::HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) / 2.0).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}
