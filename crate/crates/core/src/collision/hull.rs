//! QuickHull in 3D.
//!
//! Only what the collision kernel needs comes out: the extreme vertices and
//! the supporting planes. Points lying on a hull face or edge without being
//! a corner are dropped, so the vertex set is minimal.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::se3::Vec3;

/// Vertices and outward face planes (`normal . x <= offset` inside).
#[derive(Debug, Clone)]
pub struct Hull {
    pub vertices: Vec<Vec3>,
    pub planes: Vec<(Vec3, f64)>,
}

struct Face {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vec3], mut v: [usize; 3], interior: &Vec3) -> Face {
        let (a, b, c) = (points[v[0]], points[v[1]], points[v[2]]);
        let mut normal = (b - a).cross(&(c - a));
        let n = normal.norm();
        normal = if n > 0.0 { normal / n } else { Vec3::zeros() };
        if normal.dot(&(interior - a)) > 0.0 {
            v.swap(1, 2);
            normal = -normal;
        }
        Face {
            v,
            normal,
            offset: normal.dot(&a),
            outside: Vec::new(),
            alive: true,
        }
    }

    #[inline]
    fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Convex hull of a point set with at least four non-coplanar points.
pub fn quickhull(points: &[Vec3]) -> Result<Hull> {
    if points.len() < 4 {
        return Err(Error::DegenerateInput(format!(
            "convex hull needs at least 4 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::DegenerateInput("non-finite point".into()));
    }

    let (lo, hi) = points.iter().fold(
        (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    );
    let extent = hi - lo;
    let scale = extent.max();
    let degenerate_eps = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let eps = 1e-12 * scale.max(1.0);

    // Initial tetrahedron from extreme points.
    let axis = extent.imax();
    let i0 = (0..points.len())
        .min_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]))
        .unwrap();
    let i1 = (0..points.len())
        .max_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(b.cmp(&a)))
        .unwrap();
    if scale <= 0.0 || (points[i1] - points[i0]).norm() <= degenerate_eps {
        return Err(Error::DegenerateInput("all points coincide".into()));
    }
    let line = (points[i1] - points[i0]).normalize();
    let dist_line = |p: &Vec3| {
        let d = p - points[i0];
        (d - line * line.dot(&d)).norm()
    };
    let i2 = farthest(points, dist_line);
    if dist_line(&points[i2]) <= degenerate_eps {
        return Err(Error::DegenerateInput("points are collinear".into()));
    }
    let plane_n = (points[i1] - points[i0])
        .cross(&(points[i2] - points[i0]))
        .normalize();
    let dist_plane = |p: &Vec3| plane_n.dot(&(p - points[i0])).abs();
    let i3 = farthest(points, dist_plane);
    if dist_plane(&points[i3]) <= degenerate_eps {
        return Err(Error::DegenerateInput("points are coplanar".into()));
    }

    let interior = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
    let mut faces: Vec<Face> = [
        [i0, i1, i2],
        [i0, i1, i3],
        [i0, i2, i3],
        [i1, i2, i3],
    ]
    .into_iter()
    .map(|v| Face::new(points, v, &interior))
    .collect();

    let seeds = [i0, i1, i2, i3];
    for (idx, p) in points.iter().enumerate() {
        if seeds.contains(&idx) {
            continue;
        }
        if let Some(f) = faces.iter_mut().find(|f| f.distance(p) > eps) {
            f.outside.push(idx);
        }
    }

    let mut stack: Vec<usize> = (0..faces.len()).collect();
    while let Some(fi) = stack.pop() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        let eye = *faces[fi]
            .outside
            .iter()
            .max_by(|&&a, &&b| {
                faces[fi]
                    .distance(&points[a])
                    .total_cmp(&faces[fi].distance(&points[b]))
            })
            .unwrap();
        let eye_p = points[eye];

        let visible: Vec<usize> = (0..faces.len())
            .filter(|&i| faces[i].alive && faces[i].distance(&eye_p) > eps)
            .collect();

        // Horizon: edges that belong to exactly one visible face.
        let mut edges: Vec<([usize; 2], usize)> = Vec::new();
        for &vi in &visible {
            let v = faces[vi].v;
            for k in 0..3 {
                let e = [v[k], v[(k + 1) % 3]];
                let key = [e[0].min(e[1]), e[0].max(e[1])];
                match edges.iter_mut().find(|(k2, _)| *k2 == key) {
                    Some((_, count)) => *count += 1,
                    None => edges.push((key, 1)),
                }
            }
        }

        let mut orphans = Vec::new();
        for &vi in &visible {
            faces[vi].alive = false;
            orphans.append(&mut faces[vi].outside);
        }

        let first_new = faces.len();
        for (e, count) in edges {
            if count == 1 {
                faces.push(Face::new(points, [e[0], e[1], eye], &interior));
            }
        }
        for p in orphans {
            if p == eye {
                continue;
            }
            if let Some(f) = faces[first_new..]
                .iter_mut()
                .find(|f| f.distance(&points[p]) > eps)
            {
                f.outside.push(p);
            }
        }
        stack.extend(first_new..faces.len());
    }

    let alive: Vec<&Face> = faces.iter().filter(|f| f.alive).collect();

    // A hull vertex is a corner iff the normals of its incident faces span R^3.
    let mut used: Vec<usize> = alive.iter().flat_map(|f| f.v).collect();
    used.sort_unstable();
    used.dedup();
    let vertices: Vec<Vec3> = used
        .into_iter()
        .filter(|&vi| {
            let mut m = Matrix3::zeros();
            for f in alive.iter().filter(|f| f.v.contains(&vi)) {
                m += f.normal * f.normal.transpose();
            }
            let eig = m.symmetric_eigenvalues();
            eig.min() > 1e-10
        })
        .map(|vi| points[vi])
        .collect();

    let planes = alive.iter().map(|f| (f.normal, f.offset)).collect();
    Ok(Hull { vertices, planes })
}

fn farthest(points: &[Vec3], metric: impl Fn(&Vec3) -> f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = metric(p);
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}
