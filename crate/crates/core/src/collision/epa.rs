//! Expanding-polytope penetration depth.

use crate::error::{Error, Result};
use crate::se3::Vec3;

use super::gjk::{support, SupportPoint};
use super::part::PlacedPart;

pub const EPA_MAX_ITERATIONS: usize = 256;

/// Stop once the support value along the closest face normal exceeds the
/// face distance by less than this (meters).
const EPA_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Penetration {
    pub depth: f64,
    /// Translating B by `depth * axis` brings the parts into touching contact.
    pub axis: Vec3,
    pub witness_a: Vec3,
    pub witness_b: Vec3,
}

struct Face {
    v: [usize; 3],
    normal: Vec3,
    dist: f64,
    alive: bool,
}

fn make_face(pts: &[SupportPoint], mut v: [usize; 3], interior: &Vec3) -> Face {
    let (a, b, c) = (pts[v[0]].w, pts[v[1]].w, pts[v[2]].w);
    let mut n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 {
        n /= len;
    }
    if n.dot(&(a - interior)) < 0.0 {
        v.swap(1, 2);
        n = -n;
    }
    Face {
        v,
        normal: n,
        dist: n.dot(&a),
        alive: len > 0.0,
    }
}

/// Runs EPA from a GJK simplex that contains the origin. Returns `None` only
/// if the Minkowski difference is flat, which cannot happen for valid parts.
pub(crate) fn epa(
    a: &PlacedPart,
    b: &PlacedPart,
    simplex: Vec<SupportPoint>,
) -> Result<Option<Penetration>> {
    let Some(mut pts) = expand_to_tetrahedron(a, b, simplex) else {
        return Ok(None);
    };
    let interior = pts.iter().map(|p| p.w).sum::<Vec3>() / 4.0;
    let mut faces: Vec<Face> = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]
        .into_iter()
        .map(|v| make_face(&pts, v, &interior))
        .collect();

    for _ in 0..EPA_MAX_ITERATIONS {
        let Some(ci) = (0..faces.len())
            .filter(|&i| faces[i].alive)
            .min_by(|&i, &j| faces[i].dist.total_cmp(&faces[j].dist))
        else {
            return Ok(None);
        };
        let normal = faces[ci].normal;
        let dist = faces[ci].dist;
        let w = support(a, b, &normal);
        if normal.dot(&w.w) - dist <= EPA_TOLERANCE {
            return Ok(Some(finish(&pts, &faces[ci])));
        }

        let wi = pts.len();
        pts.push(w);
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&i| {
                let f = &faces[i];
                f.alive && f.normal.dot(&(w.w - pts[f.v[0]].w)) > 1e-14
            })
            .collect();
        if visible.is_empty() {
            return Ok(Some(finish(&pts, &faces[ci])));
        }
        let mut edges: Vec<([usize; 2], usize)> = Vec::new();
        for &fi in &visible {
            let v = faces[fi].v;
            for k in 0..3 {
                let key = [v[k].min(v[(k + 1) % 3]), v[k].max(v[(k + 1) % 3])];
                match edges.iter_mut().find(|(e, _)| *e == key) {
                    Some((_, c)) => *c += 1,
                    None => edges.push((key, 1)),
                }
            }
            faces[fi].alive = false;
        }
        for (e, count) in edges {
            if count == 1 {
                faces.push(make_face(&pts, [e[0], e[1], wi], &interior));
            }
        }
    }
    Err(Error::IterationLimit {
        algorithm: "EPA",
        limit: EPA_MAX_ITERATIONS,
    })
}

fn finish(pts: &[SupportPoint], face: &Face) -> Penetration {
    let (p0, p1, p2) = (&pts[face.v[0]], &pts[face.v[1]], &pts[face.v[2]]);
    let proj = face.normal * face.dist;
    let [l0, l1, l2] = barycentric(&proj, &p0.w, &p1.w, &p2.w);
    Penetration {
        depth: face.dist,
        axis: face.normal,
        witness_a: p0.a * l0 + p1.a * l1 + p2.a * l2,
        witness_b: p0.b * l0 + p1.b * l1 + p2.b * l2,
    }
}

fn barycentric(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> [f64; 3] {
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let denom = d00 * d11 - d01 * d01;
    if denom.abs() < 1e-300 {
        return [1.0, 0.0, 0.0];
    }
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    [1.0 - v - w, v, w]
}

/// Grows a 1-4 point simplex containing the origin into a non-degenerate
/// tetrahedron of support points.
fn expand_to_tetrahedron(
    a: &PlacedPart,
    b: &PlacedPart,
    mut s: Vec<SupportPoint>,
) -> Option<Vec<SupportPoint>> {
    let scale = (a.radius + b.radius).max(1e-9);
    let eps = 1e-10 * scale;

    if s.len() == 4 {
        let vol = (s[1].w - s[0].w)
            .cross(&(s[2].w - s[0].w))
            .dot(&(s[3].w - s[0].w));
        if vol.abs() <= eps * scale * scale {
            s.pop();
        }
    }
    if s.len() == 3 && (s[1].w - s[0].w).cross(&(s[2].w - s[0].w)).norm() <= eps * scale {
        s.pop();
    }
    if s.len() == 2 && (s[1].w - s[0].w).norm() <= eps {
        s.pop();
    }

    if s.len() == 1 {
        let p0 = s[0].w;
        let dirs = [Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::z(), -Vec3::z()];
        let next = dirs
            .iter()
            .map(|d| support(a, b, d))
            .find(|w| (w.w - p0).norm() > eps)?;
        s.push(next);
    }
    if s.len() == 2 {
        let d = (s[1].w - s[0].w).normalize();
        let k = d.iamin();
        let mut e = Vec3::zeros();
        e[k] = 1.0;
        let u = d.cross(&e).normalize();
        let u2 = d.cross(&u);
        let line_dist = |p: &Vec3| {
            let r = p - s[0].w;
            (r - d * d.dot(&r)).norm()
        };
        let next = (0..6)
            .map(|i| {
                let ang = i as f64 * std::f64::consts::PI / 3.0;
                support(a, b, &(u * ang.cos() + u2 * ang.sin()))
            })
            .find(|w| line_dist(&w.w) > eps)?;
        s.push(next);
    }
    if s.len() == 3 {
        let n = (s[1].w - s[0].w).cross(&(s[2].w - s[0].w)).normalize();
        let off = |w: &SupportPoint| n.dot(&(w.w - s[0].w)).abs();
        let up = support(a, b, &n);
        let next = if off(&up) > eps {
            up
        } else {
            let down = support(a, b, &-n);
            if off(&down) > eps {
                down
            } else {
                return None;
            }
        };
        s.push(next);
    }
    Some(s)
}
