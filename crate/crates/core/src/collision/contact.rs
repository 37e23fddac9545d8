//! Witness placement for flat contacts.
//!
//! When both closest features are edges or faces, the witness pair returned
//! by GJK/EPA is an arbitrary point of the contact patch, and the torque it
//! implies is an artifact. Moving both witnesses to the middle of the patch
//! keeps the distance and the translational gradient unchanged and gives the
//! rotational gradient of the symmetric configuration.

use crate::se3::Vec3;

use super::part::PlacedPart;
use super::DistanceResult;

/// Vertices within this distance (m) of the supporting plane belong to the
/// contact feature.
const FEATURE_EPS: f64 = 1e-9;

type P2 = [f64; 2];

pub(crate) fn center_witnesses(pa: &PlacedPart, pb: &PlacedPart, res: DistanceResult) -> DistanceResult {
    let n = res.axis;
    let max_a = pa.vertices.iter().map(|v| v.dot(&n)).fold(f64::NEG_INFINITY, f64::max);
    let min_b = pb.vertices.iter().map(|v| v.dot(&n)).fold(f64::INFINITY, f64::min);
    let fa: Vec<&Vec3> = pa.vertices.iter().filter(|v| v.dot(&n) >= max_a - FEATURE_EPS).collect();
    let fb: Vec<&Vec3> = pb.vertices.iter().filter(|v| v.dot(&n) <= min_b + FEATURE_EPS).collect();
    if fa.len() < 2 || fb.len() < 2 {
        return res;
    }
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    let project = |pts: &[&Vec3]| -> Vec<P2> { pts.iter().map(|p| [p.dot(&u), p.dot(&v)]).collect() };
    let ha = hull2d(project(&fa));
    let hb = hull2d(project(&fb));
    let Some(c) = patch_center(&ha, &hb) else {
        return res;
    };
    let base = u * c[0] + v * c[1];
    DistanceResult {
        witness_a: base + n * max_a,
        witness_b: base + n * min_b,
        ..res
    }
}

fn cross(o: &P2, a: &P2, b: &P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise hull without collinear points. Collinear input comes
/// back as its two end points.
fn hull2d(mut pts: Vec<P2>) -> Vec<P2> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let scale = pts
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(1e-9);
    let eps = 1e-12 * scale * scale;
    let mut lower: Vec<P2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= eps {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<P2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= eps {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        // All collinear: the extremes along the sorted order.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    lower
}

fn mean(pts: &[P2]) -> P2 {
    let k = pts.len() as f64;
    [
        pts.iter().map(|p| p[0]).sum::<f64>() / k,
        pts.iter().map(|p| p[1]).sum::<f64>() / k,
    ]
}

fn patch_center(a: &[P2], b: &[P2]) -> Option<P2> {
    match (a.len(), b.len()) {
        (2, 2) => segment_overlap(a, b),
        (2, _) => clip_segment(a, b),
        (_, 2) => clip_segment(b, a),
        _ => {
            let clipped = clip_polygon(a, b);
            (!clipped.is_empty()).then(|| mean(&clipped))
        }
    }
}

/// Midpoint of the overlap of two parallel segments; `None` otherwise.
fn segment_overlap(a: &[P2], b: &[P2]) -> Option<P2> {
    let d = [a[1][0] - a[0][0], a[1][1] - a[0][1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let e = [b[1][0] - b[0][0], b[1][1] - b[0][1]];
    if (d[0] * e[1] - d[1] * e[0]).abs() > 1e-9 * len2.sqrt() * (e[0].hypot(e[1])) {
        return None;
    }
    let t = |p: &P2| ((p[0] - a[0][0]) * d[0] + (p[1] - a[0][1]) * d[1]) / len2;
    let (t0, t1) = (t(&b[0]), t(&b[1]));
    let lo = t0.min(t1).max(0.0);
    let hi = t0.max(t1).min(1.0);
    if lo > hi {
        return None;
    }
    let m = 0.5 * (lo + hi);
    // Midway between the two parallel lines as well.
    let on_a = [a[0][0] + d[0] * m, a[0][1] + d[1] * m];
    let foot = |p: &P2| {
        let s = t(p);
        [a[0][0] + d[0] * s, a[0][1] + d[1] * s]
    };
    let off = [b[0][0] - foot(&b[0])[0], b[0][1] - foot(&b[0])[1]];
    Some([on_a[0] + 0.5 * off[0], on_a[1] + 0.5 * off[1]])
}

/// Midpoint of the part of segment `s` inside the convex polygon `poly`.
fn clip_segment(s: &[P2], poly: &[P2]) -> Option<P2> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let d = [s[1][0] - s[0][0], s[1][1] - s[0][1]];
    for k in 0..poly.len() {
        let (p, q) = (&poly[k], &poly[(k + 1) % poly.len()]);
        // Inside is to the left of p->q.
        let f0 = cross(p, q, &s[0]);
        let fd = (q[0] - p[0]) * d[1] - (q[1] - p[1]) * d[0];
        if fd.abs() < 1e-300 {
            if f0 < 0.0 {
                return None;
            }
            continue;
        }
        let t = -f0 / fd;
        if fd > 0.0 {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
    }
    if lo > hi {
        return None;
    }
    let m = 0.5 * (lo + hi);
    Some([s[0][0] + d[0] * m, s[0][1] + d[1] * m])
}

/// Sutherland-Hodgman clipping of `subject` by the convex `clip`.
fn clip_polygon(subject: &[P2], clip: &[P2]) -> Vec<P2> {
    let mut out = subject.to_vec();
    for k in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (p, q) = (&clip[k], &clip[(k + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let (fc, fp) = (cross(p, q, &cur), cross(p, q, &prev));
            if fc >= 0.0 {
                if fp < 0.0 {
                    out.push(lerp(&prev, &cur, fp / (fp - fc)));
                }
                out.push(cur);
            } else if fp >= 0.0 {
                out.push(lerp(&prev, &cur, fp / (fp - fc)));
            }
        }
    }
    out
}

fn lerp(a: &P2, b: &P2, t: f64) -> P2 {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}
