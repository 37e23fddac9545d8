//! GJK distance query on the Minkowski difference `A - B`.

use crate::error::{Error, Result};
use crate::se3::Vec3;

use super::part::PlacedPart;

pub const GJK_MAX_ITERATIONS: usize = 128;

/// Below this `|v|` the origin is treated as touching the difference and the
/// query is handed to EPA.
const TOUCH_DISTANCE: f64 = 1e-12;

/// Relative duality-gap tolerance `(|v|^2 - v.w) <= REL_GAP |v|^2`.
const REL_GAP: f64 = 1e-13;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SupportPoint {
    pub w: Vec3,
    pub a: Vec3,
    pub b: Vec3,
}

#[inline]
pub(crate) fn support(a: &PlacedPart, b: &PlacedPart, dir: &Vec3) -> SupportPoint {
    let pa = a.support(dir);
    let pb = b.support(&-dir);
    SupportPoint {
        w: pa - pb,
        a: pa,
        b: pb,
    }
}

#[derive(Debug, Clone)]
pub(crate) enum GjkOutcome {
    Separated {
        distance: f64,
        witness_a: Vec3,
        witness_b: Vec3,
        /// Unit vector from `witness_a` toward `witness_b`.
        axis: Vec3,
    },
    /// Origin inside (or on) the difference; the simplex contains it.
    Overlap(Vec<SupportPoint>),
}

pub(crate) fn gjk(a: &PlacedPart, b: &PlacedPart) -> Result<GjkOutcome> {
    let mut v = a.center - b.center;
    if v.norm_squared() < 1e-24 {
        v = Vec3::x();
    }
    let first = support(a, b, &-v);
    let mut simplex = vec![first];
    let mut lambdas = vec![1.0];
    v = first.w;

    for _ in 0..GJK_MAX_ITERATIONS {
        let vv = v.norm_squared();
        if vv <= TOUCH_DISTANCE * TOUCH_DISTANCE {
            return Ok(GjkOutcome::Overlap(simplex));
        }
        let w = support(a, b, &-v);
        let gap = vv - v.dot(&w.w);
        if gap <= REL_GAP * vv || simplex.iter().any(|s| s.w == w.w) {
            return Ok(separated(&simplex, &lambdas, v));
        }
        let mut candidate = simplex.clone();
        candidate.push(w);
        match closest_on_simplex(&candidate) {
            None => return Ok(GjkOutcome::Overlap(candidate)),
            Some((nv, ns, nl)) => {
                if nv.norm_squared() >= vv {
                    // No progress: the current simplex is already optimal.
                    return Ok(separated(&simplex, &lambdas, v));
                }
                v = nv;
                simplex = ns;
                lambdas = nl;
            }
        }
    }
    Err(Error::IterationLimit {
        algorithm: "GJK",
        limit: GJK_MAX_ITERATIONS,
    })
}

fn separated(simplex: &[SupportPoint], lambdas: &[f64], v: Vec3) -> GjkOutcome {
    let mut wa = Vec3::zeros();
    let mut wb = Vec3::zeros();
    for (s, l) in simplex.iter().zip(lambdas) {
        wa += s.a * *l;
        wb += s.b * *l;
    }
    let distance = v.norm();
    GjkOutcome::Separated {
        distance,
        witness_a: wa,
        witness_b: wb,
        axis: -v / distance,
    }
}

type Reduced = (Vec3, Vec<SupportPoint>, Vec<f64>);

/// Closest point of the simplex to the origin, the minimal sub-simplex that
/// realizes it and its barycentric weights. `None` means the origin lies
/// inside a full tetrahedron.
pub(crate) fn closest_on_simplex(s: &[SupportPoint]) -> Option<Reduced> {
    match s.len() {
        1 => Some((s[0].w, vec![s[0]], vec![1.0])),
        2 => Some(closest_segment(&s[0], &s[1])),
        3 => Some(closest_triangle(&s[0], &s[1], &s[2])),
        4 => closest_tetrahedron(s),
        _ => unreachable!("simplex has at most 4 vertices"),
    }
}

fn closest_segment(p: &SupportPoint, q: &SupportPoint) -> Reduced {
    let d = q.w - p.w;
    let dd = d.norm_squared();
    let t = if dd > 0.0 { -p.w.dot(&d) / dd } else { 0.0 };
    if t <= 0.0 {
        (p.w, vec![*p], vec![1.0])
    } else if t >= 1.0 {
        (q.w, vec![*q], vec![1.0])
    } else {
        (p.w + d * t, vec![*p, *q], vec![1.0 - t, t])
    }
}

/// Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
fn closest_triangle(a: &SupportPoint, b: &SupportPoint, c: &SupportPoint) -> Reduced {
    let ab = b.w - a.w;
    let ac = c.w - a.w;
    let ap = -a.w;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a.w, vec![*a], vec![1.0]);
    }
    let bp = -b.w;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b.w, vec![*b], vec![1.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return (a.w + ab * t, vec![*a, *b], vec![1.0 - t, t]);
    }
    let cp = -c.w;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c.w, vec![*c], vec![1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return (a.w + ac * t, vec![*a, *c], vec![1.0 - t, t]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b.w + (c.w - b.w) * t, vec![*b, *c], vec![1.0 - t, t]);
    }
    let denom = va + vb + vc;
    if denom.abs() < 1e-300 {
        // Degenerate (collinear) triangle: fall back to its edges.
        return [closest_segment(a, b), closest_segment(a, c), closest_segment(b, c)]
            .into_iter()
            .min_by(|x, y| x.0.norm_squared().total_cmp(&y.0.norm_squared()))
            .unwrap();
    }
    let v = vb / denom;
    let w = vc / denom;
    (
        a.w + ab * v + ac * w,
        vec![*a, *b, *c],
        vec![1.0 - v - w, v, w],
    )
}

fn closest_tetrahedron(s: &[SupportPoint]) -> Option<Reduced> {
    const FACES: [([usize; 3], usize); 4] = [
        ([0, 1, 2], 3),
        ([0, 1, 3], 2),
        ([0, 2, 3], 1),
        ([1, 2, 3], 0),
    ];
    let scale = s
        .iter()
        .map(|p| (p.w - s[0].w).norm())
        .fold(0.0, f64::max);
    let volume = (s[1].w - s[0].w)
        .cross(&(s[2].w - s[0].w))
        .dot(&(s[3].w - s[0].w));
    let degenerate = volume.abs() <= 1e-12 * scale.powi(3);

    let mut best: Option<Reduced> = None;
    for (f, opp) in FACES {
        let (a, b, c) = (&s[f[0]], &s[f[1]], &s[f[2]]);
        let n = (b.w - a.w).cross(&(c.w - a.w));
        let side_origin = -n.dot(&a.w);
        let side_opp = n.dot(&(s[opp].w - a.w));
        if !degenerate && side_origin * side_opp >= 0.0 {
            continue;
        }
        let cand = closest_triangle(a, b, c);
        if best
            .as_ref()
            .is_none_or(|b| cand.0.norm_squared() < b.0.norm_squared())
        {
            best = Some(cand);
        }
    }
    best
}
