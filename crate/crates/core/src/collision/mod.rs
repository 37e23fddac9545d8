//! Signed distance between convex parts.
//!
//! Sign convention: `axis` points from `witness_a` toward `witness_b` when
//! the parts are separated. When they overlap it is the minimum-translation
//! direction for B: moving B by `-signed_distance * axis` leaves the parts
//! just touching. In both cases moving B along `axis` increases the signed
//! distance, which is what every gradient below is built on.

mod contact;
mod epa;
mod gjk;
mod gradient;
mod hull;
mod part;

pub use epa::EPA_MAX_ITERATIONS;
pub use gjk::GJK_MAX_ITERATIONS;
pub(crate) use gradient::smoothed_gradient;
pub use gradient::{distance_gradient, smoothing_noise, witness_gradient, DistanceGradient};
pub use hull::{quickhull, Hull};
pub use part::{icosphere_mesh, ConvexPart, PlacedPart};

use crate::error::{Error, Result};
use crate::se3::{Pose, Vec3};

use gjk::GjkOutcome;

/// Pairs whose bounding spheres are farther apart than this are culled.
pub const ACTIVATION_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceResult {
    /// Meters; negative when the interiors overlap.
    pub signed_distance: f64,
    pub witness_a: Vec3,
    pub witness_b: Vec3,
    pub axis: Vec3,
}

/// Convex hull of a point set as a collision part.
pub fn convex_hull(points: &[Vec3]) -> Result<ConvexPart> {
    ConvexPart::from_points(points)
}

/// Separation distance. `Ok(None)` means the parts touch or overlap.
pub fn gjk_distance(
    a: &ConvexPart,
    pose_a: &Pose,
    b: &ConvexPart,
    pose_b: &Pose,
) -> Result<Option<DistanceResult>> {
    let (pa, pb) = (a.place(pose_a), b.place(pose_b));
    Ok(match gjk::gjk(&pa, &pb)? {
        GjkOutcome::Separated {
            distance,
            witness_a,
            witness_b,
            axis,
        } => Some(contact::center_witnesses(
            &pa,
            &pb,
            DistanceResult {
                signed_distance: distance,
                witness_a,
                witness_b,
                axis,
            },
        )),
        GjkOutcome::Overlap(_) => None,
    })
}

/// Penetration depth of overlapping parts, reported as a negative distance.
/// Fails with `DegenerateInput` when the parts are separated.
pub fn epa_penetration(
    a: &ConvexPart,
    pose_a: &Pose,
    b: &ConvexPart,
    pose_b: &Pose,
) -> Result<DistanceResult> {
    let (pa, pb) = (a.place(pose_a), b.place(pose_b));
    match gjk::gjk(&pa, &pb)? {
        GjkOutcome::Overlap(simplex) => {
            penetration(&pa, &pb, simplex).map(|r| contact::center_witnesses(&pa, &pb, r))
        }
        GjkOutcome::Separated { .. } => Err(Error::DegenerateInput(
            "parts are separated; no penetration depth".into(),
        )),
    }
}

pub fn signed_distance(
    a: &ConvexPart,
    pose_a: &Pose,
    b: &ConvexPart,
    pose_b: &Pose,
) -> Result<DistanceResult> {
    signed_distance_placed(&a.place(pose_a), &b.place(pose_b))
}

/// Signed distance of already placed parts. For edge or face contacts the
/// witnesses sit at the middle of the contact patch.
pub fn signed_distance_placed(pa: &PlacedPart, pb: &PlacedPart) -> Result<DistanceResult> {
    let res = match gjk::gjk(pa, pb)? {
        GjkOutcome::Separated {
            distance,
            witness_a,
            witness_b,
            axis,
        } => Ok(DistanceResult {
            signed_distance: distance,
            witness_a,
            witness_b,
            axis,
        }),
        GjkOutcome::Overlap(simplex) => penetration(pa, pb, simplex),
    }?;
    Ok(contact::center_witnesses(pa, pb, res))
}

fn penetration(
    pa: &PlacedPart,
    pb: &PlacedPart,
    simplex: Vec<gjk::SupportPoint>,
) -> Result<DistanceResult> {
    let p = epa::epa(pa, pb, simplex)?
        .ok_or_else(|| Error::DegenerateInput("flat Minkowski difference".into()))?;
    Ok(DistanceResult {
        signed_distance: if p.depth > 0.0 { -p.depth } else { 0.0 },
        witness_a: p.witness_a,
        witness_b: p.witness_b,
        axis: p.axis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{exp_se3, exp_so3, Rotation, Vec6};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cube() -> ConvexPart {
        ConvexPart::cuboid(Vec3::repeat(0.5)).unwrap()
    }

    fn at(x: f64, y: f64, z: f64) -> Pose {
        Pose::from_translation(Vec3::new(x, y, z))
    }

    #[test]
    fn separated_cubes() {
        let c = unit_cube();
        let r = signed_distance(&c, &at(0.0, 0.0, 0.0), &c, &at(3.0, 0.0, 0.0)).unwrap();
        assert!((r.signed_distance - 2.0).abs() < 1e-6);
        assert!((r.axis - Vec3::x()).norm() < 1e-9);
        assert!(((r.witness_a - r.witness_b).norm() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn touching_cubes() {
        let c = unit_cube();
        let r = signed_distance(&c, &at(0.0, 0.0, 0.0), &c, &at(1.0, 0.0, 0.0)).unwrap();
        assert!(r.signed_distance.abs() < 1e-6);
    }

    #[test]
    fn coincident_and_overlapping_cubes() {
        let c = unit_cube();
        let r = epa_penetration(&c, &at(0.0, 0.0, 0.0), &c, &at(0.0, 0.0, 0.0)).unwrap();
        assert!((r.signed_distance + 1.0).abs() < 1e-4);
        let r = signed_distance(&c, &at(0.0, 0.0, 0.0), &c, &at(0.8, 0.0, 0.0)).unwrap();
        assert!((r.signed_distance + 0.2).abs() < 1e-5);
        assert!((r.axis - Vec3::x()).norm() < 1e-9);
        assert!(matches!(
            epa_penetration(&c, &at(0.0, 0.0, 0.0), &c, &at(3.0, 0.0, 0.0)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn translating_by_depth_touches() {
        let c = unit_cube();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let pa = Pose::new(
                exp_so3(&Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.3)),
                Vec3::zeros(),
            );
            let pb = Pose::new(
                exp_so3(&Vec3::new(0.2, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
                Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.2),
            );
            let r = signed_distance(&c, &pa, &c, &pb).unwrap();
            assert!(r.signed_distance < 0.0);
            assert!((r.axis.norm() - 1.0).abs() < 1e-9);
            let moved = Pose::new(pb.rotation, pb.translation - r.signed_distance * r.axis);
            let after = signed_distance(&c, &pa, &c, &moved).unwrap();
            assert!(after.signed_distance.abs() <= 1e-4, "{}", after.signed_distance);
        }
    }

    fn seg_seg(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> f64 {
        // Nested ternary search; the distance is convex in (s, t).
        let f = |s: f64, t: f64| ((p1 + (q1 - p1) * s) - (p2 + (q2 - p2) * t)).norm();
        let best_t = |s: f64| {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..100 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(s, m1) < f(s, m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            f(s, 0.5 * (lo + hi))
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if best_t(m1) < best_t(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best_t(0.5 * (lo + hi))
    }

    fn point_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
        let n = (b - a).cross(&(c - a)).normalize();
        let proj = p - n * n.dot(&(p - a));
        let inside = [(a, b), (b, c), (c, a)]
            .iter()
            .all(|(u, v)| (*v - *u).cross(&(proj - *u)).dot(&n) >= 0.0);
        if inside {
            (p - proj).norm()
        } else {
            [(a, b), (b, c), (c, a)]
                .iter()
                .map(|(u, v)| seg_seg(p, p, u, v))
                .fold(f64::INFINITY, f64::min)
        }
    }

    /// Minimum over vertex-face and edge-edge feature pairs.
    fn brute_force(va: &[Vec3], vb: &[Vec3]) -> f64 {
        let tris = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
        let edges = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
        let mut best = f64::INFINITY;
        for (x, y) in [(va, vb), (vb, va)] {
            for p in x {
                for t in &tris {
                    best = best.min(point_triangle(p, &y[t[0]], &y[t[1]], &y[t[2]]));
                }
            }
        }
        for e in &edges {
            for g in &edges {
                best = best.min(seg_seg(&va[e[0]], &va[e[1]], &vb[g[0]], &vb[g[1]]));
            }
        }
        best
    }

    #[test]
    fn tetrahedra_match_feature_pair_oracle() {
        let s = 1.0 / 2f64.sqrt();
        let tet = [
            Vec3::new(1.0, 0.0, -s),
            Vec3::new(-1.0, 0.0, -s),
            Vec3::new(0.0, 1.0, s),
            Vec3::new(0.0, -1.0, s),
        ];
        let part = ConvexPart::from_points(&tet).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let rand_pose = |rng: &mut ChaCha8Rng, spread: f64| {
                Pose::new(
                    exp_so3(&Vec3::from_fn(|_, _| rng.random_range(-3.0..3.0))),
                    Vec3::from_fn(|_, _| rng.random_range(-spread..spread)),
                )
            };
            let pa = rand_pose(&mut rng, 1.0);
            let mut pb = rand_pose(&mut rng, 1.0);
            pb.translation += Vec3::new(4.0, 0.0, 0.0);
            let r = signed_distance(&part, &pa, &part, &pb).unwrap();
            let va: Vec<Vec3> = tet.iter().map(|v| pa.act(v)).collect();
            let vb: Vec<Vec3> = tet.iter().map(|v| pb.act(v)).collect();
            let oracle = brute_force(&va, &vb);
            assert!((r.signed_distance - oracle).abs() < 1e-6, "{} vs {}", r.signed_distance, oracle);
            assert!(((r.witness_a - r.witness_b).norm() - r.signed_distance).abs() < 1e-6);
        }
    }

    #[test]
    fn symmetry_and_rigid_invariance() {
        let a = ConvexPart::cylinder(0.05, 0.12, 16).unwrap();
        let b = ConvexPart::cuboid(Vec3::new(0.04, 0.03, 0.06)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let pa = Pose::new(
                exp_so3(&Vec3::from_fn(|_, _| rng.random_range(-2.0..2.0))),
                Vec3::from_fn(|_, _| rng.random_range(-0.08..0.08)),
            );
            let pb = Pose::new(
                exp_so3(&Vec3::from_fn(|_, _| rng.random_range(-2.0..2.0))),
                Vec3::from_fn(|_, _| rng.random_range(-0.08..0.08)),
            );
            let ab = signed_distance(&a, &pa, &b, &pb).unwrap().signed_distance;
            let ba = signed_distance(&b, &pb, &a, &pa).unwrap().signed_distance;
            assert!((ab - ba).abs() < 1e-9, "{ab} vs {ba}");
            let w = exp_se3(&Vec6::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let moved = signed_distance(&a, &w.compose(&pa), &b, &w.compose(&pb))
                .unwrap()
                .signed_distance;
            assert!((ab - moved).abs() < 1e-7);
        }
    }

    fn fd_grad(a: &ConvexPart, pa: &Pose, b: &ConvexPart, pb: &Pose, on_a: bool) -> Vec6 {
        let h = 1e-6;
        Vec6::from_fn(|k, _| {
            let mut e = Vec6::zeros();
            e[k] = h;
            let eval = |xi: Vec6| {
                let (qa, qb) = if on_a {
                    (pa.retract(&xi), *pb)
                } else {
                    (*pa, pb.retract(&xi))
                };
                signed_distance(a, &qa, b, &qb).unwrap().signed_distance
            };
            (eval(e) - eval(-e)) / (2.0 * h)
        })
    }

    #[test]
    fn separated_cube_gradient_sign() {
        let c = unit_cube();
        let (pa, pb) = (at(0.0, 0.0, 0.0), at(3.0, 0.2, 0.1));
        let g = distance_gradient(&c, &pa, &c, &pb, 0.0, 1, 0).unwrap();
        // Face-face contact: only the translational part is differentiable.
        let trans = g.grad_a.fixed_rows::<3>(0).into_owned();
        assert!((trans - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-9);
        let fd = fd_grad(&c, &pa, &c, &pb, true).fixed_rows::<3>(0).into_owned();
        assert!((trans - fd).norm() < 1e-6);
        assert!((g.grad_b.fixed_rows::<3>(0) + trans).norm() < 1e-9);
    }

    #[test]
    fn witness_gradient_matches_finite_differences() {
        // Face contacts: a small tilted box hovering over / sunk into a slab.
        let slab = ConvexPart::cuboid(Vec3::new(0.5, 0.5, 0.05)).unwrap();
        let boxy = ConvexPart::cuboid(Vec3::new(0.04, 0.03, 0.02)).unwrap();
        let pb = Pose::new(Rotation::about_axis(&Vec3::x(), 0.1), Vec3::new(0.0, 0.0, -0.05));
        for (z, tilt) in [(0.2, 0.3), (0.01, -0.2), (0.06, 0.25)] {
            let pa = Pose::new(
                exp_so3(&Vec3::new(tilt, 0.5 * tilt, 0.7)),
                Vec3::new(0.05, -0.02, z),
            );
            let res = signed_distance(&boxy, &pa, &slab, &pb).unwrap();
            assert!(res.signed_distance.abs() > 1e-4);
            let (ga, gb) = witness_gradient(&res, &pa, &pb);
            for (an, fd) in [
                (ga, fd_grad(&boxy, &pa, &slab, &pb, true)),
                (gb, fd_grad(&boxy, &pa, &slab, &pb, false)),
            ] {
                let rel = (an - fd).norm() / fd.norm().max(1e-12);
                assert!(rel < 1e-3, "analytic {an:?} fd {fd:?}");
            }
        }
    }

    #[test]
    fn smoothed_gradient_matches_smoothed_fd() {
        let s = ConvexPart::icosphere(0.05, 2).unwrap();
        let pa = Pose::new(exp_so3(&Vec3::new(0.3, 0.1, -0.2)), Vec3::new(0.0, 0.0, 0.0));
        let pb = Pose::new(exp_so3(&Vec3::new(-0.1, 0.4, 0.2)), Vec3::new(0.13, 0.04, -0.02));
        let (scale, n, seed) = (1e-3, 64, 99);
        let g = distance_gradient(&s, &pa, &s, &pb, scale, n, seed).unwrap();
        let noise = smoothing_noise(seed, scale, n);
        let smoothed = |q: &Pose| {
            noise
                .iter()
                .map(|e| signed_distance(&s, &q.retract(e), &s, &pb).unwrap().signed_distance)
                .sum::<f64>()
                / noise.len() as f64
        };
        let h = 1e-6;
        let fd = Vec6::from_fn(|k, _| {
            let mut e = Vec6::zeros();
            e[k] = h;
            (smoothed(&pa.retract(&e)) - smoothed(&pa.retract(&-e))) / (2.0 * h)
        });
        let rel = (g.grad_a - fd).norm() / fd.norm();
        assert!(rel < 0.05, "rel {rel}: {:?} vs {:?}", g.grad_a, fd);
        let again = distance_gradient(&s, &pa, &s, &pb, scale, n, seed).unwrap();
        assert_eq!(g, again);
    }
}
