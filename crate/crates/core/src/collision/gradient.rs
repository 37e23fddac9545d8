//! Pose gradients of the signed distance.
//!
//! Gradients are 6-vectors `[translation; rotation]` in the right-tangent
//! convention: component `k` is `d/de_k d(T exp(e))` at `e = 0`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::se3::{exp_se3, Pose, Vec6};

use super::part::{ConvexPart, PlacedPart};
use super::{signed_distance_placed, DistanceResult};

/// Gradient of the signed distance with respect to both poses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceGradient {
    /// Signed distance (averaged over the smoothing samples when smoothed).
    pub value: f64,
    pub grad_a: Vec6,
    pub grad_b: Vec6,
}

/// Exact gradient from a single witness pair, valid where the closest
/// features do not change under small motion.
///
/// Moving a witness point of A by `dx` changes the distance by
/// `-axis . dx`; moving the witness of B changes it by `+axis . dx`.
pub fn witness_gradient(res: &DistanceResult, pose_a: &Pose, pose_b: &Pose) -> (Vec6, Vec6) {
    let half = |pose: &Pose, witness: &crate::se3::Vec3, sign: f64| {
        let rt = pose.rotation.transpose();
        let u = rt.rotate(&res.axis);
        let p = rt.rotate(&(witness - pose.translation));
        let rot = p.cross(&u);
        Vec6::new(
            sign * u.x,
            sign * u.y,
            sign * u.z,
            sign * rot.x,
            sign * rot.y,
            sign * rot.z,
        )
    };
    (
        half(pose_a, &res.witness_a, -1.0),
        half(pose_b, &res.witness_b, 1.0),
    )
}

/// Gaussian tangent perturbations used by the smoothed gradient. Exposed so
/// callers can evaluate the smoothed objective with the same samples.
pub fn smoothing_noise(seed: u64, noise_scale: f64, samples: usize) -> Vec<Vec6> {
    if noise_scale <= 0.0 {
        return vec![Vec6::zeros()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_scale).expect("positive finite scale");
    (0..samples.max(1))
        .map(|_| Vec6::from_fn(|_, _| normal.sample(&mut rng)))
        .collect()
}

/// Gradient of `E[d(A exp(eps), B)]` with `eps ~ N(0, noise_scale^2 I)`,
/// estimated from `samples` draws. Zero noise yields the witness gradient.
pub fn distance_gradient(
    a: &ConvexPart,
    pose_a: &Pose,
    b: &ConvexPart,
    pose_b: &Pose,
    noise_scale: f64,
    samples: usize,
    seed: u64,
) -> Result<DistanceGradient> {
    let pb = b.place(pose_b);
    let noise = smoothing_noise(seed, noise_scale, samples);
    smoothed_gradient(a, pose_a, &pb, &noise)
}

pub(crate) fn smoothed_gradient(
    a: &ConvexPart,
    pose_a: &Pose,
    pb: &PlacedPart,
    noise: &[Vec6],
) -> Result<DistanceGradient> {
    let mut out = DistanceGradient {
        value: 0.0,
        grad_a: Vec6::zeros(),
        grad_b: Vec6::zeros(),
    };
    for eps in noise {
        let perturbed = pose_a.compose(&exp_se3(eps));
        let pa = a.place(&perturbed);
        let res = signed_distance_placed(&pa, pb)?;
        let (ga, gb) = witness_gradient(&res, &perturbed, &pb.pose);
        out.value += res.signed_distance;
        // Pull the gradient at T exp(eps) back to the tangent space at T.
        out.grad_a += if eps.iter().all(|e| *e == 0.0) {
            ga
        } else {
            exp_se3(&-eps).adjoint().transpose() * ga
        };
        out.grad_b += gb;
    }
    let n = noise.len() as f64;
    out.value /= n;
    out.grad_a /= n;
    out.grad_b /= n;
    Ok(out)
}
