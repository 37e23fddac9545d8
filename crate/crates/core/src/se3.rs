//! Rotation and rigid-transform algebra.
//!
//! Rotations are stored as 3x3 matrices; unit quaternions (w, x, y, z) only
//! appear at the file boundary.
//!
//! Tangent vectors are 6-vectors ordered `[translation; rotation]`, and every
//! update in this crate is a **right** perturbation: `T <- T * exp(xi)`. All
//! gradients with respect to a pose are expressed in that same right-tangent
//! frame, i.e. the translational part lives in the object frame.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat6 = Matrix6<f64>;

/// Tolerance on `R R^T = I` and `det R = 1` accepted by [`Rotation::from_matrix`].
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Below this angle the closed-form series switch to Taylor expansions.
const SMALL_ANGLE: f64 = 1e-6;

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
#[inline]
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// An element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps a matrix after checking orthonormality and handedness.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let deviation = orthonormality_error(&m);
        if !deviation.is_finite() || deviation > ORTHONORMAL_TOL {
            return Err(Error::NonOrthonormal { deviation });
        }
        Ok(Rotation(m))
    }

    /// Projects an arbitrary (non-singular, proper) matrix onto SO(3).
    pub fn from_matrix_orthonormalized(m: Mat3) -> Result<Self> {
        let svd = m.svd(true, true);
        let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
            return Err(Error::DegenerateInput("SVD failed".into()));
        };
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            return Err(Error::DegenerateInput("matrix is a reflection".into()));
        }
        // One Newton polar step cleans up the SVD roundoff.
        r = polar_step(&r);
        Ok(Rotation(r))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Rotation {
        self.transpose()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Composition `self * other`, followed by one polar re-orthonormalization
    /// step so that long chains do not drift off the manifold.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(polar_step(&(self.0 * other.0)))
    }

    pub fn about_axis(axis: &Vec3, angle: f64) -> Rotation {
        let n = axis.norm();
        if n == 0.0 {
            return Rotation::identity();
        }
        exp_so3(&(axis * (angle / n)))
    }

    /// Builds the rotation from a quaternion `[w, x, y, z]`, normalizing it.
    pub fn from_quaternion_wxyz(q: [f64; 4]) -> Result<Rotation> {
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::DegenerateInput(format!("quaternion norm {n}")));
        }
        let [w, x, y, z] = q.map(|c| c / n);
        let m = Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        Ok(Rotation(m))
    }

    /// Canonical unit quaternion `[w, x, y, z]` with `w >= 0`. At exactly
    /// `w == 0` the sign is chosen so the first non-zero vector component is
    /// positive.
    pub fn to_quaternion_wxyz(&self) -> [f64; 4] {
        let m = &self.0;
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        // Shepperd: pivot on the largest of (trace, diagonal) for stability.
        let mut q = if trace >= m[(0, 0)] && trace >= m[(1, 1)] && trace >= m[(2, 2)] {
            let s = 2.0 * (1.0 + trace).max(0.0).sqrt();
            [
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            ]
        } else if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).max(0.0).sqrt();
            [
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            ]
        } else if m[(1, 1)] >= m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).max(0.0).sqrt();
            [
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            ]
        } else {
            let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).max(0.0).sqrt();
            [
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            ]
        };
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        q = q.map(|c| c / n);
        let flip = if q[0] != 0.0 {
            q[0] < 0.0
        } else {
            q[1..].iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)
        };
        if flip {
            q = q.map(|c| -c);
        }
        q
    }
}

/// `max |R R^T - I|` and `|det R - 1|`, whichever is larger.
pub fn orthonormality_error(m: &Mat3) -> f64 {
    let e = m * m.transpose() - Mat3::identity();
    let max_entry = e.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    max_entry.max((m.determinant() - 1.0).abs())
}

#[inline]
fn polar_step(r: &Mat3) -> Mat3 {
    0.5 * r * (3.0 * Mat3::identity() - r.transpose() * r)
}

/// Rodrigues' formula.
pub fn exp_so3(omega: &Vec3) -> Rotation {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let k = skew(omega);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rotation(Mat3::identity() + a * k + b * k * k)
}

/// Axis-angle vector of `r`, with angle in `[0, pi]`.
///
/// Goes through the canonical quaternion, so the branch cut at `pi` is
/// resolved the same way as [`Rotation::to_quaternion_wxyz`].
pub fn log_so3(r: &Rotation) -> Vec3 {
    let [w, x, y, z] = r.to_quaternion_wxyz();
    let v = Vec3::new(x, y, z);
    let s = v.norm();
    if s < 1e-8 {
        // 2 atan2(s, w) / s for small s, w ~ 1.
        v * (2.0 / w) * (1.0 - s * s / (3.0 * w * w))
    } else {
        v * (2.0 * s.atan2(w) / s)
    }
}

/// [`log_so3`] on a raw matrix, rejecting anything that is not a rotation.
pub fn log_matrix(m: &Mat3) -> Result<Vec3> {
    Rotation::from_matrix(*m).map(|r| log_so3(&r))
}

/// Right Jacobian of SO(3): `exp(theta + d) ~= exp(theta) exp(Jr(theta) d)`.
pub fn right_jacobian(theta: &Vec3) -> Mat3 {
    let t2 = theta.norm_squared();
    let t = t2.sqrt();
    let k = skew(theta);
    let (a, b) = if t < SMALL_ANGLE {
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        ((1.0 - t.cos()) / t2, (t - t.sin()) / (t2 * t))
    };
    Mat3::identity() - a * k + b * k * k
}

/// Inverse right Jacobian, the derivative of the log map under right
/// perturbation: `log(exp(theta) exp(e)) ~= theta + Jr^-1(theta) e`.
pub fn log_jacobian_inv(theta: &Vec3) -> Mat3 {
    let t2 = theta.norm_squared();
    let t = t2.sqrt();
    let k = skew(theta);
    let c = if t < SMALL_ANGLE {
        1.0 / 12.0 + t2 / 720.0
    } else {
        1.0 / t2 - (1.0 + t.cos()) / (2.0 * t * t.sin())
    };
    Mat3::identity() + 0.5 * k + c * k * k
}

/// Left Jacobian of SO(3); maps the translational tangent into the
/// translation of `exp_se3`.
fn left_jacobian(phi: &Vec3) -> Mat3 {
    right_jacobian(&-phi)
}

/// Rigid transform mapping object coordinates into the parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Pose::default()
    }

    pub fn from_translation(t: Vec3) -> Self {
        Pose::new(Rotation::identity(), t)
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            translation: -rt.rotate(&self.translation),
            rotation: rt,
        }
    }

    /// Applies the transform to a point.
    #[inline]
    pub fn act(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// `self * exp(xi)`: the retraction used by the optimizer.
    pub fn retract(&self, xi: &Vec6) -> Pose {
        self.compose(&exp_se3(xi))
    }

    /// Adjoint matrix for `[translation; rotation]` ordered tangents:
    /// `T exp(xi) T^-1 = exp(Ad_T xi)`.
    pub fn adjoint(&self) -> Mat6 {
        let r = self.rotation.matrix();
        let mut ad = Mat6::zeros();
        ad.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        ad.fixed_view_mut::<3, 3>(0, 3).copy_from(&(skew(&self.translation) * r));
        ad.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
        ad
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|c| c.is_finite())
            && self.rotation.matrix().iter().all(|c| c.is_finite())
    }
}

/// SE(3) exponential for a `[rho; phi]` tangent.
pub fn exp_se3(xi: &Vec6) -> Pose {
    let rho = xi.fixed_rows::<3>(0).into_owned();
    let phi = xi.fixed_rows::<3>(3).into_owned();
    Pose {
        rotation: exp_so3(&phi),
        translation: left_jacobian(&phi) * rho,
    }
}

/// Serialized pose. `q` is `[w, x, y, z]`. When `r` (row-major rotation
/// matrix) is present it takes precedence, which keeps write/read cycles
/// bit-exact.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PoseRecord {
    pub t: [f64; 3],
    pub q: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<[f64; 9]>,
}

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        let m = p.rotation.matrix();
        let mut r = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                r[3 * i + j] = m[(i, j)];
            }
        }
        PoseRecord {
            t: [p.translation.x, p.translation.y, p.translation.z],
            q: p.rotation.to_quaternion_wxyz(),
            r: Some(r),
        }
    }
}
