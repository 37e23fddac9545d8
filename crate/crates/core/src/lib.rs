//! Physically consistent refinement of multi-object 6D pose estimates.
//!
//! Poses of movable objects are adjusted jointly so that they stay close to
//! their image-based estimates, do not interpenetrate, and rest on a support
//! surface under gravity.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod costs;
pub mod error;
pub mod eval;
pub mod io;
pub mod optimizer;
pub mod scene;
pub mod scenegeom;
pub mod se3;
pub mod synth;
mod util;

pub use error::{Error, Result};
pub use scene::{CostWeights, CovarianceParams, Intrinsics, Scene};
pub use se3::{Pose, PoseRecord, Rotation, Vec3, Vec6};
