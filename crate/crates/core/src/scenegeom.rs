//! Metric scale and support plane from a reconstructed point cloud.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::ConvexPart;
use crate::error::{Error, Result};
use crate::scene::StaticObject;
use crate::se3::{Mat3, Pose, Rotation, Vec3};
use crate::util::mix_seed;

/// Fewer points than this after filtering make a plane fit meaningless.
pub const MIN_FILTERED_POINTS: usize = 50;
/// Below this inlier fraction the best plane is rejected.
pub const MIN_CONSENSUS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointLabel {
    Unknown,
    Object,
    Background,
}

impl PointLabel {
    pub fn from_code(code: i64) -> Option<PointLabel> {
        match code {
            0 => Some(PointLabel::Unknown),
            1 => Some(PointLabel::Object),
            2 => Some(PointLabel::Background),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub confidence: Vec<f64>,
    pub labels: Option<Vec<PointLabel>>,
    pub in_bbox: Option<Vec<bool>>,
}

impl PointCloud {
    /// Cloud with full confidence and no optional channels.
    pub fn from_points(points: Vec<Vec3>) -> PointCloud {
        let confidence = vec![1.0; points.len()];
        PointCloud {
            points,
            confidence,
            labels: None,
            in_bbox: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        let same = |len: Option<usize>| len.is_none_or(|l| l == n);
        if self.confidence.len() != n
            || !same(self.labels.as_ref().map(Vec::len))
            || !same(self.in_bbox.as_ref().map(Vec::len))
        {
            return Err(Error::DegenerateInput("point cloud channels differ in length".into()));
        }
        if self.confidence.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::DegenerateInput("confidence outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// A point seen both in the reconstruction (arbitrary scale) and in metric
/// object coordinates lifted to the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondencePair {
    pub object_id: String,
    pub cloud: Vec3,
    pub metric: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneModel {
    /// Unit normal; the camera origin lies on its positive side.
    pub normal: Vec3,
    /// The plane is `{x : normal . x = offset}`.
    pub offset: f64,
    #[serde(default)]
    pub inliers: usize,
    #[serde(default)]
    pub inlier_rms: f64,
}

impl PlaneModel {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Ratio `|m_i - m_j| / |c_i - c_j|` for every same-object pair.
fn pair_ratios(pairs: &[CorrespondencePair]) -> (Vec<f64>, usize) {
    let mut ratios = Vec::new();
    let mut degenerate = 0;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            if pairs[i].object_id != pairs[j].object_id {
                continue;
            }
            let dc = (pairs[i].cloud - pairs[j].cloud).norm();
            let dm = (pairs[i].metric - pairs[j].metric).norm();
            if dc > 1e-6 && dm.is_finite() && dc.is_finite() {
                ratios.push(dm / dc);
            } else {
                degenerate += 1;
            }
        }
    }
    (ratios, degenerate)
}

/// RANSAC over same-object distance ratios. A sampled pair's ratio is a
/// scale hypothesis; ratios within `tolerance` (relative) of it support it.
/// The result is the median ratio of the largest support set.
pub fn estimate_scale_ransac(
    pairs: &[CorrespondencePair],
    iterations: usize,
    tolerance: f64,
    seed: u64,
) -> Result<f64> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidConfig("scale tolerance must be positive".into()));
    }
    let (mut ratios, degenerate) = pair_ratios(pairs);
    if ratios.is_empty() {
        return Err(Error::InsufficientPairs);
    }
    let total = ratios.len() + degenerate;
    ratios.sort_by(f64::total_cmp);

    let support = |h: f64| -> (usize, usize) {
        let lo = ratios.partition_point(|r| *r < h * (1.0 - tolerance));
        let hi = ratios.partition_point(|r| *r <= h * (1.0 + tolerance));
        (lo, hi)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, usize)> = None;
    for _ in 0..iterations.max(1) {
        // Degenerate pairs occupy the tail of the sample space; drawing one
        // wastes the iteration.
        let k = rng.random_range(0..total);
        if k >= ratios.len() {
            continue;
        }
        let (lo, hi) = support(ratios[k]);
        if best.is_none_or(|(bl, bh)| hi - lo > bh - bl) {
            best = Some((lo, hi));
        }
    }
    let (lo, hi) = best.ok_or(Error::InsufficientPairs)?;
    let set = &ratios[lo..hi];
    let m = set.len();
    let scale = if m % 2 == 1 {
        set[m / 2]
    } else {
        0.5 * (set[m / 2 - 1] + set[m / 2])
    };
    Ok(scale)
}

/// Keeps confident background points inside the detection box. Missing
/// label or box channels let every point pass that test.
pub fn filter_cloud(
    cloud: &PointCloud,
    confidence_min: f64,
    remove_object_pixels: bool,
    require_bbox: bool,
) -> Result<PointCloud> {
    cloud.validate()?;
    let keep: Vec<usize> = (0..cloud.len())
        .filter(|&i| {
            cloud.confidence[i] >= confidence_min
                && !(remove_object_pixels
                    && cloud.labels.as_ref().is_some_and(|l| l[i] == PointLabel::Object))
                && !(require_bbox && cloud.in_bbox.as_ref().is_some_and(|b| !b[i]))
        })
        .collect();
    if keep.len() < MIN_FILTERED_POINTS {
        return Err(Error::EmptyResult {
            survivors: keep.len(),
            required: MIN_FILTERED_POINTS,
        });
    }
    Ok(PointCloud {
        points: keep.iter().map(|&i| cloud.points[i]).collect(),
        confidence: keep.iter().map(|&i| cloud.confidence[i]).collect(),
        labels: cloud.labels.as_ref().map(|l| keep.iter().map(|&i| l[i]).collect()),
        in_bbox: cloud.in_bbox.as_ref().map(|b| keep.iter().map(|&i| b[i]).collect()),
    })
}

fn plane_through(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<(Vec3, f64)> {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    let scale = (b - a).norm() * (c - a).norm();
    if !(len > 1e-12 * scale) || scale == 0.0 {
        return None;
    }
    let n = n / len;
    Some((n, n.dot(a)))
}

/// Least-squares plane through `points`: centroid and the eigenvector of
/// the scatter matrix with the smallest eigenvalue.
fn fit_least_squares(points: &[Vec3]) -> (Vec3, f64) {
    let c = points.iter().sum::<Vec3>() / points.len() as f64;
    let mut scatter = Mat3::zeros();
    for p in points {
        let d = p - c;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let k = eig.eigenvalues.imin();
    let n = eig.eigenvectors.column(k).normalize();
    (n, n.dot(&c))
}

fn inliers(points: &[Vec3], n: &Vec3, offset: f64, threshold: f64) -> Vec<Vec3> {
    points
        .iter()
        .filter(|p| (n.dot(p) - offset).abs() <= threshold)
        .copied()
        .collect()
}

/// RANSAC plane fit followed by least-squares refinement on the inliers.
/// Hypotheses are evaluated in parallel; each iteration draws from its own
/// seed so the result does not depend on the thread count.
pub fn fit_plane_ransac(
    cloud: &PointCloud,
    iterations: usize,
    inlier_threshold: f64,
    seed: u64,
) -> Result<PlaneModel> {
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints(pts.len()));
    }
    if !(inlier_threshold > 0.0) {
        return Err(Error::InvalidConfig("inlier threshold must be positive".into()));
    }
    let n_pts = pts.len();
    let best = (0..iterations.max(1))
        .into_par_iter()
        .filter_map(|it| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[it as u64]));
            let i = rng.random_range(0..n_pts);
            let j = rng.random_range(0..n_pts);
            let k = rng.random_range(0..n_pts);
            if i == j || j == k || i == k {
                return None;
            }
            let (n, off) = plane_through(&pts[i], &pts[j], &pts[k])?;
            let count = pts
                .iter()
                .filter(|p| (n.dot(p) - off).abs() <= inlier_threshold)
                .count();
            Some((count, it, n, off))
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        });
    let Some((count, _, n0, off0)) = best else {
        return Err(Error::NoConsensus { fraction: 0.0 });
    };
    let fraction = count as f64 / n_pts as f64;
    if fraction < MIN_CONSENSUS {
        return Err(Error::NoConsensus { fraction });
    }

    let mut set = inliers(pts, &n0, off0, inlier_threshold);
    let (mut n, mut off) = (n0, off0);
    for _ in 0..2 {
        if set.len() < 3 {
            break;
        }
        (n, off) = fit_least_squares(&set);
        set = inliers(pts, &n, off, inlier_threshold);
    }
    if set.len() < 3 {
        (n, off) = (n0, off0);
        set = inliers(pts, &n, off, inlier_threshold);
    }
    // Camera origin on the positive side.
    if off > 0.0 {
        n = -n;
        off = -off;
    }
    let rms = (set.iter().map(|p| (n.dot(p) - off).powi(2)).sum::<f64>() / set.len() as f64).sqrt();
    Ok(PlaneModel {
        normal: n,
        offset: off,
        inliers: set.len(),
        inlier_rms: rms,
    })
}

/// Gravity points from the camera side into the table.
pub fn gravity_from_plane(plane: &PlaneModel) -> Vec3 {
    -plane.normal
}

/// Box-shaped static object whose top face lies in the plane, centred
/// below the point of the plane closest to the camera.
pub fn plane_to_static_object(plane: &PlaneModel, extent: f64, thickness: f64) -> Result<StaticObject> {
    plane_to_static_object_at(plane, &Vec3::zeros(), extent, thickness)
}

/// As [`plane_to_static_object`], centred below the projection of `center`.
pub fn plane_to_static_object_at(
    plane: &PlaneModel,
    center: &Vec3,
    extent: f64,
    thickness: f64,
) -> Result<StaticObject> {
    if !(extent > 0.0 && thickness > 0.0) {
        return Err(Error::InvalidConfig("table extent and thickness must be positive".into()));
    }
    let n = plane.normal.normalize();
    let foot = center - n * plane.signed_distance(center);
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let x = helper.cross(&n).normalize();
    let y = n.cross(&x);
    let rotation = Rotation::from_matrix(Mat3::from_columns(&[x, y, n]))?;
    let part = ConvexPart::cuboid(Vec3::new(0.5 * extent, 0.5 * extent, 0.5 * thickness))?;
    Ok(StaticObject {
        name: "table".into(),
        parts: vec![part],
        pose: Pose::new(rotation, foot - n * (0.5 * thickness)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneGeomParams {
    pub scale_iterations: usize,
    /// Relative ratio tolerance for scale consensus.
    pub scale_tolerance: f64,
    pub plane_iterations: usize,
    /// Plane inlier distance, meters.
    pub inlier_threshold: f64,
    pub confidence_min: f64,
    pub seed: u64,
}

impl Default for SceneGeomParams {
    fn default() -> Self {
        SceneGeomParams {
            scale_iterations: 1000,
            scale_tolerance: 0.05,
            plane_iterations: 1000,
            inlier_threshold: 0.005,
            confidence_min: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    /// Metric meters per reconstruction unit.
    pub scale: f64,
    /// Support plane in metric camera coordinates.
    pub plane: PlaneModel,
    pub gravity: Vec3,
}

/// Scale from correspondences, then the support plane of the rescaled,
/// filtered cloud.
pub fn estimate_scene_geometry(
    cloud: &PointCloud,
    pairs: &[CorrespondencePair],
    params: &SceneGeomParams,
) -> Result<SceneGeometry> {
    let scale = estimate_scale_ransac(
        pairs,
        params.scale_iterations,
        params.scale_tolerance,
        mix_seed(params.seed, &[0]),
    )?;
    let metric = PointCloud {
        points: cloud.points.iter().map(|p| p * scale).collect(),
        ..cloud.clone()
    };
    let kept = filter_cloud(&metric, params.confidence_min, true, true)?;
    let plane = fit_plane_ransac(
        &kept,
        params.plane_iterations,
        params.inlier_threshold,
        mix_seed(params.seed, &[1]),
    )?;
    Ok(SceneGeometry {
        scale,
        plane,
        gravity: gravity_from_plane(&plane),
    })
}
