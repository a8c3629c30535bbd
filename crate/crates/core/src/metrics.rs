//! Evaluation metrics: voxel IoU, viewpoint error statistics, point-cloud
//! conversion, nearest-neighbor density, and symmetric Hausdorff distance.

use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{rotation_from_viewpoint, Viewpoint};
use crate::error::{Error, Result};
use crate::voxel::BinaryVoxelGrid;

/// Unit of point-cloud coordinates; distance operations refuse to mix units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceUnit {
    /// Coordinates in the canonical object cube (side length 1).
    ObjectUnits,
    /// Coordinates scaled to real-world millimeters.
    Millimeters,
}

/// Finite 3D points with a recorded unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    unit: DistanceUnit,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>, unit: DistanceUnit) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParameter(format!("non-finite point {p}")));
        }
        Ok(PointCloud { points, unit })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn unit(&self) -> DistanceUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Aggregate viewpoint-recovery statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseErrorSummary {
    /// Median angular error in degrees (lower middle value for even counts).
    pub median_error_deg: f64,
    /// Fraction of instances with angular error below 30 degrees.
    pub acc_pi_6: f64,
    /// Per-instance angular errors in degrees, in input order.
    pub per_instance_errors: Vec<f64>,
}

/// Intersection over union of two binary grids of equal dims. Two empty
/// grids are identical, hence IoU 1; one empty grid against a non-empty one
/// gives 0.
pub fn voxel_iou(a: &BinaryVoxelGrid, b: &BinaryVoxelGrid) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims().as_tuple(),
            got: b.dims().as_tuple(),
        });
    }
    let mut intersection = 0usize;
    let mut union = 0usize;
    for (x, y) in a.values().iter().zip(b.values()) {
        intersection += (*x && *y) as usize;
        union += (*x || *y) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(intersection as f64 / union as f64)
}

/// Geodesic distance between the two viewpoint rotations, in degrees:
/// `arccos((trace(R_a R_b^T) - 1) / 2)`, with the cosine clamped against
/// round-off. Symmetric, in `[0, 180]`.
pub fn angular_distance(a: &Viewpoint, b: &Viewpoint) -> f64 {
    let ra = rotation_from_viewpoint(a);
    let rb = rotation_from_viewpoint(b);
    // arccos is ill-conditioned at the identity: equal rotations would come
    // out as ~1e-6 degrees instead of 0, so equality short-circuits
    if ra == rb {
        return 0.0;
    }
    let cos = ((ra * rb.transpose()).trace() - 1.0) / 2.0;
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Computes per-pair angular errors and summarizes them. The median uses
/// the lower of the two middle values for even counts; `acc_pi_6` counts
/// errors strictly below 30 degrees.
pub fn summarize_pose_errors(pairs: &[(Viewpoint, Viewpoint)]) -> Result<PoseErrorSummary> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pose error pairs"));
    }
    let errors: Vec<f64> = pairs
        .iter()
        .map(|(predicted, truth)| angular_distance(predicted, truth))
        .collect();
    let mut sorted = errors.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let median = sorted[(sorted.len() - 1) / 2];
    let below = errors.iter().filter(|e| **e < 30.0).count();
    Ok(PoseErrorSummary {
        median_error_deg: median,
        acc_pi_6: below as f64 / errors.len() as f64,
        per_instance_errors: errors,
    })
}

/// One point per occupied voxel, at the voxel center mapped to object
/// coordinates and multiplied by `scale` (units per cube side). The caller
/// states what unit the scaled coordinates are in.
pub fn voxels_to_pointcloud(
    grid: &BinaryVoxelGrid,
    scale: f64,
    unit: DistanceUnit,
) -> Result<PointCloud> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive and finite, got {scale}"
        )));
    }
    if grid.occupied_count() == 0 {
        return Err(Error::EmptyInput("occupied voxels"));
    }
    let dims = grid.dims();
    let mut points = Vec::with_capacity(grid.occupied_count());
    for n in 0..dims.h {
        for m in 0..dims.w {
            for l in 0..dims.d {
                if grid.get(n, m, l) {
                    let c = dims.voxel_center(n, m, l);
                    points.push(Point3::new(c[0] * scale, c[1] * scale, c[2] * scale));
                }
            }
        }
    }
    PointCloud::new(points, unit)
}

/// Density proxy: sample `ceil(N/10)` points without replacement (seeded)
/// and average each sampled point's distance to its nearest *other* point
/// in the full cloud.
pub fn cloud_density(pc: &PointCloud, rng_seed: u64) -> Result<f64> {
    let n = pc.len();
    if n < 2 {
        return Err(Error::EmptyInput("point cloud with at least two points"));
    }
    let k = n.div_ceil(10);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sample = rand::seq::index::sample(&mut rng, n, k);
    let mut total = 0.0;
    for i in sample {
        let p = &pc.points[i];
        let mut best = f64::INFINITY;
        for (j, q) in pc.points.iter().enumerate() {
            if j != i {
                best = best.min((p - q).norm());
            }
        }
        total += best;
    }
    Ok(total / k as f64)
}

/// Reduction used for the two directed distances inside
/// [`symmetric_hausdorff`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HausdorffMode {
    /// Directed distance = mean over source points of the closest-point
    /// distance (Chamfer-like). The default.
    #[default]
    Averaged,
    /// Directed distance = maximum over source points of the closest-point
    /// distance (the classical Hausdorff reduction).
    Classic,
}

fn directed_distance(from: &PointCloud, to: &PointCloud, mode: HausdorffMode) -> f64 {
    let mut acc: f64 = 0.0;
    for p in &from.points {
        let mut best = f64::INFINITY;
        for q in &to.points {
            best = best.min((p - q).norm());
        }
        match mode {
            HausdorffMode::Averaged => acc += best,
            HausdorffMode::Classic => acc = acc.max(best),
        }
    }
    match mode {
        HausdorffMode::Averaged => acc / from.points.len() as f64,
        HausdorffMode::Classic => acc,
    }
}

/// Average of the two directed closest-point distances between the clouds.
/// Both clouds must be non-empty and share a unit. Classic mode is never
/// smaller than averaged mode on the same input.
pub fn symmetric_hausdorff(a: &PointCloud, b: &PointCloud, mode: HausdorffMode) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("point cloud"));
    }
    if a.unit != b.unit {
        return Err(Error::UnitMismatch);
    }
    Ok((directed_distance(a, b, mode) + directed_distance(b, a, mode)) / 2.0)
}
