//! Occupancy-grid types, mean-shape/residual composition, binarization and
//! data-driven threshold selection.
//!
//! Grids are dense `(H, W, D)` volumes indexed by `(n, m, l)` where `m`
//! runs along the object x axis, `n` along y and `l` along z. Values are
//! stored n-major, then m, then l. A voxel's center maps to object
//! coordinates `((m+0.5)/W - 0.5, (n+0.5)/H - 0.5, (l+0.5)/D - 0.5)`, so
//! every shape lives inside the cube `[-0.5, 0.5]^3`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid dimensions `(H, W, D)` = extents along y, x, z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub h: usize,
    pub w: usize,
    pub d: usize,
}

impl GridDims {
    pub fn new(h: usize, w: usize, d: usize) -> Result<Self> {
        if h == 0 || w == 0 || d == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid dimensions must be >= 1, got ({h}, {w}, {d})"
            )));
        }
        Ok(GridDims { h, w, d })
    }

    /// Default working resolution.
    pub fn cube(side: usize) -> Result<Self> {
        Self::new(side, side, side)
    }

    pub fn count(&self) -> usize {
        self.h * self.w * self.d
    }

    #[inline]
    pub fn index(&self, n: usize, m: usize, l: usize) -> usize {
        debug_assert!(n < self.h && m < self.w && l < self.d);
        (n * self.w + m) * self.d + l
    }

    pub(crate) fn as_tuple(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.d)
    }

    /// Object-frame coordinates of the center of voxel `(n, m, l)`.
    #[inline]
    pub fn voxel_center(&self, n: usize, m: usize, l: usize) -> [f64; 3] {
        [
            (m as f64 + 0.5) / self.w as f64 - 0.5,
            (n as f64 + 0.5) / self.h as f64 - 0.5,
            (l as f64 + 0.5) / self.d as f64 - 0.5,
        ]
    }
}

fn check_dims(a: GridDims, b: GridDims) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a.as_tuple(),
            got: b.as_tuple(),
        });
    }
    Ok(())
}

/// Dense occupancy field with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: GridDims,
    values: Vec<f64>,
}

impl VoxelGrid {
    /// All-zero (empty) grid.
    pub fn zeros(dims: GridDims) -> Self {
        VoxelGrid {
            dims,
            values: vec![0.0; dims.count()],
        }
    }

    /// Uniform grid with the given occupancy.
    pub fn filled(dims: GridDims, value: f64) -> Result<Self> {
        Self::from_values(dims, vec![value; dims.count()])
    }

    pub fn from_values(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.count() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for dims {:?}, got {}",
                dims.count(),
                dims.as_tuple(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!(
                "occupancy {v} outside [0, 1]"
            )));
        }
        Ok(VoxelGrid { dims, values })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize, l: usize) -> f64 {
        self.values[self.dims.index(n, m, l)]
    }

    /// Sets one voxel; panics if `value` is outside `[0, 1]`.
    pub fn set(&mut self, n: usize, m: usize, l: usize, value: f64) {
        assert!(
            (0.0..=1.0).contains(&value),
            "occupancy {value} outside [0, 1]"
        );
        let i = self.dims.index(n, m, l);
        self.values[i] = value;
    }
}

/// Unbounded per-voxel residual field (the correction added to a mean shape).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualGrid {
    dims: GridDims,
    values: Vec<f64>,
}

impl ResidualGrid {
    pub fn zeros(dims: GridDims) -> Self {
        ResidualGrid {
            dims,
            values: vec![0.0; dims.count()],
        }
    }

    pub fn from_values(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.count() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for dims {:?}, got {}",
                dims.count(),
                dims.as_tuple(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfRange("residual value is not finite".into()));
        }
        Ok(ResidualGrid { dims, values })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize, l: usize) -> f64 {
        self.values[self.dims.index(n, m, l)]
    }
}

/// Hard {0, 1} occupancy grid, the representation used for IoU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryVoxelGrid {
    dims: GridDims,
    values: Vec<bool>,
}

impl BinaryVoxelGrid {
    pub fn empty(dims: GridDims) -> Self {
        BinaryVoxelGrid {
            dims,
            values: vec![false; dims.count()],
        }
    }

    pub fn from_values(dims: GridDims, values: Vec<bool>) -> Result<Self> {
        if values.len() != dims.count() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for dims {:?}, got {}",
                dims.count(),
                dims.as_tuple(),
                values.len()
            )));
        }
        Ok(BinaryVoxelGrid { dims, values })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize, l: usize) -> bool {
        self.values[self.dims.index(n, m, l)]
    }

    pub fn set(&mut self, n: usize, m: usize, l: usize, value: bool) {
        let i = self.dims.index(n, m, l);
        self.values[i] = value;
    }

    pub fn occupied_count(&self) -> usize {
        self.values.iter().filter(|v| **v).count()
    }

    /// View as a soft grid (false -> 0.0, true -> 1.0), e.g. for rendering.
    pub fn to_voxel_grid(&self) -> VoxelGrid {
        VoxelGrid {
            dims: self.dims,
            values: self
                .values
                .iter()
                .map(|v| if *v { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Composes a shape from a mean shape and a residual: per-voxel
/// `clamp(mean + residual, 0, 1)`. The clamp keeps the result a valid
/// occupancy field for arbitrary residuals.
pub fn compose_shape(mean: &VoxelGrid, residual: &ResidualGrid) -> Result<VoxelGrid> {
    check_dims(mean.dims, residual.dims)?;
    let values = mean
        .values
        .iter()
        .zip(residual.values.iter())
        .map(|(m, r)| (m + r).clamp(0.0, 1.0))
        .collect();
    Ok(VoxelGrid {
        dims: mean.dims,
        values,
    })
}

/// Residual `shape - mean`, the correction that composes the mean into the shape.
pub fn residual_between(shape: &VoxelGrid, mean: &VoxelGrid) -> Result<ResidualGrid> {
    check_dims(shape.dims, mean.dims)?;
    let values = shape
        .values
        .iter()
        .zip(mean.values.iter())
        .map(|(s, m)| s - m)
        .collect();
    Ok(ResidualGrid {
        dims: shape.dims,
        values,
    })
}

/// Per-voxel arithmetic mean over aligned binary grids.
///
/// Counts are integral, so the result is independent of input order.
pub fn compute_mean_shape(grids: &[BinaryVoxelGrid]) -> Result<VoxelGrid> {
    let first = grids.first().ok_or(Error::EmptyInput("mean shape needs at least one grid"))?;
    let dims = first.dims;
    let mut counts = vec![0u32; dims.count()];
    for grid in grids {
        check_dims(dims, grid.dims)?;
        for (c, v) in counts.iter_mut().zip(grid.values.iter()) {
            *c += *v as u32;
        }
    }
    let n = grids.len() as f64;
    Ok(VoxelGrid {
        dims,
        values: counts.iter().map(|c| *c as f64 / n).collect(),
    })
}

/// Thresholds a soft grid; a voxel is occupied iff its value is `>= threshold`.
pub fn binarize(grid: &VoxelGrid, threshold: f64) -> Result<BinaryVoxelGrid> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "binarization threshold must lie in (0, 1), got {threshold}"
        )));
    }
    Ok(BinaryVoxelGrid {
        dims: grid.dims,
        values: grid.values.iter().map(|v| *v >= threshold).collect(),
    })
}

/// Candidate grid searched by [`select_threshold`]: 0.05, 0.10, ..., 0.95.
pub fn threshold_candidates() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

/// Picks the binarization threshold from the candidate grid that maximizes
/// mean IoU against the ground-truth grids. Ties go to the smaller threshold.
pub fn select_threshold(pairs: &[(VoxelGrid, BinaryVoxelGrid)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("threshold selection needs at least one pair"));
    }
    for (pred, truth) in pairs {
        check_dims(pred.dims, truth.dims)?;
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for t in threshold_candidates() {
        let mut total = 0.0;
        for (pred, truth) in pairs {
            let bin = binarize(pred, t)?;
            total += crate::metrics::voxel_iou(&bin, truth)?;
        }
        let mean = total / pairs.len() as f64;
        if mean > best.0 {
            best = (mean, t);
        }
    }
    Ok(best.1)
}
