//! Differentiable silhouette rendering.
//!
//! The renderer resamples an occupancy grid into a camera-aligned volume
//! (inverse-warp gather with trilinear tent weights, zero padding outside
//! the grid), flattens the volume along the disparity axis with a hard max,
//! and scores the result against a target mask with a summed squared
//! pixel loss. [`render_with_gradients`] additionally returns the analytic
//! adjoint of that composition: per-voxel gradients routed through each
//! pixel's argmax disparity sample, and per-radian gradients with respect
//! to the two viewpoint angles.

use nalgebra::{Matrix3, Vector3};

use crate::camera::{rotation_derivatives, rotation_from_viewpoint_with_axis, CameraModel, Viewpoint};
use crate::error::{Error, Result};
use crate::voxel::{GridDims, ResidualGrid, VoxelGrid};

/// Camera-aligned volume `U` with dims `(H', W', D')`, indexed `(n', m', l')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledVolume {
    height: usize,
    width: usize,
    depth: usize,
    values: Vec<f64>,
}

impl ResampledVolume {
    pub fn from_values(height: usize, width: usize, depth: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width * depth {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                height * width * depth,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("volume value {v} outside [0, 1]")));
        }
        Ok(ResampledVolume { height, width, depth, values })
    }

    /// `(H', W', D')`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.depth)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize, l: usize) -> f64 {
        self.values[(n * self.width + m) * self.depth + l]
    }
}

/// 2D foreground image with values in `[0, 1]`; a binary mask is the
/// special case with values in `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteImage {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl SilhouetteImage {
    pub fn zeros(height: usize, width: usize) -> Self {
        SilhouetteImage { height, width, values: vec![0.0; height * width] }
    }

    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "expected {} pixels, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(SilhouetteImage { height, width, values })
    }

    /// `(H', W')`.
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.values[n * self.width + m]
    }

    pub fn set(&mut self, n: usize, m: usize, value: f64) {
        assert!((0.0..=1.0).contains(&value), "pixel value {value} outside [0, 1]");
        self.values[n * self.width + m] = value;
    }

    /// Number of pixels at or above the given level.
    pub fn foreground_count(&self, level: f64) -> usize {
        self.values.iter().filter(|v| **v >= level).count()
    }
}

/// Adjoint of loss -> flatten -> resample for one view.
#[derive(Debug, Clone)]
pub struct RenderGradients {
    /// dL/dV, same dims as the rendered grid.
    pub d_loss_d_voxels: ResidualGrid,
    /// dL/d azimuth, per radian.
    pub d_loss_d_azimuth: f64,
    /// dL/d elevation, per radian.
    pub d_loss_d_elevation: f64,
}

/// Ray geometry for one view: object point of an output sample is
/// `origin + z * (basis * (a, b, 1))` with `a, b` the normalized pixel
/// offsets and `z` the camera-frame depth.
struct ViewRays {
    /// R^T
    basis: Matrix3<f64>,
    /// -R^T t
    origin: Vector3<f64>,
}

impl ViewRays {
    fn new(cam: &CameraModel, view: &Viewpoint) -> Self {
        let rot = rotation_from_viewpoint_with_axis(view, cam.elevation_axis);
        let basis = rot.transpose();
        let origin = -basis * cam.translation();
        ViewRays { basis, origin }
    }

    /// Object-frame point of the sample at pixel offsets `(a, b)` and depth `z`.
    #[inline]
    fn object_point(&self, a: f64, b: f64, z: f64) -> Vector3<f64> {
        self.origin + z * (self.basis * Vector3::new(a, b, 1.0))
    }
}

#[inline]
fn voxel_coords(dims: GridDims, p: &Vector3<f64>) -> (f64, f64, f64) {
    (
        (p.x + 0.5) * dims.w as f64 - 0.5,
        (p.y + 0.5) * dims.h as f64 - 0.5,
        (p.z + 0.5) * dims.d as f64 - 0.5,
    )
}

/// Axis weights for the two lattice neighbors of a continuous coordinate:
/// `(floor index, weight at floor, weight at floor + 1)`. Only these two
/// lattice sites have non-zero tent weight `max(0, 1 - |coord - i|)`.
#[inline]
fn axis_weights(coord: f64) -> (i64, f64, f64) {
    let i0 = coord.floor();
    let frac = coord - i0;
    (i0 as i64, 1.0 - frac, frac)
}

/// Trilinear gather of the occupancy field at continuous voxel coordinates;
/// lattice sites outside the grid contribute zero.
#[inline]
fn sample_value(grid: &VoxelGrid, xs: f64, ys: f64, zs: f64) -> f64 {
    let dims = grid.dims();
    let (m0, wx0, wx1) = axis_weights(xs);
    let (n0, wy0, wy1) = axis_weights(ys);
    let (l0, wz0, wz1) = axis_weights(zs);

    let mut acc = 0.0;
    for (dn, wy) in [(0i64, wy0), (1i64, wy1)] {
        let n = n0 + dn;
        if n < 0 || n >= dims.h as i64 {
            continue;
        }
        for (dm, wx) in [(0i64, wx0), (1i64, wx1)] {
            let m = m0 + dm;
            if m < 0 || m >= dims.w as i64 {
                continue;
            }
            for (dl, wz) in [(0i64, wz0), (1i64, wz1)] {
                let l = l0 + dl;
                if l < 0 || l >= dims.d as i64 {
                    continue;
                }
                acc += grid.get(n as usize, m as usize, l as usize) * wx * wy * wz;
            }
        }
    }
    // the eight tent weights sum to at most 1, so the true value never
    // exceeds the largest occupancy; trim the float rounding overshoot
    acc.min(1.0)
}

/// Gather plus the spatial derivative `(dU/dxs, dU/dys, dU/dzs)`.
/// The tent slope is -1 on the floor neighbor and +1 on the next one.
#[inline]
fn sample_with_spatial_grad(grid: &VoxelGrid, xs: f64, ys: f64, zs: f64) -> (f64, Vector3<f64>) {
    let dims = grid.dims();
    let (m0, wx0, wx1) = axis_weights(xs);
    let (n0, wy0, wy1) = axis_weights(ys);
    let (l0, wz0, wz1) = axis_weights(zs);

    let mut value = 0.0;
    let mut grad = Vector3::zeros();
    for (dn, wy, dwy) in [(0i64, wy0, -1.0), (1i64, wy1, 1.0)] {
        let n = n0 + dn;
        if n < 0 || n >= dims.h as i64 {
            continue;
        }
        for (dm, wx, dwx) in [(0i64, wx0, -1.0), (1i64, wx1, 1.0)] {
            let m = m0 + dm;
            if m < 0 || m >= dims.w as i64 {
                continue;
            }
            for (dl, wz, dwz) in [(0i64, wz0, -1.0), (1i64, wz1, 1.0)] {
                let l = l0 + dl;
                if l < 0 || l >= dims.d as i64 {
                    continue;
                }
                let v = grid.get(n as usize, m as usize, l as usize);
                value += v * wx * wy * wz;
                grad.x += v * dwx * wy * wz;
                grad.y += v * wx * dwy * wz;
                grad.z += v * wx * wy * dwz;
            }
        }
    }
    // see sample_value: trim float overshoot past the occupancy ceiling
    (value.min(1.0), grad)
}

/// Resamples the occupancy grid into the camera-aligned volume: each output
/// cell `(n', m', l')` back-projects pixel `(m', n')` at the `l'`-th depth
/// sample into the object frame and gathers the grid there with trilinear
/// tent weights. Samples outside the grid read zero.
pub fn resample_volume(grid: &VoxelGrid, cam: &CameraModel, view: &Viewpoint) -> ResampledVolume {
    let (height, width) = cam.image_dims;
    let depth = cam.depth_samples;
    let rays = ViewRays::new(cam, view);
    let k = &cam.intrinsics;
    let dims = grid.dims();

    let mut values = Vec::with_capacity(height * width * depth);
    for n in 0..height {
        let b = (n as f64 - k.cy) / k.f;
        for m in 0..width {
            let a = (m as f64 - k.cx) / k.f;
            for l in 0..depth {
                let p = rays.object_point(a, b, cam.depth_sample(l));
                let (xs, ys, zs) = voxel_coords(dims, &p);
                values.push(sample_value(grid, xs, ys, zs));
            }
        }
    }
    ResampledVolume { height, width, depth, values }
}

/// Flattens the volume along the disparity axis by a per-pixel hard max.
pub fn flatten_silhouette(vol: &ResampledVolume) -> SilhouetteImage {
    flatten_silhouette_with_argmax(vol).0
}

/// Hard-max flattening that also reports, per pixel, the argmax disparity
/// index (smallest `l'` among ties) used for gradient routing.
pub fn flatten_silhouette_with_argmax(vol: &ResampledVolume) -> (SilhouetteImage, Vec<u32>) {
    let mut image = SilhouetteImage::zeros(vol.height, vol.width);
    let mut argmax = vec![0u32; vol.height * vol.width];
    for n in 0..vol.height {
        for m in 0..vol.width {
            let base = (n * vol.width + m) * vol.depth;
            let column = &vol.values[base..base + vol.depth];
            let mut best = column[0];
            let mut best_l = 0u32;
            for (l, v) in column.iter().enumerate().skip(1) {
                if *v > best {
                    best = *v;
                    best_l = l as u32;
                }
            }
            image.values[n * vol.width + m] = best;
            argmax[n * vol.width + m] = best_l;
        }
    }
    (image, argmax)
}

/// Smooth alternative to the hard max: a softmax-weighted average of each
/// pixel's disparity column, `sum_l U_l softmax(U/tau)_l`. It approaches
/// the hard max as `tau -> 0` and stays inside `[0, 1]`, unlike a raw
/// log-sum-exp. Intended for optimization experiments; the hard max is the
/// contract everywhere else.
pub fn flatten_silhouette_smooth(vol: &ResampledVolume, temperature: f64) -> Result<SilhouetteImage> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "smooth-max temperature must be positive, got {temperature}"
        )));
    }
    let mut image = SilhouetteImage::zeros(vol.height, vol.width);
    for n in 0..vol.height {
        for m in 0..vol.width {
            let base = (n * vol.width + m) * vol.depth;
            let column = &vol.values[base..base + vol.depth];
            let max = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut num = 0.0;
            let mut den = 0.0;
            for v in column {
                let e = ((v - max) / temperature).exp();
                num += v * e;
                den += e;
            }
            image.values[n * vol.width + m] = (num / den).clamp(0.0, 1.0);
        }
    }
    Ok(image)
}

/// Convenience composition: resample the grid, then flatten by hard max.
pub fn render_silhouette(grid: &VoxelGrid, cam: &CameraModel, view: &Viewpoint) -> SilhouetteImage {
    flatten_silhouette(&resample_volume(grid, cam, view))
}

/// Summed squared pixel difference between a prediction and a target.
pub fn silhouette_loss(pred: &SilhouetteImage, target: &SilhouetteImage) -> Result<f64> {
    if pred.dims() != target.dims() {
        return Err(Error::ImageDimensionMismatch {
            expected: target.dims(),
            got: pred.dims(),
        });
    }
    Ok(pred
        .values
        .iter()
        .zip(target.values.iter())
        .map(|(p, t)| (t - p) * (t - p))
        .sum())
}

/// Forward pass only: renders and scores without materializing the volume
/// or the image. Arithmetic order matches `resample -> flatten -> loss`
/// exactly, so the result is bitwise identical to the composed path.
pub(crate) fn streamed_loss(
    grid: &VoxelGrid,
    cam: &CameraModel,
    view: &Viewpoint,
    target: &SilhouetteImage,
) -> Result<f64> {
    let (height, width) = cam.image_dims;
    if target.dims() != (height, width) {
        return Err(Error::ImageDimensionMismatch {
            expected: (height, width),
            got: target.dims(),
        });
    }
    let rays = ViewRays::new(cam, view);
    let k = &cam.intrinsics;
    let dims = grid.dims();
    let mut loss = 0.0;
    for n in 0..height {
        let b = (n as f64 - k.cy) / k.f;
        for m in 0..width {
            let a = (m as f64 - k.cx) / k.f;
            let mut best = f64::NEG_INFINITY;
            for l in 0..cam.depth_samples {
                let p = rays.object_point(a, b, cam.depth_sample(l));
                let (xs, ys, zs) = voxel_coords(dims, &p);
                let v = sample_value(grid, xs, ys, zs);
                if l == 0 || v > best {
                    best = v;
                }
            }
            let diff = target.values[n * width + m] - best;
            loss += diff * diff;
        }
    }
    Ok(loss)
}

/// Renders the grid at the viewpoint, scores it against the target, and
/// returns the loss together with its analytic gradients.
///
/// The loss equals `silhouette_loss(render_silhouette(..), target)` exactly.
/// Voxel gradients flow only through each pixel's argmax disparity sample
/// (smallest `l'` on ties); angle gradients chain through the dependence of
/// the sample coordinates on the viewpoint rotation and are reported per
/// radian.
pub fn render_with_gradients(
    grid: &VoxelGrid,
    cam: &CameraModel,
    view: &Viewpoint,
    target: &SilhouetteImage,
) -> Result<(f64, RenderGradients)> {
    let (height, width) = cam.image_dims;
    if target.dims() != (height, width) {
        return Err(Error::ImageDimensionMismatch {
            expected: (height, width),
            got: target.dims(),
        });
    }
    let depth = cam.depth_samples;
    let rays = ViewRays::new(cam, view);
    let k = &cam.intrinsics;
    let dims = grid.dims();
    let translation = cam.translation();
    let (d_rot_az, d_rot_el) = rotation_derivatives(view, cam.elevation_axis);
    let d_basis_az = d_rot_az.transpose();
    let d_basis_el = d_rot_el.transpose();
    let scale = Vector3::new(dims.w as f64, dims.h as f64, dims.d as f64);

    let mut loss = 0.0;
    let mut d_voxels = vec![0.0; dims.count()];
    let mut d_az = 0.0;
    let mut d_el = 0.0;

    for n in 0..height {
        let b = (n as f64 - k.cy) / k.f;
        for m in 0..width {
            let a = (m as f64 - k.cx) / k.f;

            // forward: streaming hard max over the disparity column,
            // arithmetic identical to resample + flatten
            let mut best = f64::NEG_INFINITY;
            let mut best_l = 0usize;
            for l in 0..depth {
                let p = rays.object_point(a, b, cam.depth_sample(l));
                let (xs, ys, zs) = voxel_coords(dims, &p);
                let v = sample_value(grid, xs, ys, zs);
                if l == 0 || v > best {
                    best = v;
                    best_l = l;
                }
            }
            let t = target.values[n * width + m];
            let diff = t - best;
            loss += diff * diff;
            let d_pixel = 2.0 * (best - t); // dL/dS

            if d_pixel == 0.0 {
                continue;
            }

            // backward through the argmax sample only
            let z = cam.depth_sample(best_l);
            let p = rays.object_point(a, b, z);
            let (xs, ys, zs) = voxel_coords(dims, &p);

            // voxel gradients: dS/dV = trilinear weight of each neighbor
            let (m0, wx0, wx1) = axis_weights(xs);
            let (n0, wy0, wy1) = axis_weights(ys);
            let (l0, wz0, wz1) = axis_weights(zs);
            for (dn, wy) in [(0i64, wy0), (1i64, wy1)] {
                let nn = n0 + dn;
                if nn < 0 || nn >= dims.h as i64 {
                    continue;
                }
                for (dm, wx) in [(0i64, wx0), (1i64, wx1)] {
                    let mm = m0 + dm;
                    if mm < 0 || mm >= dims.w as i64 {
                        continue;
                    }
                    for (dl, wz) in [(0i64, wz0), (1i64, wz1)] {
                        let ll = l0 + dl;
                        if ll < 0 || ll >= dims.d as i64 {
                            continue;
                        }
                        d_voxels[dims.index(nn as usize, mm as usize, ll as usize)] +=
                            d_pixel * wx * wy * wz;
                    }
                }
            }

            // angle gradients: dS/dtheta = dU/dpos . dpos/dtheta, with the
            // sample's camera-frame offset q = p_c - t fixed under theta
            let (_, spatial) = sample_with_spatial_grad(grid, xs, ys, zs);
            let q = Vector3::new(a * z, b * z, z) - translation;
            let dp_az = d_basis_az * q;
            let dp_el = d_basis_el * q;
            d_az += d_pixel * spatial.dot(&dp_az.component_mul(&scale));
            d_el += d_pixel * spatial.dot(&dp_el.component_mul(&scale));
        }
    }

    Ok((
        loss,
        RenderGradients {
            d_loss_d_voxels: ResidualGrid::from_values(dims, d_voxels)?,
            d_loss_d_azimuth: d_az,
            d_loss_d_elevation: d_el,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{ElevationAxis, Intrinsics};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn small_cam(image: usize, depth: usize) -> CameraModel {
        let half = (image - 1) as f64 / 2.0;
        CameraModel::new(
            Intrinsics::new(image as f64, half, half).unwrap(),
            1.7,
            (image, image),
            depth,
            (0.95, 2.45),
            ElevationAxis::AboutZ,
        )
        .unwrap()
    }

    /// Direct evaluation of the full resampling sum over every voxel
    /// (tent weights per axis), independent of the gather's 8-neighbor
    /// shortcut.
    fn brute_force_sample(grid: &VoxelGrid, xs: f64, ys: f64, zs: f64) -> f64 {
        let dims = grid.dims();
        let mut acc = 0.0;
        for n in 0..dims.h {
            for m in 0..dims.w {
                for l in 0..dims.d {
                    let w = (1.0 - (xs - m as f64).abs()).max(0.0)
                        * (1.0 - (ys - n as f64).abs()).max(0.0)
                        * (1.0 - (zs - l as f64).abs()).max(0.0);
                    acc += grid.get(n, m, l) * w;
                }
            }
        }
        acc
    }

    #[test]
    fn empty_grid_resamples_to_zero() {
        let grid = VoxelGrid::zeros(GridDims::cube(8).unwrap());
        let cam = small_cam(16, 8);
        let vol = resample_volume(&grid, &cam, &Viewpoint::new(33.0, 12.0).unwrap());
        assert!(vol.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_center_voxel_blob_matches_direct_sum() {
        // 9^3 so a voxel center sits exactly at the object origin
        let dims = GridDims::cube(9).unwrap();
        let mut grid = VoxelGrid::zeros(dims);
        grid.set(4, 4, 4, 1.0);
        let cam = small_cam(17, 33);
        let view = Viewpoint::new(0.0, 0.0).unwrap();
        let vol = resample_volume(&grid, &cam, &view);

        // compact blob centered at the principal point, at the depth sample
        // nearest the camera distance
        let (mut best, mut best_idx) = (f64::NEG_INFINITY, (0, 0, 0));
        for n in 0..17 {
            for m in 0..17 {
                for l in 0..33 {
                    if vol.get(n, m, l) > best {
                        best = vol.get(n, m, l);
                        best_idx = (n, m, l);
                    }
                }
            }
        }
        assert_eq!((best_idx.0, best_idx.1), (8, 8));
        let nearest_depth = (0..33)
            .min_by(|a, b| {
                let da = (cam.depth_sample(*a) - 1.7).abs();
                let db = (cam.depth_sample(*b) - 1.7).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        assert_eq!(best_idx.2, nearest_depth);

        // every sample equals the direct evaluation of the resampling sum
        let rays = ViewRays::new(&cam, &view);
        let k = &cam.intrinsics;
        let mut total = 0.0;
        for n in 0..17 {
            let b = (n as f64 - k.cy) / k.f;
            for m in 0..17 {
                let a = (m as f64 - k.cx) / k.f;
                for l in 0..33 {
                    let p = rays.object_point(a, b, cam.depth_sample(l));
                    let (xs, ys, zs) = voxel_coords(dims, &p);
                    let expected = brute_force_sample(&grid, xs, ys, zs);
                    assert_relative_eq!(vol.get(n, m, l), expected, epsilon = 1e-12);
                    total += vol.get(n, m, l);
                }
            }
        }
        assert!(total > 0.0, "center voxel must leave a footprint");
    }

    #[test]
    fn full_grid_interpolates_to_one_inside_cube() {
        let dims = GridDims::cube(8).unwrap();
        let grid = VoxelGrid::filled(dims, 1.0).unwrap();
        let cam = small_cam(16, 16);
        let view = Viewpoint::new(25.0, 15.0).unwrap();
        let vol = resample_volume(&grid, &cam, &view);

        let rays = ViewRays::new(&cam, &view);
        let k = &cam.intrinsics;
        let margin = 0.5 / 8.0; // strictly inside = beyond the outermost voxel centers
        let mut checked = 0;
        for n in 0..16 {
            let b = (n as f64 - k.cy) / k.f;
            for m in 0..16 {
                let a = (m as f64 - k.cx) / k.f;
                for l in 0..16 {
                    let p = rays.object_point(a, b, cam.depth_sample(l));
                    if p.iter().all(|c| c.abs() < 0.5 - margin) {
                        assert_relative_eq!(vol.get(n, m, l), 1.0, epsilon = 1e-12);
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 100, "interior sample coverage too thin: {checked}");
    }

    #[test]
    fn flatten_matches_exhaustive_scan_and_breaks_ties_low() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (h, w, d) = (5, 6, 7);
        let values: Vec<f64> = (0..h * w * d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let vol = ResampledVolume::from_values(h, w, d, values).unwrap();
        let (img, arg) = flatten_silhouette_with_argmax(&vol);
        for n in 0..h {
            for m in 0..w {
                let mut best = f64::NEG_INFINITY;
                for l in 0..d {
                    best = best.max(vol.get(n, m, l));
                }
                assert_eq!(img.get(n, m), best);
                assert_eq!(vol.get(n, m, arg[n * w + m] as usize), best);
            }
        }

        // explicit tie: equal maxima at l = 1 and l = 4
        let mut values = vec![0.0; 1 * 1 * 6];
        values[1] = 0.7;
        values[4] = 0.7;
        let vol = ResampledVolume::from_values(1, 1, 6, values).unwrap();
        let (img, arg) = flatten_silhouette_with_argmax(&vol);
        assert_eq!(img.get(0, 0), 0.7);
        assert_eq!(arg[0], 1);
    }

    #[test]
    fn flatten_single_entry_column() {
        let mut values = vec![0.0; 8 * 8 * 4];
        values[(5 * 8 + 5) * 4 + 2] = 0.3;
        let vol = ResampledVolume::from_values(8, 8, 4, values).unwrap();
        let img = flatten_silhouette(&vol);
        assert_eq!(img.get(5, 5), 0.3);
        assert_eq!(img.values().iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn smooth_flatten_approaches_hard_max() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let values: Vec<f64> = (0..4 * 4 * 16).map(|_| rng.gen_range(0.0..1.0)).collect();
        let vol = ResampledVolume::from_values(4, 4, 16, values).unwrap();
        let hard = flatten_silhouette(&vol);
        let smooth = flatten_silhouette_smooth(&vol, 1e-4).unwrap();
        for (s, h) in smooth.values().iter().zip(hard.values()) {
            assert!((0.0..=1.0).contains(s));
            assert!((s - h).abs() < 1e-3, "smooth {s} vs hard {h}");
        }
        assert!(flatten_silhouette_smooth(&vol, 0.0).is_err());
    }

    #[test]
    fn loss_trivial_and_brute_force() {
        let a = SilhouetteImage::from_values(2, 2, vec![0.1, 0.5, 0.9, 0.0]).unwrap();
        assert_eq!(silhouette_loss(&a, &a).unwrap(), 0.0);

        let zeros = SilhouetteImage::zeros(2, 2);
        let mut target = SilhouetteImage::zeros(2, 2);
        target.set(0, 1, 1.0);
        target.set(1, 0, 1.0);
        assert_eq!(silhouette_loss(&zeros, &target).unwrap(), 2.0);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p: Vec<f64> = (0..35).map(|_| rng.gen_range(0.0..1.0)).collect();
        let t: Vec<f64> = (0..35).map(|_| rng.gen_range(0.0..1.0)).collect();
        let pred = SilhouetteImage::from_values(5, 7, p.clone()).unwrap();
        let targ = SilhouetteImage::from_values(5, 7, t.clone()).unwrap();
        let mut expected = 0.0;
        for i in 0..35 {
            expected += (t[i] - p[i]) * (t[i] - p[i]);
        }
        assert_relative_eq!(silhouette_loss(&pred, &targ).unwrap(), expected, epsilon = 1e-15);

        let other = SilhouetteImage::zeros(3, 3);
        assert!(silhouette_loss(&pred, &other).is_err());
    }

    #[test]
    fn render_is_azimuth_periodic() {
        let mut grid = VoxelGrid::zeros(GridDims::cube(8).unwrap());
        grid.set(2, 5, 3, 1.0);
        grid.set(6, 1, 4, 0.7);
        let cam = small_cam(16, 16);
        let a = render_silhouette(&grid, &cam, &Viewpoint::new(77.0, 13.0).unwrap());
        let b = render_silhouette(&grid, &cam, &Viewpoint::new(77.0 + 360.0, 13.0).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn centered_cube_projects_near_analytic_area() {
        // solid cube spanning [-0.25, 0.25]^3 at 32^3
        let dims = GridDims::cube(32).unwrap();
        let mut grid = VoxelGrid::zeros(dims);
        for n in 0..32 {
            for m in 0..32 {
                for l in 0..32 {
                    let c = dims.voxel_center(n, m, l);
                    if c.iter().all(|x| x.abs() <= 0.25) {
                        grid.set(n, m, l, 1.0);
                    }
                }
            }
        }
        let cam = CameraModel::default_model();
        let img = render_silhouette(&grid, &cam, &Viewpoint::new(0.0, 0.0).unwrap());

        // analytic projection of the front face (the widest slice)
        let half = cam.intrinsics.f * 0.25 / (cam.distance - 0.25);
        let analytic_area = (2.0 * half) * (2.0 * half);
        let area = img.foreground_count(0.5) as f64;
        assert!(
            (area - analytic_area).abs() / analytic_area < 0.15,
            "rendered area {area} vs analytic {analytic_area}"
        );

        // foreground is centered at the principal point
        let (mut sum_u, mut sum_v, mut count) = (0.0, 0.0, 0.0);
        for n in 0..64 {
            for m in 0..64 {
                if img.get(n, m) >= 0.5 {
                    sum_u += m as f64;
                    sum_v += n as f64;
                    count += 1.0;
                }
            }
        }
        assert_relative_eq!(sum_u / count, 31.5, epsilon = 0.5);
        assert_relative_eq!(sum_v / count, 31.5, epsilon = 0.5);
    }

    #[test]
    fn gradients_vanish_at_perfect_match() {
        let mut grid = VoxelGrid::zeros(GridDims::cube(8).unwrap());
        grid.set(3, 4, 4, 0.8);
        grid.set(4, 4, 4, 1.0);
        let cam = small_cam(16, 16);
        let view = Viewpoint::new(20.0, 10.0).unwrap();
        let target = render_silhouette(&grid, &cam, &view);
        let (loss, grads) = render_with_gradients(&grid, &cam, &view, &target).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.d_loss_d_voxels.values().iter().all(|g| *g == 0.0));
        assert_eq!(grads.d_loss_d_azimuth, 0.0);
        assert_eq!(grads.d_loss_d_elevation, 0.0);
    }

    #[test]
    fn gradient_loss_equals_render_path() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let dims = GridDims::cube(8).unwrap();
        let grid = VoxelGrid::from_values(
            dims,
            (0..dims.count()).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let cam = small_cam(16, 12);
        let view = Viewpoint::new(130.0, 25.0).unwrap();
        let target = SilhouetteImage::from_values(
            16,
            16,
            (0..256).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect(),
        )
        .unwrap();
        let (loss, _) = render_with_gradients(&grid, &cam, &view, &target).unwrap();
        let direct =
            silhouette_loss(&render_silhouette(&grid, &cam, &view), &target).unwrap();
        assert_eq!(loss, direct);
        assert_eq!(streamed_loss(&grid, &cam, &view, &target).unwrap(), direct);
    }

    #[test]
    fn single_voxel_gradient_matches_finite_difference() {
        let dims = GridDims::cube(9).unwrap();
        let mut grid = VoxelGrid::zeros(dims);
        grid.set(4, 4, 4, 0.5);
        let cam = small_cam(16, 16);
        let view = Viewpoint::new(0.0, 0.0).unwrap();
        let target = SilhouetteImage::zeros(16, 16);

        let (_, grads) = render_with_gradients(&grid, &cam, &view, &target).unwrap();
        let analytic = grads.d_loss_d_voxels.get(4, 4, 4);

        let h = 1e-4;
        let eval = |v: f64| {
            let mut g = grid.clone();
            g.set(4, 4, 4, v);
            silhouette_loss(&render_silhouette(&g, &cam, &view), &target).unwrap()
        };
        let fd = (eval(0.5 + h) - eval(0.5 - h)) / (2.0 * h);
        assert_relative_eq!(analytic, fd, max_relative = 1e-4);
    }

    #[test]
    fn azimuth_gradient_matches_finite_difference() {
        let dims = GridDims::cube(8).unwrap();
        let mut grid = VoxelGrid::zeros(dims);
        grid.set(2, 5, 3, 0.9);
        grid.set(5, 2, 4, 0.6);
        let cam = small_cam(16, 16);
        let az = 23.0;
        let el = 11.0;
        let target = SilhouetteImage::zeros(16, 16);

        let view = Viewpoint::new(az, el).unwrap();
        let (_, grads) = render_with_gradients(&grid, &cam, &view, &target).unwrap();

        let h: f64 = 1e-5; // radians
        let eval = |az_deg: f64, el_deg: f64| {
            let v = Viewpoint::new(az_deg, el_deg).unwrap();
            silhouette_loss(&render_silhouette(&grid, &cam, &v), &target).unwrap()
        };
        let hd = h.to_degrees();
        let fd_az = (eval(az + hd, el) - eval(az - hd, el)) / (2.0 * h);
        let fd_el = (eval(az, el + hd) - eval(az, el - hd)) / (2.0 * h);
        assert_relative_eq!(grads.d_loss_d_azimuth, fd_az, max_relative = 1e-3);
        assert_relative_eq!(grads.d_loss_d_elevation, fd_el, max_relative = 1e-3);
    }

    #[test]
    fn zero_weight_voxels_get_zero_gradient() {
        // gradient support is confined to voxels within one cell of some
        // argmax sample point
        let dims = GridDims::cube(8).unwrap();
        let mut grid = VoxelGrid::zeros(dims);
        grid.set(4, 4, 4, 1.0);
        let cam = small_cam(12, 12);
        let view = Viewpoint::new(40.0, 20.0).unwrap();
        let target = SilhouetteImage::zeros(12, 12);
        let (_, grads) = render_with_gradients(&grid, &cam, &view, &target).unwrap();

        let rays = ViewRays::new(&cam, &view);
        let k = &cam.intrinsics;
        let mut support = vec![false; dims.count()];
        for n in 0..12 {
            let b = (n as f64 - k.cy) / k.f;
            for m in 0..12 {
                let a = (m as f64 - k.cx) / k.f;
                for l in 0..12 {
                    let p = rays.object_point(a, b, cam.depth_sample(l));
                    let (xs, ys, zs) = voxel_coords(dims, &p);
                    for nn in 0..8i64 {
                        for mm in 0..8i64 {
                            for ll in 0..8i64 {
                                if (xs - mm as f64).abs() < 1.0
                                    && (ys - nn as f64).abs() < 1.0
                                    && (zs - ll as f64).abs() < 1.0
                                {
                                    support[dims.index(nn as usize, mm as usize, ll as usize)] =
                                        true;
                                }
                            }
                        }
                    }
                }
            }
        }
        for (i, g) in grads.d_loss_d_voxels.values().iter().enumerate() {
            if !support[i] {
                assert_eq!(*g, 0.0);
            }
        }
    }

    #[test]
    fn increasing_a_voxel_never_darkens_a_pixel() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let dims = GridDims::cube(6).unwrap();
        let values: Vec<f64> = (0..dims.count()).map(|_| rng.gen_range(0.0..0.9)).collect();
        let grid = VoxelGrid::from_values(dims, values.clone()).unwrap();
        let cam = small_cam(10, 10);
        let view = Viewpoint::new(65.0, 5.0).unwrap();
        let before = render_silhouette(&grid, &cam, &view);

        for trial in 0..20 {
            let idx = rng.gen_range(0..dims.count());
            let mut bumped = values.clone();
            bumped[idx] = (bumped[idx] + 0.1).min(1.0);
            let after = render_silhouette(
                &VoxelGrid::from_values(dims, bumped).unwrap(),
                &cam,
                &view,
            );
            for (a, b) in after.values().iter().zip(before.values()) {
                assert!(a >= b, "trial {trial}: pixel decreased from {b} to {a}");
            }
        }
    }
}
