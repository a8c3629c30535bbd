//! Viewpoint parameterization, rotation assembly, intrinsics and the full
//! projection matrix.
//!
//! The camera orbits the object center at a fixed axial distance, so the
//! extrinsic translation is always `(0, 0, distance)`. The rotation is
//! assembled from two angles, azimuth and elevation, as the product
//! `R = R_az * R_el` with
//!
//! ```text
//! R_az = [ cos a  0  sin a ]     R_el = [  cos e  sin e  0 ]
//!        [   0    1    0   ]            [ -sin e  cos e  0 ]
//!        [-sin a  0  cos a ]            [    0      0    1 ]
//! ```
//!
//! Note that the elevation factor mixes the x and y axes (a rotation about
//! z), which is unusual; it is the convention this library is committed to.
//! [`ElevationAxis::Conventional`] switches the elevation factor to the
//! common about-x rotation for callers that want it.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Camera rotation angles: azimuth in `[0, 360)` degrees, elevation in
/// `[0, 40]` degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ViewpointRaw")]
pub struct Viewpoint {
    azimuth_deg: f64,
    elevation_deg: f64,
}

#[derive(Deserialize)]
struct ViewpointRaw {
    azimuth_deg: f64,
    elevation_deg: f64,
}

impl TryFrom<ViewpointRaw> for Viewpoint {
    type Error = Error;
    fn try_from(raw: ViewpointRaw) -> Result<Self> {
        Viewpoint::new(raw.azimuth_deg, raw.elevation_deg)
    }
}

pub const ELEVATION_MAX_DEG: f64 = 40.0;

impl Viewpoint {
    /// Azimuth is normalized modulo 360 into `[0, 360)`; elevation outside
    /// `[0, 40]` is an error.
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        if !azimuth_deg.is_finite() || !elevation_deg.is_finite() {
            return Err(Error::InvalidParameter("viewpoint angles must be finite".into()));
        }
        if !(0.0..=ELEVATION_MAX_DEG).contains(&elevation_deg) {
            return Err(Error::OutOfRange(format!(
                "elevation {elevation_deg} outside [0, {ELEVATION_MAX_DEG}]"
            )));
        }
        Ok(Viewpoint {
            azimuth_deg: azimuth_deg.rem_euclid(360.0),
            elevation_deg,
        })
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }

    pub fn azimuth_rad(&self) -> f64 {
        self.azimuth_deg.to_radians()
    }

    pub fn elevation_rad(&self) -> f64 {
        self.elevation_deg.to_radians()
    }
}

/// Simplified intrinsic parameters: one focal length and the principal point,
/// both in output-pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRaw")]
pub struct Intrinsics {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Deserialize)]
struct IntrinsicsRaw {
    f: f64,
    cx: f64,
    cy: f64,
}

impl TryFrom<IntrinsicsRaw> for Intrinsics {
    type Error = Error;
    fn try_from(raw: IntrinsicsRaw) -> Result<Self> {
        Intrinsics::new(raw.f, raw.cx, raw.cy)
    }
}

impl Intrinsics {
    pub fn new(f: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(f.is_finite() && f > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "invalid intrinsics f={f} cx={cx} cy={cy}"
            )));
        }
        Ok(Intrinsics { f, cx, cy })
    }

    /// 3x3 intrinsic matrix `[[f,0,cx],[0,f,cy],[0,0,1]]`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.f, 0.0, self.cx, 0.0, self.f, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Which axis pair the elevation factor mixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElevationAxis {
    /// Elevation mixes x and y (rotation about z). The library default.
    #[default]
    AboutZ,
    /// Elevation mixes y and z (rotation about x).
    Conventional,
}

/// Minimum camera distance: outside the circumscribed sphere of the unit cube.
pub const MIN_DISTANCE: f64 = 0.866_025_403_784_438_6; // sqrt(3)/2

/// Full camera description: intrinsics, object distance, output image size
/// and the depth sampling used when resampling volumes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    /// Object-center to camera-center distance, in object-cube units.
    pub distance: f64,
    /// Output image size as (height, width).
    pub image_dims: (usize, usize),
    /// Number of depth samples D' in the resampled volume.
    pub depth_samples: usize,
    /// Camera-frame depth interval covered by the samples.
    pub depth_range: (f64, f64),
    pub elevation_axis: ElevationAxis,
}

impl CameraModel {
    pub fn new(
        intrinsics: Intrinsics,
        distance: f64,
        image_dims: (usize, usize),
        depth_samples: usize,
        depth_range: (f64, f64),
        elevation_axis: ElevationAxis,
    ) -> Result<Self> {
        if !(distance.is_finite() && distance > MIN_DISTANCE) {
            return Err(Error::InvalidParameter(format!(
                "camera distance {distance} must exceed sqrt(3)/2 so the camera stays outside the object cube"
            )));
        }
        if image_dims.0 == 0 || image_dims.1 == 0 {
            return Err(Error::InvalidParameter("image dimensions must be >= 1".into()));
        }
        if depth_samples == 0 {
            return Err(Error::InvalidParameter("depth sample count must be >= 1".into()));
        }
        let (near, far) = depth_range;
        if !(near.is_finite() && far.is_finite() && near > 0.0 && near <= far) {
            return Err(Error::InvalidParameter(format!(
                "invalid depth range [{near}, {far}]"
            )));
        }
        Ok(CameraModel {
            intrinsics,
            distance,
            image_dims,
            depth_samples,
            depth_range,
            elevation_axis,
        })
    }

    /// 64x64 image, f = 64, principal point (31.5, 31.5), distance 1.7,
    /// 64 depth samples over [distance - 0.75, distance + 0.75].
    pub fn default_model() -> Self {
        let distance = 1.7;
        CameraModel {
            intrinsics: Intrinsics::new(64.0, 31.5, 31.5).unwrap(),
            distance,
            image_dims: (64, 64),
            depth_samples: 64,
            depth_range: (distance - 0.75, distance + 0.75),
            elevation_axis: ElevationAxis::AboutZ,
        }
    }

    /// Extrinsic translation `t = (0, 0, distance)`; in-plane translation is
    /// cancelled by construction (objects are centered and scale-normalized).
    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.distance)
    }

    /// Camera-frame depth of the `l'`-th sample. Samples span the depth
    /// range endpoint-inclusive; a single sample sits at the midpoint.
    pub fn depth_sample(&self, l: usize) -> f64 {
        debug_assert!(l < self.depth_samples);
        let (near, far) = self.depth_range;
        if self.depth_samples == 1 {
            0.5 * (near + far)
        } else {
            near + (far - near) * l as f64 / (self.depth_samples - 1) as f64
        }
    }
}

impl Default for CameraModel {
    fn default() -> Self {
        Self::default_model()
    }
}

// Serde for CameraModel goes through a raw config so defaults apply per
// field and the validated constructor still runs.
// Unknown keys are rejected: with every field defaulted, a typo would
// otherwise silently fall back to the default camera.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraModelRaw {
    #[serde(default = "default_focal")]
    focal_length: f64,
    #[serde(default = "default_principal")]
    principal_point: (f64, f64),
    #[serde(default = "default_distance")]
    distance: f64,
    #[serde(default = "default_image_dims")]
    image_dims: (usize, usize),
    #[serde(default = "default_depth_samples")]
    depth_samples: usize,
    #[serde(default)]
    depth_range: Option<(f64, f64)>,
    #[serde(default)]
    elevation_axis: ElevationAxis,
}

fn default_focal() -> f64 {
    64.0
}
fn default_principal() -> (f64, f64) {
    (31.5, 31.5)
}
fn default_distance() -> f64 {
    1.7
}
fn default_image_dims() -> (usize, usize) {
    (64, 64)
}
fn default_depth_samples() -> usize {
    64
}

impl<'de> Deserialize<'de> for CameraModel {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = CameraModelRaw::deserialize(deserializer)?;
        let intrinsics =
            Intrinsics::new(raw.focal_length, raw.principal_point.0, raw.principal_point.1)
                .map_err(serde::de::Error::custom)?;
        let depth_range = raw
            .depth_range
            .unwrap_or((raw.distance - 0.75, raw.distance + 0.75));
        CameraModel::new(
            intrinsics,
            raw.distance,
            raw.image_dims,
            raw.depth_samples,
            depth_range,
            raw.elevation_axis,
        )
        .map_err(serde::de::Error::custom)
    }
}

fn azimuth_matrix(az: f64) -> Matrix3<f64> {
    let (s, c) = az.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn elevation_matrix(el: f64, axis: ElevationAxis) -> Matrix3<f64> {
    let (s, c) = el.sin_cos();
    match axis {
        ElevationAxis::AboutZ => Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0),
        ElevationAxis::Conventional => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c),
    }
}

/// Assembles the camera rotation `R = R_az * R_el` (see module docs).
pub fn rotation_from_viewpoint(v: &Viewpoint) -> Matrix3<f64> {
    rotation_from_viewpoint_with_axis(v, ElevationAxis::AboutZ)
}

/// Same as [`rotation_from_viewpoint`] with an explicit elevation convention.
pub fn rotation_from_viewpoint_with_axis(v: &Viewpoint, axis: ElevationAxis) -> Matrix3<f64> {
    azimuth_matrix(v.azimuth_rad()) * elevation_matrix(v.elevation_rad(), axis)
}

/// Derivatives of the assembled rotation with respect to each angle, in
/// radians: `(dR/d_az, dR/d_el)`.
pub(crate) fn rotation_derivatives(
    v: &Viewpoint,
    axis: ElevationAxis,
) -> (Matrix3<f64>, Matrix3<f64>) {
    let az = v.azimuth_rad();
    let el = v.elevation_rad();
    let (sa, ca) = az.sin_cos();
    let (se, ce) = el.sin_cos();
    let d_az = Matrix3::new(-sa, 0.0, ca, 0.0, 0.0, 0.0, -ca, 0.0, -sa);
    let d_el = match axis {
        ElevationAxis::AboutZ => Matrix3::new(-se, ce, 0.0, -ce, -se, 0.0, 0.0, 0.0, 0.0),
        ElevationAxis::Conventional => {
            Matrix3::new(0.0, 0.0, 0.0, 0.0, -se, ce, 0.0, -ce, -se)
        }
    };
    (
        d_az * elevation_matrix(el, axis),
        azimuth_matrix(az) * d_el,
    )
}

/// Homogeneous 4x4 projection `P = [K 0; 0 1] * [R t; 0 1]` using the
/// camera's configured elevation convention.
pub fn projection_matrix(cam: &CameraModel, v: &Viewpoint) -> Matrix4<f64> {
    let k = cam.intrinsics.matrix();
    let r = rotation_from_viewpoint_with_axis(v, cam.elevation_axis);
    let t = cam.translation();

    let mut intr = Matrix4::identity();
    intr.fixed_view_mut::<3, 3>(0, 0).copy_from(&k);
    let mut extr = Matrix4::identity();
    extr.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    extr.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    intr * extr
}

/// Projects an object-frame point to pixel coordinates and camera depth:
/// `p_c = R p + t`, `u = f x_c / z_c + c_x`, `v = f y_c / z_c + c_y`.
///
/// Errors if the point lands at non-positive depth.
pub fn object_to_pixel(
    cam: &CameraModel,
    v: &Viewpoint,
    point: [f64; 3],
) -> Result<(f64, f64, f64)> {
    if point.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("point coordinates must be finite".into()));
    }
    let r = rotation_from_viewpoint_with_axis(v, cam.elevation_axis);
    let p_c = r * Vector3::new(point[0], point[1], point[2]) + cam.translation();
    if p_c.z <= 0.0 {
        return Err(Error::BehindCamera(p_c.z));
    }
    let k = &cam.intrinsics;
    Ok((
        k.f * p_c.x / p_c.z + k.cx,
        k.f * p_c.y / p_c.z + k.cy,
        p_c.z,
    ))
}
