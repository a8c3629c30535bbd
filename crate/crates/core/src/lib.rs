//! Differentiable voxel silhouette rendering and silhouette-based fitting.
//!
//! The crate renders an occupancy voxel grid into a camera as a soft
//! silhouette image — a perspective trilinear resampling of the grid
//! followed by a max over depth — and exposes analytic gradients of a
//! squared-difference silhouette loss with respect to both the voxel
//! values and the camera viewpoint angles. On top of the renderer sit
//! gradient-based fitters that recover shape (as a residual applied to a
//! category mean), viewpoint, or both jointly from observed silhouettes,
//! plus evaluation metrics (voxel IoU, pose error statistics, point-cloud
//! Hausdorff distances), synthetic test shapes, marching-cubes meshing,
//! and file formats for grids, silhouettes, clouds, and meshes.
//!
//! The commonly used types are re-exported at the crate root; the modules
//! group the functionality:
//!
//! - [`voxel`]: grids, shape composition `clamp(mean + residual)`, means.
//! - [`camera`]: azimuth/elevation viewpoints, intrinsics, projection.
//! - [`projector`]: differentiable rendering and the silhouette loss.
//! - [`fitter`]: shape, pose, and joint fitting.
//! - [`metrics`]: IoU, angular pose errors, point clouds, Hausdorff.
//! - [`shapes`]: analytic primitives voxelized for tests and demos.
//! - [`mesh`]: marching-cubes surface extraction.
//! - [`io`]: `.vox32`, PGM, XYZ, OBJ, and JSON files.

pub mod camera;
pub mod error;
pub mod fitter;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod projector;
pub mod shapes;
pub mod voxel;

pub use camera::{
    object_to_pixel, projection_matrix, rotation_from_viewpoint, rotation_from_viewpoint_with_axis,
    CameraModel, ElevationAxis, Intrinsics, Viewpoint, ELEVATION_MAX_DEG, MIN_DISTANCE,
};
pub use error::{Error, Result};
pub use fitter::{fit_joint, fit_pose, fit_shape, FitConfig, FitReport, Observation, PoseFit};
pub use io::{
    read_json, read_pointcloud_xyz, read_silhouette, read_voxels, write_json, write_mesh_obj,
    write_pointcloud_xyz, write_silhouette, write_voxels,
};
pub use mesh::{marching_cubes, TriangleMesh};
pub use metrics::{
    angular_distance, cloud_density, summarize_pose_errors, symmetric_hausdorff, voxel_iou,
    voxels_to_pointcloud, DistanceUnit, HausdorffMode, PointCloud, PoseErrorSummary,
};
pub use projector::{
    flatten_silhouette, flatten_silhouette_smooth, flatten_silhouette_with_argmax,
    render_silhouette, render_with_gradients, resample_volume, silhouette_loss, RenderGradients,
    ResampledVolume, SilhouetteImage,
};
pub use shapes::{voxelize_primitive, Primitive, SyntheticShapeSpec};
pub use voxel::{
    binarize, compose_shape, compute_mean_shape, residual_between, select_threshold,
    threshold_candidates, BinaryVoxelGrid, GridDims, ResidualGrid, VoxelGrid,
};
