//! Benchmark-only crate; the workloads live under `benches/`.

use silhvox_core::{
    voxelize_primitive, CameraModel, ElevationAxis, GridDims, Intrinsics, Primitive,
    SyntheticShapeSpec, VoxelGrid,
};

/// Centered sphere of radius 0.35 as a soft grid, the standard workload.
pub fn sphere_grid(side: usize) -> VoxelGrid {
    let spec = SyntheticShapeSpec {
        primitive: Primitive::Sphere { center: [0.0; 3], radius: 0.35 },
        resolution: GridDims::new(side, side, side).unwrap(),
    };
    voxelize_primitive(&spec).unwrap().to_voxel_grid()
}

/// Camera sized to the library's default 64x64 silhouettes.
pub fn bench_camera() -> CameraModel {
    CameraModel::new(
        Intrinsics::new(64.0, 31.5, 31.5).unwrap(),
        1.7,
        (64, 64),
        64,
        (0.95, 2.45),
        ElevationAxis::AboutZ,
    )
    .unwrap()
}
