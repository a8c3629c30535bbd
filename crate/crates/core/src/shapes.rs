//! Synthetic test-shape factory: analytic primitives voxelized onto
//! occupancy grids. A voxel is occupied iff its center passes the
//! primitive's inside test, so every grid is an exact sampling of a known
//! solid — the ground truth for fitting and metric experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voxel::{BinaryVoxelGrid, GridDims};

/// Analytic solid with per-primitive dimensions in object units. Curved
/// boundaries use a strict inside test (a zero radius is empty); flat
/// extents are closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Axis-aligned box: `|p - center| <= half_extents` per axis.
    Box {
        #[serde(default)]
        center: [f64; 3],
        half_extents: [f64; 3],
    },
    /// Ball of the given radius.
    Sphere {
        #[serde(default)]
        center: [f64; 3],
        radius: f64,
    },
    /// Solid cylinder with its axis along y.
    Cylinder {
        #[serde(default)]
        center: [f64; 3],
        radius: f64,
        half_height: f64,
    },
    /// Upright solid cylinder body plus a half-torus handle: the torus
    /// circle (radius `handle_radius`, tube radius `handle_tube_radius`)
    /// lies in the x-y plane, centered on the body wall at
    /// `(body_radius, 0, 0)`, keeping only the outward half `x >= body_radius`.
    Mug {
        body_radius: f64,
        body_half_height: f64,
        handle_radius: f64,
        handle_tube_radius: f64,
    },
    /// Box composition: four corner legs below y = 0, a seat slab on top of
    /// them, and a backrest rising along the `+z` face.
    Chair {
        half_width: f64,
        half_depth: f64,
        half_height: f64,
        member_thickness: f64,
    },
}

impl Primitive {
    /// Axis-aligned bounds `(min, max)` of the solid.
    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            Primitive::Box { center, half_extents } => (
                [center[0] - half_extents[0], center[1] - half_extents[1], center[2] - half_extents[2]],
                [center[0] + half_extents[0], center[1] + half_extents[1], center[2] + half_extents[2]],
            ),
            Primitive::Sphere { center, radius } => (
                [center[0] - radius, center[1] - radius, center[2] - radius],
                [center[0] + radius, center[1] + radius, center[2] + radius],
            ),
            Primitive::Cylinder { center, radius, half_height } => (
                [center[0] - radius, center[1] - half_height, center[2] - radius],
                [center[0] + radius, center[1] + half_height, center[2] + radius],
            ),
            Primitive::Mug {
                body_radius,
                body_half_height,
                handle_radius,
                handle_tube_radius,
            } => {
                let reach = handle_radius + handle_tube_radius;
                let half_y = body_half_height.max(reach);
                let half_z = body_radius.max(*handle_tube_radius);
                (
                    [-body_radius, -half_y, -half_z],
                    [body_radius + reach, half_y, half_z],
                )
            }
            Primitive::Chair { half_width, half_depth, half_height, .. } => (
                [-half_width, -half_height, -half_depth],
                [*half_width, *half_height, *half_depth],
            ),
        }
    }

    fn params(&self) -> Vec<f64> {
        match self {
            Primitive::Box { center, half_extents } => {
                center.iter().chain(half_extents.iter()).copied().collect()
            }
            Primitive::Sphere { center, radius } => {
                center.iter().copied().chain([*radius]).collect()
            }
            Primitive::Cylinder { center, radius, half_height } => {
                center.iter().copied().chain([*radius, *half_height]).collect()
            }
            Primitive::Mug {
                body_radius,
                body_half_height,
                handle_radius,
                handle_tube_radius,
            } => vec![*body_radius, *body_half_height, *handle_radius, *handle_tube_radius],
            Primitive::Chair {
                half_width,
                half_depth,
                half_height,
                member_thickness,
            } => vec![*half_width, *half_depth, *half_height, *member_thickness],
        }
    }

    fn validate(&self) -> Result<()> {
        let sizes_ok = match self {
            // centers may be negative; every size parameter must not be
            Primitive::Box { half_extents, .. } => half_extents.iter().all(|v| *v >= 0.0),
            Primitive::Sphere { radius, .. } => *radius >= 0.0,
            Primitive::Cylinder { radius, half_height, .. } => {
                *radius >= 0.0 && *half_height >= 0.0
            }
            Primitive::Mug {
                body_radius,
                body_half_height,
                handle_radius,
                handle_tube_radius,
            } => [body_radius, body_half_height, handle_radius, handle_tube_radius]
                .iter()
                .all(|v| **v >= 0.0),
            Primitive::Chair {
                half_width,
                half_depth,
                half_height,
                member_thickness,
            } => {
                let t = *member_thickness;
                t >= 0.0 && t <= half_width.min(*half_depth).min(*half_height)
            }
        };
        if !sizes_ok || self.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad primitive dimensions: {self:?}")));
        }
        let (lo, hi) = self.bounds();
        for axis in 0..3 {
            if lo[axis] < -0.5 || hi[axis] > 0.5 {
                return Err(Error::ShapeOutsideCube(format!(
                    "primitive spans [{}, {}] on axis {axis}",
                    lo[axis], hi[axis]
                )));
            }
        }
        Ok(())
    }

    /// Analytic inside test at an object-frame point.
    fn contains(&self, p: [f64; 3]) -> bool {
        let [x, y, z] = p;
        match self {
            Primitive::Box { center, half_extents } => (0..3)
                .all(|i| (p[i] - center[i]).abs() <= half_extents[i]),
            Primitive::Sphere { center, radius } => {
                let dx = x - center[0];
                let dy = y - center[1];
                let dz = z - center[2];
                dx * dx + dy * dy + dz * dz < radius * radius
            }
            Primitive::Cylinder { center, radius, half_height } => {
                let dx = x - center[0];
                let dz = z - center[2];
                dx * dx + dz * dz < radius * radius && (y - center[1]).abs() <= *half_height
            }
            Primitive::Mug {
                body_radius,
                body_half_height,
                handle_radius,
                handle_tube_radius,
            } => {
                let in_body =
                    x * x + z * z < body_radius * body_radius && y.abs() <= *body_half_height;
                let dx = x - body_radius;
                let ring = (dx * dx + y * y).sqrt() - handle_radius;
                let in_handle =
                    x >= *body_radius && ring * ring + z * z < handle_tube_radius * handle_tube_radius;
                in_body || in_handle
            }
            Primitive::Chair {
                half_width,
                half_depth,
                half_height,
                member_thickness,
            } => {
                let (hw, hd, hh, t) = (*half_width, *half_depth, *half_height, *member_thickness);
                let in_leg = x.abs() >= hw - t
                    && x.abs() <= hw
                    && z.abs() >= hd - t
                    && z.abs() <= hd
                    && (-hh..=0.0).contains(&y);
                let in_seat = x.abs() <= hw && z.abs() <= hd && (0.0..=t).contains(&y);
                let in_back = x.abs() <= hw && (hd - t..=hd).contains(&z) && (t..=hh).contains(&y);
                in_leg || in_seat || in_back
            }
        }
    }
}

/// A primitive plus the grid resolution to sample it at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticShapeSpec {
    pub primitive: Primitive,
    pub resolution: GridDims,
}

/// Samples the primitive's inside test at every voxel center. Errors if the
/// primitive does not fit inside the unit cube or has invalid dimensions.
pub fn voxelize_primitive(spec: &SyntheticShapeSpec) -> Result<BinaryVoxelGrid> {
    spec.primitive.validate()?;
    let dims = GridDims::new(spec.resolution.h, spec.resolution.w, spec.resolution.d)?;
    let mut grid = BinaryVoxelGrid::empty(dims);
    for n in 0..dims.h {
        for m in 0..dims.w {
            for l in 0..dims.d {
                if spec.primitive.contains(dims.voxel_center(n, m, l)) {
                    grid.set(n, m, l, true);
                }
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_spec(radius: f64, side: usize) -> SyntheticShapeSpec {
        SyntheticShapeSpec {
            primitive: Primitive::Sphere { center: [0.0; 3], radius },
            resolution: GridDims::cube(side).unwrap(),
        }
    }

    #[test]
    fn sphere_occupancy_matches_frozen_counts() {
        // independent counts for r = 0.35 at three resolutions
        for (side, expected) in [(16, 720), (32, 5904), (64, 47048)] {
            let grid = voxelize_primitive(&sphere_spec(0.35, side)).unwrap();
            assert_eq!(grid.occupied_count(), expected, "side {side}");
        }
    }

    #[test]
    fn sphere_occupancy_near_analytic_volume() {
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * 0.35f64.powi(3);
        let grid = voxelize_primitive(&sphere_spec(0.35, 32)).unwrap();
        let expected = analytic * 32.0f64.powi(3);
        let got = grid.occupied_count() as f64;
        assert!(
            (got - expected).abs() / expected < 0.02,
            "count {got} vs analytic {expected}"
        );
    }

    #[test]
    fn sphere_occupied_fraction_converges_with_resolution() {
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * 0.35f64.powi(3);
        let mut last_err = f64::INFINITY;
        for side in [16usize, 32, 64] {
            let grid = voxelize_primitive(&sphere_spec(0.35, side)).unwrap();
            let fraction = grid.occupied_count() as f64 / (side * side * side) as f64;
            let err = (fraction - analytic).abs();
            assert!(err < last_err, "error did not shrink at side {side}: {err} vs {last_err}");
            last_err = err;
        }
    }

    #[test]
    fn degenerate_primitives() {
        let empty = voxelize_primitive(&sphere_spec(0.0, 16)).unwrap();
        assert_eq!(empty.occupied_count(), 0);

        let full = voxelize_primitive(&SyntheticShapeSpec {
            primitive: Primitive::Box { center: [0.0; 3], half_extents: [0.5; 3] },
            resolution: GridDims::cube(8).unwrap(),
        })
        .unwrap();
        assert_eq!(full.occupied_count(), 512);
    }

    #[test]
    fn out_of_cube_and_invalid_dimensions_are_rejected() {
        assert!(voxelize_primitive(&sphere_spec(0.51, 16)).is_err());
        assert!(voxelize_primitive(&SyntheticShapeSpec {
            primitive: Primitive::Sphere { center: [0.3, 0.0, 0.0], radius: 0.3 },
            resolution: GridDims::cube(16).unwrap(),
        })
        .is_err());
        assert!(voxelize_primitive(&SyntheticShapeSpec {
            primitive: Primitive::Sphere { center: [0.0; 3], radius: -0.1 },
            resolution: GridDims::cube(16).unwrap(),
        })
        .is_err());
        assert!(voxelize_primitive(&SyntheticShapeSpec {
            primitive: Primitive::Chair {
                half_width: 0.2,
                half_depth: 0.2,
                half_height: 0.3,
                member_thickness: 0.25, // thicker than the half-width
            },
            resolution: GridDims::cube(16).unwrap(),
        })
        .is_err());

        // just inside the cube is fine
        assert!(voxelize_primitive(&SyntheticShapeSpec {
            primitive: Primitive::Sphere { center: [0.1, 0.0, 0.0], radius: 0.4 },
            resolution: GridDims::cube(16).unwrap(),
        })
        .is_ok());
    }

    #[test]
    fn cylinder_count_has_product_structure() {
        // axis-aligned cylinder = (2D disk) x (1D slab): the 3D count must
        // equal the product of the independently computed factor counts
        let dims = GridDims::cube(32).unwrap();
        let spec = SyntheticShapeSpec {
            primitive: Primitive::Cylinder {
                center: [0.0; 3],
                radius: 0.3,
                half_height: 0.4,
            },
            resolution: dims,
        };
        let grid = voxelize_primitive(&spec).unwrap();

        let coord = |i: usize| (i as f64 + 0.5) / 32.0 - 0.5;
        let mut disk = 0usize;
        for m in 0..32 {
            for l in 0..32 {
                let (x, z) = (coord(m), coord(l));
                if x * x + z * z < 0.09 {
                    disk += 1;
                }
            }
        }
        let slab = (0..32).filter(|n| coord(*n).abs() <= 0.4).count();
        assert_eq!(grid.occupied_count(), disk * slab);
        assert!(disk > 0 && slab > 0);
    }

    #[test]
    fn mug_is_body_plus_outward_handle() {
        let res = GridDims::cube(32).unwrap();
        let mug = SyntheticShapeSpec {
            primitive: Primitive::Mug {
                body_radius: 0.22,
                body_half_height: 0.3,
                handle_radius: 0.13,
                handle_tube_radius: 0.045,
            },
            resolution: res,
        };
        let body_only = SyntheticShapeSpec {
            primitive: Primitive::Cylinder { center: [0.0; 3], radius: 0.22, half_height: 0.3 },
            resolution: res,
        };
        let mug_grid = voxelize_primitive(&mug).unwrap();
        let body_grid = voxelize_primitive(&body_only).unwrap();

        // the handle voxels are exactly the mug-minus-body difference and
        // all sit outward of the body wall, satisfying the torus test
        let mut handle = 0;
        for n in 0..32 {
            for m in 0..32 {
                for l in 0..32 {
                    let in_mug = mug_grid.get(n, m, l);
                    let in_body = body_grid.get(n, m, l);
                    assert!(!in_body || in_mug, "body voxel missing from mug");
                    if in_mug && !in_body {
                        handle += 1;
                        let [x, y, z] = res.voxel_center(n, m, l);
                        assert!(x >= 0.22);
                        let ring = ((x - 0.22).powi(2) + y * y).sqrt() - 0.13;
                        assert!(ring * ring + z * z < 0.045f64.powi(2));
                    }
                }
            }
        }
        assert!(handle > 0, "handle left no voxels");
    }

    #[test]
    fn chair_members_sit_where_expected() {
        let res = GridDims::cube(32).unwrap();
        let spec = SyntheticShapeSpec {
            primitive: Primitive::Chair {
                half_width: 0.3,
                half_depth: 0.25,
                half_height: 0.45,
                member_thickness: 0.08,
            },
            resolution: res,
        };
        let grid = voxelize_primitive(&spec).unwrap();
        assert!(grid.occupied_count() > 0);

        for n in 0..32 {
            for m in 0..32 {
                for l in 0..32 {
                    if !grid.get(n, m, l) {
                        continue;
                    }
                    let [x, y, z] = res.voxel_center(n, m, l);
                    assert!(x.abs() <= 0.3 && z.abs() <= 0.25 && y.abs() <= 0.45);
                    if y < 0.0 {
                        // below the seat only legs remain: corner cross-sections
                        assert!(x.abs() >= 0.3 - 0.08 && z.abs() >= 0.25 - 0.08);
                    }
                    if y > 0.08 {
                        // above the seat only the backrest remains: back face
                        assert!(z >= 0.25 - 0.08);
                    }
                }
            }
        }

        // front-back asymmetry: mirroring z must change the shape
        let mut mirrored = BinaryVoxelGrid::empty(res);
        for n in 0..32 {
            for m in 0..32 {
                for l in 0..32 {
                    mirrored.set(n, m, 31 - l, grid.get(n, m, l));
                }
            }
        }
        assert_ne!(grid, mirrored);
    }

    #[test]
    fn voxelization_is_deterministic() {
        let spec = sphere_spec(0.3, 24);
        assert_eq!(voxelize_primitive(&spec).unwrap(), voxelize_primitive(&spec).unwrap());
    }

    #[test]
    fn spec_json_round_trip() {
        let specs = vec![
            SyntheticShapeSpec {
                primitive: Primitive::Box { center: [0.1, 0.0, -0.1], half_extents: [0.2; 3] },
                resolution: GridDims::cube(16).unwrap(),
            },
            sphere_spec(0.35, 32),
            SyntheticShapeSpec {
                primitive: Primitive::Mug {
                    body_radius: 0.22,
                    body_half_height: 0.3,
                    handle_radius: 0.13,
                    handle_tube_radius: 0.045,
                },
                resolution: GridDims::new(32, 32, 32).unwrap(),
            },
        ];
        for spec in specs {
            let json = serde_json::to_string(&spec).unwrap();
            let back: SyntheticShapeSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(spec, back);
        }

        // center is optional in JSON; unknown kinds are rejected
        let from_min: SyntheticShapeSpec = serde_json::from_str(
            r#"{"primitive": {"kind": "sphere", "radius": 0.35},
                "resolution": {"h": 32, "w": 32, "d": 32}}"#,
        )
        .unwrap();
        assert_eq!(from_min, sphere_spec(0.35, 32));
        assert!(serde_json::from_str::<SyntheticShapeSpec>(
            r#"{"primitive": {"kind": "torus", "radius": 0.2},
                "resolution": {"h": 8, "w": 8, "d": 8}}"#,
        )
        .is_err());
    }
}
