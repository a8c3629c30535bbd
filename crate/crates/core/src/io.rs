//! File formats: `.vox32` voxel grids, binary PGM silhouettes, ASCII XYZ
//! point clouds, OBJ meshes, and JSON helpers for the serde-backed types.
//!
//! `.vox32` layout: the 8-byte magic `SILHVOX1`, three little-endian `u32`
//! dims `(H, W, D)`, then `H*W*D` little-endian `f32` values in n-major,
//! then m, then l order. Values are stored in 32 bits, so a grid survives
//! a write/read cycle bit-exactly once its values are `f32`-representable
//! (as every grid read from disk is).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Point3;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::metrics::{DistanceUnit, PointCloud};
use crate::projector::SilhouetteImage;
use crate::voxel::{GridDims, VoxelGrid};

const VOX32_MAGIC: &[u8; 8] = b"SILHVOX1";

pub fn write_voxels(grid: &VoxelGrid, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = |bytes: &[u8]| out.write_all(bytes).map_err(|e| Error::io(path, e));
    write(VOX32_MAGIC)?;
    let dims = grid.dims();
    for extent in [dims.h, dims.w, dims.d] {
        write(&(extent as u32).to_le_bytes())?;
    }
    for v in grid.values() {
        write(&(*v as f32).to_le_bytes())?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_voxels(path: &Path) -> Result<VoxelGrid> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);

    let mut magic = [0u8; 8];
    read_exact(&mut input, &mut magic, path)?;
    if &magic != VOX32_MAGIC {
        return Err(Error::format(path, "bad magic, not a .vox32 file"));
    }

    let mut word = [0u8; 4];
    let mut extents = [0usize; 3];
    for extent in extents.iter_mut() {
        read_exact(&mut input, &mut word, path)?;
        *extent = u32::from_le_bytes(word) as usize;
    }
    let dims = GridDims::new(extents[0], extents[1], extents[2])
        .map_err(|e| Error::format(path, format!("bad dims: {e}")))?;

    let mut values = Vec::with_capacity(dims.count());
    for _ in 0..dims.count() {
        read_exact(&mut input, &mut word, path)?;
        values.push(f32::from_le_bytes(word) as f64);
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(path, "trailing bytes after voxel data"));
    }
    VoxelGrid::from_values(dims, values)
        .map_err(|e| Error::format(path, format!("bad voxel values: {e}")))
}

fn read_exact(input: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    input.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(path, "file truncated")
        } else {
            Error::io(path, e)
        }
    })
}

/// Writes a binary PGM (P5, maxval 255); pixel `v` is stored as
/// `round(255 v)`.
pub fn write_silhouette(image: &SilhouetteImage, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let (h, w) = image.dims();
    out.write_all(format!("P5\n{w} {h}\n255\n").as_bytes())
        .map_err(|e| Error::io(path, e))?;
    let bytes: Vec<u8> = image.values().iter().map(|v| (v * 255.0).round() as u8).collect();
    out.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a binary PGM (P5, maxval 255); byte `b` maps back to `b / 255`,
/// so a write/read cycle moves each pixel by at most `1/510`.
pub fn read_silhouette(path: &Path) -> Result<SilhouetteImage> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::new(); // (start, end) of the three header fields
    let mut pos = 0usize;
    while fields.len() < 3 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos == start {
            return Err(Error::format(path, "truncated PGM header"));
        }
        fields.push(&data[start..pos]);
    }
    if fields[0] != b"P5" {
        return Err(Error::format(path, "not a binary PGM (P5) file"));
    }
    let parse = |bytes: &[u8]| -> Result<usize> {
        std::str::from_utf8(bytes)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, "bad PGM header field"))
    };
    let width = parse(fields[1])?;
    let height = parse(fields[2])?;

    // maxval field, then exactly one whitespace byte before the raster
    while pos < data.len() && data[pos].is_ascii_whitespace() {
        pos += 1;
    }
    let start = pos;
    while pos < data.len() && !data[pos].is_ascii_whitespace() {
        pos += 1;
    }
    if parse(&data[start..pos])? != 255 {
        return Err(Error::format(path, "only maxval 255 is supported"));
    }
    pos += 1; // the single whitespace after maxval

    let raster = data.get(pos..pos + width * height).ok_or_else(|| {
        Error::format(path, "PGM raster shorter than width * height")
    })?;
    let values = raster.iter().map(|b| *b as f64 / 255.0).collect();
    SilhouetteImage::from_values(height, width, values)
        .map_err(|e| Error::format(path, format!("bad pixel data: {e}")))
}

/// Writes one `x y z` line per point, in full round-trip precision.
pub fn write_pointcloud_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for p in cloud.points() {
        writeln!(out, "{} {} {}", p.x, p.y, p.z).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads whitespace-separated `x y z` lines; blank lines are skipped. The
/// caller states the unit the coordinates are in.
pub fn read_pointcloud_xyz(path: &Path, unit: DistanceUnit) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, format!("bad XYZ line: {line:?}")))?;
        if coords.len() != 3 {
            return Err(Error::format(path, format!("expected 3 coordinates: {line:?}")));
        }
        points.push(Point3::new(coords[0], coords[1], coords[2]));
    }
    PointCloud::new(points, unit).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes an ASCII OBJ: `v x y z` lines, then 1-indexed `f a b c` lines.
pub fn write_mesh_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for v in mesh.vertices() {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2]).map_err(|e| Error::io(path, e))?;
    }
    for t in mesh.triangles() {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads any of the serde-backed types (viewpoints, camera models, fit
/// configs, shape specs) from a JSON file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Writes any of the serde-backed types as pretty-printed JSON.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::format(path, e.to_string()))?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}
