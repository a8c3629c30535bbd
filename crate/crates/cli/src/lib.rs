//! Command-line frontend for the silhouette rendering and fitting toolkit.
//!
//! Subcommands cover the full workflow: `gen` voxelizes synthetic
//! primitives, `mean` averages grids, `render` projects a grid to a PGM
//! silhouette, `fit-shape` / `fit-pose` / `fit-joint` run the optimizers,
//! `eval-iou` / `eval-pose` / `eval-hausdorff` print metric reports as JSON
//! on standard output, and `mesh` extracts an OBJ isosurface.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on I/O or file-format
//! errors. `--seed` pins every source of randomness, so equal invocations
//! produce equal outputs.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use silhvox_core::{
    binarize, compute_mean_shape, fit_joint, fit_pose, fit_shape, marching_cubes, read_json,
    read_silhouette, read_voxels, render_silhouette, summarize_pose_errors, symmetric_hausdorff,
    voxel_iou, voxelize_primitive, voxels_to_pointcloud, write_json, write_mesh_obj,
    write_silhouette, write_voxels, CameraModel, DistanceUnit, FitConfig, HausdorffMode,
    Observation, SyntheticShapeSpec, Viewpoint,
};

#[derive(Parser)]
#[command(name = "silhvox", version, about = "Voxel silhouette rendering and fitting toolkit")]
struct Cli {
    /// Seed for every random choice (fitter restarts, density sampling)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize a synthetic primitive described by a JSON spec
    Gen(GenArgs),
    /// Average binarized voxel grids into a mean shape
    Mean(MeanArgs),
    /// Render a voxel grid to a PGM silhouette
    Render(RenderArgs),
    /// Fit a shape to silhouettes with known viewpoints
    FitShape(FitShapeArgs),
    /// Recover the viewpoint of one silhouette of a known shape
    FitPose(FitPoseArgs),
    /// Fit shape and unknown viewpoints together
    FitJoint(FitJointArgs),
    /// Print the IoU of two binarized grids as JSON
    EvalIou(EvalIouArgs),
    /// Print pose error statistics for predicted/truth viewpoint pairs
    EvalPose(EvalPoseArgs),
    /// Print the symmetric Hausdorff distance between two grids as JSON
    EvalHausdorff(EvalHausdorffArgs),
    /// Extract a marching-cubes isosurface as an OBJ mesh
    Mesh(MeshArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Shape spec JSON ({"primitive": {"kind": ...}, "resolution": ...})
    #[arg(long)]
    spec: PathBuf,
    /// Output .vox32 path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeanArgs {
    /// Input .vox32 grids (binarized at --threshold before averaging)
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Output .vox32 path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Shape .vox32
    #[arg(long)]
    shape: PathBuf,
    /// Viewpoint JSON ({"azimuth_deg": ..., "elevation_deg": ...})
    #[arg(long)]
    viewpoint: PathBuf,
    /// Camera JSON; omitted fields take the default model's values
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Output .pgm path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitShapeArgs {
    /// Observation manifest JSON: [{"silhouette": path, "viewpoint": {...}}]
    #[arg(long)]
    observations: PathBuf,
    /// Mean shape .vox32
    #[arg(long)]
    mean: PathBuf,
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Fit configuration JSON; omitted fields take defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output .vox32 for the fitted shape
    #[arg(long)]
    out_shape: PathBuf,
    /// Optional JSON report (loss trace, convergence)
    #[arg(long)]
    out_report: Option<PathBuf>,
}

#[derive(Args)]
struct FitPoseArgs {
    /// Observed silhouette .pgm
    #[arg(long)]
    silhouette: PathBuf,
    /// Known shape .vox32
    #[arg(long)]
    shape: PathBuf,
    #[arg(long)]
    camera: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optional JSON output for the recovered viewpoint alone
    #[arg(long)]
    out_viewpoint: Option<PathBuf>,
    /// Optional JSON output for the full result (viewpoint, loss, converged)
    #[arg(long)]
    out_report: Option<PathBuf>,
}

#[derive(Args)]
struct FitJointArgs {
    /// Observation manifest JSON; entries without "viewpoint" are recovered
    #[arg(long)]
    observations: PathBuf,
    /// Mean shape .vox32
    #[arg(long)]
    mean: PathBuf,
    #[arg(long)]
    camera: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_shape: PathBuf,
    /// Optional JSON array of the final per-observation viewpoints
    #[arg(long)]
    out_viewpoints: Option<PathBuf>,
    #[arg(long)]
    out_report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalIouArgs {
    #[arg(long)]
    predicted: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Args)]
struct EvalPoseArgs {
    /// JSON array of {"predicted": viewpoint, "truth": viewpoint}
    #[arg(long)]
    pairs: PathBuf,
}

#[derive(Args)]
struct EvalHausdorffArgs {
    #[arg(long)]
    predicted: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Units per cube side applied to voxel centers
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, value_enum, default_value_t = UnitArg::ObjectUnits)]
    unit: UnitArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Averaged)]
    mode: ModeArg,
    /// Also report each cloud's seeded nearest-neighbor density
    #[arg(long)]
    density: bool,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long)]
    shape: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    isolevel: f64,
    /// Output .obj path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Averaged,
    Classic,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    ObjectUnits,
    Millimeters,
}

impl From<ModeArg> for HausdorffMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Averaged => HausdorffMode::Averaged,
            ModeArg::Classic => HausdorffMode::Classic,
        }
    }
}

impl From<UnitArg> for DistanceUnit {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::ObjectUnits => DistanceUnit::ObjectUnits,
            UnitArg::Millimeters => DistanceUnit::Millimeters,
        }
    }
}

/// One line of an observation manifest; the silhouette path is resolved
/// relative to the manifest file when not absolute.
#[derive(Deserialize)]
struct ObservationEntry {
    silhouette: PathBuf,
    #[serde(default)]
    viewpoint: Option<Viewpoint>,
}

#[derive(Serialize)]
struct PoseReport {
    viewpoint: Viewpoint,
    loss: f64,
    converged: bool,
}

#[derive(Deserialize)]
struct PosePair {
    predicted: Viewpoint,
    truth: Viewpoint,
}

#[derive(Serialize)]
struct IouReport {
    iou: f64,
    threshold: f64,
}

#[derive(Serialize)]
struct HausdorffReport {
    hausdorff: f64,
    mode: HausdorffMode,
    unit: DistanceUnit,
    #[serde(skip_serializing_if = "Option::is_none")]
    predicted_density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth_density: Option<f64>,
}

/// Runs the CLI on the given argument vector and returns the process exit
/// code (0 success, 1 usage, 2 I/O or format error).
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn run(cli: Cli) -> silhvox_core::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Gen(args) => {
            let spec: SyntheticShapeSpec = read_json(&args.spec)?;
            let grid = voxelize_primitive(&spec)?;
            write_voxels(&grid.to_voxel_grid(), &args.out)
        }
        Command::Mean(args) => {
            let grids = args
                .inputs
                .iter()
                .map(|path| binarize(&read_voxels(path)?, args.threshold))
                .collect::<silhvox_core::Result<Vec<_>>>()?;
            write_voxels(&compute_mean_shape(&grids)?, &args.out)
        }
        Command::Render(args) => {
            let grid = read_voxels(&args.shape)?;
            let view: Viewpoint = read_json(&args.viewpoint)?;
            let cam = load_camera(args.camera.as_deref())?;
            write_silhouette(&render_silhouette(&grid, &cam, &view), &args.out)
        }
        Command::FitShape(args) => {
            let observations = load_observations(&args.observations)?;
            let mean = read_voxels(&args.mean)?;
            let cam = load_camera(args.camera.as_deref())?;
            let cfg = load_config(args.config.as_deref(), seed)?;
            let report = fit_shape(&observations, &mean, &cam, &cfg)?;
            write_voxels(&report.final_shape, &args.out_shape)?;
            if let Some(path) = &args.out_report {
                write_json(&report, path)?;
            }
            Ok(())
        }
        Command::FitPose(args) => {
            let observation = Observation {
                silhouette: read_silhouette(&args.silhouette)?,
                viewpoint: None,
            };
            let shape = read_voxels(&args.shape)?;
            let cam = load_camera(args.camera.as_deref())?;
            let cfg = load_config(args.config.as_deref(), seed)?;
            let fit = fit_pose(&observation, &shape, &cam, &cfg)?;
            let report = PoseReport {
                viewpoint: fit.viewpoint.clone(),
                loss: fit.loss,
                converged: fit.converged,
            };
            if let Some(path) = &args.out_viewpoint {
                write_json(&fit.viewpoint, path)?;
            }
            if let Some(path) = &args.out_report {
                write_json(&report, path)?;
            }
            print_json(&report)
        }
        Command::FitJoint(args) => {
            let observations = load_observations(&args.observations)?;
            let mean = read_voxels(&args.mean)?;
            let cam = load_camera(args.camera.as_deref())?;
            let cfg = load_config(args.config.as_deref(), seed)?;
            let report = fit_joint(&observations, &mean, &cam, &cfg)?;
            write_voxels(&report.final_shape, &args.out_shape)?;
            if let Some(path) = &args.out_viewpoints {
                write_json(&report.final_viewpoints, path)?;
            }
            if let Some(path) = &args.out_report {
                write_json(&report, path)?;
            }
            Ok(())
        }
        Command::EvalIou(args) => {
            let predicted = binarize(&read_voxels(&args.predicted)?, args.threshold)?;
            let truth = binarize(&read_voxels(&args.truth)?, args.threshold)?;
            print_json(&IouReport {
                iou: voxel_iou(&predicted, &truth)?,
                threshold: args.threshold,
            })
        }
        Command::EvalPose(args) => {
            let pairs: Vec<PosePair> = read_json(&args.pairs)?;
            let pairs: Vec<(Viewpoint, Viewpoint)> =
                pairs.into_iter().map(|p| (p.predicted, p.truth)).collect();
            print_json(&summarize_pose_errors(&pairs)?)
        }
        Command::EvalHausdorff(args) => {
            let unit: DistanceUnit = args.unit.into();
            let mode: HausdorffMode = args.mode.into();
            let to_cloud = |path: &Path| -> silhvox_core::Result<_> {
                let grid = binarize(&read_voxels(path)?, args.threshold)?;
                voxels_to_pointcloud(&grid, args.scale, unit)
            };
            let predicted = to_cloud(&args.predicted)?;
            let truth = to_cloud(&args.truth)?;
            let (predicted_density, truth_density) = if args.density {
                let density_seed = seed.unwrap_or(0);
                (
                    Some(silhvox_core::cloud_density(&predicted, density_seed)?),
                    Some(silhvox_core::cloud_density(&truth, density_seed)?),
                )
            } else {
                (None, None)
            };
            print_json(&HausdorffReport {
                hausdorff: symmetric_hausdorff(&predicted, &truth, mode)?,
                mode,
                unit,
                predicted_density,
                truth_density,
            })
        }
        Command::Mesh(args) => {
            let grid = read_voxels(&args.shape)?;
            write_mesh_obj(&marching_cubes(&grid, args.isolevel)?, &args.out)
        }
    }
}

fn load_camera(path: Option<&Path>) -> silhvox_core::Result<CameraModel> {
    match path {
        Some(p) => read_json(p),
        None => Ok(CameraModel::default_model()),
    }
}

/// Loads the fit configuration, with `--seed` overriding the file's seed so
/// one flag pins all randomness.
fn load_config(path: Option<&Path>, seed: Option<u64>) -> silhvox_core::Result<FitConfig> {
    let mut cfg: FitConfig = match path {
        Some(p) => read_json(p)?,
        None => FitConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn load_observations(manifest: &Path) -> silhvox_core::Result<Vec<Observation>> {
    let entries: Vec<ObservationEntry> = read_json(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new(""));
    entries
        .into_iter()
        .map(|entry| {
            let path = if entry.silhouette.is_absolute() {
                entry.silhouette
            } else {
                base.join(&entry.silhouette)
            };
            Ok(Observation {
                silhouette: read_silhouette(&path)?,
                viewpoint: entry.viewpoint,
            })
        })
        .collect()
}

fn print_json<T: Serialize>(value: &T) -> silhvox_core::Result<()> {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report types serialize infallibly")
    );
    Ok(())
}
