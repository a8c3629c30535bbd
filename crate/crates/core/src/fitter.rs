//! Gradient-based recovery of shape and viewpoint from silhouettes.
//!
//! The shape is optimized through a logistic latent grid `V = sigmoid(w)`,
//! which keeps every intermediate occupancy in `[0, 1]` by construction;
//! the reported residual is `V - mean`. All three fitters share one
//! optimizer: gradient descent with per-parameter step scaling by a running
//! root-mean-square of past gradients, plus backtracking step halving on
//! any loss increase — so every reported loss trace is non-increasing.
//! Viewpoint fitting is multi-start because the silhouette loss is
//! multimodal in azimuth; each seed on a regular azimuth x elevation grid
//! is refined independently and the best refined seed wins.

use serde::{Deserialize, Serialize};

use crate::camera::{CameraModel, Viewpoint, ELEVATION_MAX_DEG};
use crate::error::{Error, Result};
use crate::projector::{render_with_gradients, streamed_loss, SilhouetteImage};
use crate::voxel::{GridDims, VoxelGrid};

/// One silhouette, optionally with the viewpoint it was captured from.
/// A known viewpoint is required for shape-only fitting and treated as
/// fixed ground truth during joint fitting.
#[derive(Debug, Clone)]
pub struct Observation {
    pub silhouette: SilhouetteImage,
    pub viewpoint: Option<Viewpoint>,
}

/// Fitting hyperparameters. `Default` gives the documented defaults; JSON
/// deserialization fills missing fields from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Gradient iterations for shape and joint fitting.
    pub max_iterations: usize,
    /// Initial (and maximum) step size; per-parameter scaling and
    /// backtracking adapt it downward as needed.
    pub step_size: f64,
    /// Weight on the L1 pull `|V - mean|` toward the mean shape; 0 disables
    /// the prior, large values reproduce mean-shape behavior.
    pub residual_penalty: f64,
    /// Refinement iterations per viewpoint seed.
    pub pose_stage_iterations: usize,
    /// Multi-start grid: (azimuth seed count, elevation seed count).
    pub pose_restarts: (usize, usize),
    /// Relative per-iteration improvement below which fitting stops early.
    pub convergence_tol: f64,
    /// Recorded for workflow reproducibility; the fitters themselves are
    /// deterministic.
    pub rng_seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 500,
            step_size: 0.1,
            residual_penalty: 0.0,
            pose_stage_iterations: 200,
            pose_restarts: (24, 3),
            convergence_tol: 1e-6,
            rng_seed: 0,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.pose_stage_iterations == 0 {
            return Err(Error::InvalidParameter("iteration counts must be >= 1".into()));
        }
        if self.pose_restarts.0 == 0 || self.pose_restarts.1 == 0 {
            return Err(Error::InvalidParameter("pose restart counts must be >= 1".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.residual_penalty.is_finite() && self.residual_penalty >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "residual_penalty must be >= 0, got {}",
                self.residual_penalty
            )));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "convergence_tol must be >= 0, got {}",
                self.convergence_tol
            )));
        }
        Ok(())
    }
}

/// Result of a shape or joint fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    /// Composed occupancy grid (mean + fitted residual, in `[0, 1]`).
    #[serde(skip)]
    pub final_shape: VoxelGrid,
    /// One viewpoint per observation, in input order.
    pub final_viewpoints: Vec<Viewpoint>,
    /// Total objective after each iteration, starting with the initial
    /// value; non-increasing.
    pub loss_trace: Vec<f64>,
    /// Whether the fit stopped by stalling or reaching `convergence_tol`
    /// rather than exhausting the iteration budget.
    pub converged: bool,
    pub iterations_used: usize,
}

/// Result of a viewpoint fit.
#[derive(Debug, Clone, Serialize)]
pub struct PoseFit {
    pub viewpoint: Viewpoint,
    /// Silhouette loss at the returned viewpoint.
    pub loss: f64,
    /// False when the target was empty or no seed refinement settled
    /// within its iteration budget.
    pub converged: bool,
}

const LOGISTIC_CLAMP: f64 = 1e-3;
const RMS_BETA: f64 = 0.9;
const RMS_EPS: f64 = 1e-8;
const MAX_HALVINGS: u32 = 30;

#[inline]
fn sigmoid(w: f64) -> f64 {
    1.0 / (1.0 + (-w).exp())
}

#[inline]
fn logit(v: f64) -> f64 {
    (v / (1.0 - v)).ln()
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Running root-mean-square of gradients, used to scale each parameter's
/// step individually (rescues parameters stuck in the logistic tails).
struct RmsScale {
    mean_square: Vec<f64>,
}

impl RmsScale {
    fn new(n: usize) -> Self {
        RmsScale { mean_square: vec![0.0; n] }
    }

    /// Updates the running statistics and returns the scaled direction
    /// `g / (rms + eps)`.
    fn direction(&mut self, grad: &[f64]) -> Vec<f64> {
        self.mean_square
            .iter_mut()
            .zip(grad)
            .map(|(ms, g)| {
                *ms = RMS_BETA * *ms + (1.0 - RMS_BETA) * g * g;
                g / (ms.sqrt() + RMS_EPS)
            })
            .collect()
    }
}

/// One monotone descent step: walk along `-direction`, halving the step on
/// any loss increase. Accepts the first non-increasing candidate (growing
/// the step back for the next iteration, capped at `step_cap`) or gives up
/// after `MAX_HALVINGS`, leaving `x` unchanged. Returns the new loss and
/// whether a step was taken.
fn descent_step(
    x: &mut [f64],
    loss: f64,
    direction: &[f64],
    step: &mut f64,
    step_cap: f64,
    eval: &mut dyn FnMut(&[f64]) -> f64,
    project: &dyn Fn(&mut [f64]),
) -> (f64, bool) {
    let mut trial = *step;
    let mut candidate = vec![0.0; x.len()];
    for _ in 0..MAX_HALVINGS {
        for ((c, xi), di) in candidate.iter_mut().zip(x.iter()).zip(direction) {
            *c = xi - trial * di;
        }
        project(&mut candidate);
        let candidate_loss = eval(&candidate);
        if candidate_loss <= loss {
            x.copy_from_slice(&candidate);
            *step = (trial * 2.0).min(step_cap);
            return (candidate_loss, true);
        }
        trial /= 2.0;
    }
    *step = trial;
    (loss, false)
}

fn check_observation_dims(observations: &[Observation], cam: &CameraModel) -> Result<()> {
    for obs in observations {
        if obs.silhouette.dims() != cam.image_dims {
            return Err(Error::ImageDimensionMismatch {
                expected: cam.image_dims,
                got: obs.silhouette.dims(),
            });
        }
    }
    Ok(())
}

fn latent_from_mean(mean: &VoxelGrid) -> Vec<f64> {
    mean.values()
        .iter()
        .map(|v| logit(v.clamp(LOGISTIC_CLAMP, 1.0 - LOGISTIC_CLAMP)))
        .collect()
}

fn shape_from_latent(dims: GridDims, w: &[f64]) -> VoxelGrid {
    let values = w.iter().map(|wi| sigmoid(*wi)).collect();
    VoxelGrid::from_values(dims, values).expect("logistic output stays in [0, 1]")
}

fn l1_pull(grid: &VoxelGrid, mean: &VoxelGrid) -> f64 {
    grid.values()
        .iter()
        .zip(mean.values())
        .map(|(v, m)| (v - m).abs())
        .sum()
}

/// Total objective for a shape candidate: per-view silhouette losses in
/// observation order, then the weighted L1 pull toward the mean.
fn shape_objective(
    w: &[f64],
    views: &[(Viewpoint, &SilhouetteImage)],
    mean: &VoxelGrid,
    cam: &CameraModel,
    penalty: f64,
) -> f64 {
    let grid = shape_from_latent(mean.dims(), w);
    let mut total = 0.0;
    for (view, target) in views {
        total += streamed_loss(&grid, cam, view, target).expect("dims pre-validated");
    }
    total + penalty * l1_pull(&grid, mean)
}

/// Objective gradient with respect to the latent `w`, plus the objective
/// value itself (bitwise equal to [`shape_objective`] at the same point).
fn shape_gradient(
    w: &[f64],
    views: &[(Viewpoint, &SilhouetteImage)],
    mean: &VoxelGrid,
    cam: &CameraModel,
    penalty: f64,
) -> (f64, Vec<f64>) {
    let grid = shape_from_latent(mean.dims(), w);
    let mut grad = vec![0.0; w.len()];
    let mut total = 0.0;
    for (view, target) in views {
        let (loss, grads) =
            render_with_gradients(&grid, cam, view, target).expect("dims pre-validated");
        total += loss;
        for (g, d) in grad.iter_mut().zip(grads.d_loss_d_voxels.values()) {
            *g += d;
        }
    }
    total += penalty * l1_pull(&grid, mean);
    for ((g, v), m) in grad.iter_mut().zip(grid.values()).zip(mean.values()) {
        // L1 subgradient, then the logistic chain rule
        *g = (*g + penalty * sign(v - m)) * v * (1.0 - v);
    }
    (total, grad)
}

/// Recovers a shape from silhouettes with known viewpoints by minimizing
/// the summed silhouette loss plus the optional mean-shape pull, starting
/// from the mean. Deterministic; the loss trace is non-increasing.
pub fn fit_shape(
    observations: &[Observation],
    mean: &VoxelGrid,
    cam: &CameraModel,
    cfg: &FitConfig,
) -> Result<FitReport> {
    cfg.validate()?;
    if observations.is_empty() {
        return Err(Error::EmptyInput("observations"));
    }
    check_observation_dims(observations, cam)?;
    let views: Vec<(Viewpoint, &SilhouetteImage)> = observations
        .iter()
        .map(|obs| {
            obs.viewpoint
                .clone()
                .ok_or(Error::MissingViewpoint)
                .map(|v| (v, &obs.silhouette))
        })
        .collect::<Result<_>>()?;

    let mut w = latent_from_mean(mean);
    let mut rms = RmsScale::new(w.len());
    let mut step = cfg.step_size;
    let mut eval = |cand: &[f64]| shape_objective(cand, &views, mean, cam, cfg.residual_penalty);
    let mut loss = eval(&w);
    let mut trace = vec![loss];
    let mut converged = false;
    let mut iterations_used = 0;

    for _ in 0..cfg.max_iterations {
        iterations_used += 1;
        let (_, grad) = shape_gradient(&w, &views, mean, cam, cfg.residual_penalty);
        let direction = rms.direction(&grad);
        let (new_loss, accepted) = descent_step(
            &mut w,
            loss,
            &direction,
            &mut step,
            cfg.step_size,
            &mut eval,
            &|_| {},
        );
        let improvement = loss - new_loss;
        loss = new_loss;
        trace.push(loss);
        if !accepted || improvement <= cfg.convergence_tol * loss.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(FitReport {
        final_shape: shape_from_latent(mean.dims(), &w),
        final_viewpoints: views.into_iter().map(|(v, _)| v).collect(),
        loss_trace: trace,
        converged,
        iterations_used,
    })
}

fn viewpoint_from_params(x: &[f64]) -> Viewpoint {
    Viewpoint::new(x[0].to_degrees(), x[1].to_degrees())
        .expect("elevation projected into range before construction")
}

fn clamp_elevation(x: &mut [f64]) {
    x[1] = x[1].clamp(0.0, ELEVATION_MAX_DEG.to_radians());
}

/// Refines one `(azimuth, elevation)` seed, in radians. Returns the refined
/// parameters, the loss there, and whether refinement settled before the
/// iteration budget ran out.
fn refine_pose_seed(
    shape: &VoxelGrid,
    cam: &CameraModel,
    target: &SilhouetteImage,
    seed: (f64, f64),
    cfg: &FitConfig,
) -> ((f64, f64), f64, bool) {
    let mut x = vec![seed.0, seed.1];
    clamp_elevation(&mut x);
    let mut rms = RmsScale::new(2);
    let mut step = cfg.step_size;
    let mut eval = |cand: &[f64]| {
        streamed_loss(shape, cam, &viewpoint_from_params(cand), target)
            .expect("dims pre-validated")
    };
    let mut loss = eval(&x);
    let mut settled = false;

    for _ in 0..cfg.pose_stage_iterations {
        let (_, grads) =
            render_with_gradients(shape, cam, &viewpoint_from_params(&x), target)
                .expect("dims pre-validated");
        let direction = rms.direction(&[grads.d_loss_d_azimuth, grads.d_loss_d_elevation]);
        let (new_loss, accepted) = descent_step(
            &mut x,
            loss,
            &direction,
            &mut step,
            cfg.step_size,
            &mut eval,
            &clamp_elevation,
        );
        let improvement = loss - new_loss;
        loss = new_loss;
        if !accepted || improvement <= cfg.convergence_tol * loss.abs().max(1.0) {
            settled = true;
            break;
        }
    }
    ((x[0], x[1]), loss, settled)
}

/// The multi-start seed grid, in radians: azimuths regularly spaced over
/// the full circle, elevations regularly spaced over the valid range (its
/// midpoint when only one is requested).
fn pose_seeds(counts: (usize, usize)) -> Vec<(f64, f64)> {
    let (az_count, el_count) = counts;
    let mut seeds = Vec::with_capacity(az_count * el_count);
    for i in 0..az_count {
        let az = 360.0 * i as f64 / az_count as f64;
        for j in 0..el_count {
            let el = if el_count == 1 {
                ELEVATION_MAX_DEG / 2.0
            } else {
                ELEVATION_MAX_DEG * j as f64 / (el_count - 1) as f64
            };
            seeds.push((az.to_radians(), el.to_radians()));
        }
    }
    seeds
}

/// Recovers the viewpoint of one silhouette of a known shape by refining
/// every seed on the restart grid and returning the best refined seed. Any
/// viewpoint attached to the observation is ignored. Deterministic; ties
/// go to the earlier seed.
pub fn fit_pose(
    observation: &Observation,
    shape: &VoxelGrid,
    cam: &CameraModel,
    cfg: &FitConfig,
) -> Result<PoseFit> {
    cfg.validate()?;
    if observation.silhouette.dims() != cam.image_dims {
        return Err(Error::ImageDimensionMismatch {
            expected: cam.image_dims,
            got: observation.silhouette.dims(),
        });
    }
    let target = &observation.silhouette;
    let mut best: Option<((f64, f64), f64, bool)> = None;
    for seed in pose_seeds(cfg.pose_restarts) {
        let (params, loss, settled) = refine_pose_seed(shape, cam, target, seed, cfg);
        if best.as_ref().map_or(true, |(_, best_loss, _)| loss < *best_loss) {
            best = Some((params, loss, settled));
        }
    }
    let ((az, el), loss, settled) = best.expect("restart grid is non-empty");
    let has_foreground = target.values().iter().any(|v| *v > 0.0);
    Ok(PoseFit {
        viewpoint: viewpoint_from_params(&[az, el]),
        loss,
        converged: has_foreground && settled,
    })
}

/// Recovers shape and per-observation viewpoints together. Stage 1 fits
/// each unknown viewpoint against the frozen mean shape; stage 2 alternates
/// one monotone shape step with one monotone pose step per unknown
/// viewpoint, so the total objective never increases. Observations with
/// known viewpoints keep them fixed throughout.
pub fn fit_joint(
    observations: &[Observation],
    mean: &VoxelGrid,
    cam: &CameraModel,
    cfg: &FitConfig,
) -> Result<FitReport> {
    cfg.validate()?;
    if observations.is_empty() {
        return Err(Error::EmptyInput("observations"));
    }
    check_observation_dims(observations, cam)?;

    // stage 1: per-observation pose against the frozen mean
    let mut pose_params: Vec<(f64, f64)> = Vec::with_capacity(observations.len());
    let mut fixed: Vec<bool> = Vec::with_capacity(observations.len());
    for obs in observations {
        match &obs.viewpoint {
            Some(v) => {
                pose_params.push((v.azimuth_rad(), v.elevation_rad()));
                fixed.push(true);
            }
            None => {
                let fit = fit_pose(obs, mean, cam, cfg)?;
                pose_params.push((fit.viewpoint.azimuth_rad(), fit.viewpoint.elevation_rad()));
                fixed.push(false);
            }
        }
    }

    // stage 2: alternate shape and pose refinement
    let mut w = latent_from_mean(mean);
    let mut shape_rms = RmsScale::new(w.len());
    let mut shape_step = cfg.step_size;
    let mut pose_state: Vec<(RmsScale, f64)> = observations
        .iter()
        .map(|_| (RmsScale::new(2), cfg.step_size))
        .collect();

    let current_views = |params: &[(f64, f64)]| -> Vec<(Viewpoint, &SilhouetteImage)> {
        params
            .iter()
            .zip(observations)
            .map(|(p, obs)| (viewpoint_from_params(&[p.0, p.1]), &obs.silhouette))
            .collect()
    };

    let mut total =
        shape_objective(&w, &current_views(&pose_params), mean, cam, cfg.residual_penalty);
    let mut trace = vec![total];
    let mut converged = false;
    let mut iterations_used = 0;

    for _ in 0..cfg.max_iterations {
        iterations_used += 1;
        let before = total;

        // shape step at fixed poses
        let views = current_views(&pose_params);
        let (_, grad) = shape_gradient(&w, &views, mean, cam, cfg.residual_penalty);
        let direction = shape_rms.direction(&grad);
        let mut eval =
            |cand: &[f64]| shape_objective(cand, &views, mean, cam, cfg.residual_penalty);
        descent_step(
            &mut w,
            total,
            &direction,
            &mut shape_step,
            cfg.step_size,
            &mut eval,
            &|_| {},
        );

        // one pose step per unknown viewpoint; each changes only its own
        // view's loss term, so accepting per-view improvements keeps the
        // total monotone
        let grid = shape_from_latent(mean.dims(), &w);
        for (i, obs) in observations.iter().enumerate() {
            if fixed[i] {
                continue;
            }
            let mut x = vec![pose_params[i].0, pose_params[i].1];
            let target = &obs.silhouette;
            let mut eval = |cand: &[f64]| {
                streamed_loss(&grid, cam, &viewpoint_from_params(cand), target)
                    .expect("dims pre-validated")
            };
            let view_loss = eval(&x);
            let (_, grads) = render_with_gradients(&grid, cam, &viewpoint_from_params(&x), target)
                .expect("dims pre-validated");
            let (rms, step) = &mut pose_state[i];
            let direction = rms.direction(&[grads.d_loss_d_azimuth, grads.d_loss_d_elevation]);
            let (_, accepted) = descent_step(
                &mut x,
                view_loss,
                &direction,
                step,
                cfg.step_size,
                &mut eval,
                &clamp_elevation,
            );
            if accepted {
                pose_params[i] = (x[0], x[1]);
            }
        }

        // recompute the total from scratch: every per-view term is <= its
        // previous value and floating-point rounding is monotone, so the
        // fresh sum cannot exceed the pre-sweep total
        total = shape_objective(&w, &current_views(&pose_params), mean, cam, cfg.residual_penalty);
        trace.push(total);
        if before - total <= cfg.convergence_tol * total.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(FitReport {
        final_shape: shape_from_latent(mean.dims(), &w),
        final_viewpoints: pose_params
            .iter()
            .map(|p| viewpoint_from_params(&[p.0, p.1]))
            .collect(),
        loss_trace: trace,
        converged,
        iterations_used,
    })
}
