//! Position-only inverse kinematics with the wrist frozen.
//!
//! With q4…q6 held constant the arm behaves as a 3-DOF positioner. For a
//! target `p` the solver minimizes
//!
//! ```text
//! e(q13) = ‖p − FK([q13, q46]).position‖²
//! ```
//!
//! with a Nelder–Mead simplex. Along a path each sample is seeded with the
//! previous solution, which keeps the arm on the branch (elbow up/down) picked
//! by the first seed.

pub mod simplex;

use thiserror::Error;

use crate::exec::Execution;
use crate::kinematics::{tool_position, JointConfig, RobotModel};
use crate::trajectory::{JointSample, JointTrajectory, TimedPath};
use crate::Vec3;

pub use simplex::{minimize_simplex, minimize_simplex_from, SimplexOptions, SimplexResult, SimplexStatus};

/// A converged residual above this (mm²) means the target is out of reach.
pub const REACHABILITY_THRESHOLD: f64 = 1.0;
/// Penalty weight (mm² per rad²) for leaving the joint limits.
pub const LIMIT_PENALTY: f64 = 1e8;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_EVALS: usize = 2000;
/// Largest ‖Δq13‖ (rad) between consecutive path samples before a branch
/// jump is flagged.
pub const DEFAULT_MAX_STEP: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IkError {
    #[error("invalid IK request: {0}")]
    InvalidRequest(String),
    #[error("Unreachable: residual {residual:.6e} mm^2 exceeds the reachability threshold")]
    Unreachable { residual: f64 },
    #[error("BudgetExhausted: {evals} evaluations used, residual {residual:.6e} mm^2")]
    BudgetExhausted { residual: f64, evals: usize },
    #[error("NotConverged: simplex stalled at residual {residual:.6e} mm^2")]
    NotConverged { residual: f64 },
    #[error("sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<IkError>,
    },
    #[error("path has no samples")]
    EmptyPath,
}

impl IkError {
    /// Innermost error, skipping sample wrappers.
    pub fn root(&self) -> &IkError {
        match self {
            IkError::AtSample { source, .. } => source.root(),
            other => other,
        }
    }

    /// Index of the first failing path sample, if any.
    pub fn sample_index(&self) -> Option<usize> {
        match self {
            IkError::AtSample { index, .. } => Some(*index),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.root() {
            IkError::InvalidRequest(_) => "InvalidRequest",
            IkError::Unreachable { .. } => "Unreachable",
            IkError::BudgetExhausted { .. } => "BudgetExhausted",
            IkError::NotConverged { .. } => "NotConverged",
            IkError::EmptyPath => "EmptyPath",
            IkError::AtSample { .. } => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkRequest {
    pub target: Vec3,
    /// Frozen wrist angles (rad).
    pub q46: [f64; 3],
    /// Start point for q1…q3 (rad).
    pub seed: [f64; 3],
    /// Acceptable squared position error (mm²).
    pub tolerance: f64,
    pub max_evals: usize,
}

impl IkRequest {
    pub fn new(target: Vec3, q46: [f64; 3], seed: [f64; 3]) -> Self {
        IkRequest { target, q46, seed, tolerance: DEFAULT_TOLERANCE, max_evals: DEFAULT_MAX_EVALS }
    }

    fn validate(&self) -> Result<(), IkError> {
        if !(self.tolerance > 0.0) {
            return Err(IkError::InvalidRequest(format!("tolerance {} must be > 0", self.tolerance)));
        }
        if self.max_evals < 1 {
            return Err(IkError::InvalidRequest("max_evals must be >= 1".into()));
        }
        let all = self.target.iter().chain(self.q46.iter()).chain(self.seed.iter());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(IkError::InvalidRequest("non-finite target, wrist or seed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub q13: [f64; 3],
    /// Squared position error at `q13` (mm²), without limit penalty.
    pub residual: f64,
    pub evals: usize,
    /// `residual <= tolerance` and within joint limits.
    pub converged: bool,
}

impl IkSolution {
    pub fn joint_config(&self, q46: [f64; 3]) -> JointConfig {
        JointConfig::from_parts(self.q13, q46)
    }
}

/// Squared distance between `target` and the tool point at `[q13, q46]`.
pub fn position_error(q13: [f64; 3], q46: [f64; 3], target: &Vec3, model: &RobotModel) -> f64 {
    let p = tool_position(model, &JointConfig::from_parts(q13, q46));
    (target - p).norm_squared()
}

fn penalized_error(q13: [f64; 3], q46: [f64; 3], target: &Vec3, model: &RobotModel) -> f64 {
    let q = JointConfig::from_parts(q13, q46);
    let p = tool_position(model, &q);
    (target - p).norm_squared() + LIMIT_PENALTY * model.limit_violation(&q)
}

pub fn solve_position_ik(model: &RobotModel, req: &IkRequest) -> Result<IkSolution, IkError> {
    solve_position_ik_with(model, req, &SimplexOptions::default())
}

/// Like [`solve_position_ik`] with explicit simplex settings. `max_evals` and
/// `f_target` are taken from the request.
pub fn solve_position_ik_with(
    model: &RobotModel,
    req: &IkRequest,
    simplex: &SimplexOptions,
) -> Result<IkSolution, IkError> {
    solve_from(model, req, simplex, None)
}

fn solve_from(
    model: &RobotModel,
    req: &IkRequest,
    simplex: &SimplexOptions,
    offsets: Option<[[f64; 3]; 3]>,
) -> Result<IkSolution, IkError> {
    req.validate()?;
    // quick rejection: no configuration can place the tool this far out
    let gap = req.target.norm() - model.reach();
    if gap > REACHABILITY_THRESHOLD.sqrt() {
        return Err(IkError::Unreachable { residual: gap * gap });
    }
    let opts = SimplexOptions { max_evals: req.max_evals, f_target: Some(req.tolerance), ..*simplex };
    let f = |q13: &[f64; 3]| penalized_error(*q13, req.q46, &req.target, model);
    let result = match offsets {
        Some(off) => minimize_simplex_from(f, req.seed, &off, &opts),
        None => minimize_simplex(f, req.seed, &opts),
    };
    let q13 = result.argmin;
    let residual = position_error(q13, req.q46, &req.target, model);
    let within = model.within_limits(&JointConfig::from_parts(q13, req.q46));
    let converged = residual <= req.tolerance && within;
    if converged {
        return Ok(IkSolution { q13, residual, evals: result.evals, converged });
    }
    if residual > REACHABILITY_THRESHOLD {
        return Err(IkError::Unreachable { residual });
    }
    if result.status == SimplexStatus::BudgetExhausted {
        return Err(IkError::BudgetExhausted { residual, evals: result.evals });
    }
    Ok(IkSolution { q13, residual, evals: result.evals, converged: false })
}

/// Independent solves, evaluated under `exec`.
pub fn solve_batch(model: &RobotModel, requests: &[IkRequest], exec: Execution) -> Vec<Result<IkSolution, IkError>> {
    exec.map(requests, |req| solve_position_ik(model, req))
}

const WARM_STEP_MIN: f64 = 1e-9;
const WARM_SPREAD: f64 = 0.01;

/// Start simplex for a warm sample. The seed vertex stays at the previous
/// solution; the other three sit around the predicted point `seed + dq`,
/// spaced by `WARM_SPREAD` of the predicted step.
fn warm_offsets(dq: [f64; 3], max_step: f64) -> Option<[[f64; 3]; 3]> {
    let norm = dq.iter().map(|d| d * d).sum::<f64>().sqrt();
    if !(norm >= WARM_STEP_MIN && norm <= max_step) {
        return None;
    }
    let lead = (0..3).max_by(|&a, &b| dq[a].abs().total_cmp(&dq[b].abs()))?;
    let eps = (WARM_SPREAD * norm).max(WARM_STEP_MIN);
    let mut offsets = [dq; 3];
    for (slot, axis) in (0..3).filter(|&i| i != lead).enumerate() {
        offsets[slot + 1][axis] += eps;
    }
    Some(offsets)
}

fn axis_offsets(step: f64, max_step: f64) -> Option<[[f64; 3]; 3]> {
    if !(step >= WARM_STEP_MIN) {
        return None;
    }
    let h = step.min(max_step);
    Some([[h, 0.0, 0.0], [0.0, h, 0.0], [0.0, 0.0, h]])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathIkOptions {
    pub tolerance: f64,
    pub max_evals: usize,
    /// ‖Δq13‖ (rad) above which consecutive samples are flagged.
    pub max_step: f64,
    pub simplex: SimplexOptions,
    /// Build the start simplex of warm samples around the joint step predicted
    /// from the previous one. The seed vertex is still the previous solution.
    pub predict_warm_start: bool,
}

impl Default for PathIkOptions {
    fn default() -> Self {
        PathIkOptions {
            tolerance: DEFAULT_TOLERANCE,
            max_evals: DEFAULT_MAX_EVALS,
            max_step: DEFAULT_MAX_STEP,
            simplex: SimplexOptions::default(),
            predict_warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathIkReport {
    pub trajectory: JointTrajectory,
    pub evals: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Samples whose joint step from the previous one exceeded `max_step`.
    pub discontinuities: Vec<usize>,
}

/// Solves every sample of `path`, seeding sample `k` with the solution of
/// sample `k − 1` (and sample 0 with `seed0`). Fails on the first sample that
/// does not converge; no partial trajectory is returned.
pub fn solve_path_ik(
    model: &RobotModel,
    path: &TimedPath,
    q46: [f64; 3],
    seed0: [f64; 3],
    opts: &PathIkOptions,
) -> Result<PathIkReport, IkError> {
    if path.is_empty() {
        return Err(IkError::EmptyPath);
    }
    let n = path.len();
    let mut samples = Vec::with_capacity(n);
    let mut evals = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut discontinuities = Vec::new();
    let mut seed = seed0;
    // joint change per mm of tool travel over the last step
    let mut rate: Option<[f64; 3]> = None;
    for (index, s) in path.samples().iter().enumerate() {
        let req = IkRequest { target: s.p, q46, seed, tolerance: opts.tolerance, max_evals: opts.max_evals };
        let at = |e: IkError| IkError::AtSample { index, source: Box::new(e) };
        let now = if index > 0 { (s.p - path.samples()[index - 1].p).norm() } else { 0.0 };
        let offsets = if opts.predict_warm_start && index > 0 {
            rate.map(|r| r.map(|x| x * now))
                .and_then(|dq| warm_offsets(dq, opts.simplex.initial_step))
                .or_else(|| axis_offsets(now / model.reach(), opts.simplex.initial_step))
        } else {
            None
        };
        let sol = solve_from(model, &req, &opts.simplex, offsets).map_err(at)?;
        if !sol.converged {
            return Err(at(IkError::NotConverged { residual: sol.residual }));
        }
        if index > 0 {
            let dq = [sol.q13[0] - seed[0], sol.q13[1] - seed[1], sol.q13[2] - seed[2]];
            let step = dq.iter().map(|d| d * d).sum::<f64>().sqrt();
            rate = (now > 0.0).then(|| dq.map(|d| d / now));
            if step > opts.max_step {
                log::warn!("joint step of {step:.3} rad at sample {index}: possible branch jump");
                discontinuities.push(index);
            }
        }
        seed = sol.q13;
        samples.push(JointSample { t: s.t, q: JointConfig::from_parts(sol.q13, q46) });
        evals.push(sol.evals);
        residuals.push(sol.residual);
    }
    Ok(PathIkReport {
        trajectory: JointTrajectory { model: model.name.clone(), samples },
        evals,
        residuals,
        discontinuities,
    })
}

/// Independent paths solved under `exec`; each path stays sequential.
pub fn solve_paths(
    model: &RobotModel,
    paths: &[TimedPath],
    q46: [f64; 3],
    seed0: [f64; 3],
    opts: &PathIkOptions,
    exec: Execution,
) -> Vec<Result<PathIkReport, IkError>> {
    exec.map(paths, |p| solve_path_ik(model, p, q46, seed0, opts))
}
