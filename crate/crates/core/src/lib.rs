//! # armtraj
//!
//! Straight-line and polygonal motion synthesis for 6-DOF serial arms under
//! two velocity laws: bell-shaped lognormal strokes (human-like) and
//! trapezoidal ramps (robot-like).
//!
//! The pipeline is
//!
//! 1. [`kinematics`]: Denavit–Hartenberg forward kinematics and pose algebra.
//! 2. [`profiles`]: lognormal / trapezoidal progress laws and stroke superposition.
//! 3. [`trajectory`]: figure planning, Cartesian sampling and joint conversion.
//! 4. [`ik`]: position-only inverse kinematics with a frozen wrist, solved by
//!    a Nelder–Mead simplex with warm starts along a path.
//! 5. [`verification`]: a simulated position sensor and the SNR fidelity score.
//! 6. [`io`] and [`cli`]: config files, CSV trajectories, plots and run manifests.
//!
//! Batch work (sampling, independent IK solves, Monte-Carlo sweeps) goes
//! through [`exec::Execution`], which uses rayon when the `parallel` feature
//! is enabled and falls back to plain iterators otherwise.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod exec;
pub mod ik;
pub mod io;
pub mod kinematics;
pub mod profiles;
pub mod trajectory;
pub mod verification;

pub use exec::Execution;
pub use kinematics::{DhRow, HomogeneousTransform, JointConfig, RobotModel, RotationMatrix};

/// Cartesian point or vector, millimetres.
pub type Vec3 = nalgebra::Vector3<f64>;
