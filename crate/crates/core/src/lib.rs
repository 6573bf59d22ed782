//! Optimal control of a leader–follower kinetic opinion model.
//!
//! The state is a pair of opinion densities `(g_L, g_F)` on `[-1, 1]`
//! governed by coupled nonlinear, nonlocal Fokker–Planck equations. A leader
//! control `u(w, s)` is optimised with the adjoint method: a positivity- and
//! mass-preserving forward solver ([`forward`]), an upwind backward adjoint
//! solver ([`adjoint`]), cost functionals ([`cost`]) and a gradient sweeping
//! loop ([`sweep`]). The [`kinetic`] module simulates the underlying binary
//! interactions directly for cross-checking.

pub mod adjoint;
pub mod cost;
pub mod error;
pub mod forward;
pub mod kernels;
pub mod kinetic;
pub mod mesh;
pub mod runner;
pub mod sweep;
pub mod tridiag;

pub use adjoint::{adjoint_solve, AdjointPair, AdjointTrajectory};
pub use cost::{build_target_density, eval_cost, CostSpec, TargetDensity};
pub use error::{Error, Result};
pub use forward::{forward_solve, initial_density, DensityPair, StateTrajectory};
pub use kernels::{CompromiseKernel, Model, ModelParams};
pub use kinetic::{mc_run, Ensemble, KineticParams};
pub use mesh::Mesh;
pub use sweep::{sweep, ControlField, SweepOptions, SweepReport};
