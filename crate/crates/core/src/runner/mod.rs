//! Experiment configuration, presets and output files.

pub mod config;
pub mod output;
pub mod presets;

use log::info;

use crate::error::{Error, Result};
use crate::forward::{forward_solve, initial_density, DensityPair, StateTrajectory};
use crate::kernels::Model;
use crate::kinetic::{mc_run, Ensemble, KineticParams, KineticRun};
use crate::mesh::Mesh;
use crate::sweep::{sweep, ControlField, SweepReport};

pub use config::{load_config, parse_config, CostKind, ExperimentConfig, Source};
pub use output::{read_profile_csv, render_outputs, snapshot_indices, write_outputs};
pub use presets::{preset_config, PRESETS};

#[derive(Debug, Clone)]
pub enum Outcome {
    Forward { trajectory: StateTrajectory },
    Sweep { report: SweepReport },
    Kinetic { run: KineticRun },
}

/// Both species start from the same plateau profile.
pub fn initial_state(cfg: &ExperimentConfig, mesh: &Mesh) -> Result<DensityPair> {
    let g = initial_density(cfg.radius, cfg.centre, cfg.steepness, mesh)?;
    Ok(DensityPair::new(g.clone(), g))
}

pub fn run_forward(cfg: &ExperimentConfig) -> Result<(Mesh, Outcome)> {
    let mesh = cfg.mesh()?;
    let model = Model::new(cfg.model.clone(), mesh.clone())?;
    let g0 = initial_state(cfg, &mesh)?;
    let trajectory = forward_solve(&model, &g0, &ControlField::zeros(&mesh))?;
    Ok((mesh, Outcome::Forward { trajectory }))
}

pub fn run_optimize(cfg: &ExperimentConfig) -> Result<(Mesh, Outcome)> {
    let mesh = cfg.mesh()?;
    let cost = cfg.cost_spec(&mesh).ok_or_else(|| Error::ConfigInvalid {
        field: "cost.kind".into(),
        reason: "optimisation needs a cost functional".into(),
    })?;
    let model = Model::new(cfg.model.clone(), mesh.clone())?;
    let g0 = initial_state(cfg, &mesh)?;
    let report = sweep(&model, &g0, &cost, &cfg.sweep)?;
    info!(
        "{}: J {} -> {} in {} sweeps",
        cost.name(),
        report.cost_history[0],
        report.cost_history.last().copied().unwrap_or(f64::NAN),
        report.iterations
    );
    Ok((mesh, Outcome::Sweep { report }))
}

pub fn run_kinetic(cfg: &ExperimentConfig) -> Result<(Mesh, Outcome)> {
    let mesh = cfg.mesh()?;
    let params = KineticParams::from_model(&cfg.model, cfg.gamma_l)?;
    let ensemble = Ensemble::from_profile(cfg.agents, cfg.agents, cfg.radius, cfg.centre, cfg.steepness, cfg.seed)?;
    let times: Vec<f64> = snapshot_indices(&mesh).iter().map(|&t| mesh.time(t)).collect();
    let run = mc_run(&params, &ensemble, mesh.time(mesh.steps()), &mesh, &times, None)?;
    Ok((mesh, Outcome::Kinetic { run }))
}

/// Uncontrolled forward run without a cost functional, sweep otherwise.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Mesh, Outcome)> {
    match cfg.cost {
        None => run_forward(cfg),
        Some(_) => run_optimize(cfg),
    }
}
