//! Benchmark fixtures shared by the criterion benches.

use leadfollow::runner::{initial_state, preset_config};
use leadfollow::{CostSpec, DensityPair, Model, Result};

/// Model, initial state and cost of a preset.
pub fn preset_problem(name: &str) -> Result<(Model, DensityPair, Option<CostSpec>)> {
    let cfg = preset_config(name)?;
    let mesh = cfg.mesh()?;
    let model = Model::new(cfg.model.clone(), mesh.clone())?;
    let g0 = initial_state(&cfg, &mesh)?;
    let cost = cfg.cost_spec(&mesh);
    Ok((model, g0, cost))
}
