//! Gradient-type sweeping loop: forward solve, backward adjoint solve and a
//! steepest-descent control update, repeated until the cost settles.

use log::{debug, info, warn};

use crate::adjoint::{adjoint_solve, nodal_derivative, AdjointPair, AdjointTrajectory};
use crate::cost::{eval_cost, grad_u_running, CostSpec};
use crate::error::{check_len, Error, Result};
use crate::forward::{forward_solve, DensityPair, StateTrajectory};
use crate::kernels::Model;
use crate::mesh::Mesh;

/// Leader control `u(w_i, s^t)`, one row per time node.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    rows: Vec<Vec<f64>>,
}

impl ControlField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            rows: vec![vec![0.0; mesh.node_count()]; mesh.time_node_count()],
        }
    }

    /// `u[t][i] = f(s^t, w_i)`.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        let rows = (0..mesh.time_node_count())
            .map(|t| mesh.sample(|w| f(mesh.time(t), w)))
            .collect();
        Self { rows }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, mesh: &Mesh) -> Result<Self> {
        let field = Self { rows };
        field.check_shape(mesh)?;
        Ok(field)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn slice(&self, t: usize) -> &[f64] {
        &self.rows[t]
    }

    pub fn slice_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.rows[t]
    }

    pub fn check_shape(&self, mesh: &Mesh) -> Result<()> {
        check_len(mesh.time_node_count(), self.rows.len())?;
        self.rows
            .iter()
            .try_for_each(|r| check_len(mesh.node_count(), r.len()))
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().flatten().all(|&x| x == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &ControlField) -> ControlField {
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + scale * y).collect())
            .collect();
        ControlField { rows }
    }

    /// Space–time trapezoid inner product.
    pub fn inner(&self, other: &ControlField, mesh: &Mesh) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .enumerate()
            .map(|(t, (a, b))| {
                let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
                mesh.time_weight(t) * mesh.quad_unchecked(&prod)
            })
            .sum()
    }
}

/// Gradient of the reduced cost at one time slice:
/// `grad_u J_s - g_L / (2 tau_LL) dp_L/dw`.
///
/// The minus sign pairs `B[u] = u / (2 tau_LL)` in the state drift with the
/// adjoint convention `p(T) = +dJ_T/dg`; the finite-difference gradient test
/// pins it.
pub fn optimality_residual(
    model: &Model,
    g: &DensityPair,
    u: &[f64],
    p: &AdjointPair,
    cost: &CostSpec,
) -> Vec<f64> {
    let tau = model.params().tau_ll;
    let dpl = nodal_derivative(&p.pl, model.mesh());
    grad_u_running(cost, g, u)
        .iter()
        .zip(&g.gl)
        .zip(&dpl)
        .map(|((gu, gl), dp)| gu - gl / (2.0 * tau) * dp)
        .collect()
}

/// Residual at every time node.
pub fn residual_field(
    model: &Model,
    traj: &StateTrajectory,
    u: &ControlField,
    adjoint: &AdjointTrajectory,
    cost: &CostSpec,
) -> ControlField {
    let rows = traj
        .densities
        .iter()
        .zip(&adjoint.adjoints)
        .enumerate()
        .map(|(t, (g, p))| optimality_residual(model, g, u.slice(t), p, cost))
        .collect();
    ControlField { rows }
}

/// `u_n = u_{n-1} - nu * residual`, optionally clamped to `[-bound, bound]`.
pub fn update_control(prev: &ControlField, residual: &ControlField, nu: f64, clamp: Option<f64>) -> Result<ControlField> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::invalid("nu", format!("step size must be positive, got {nu}")));
    }
    check_len(prev.rows.len(), residual.rows.len())?;
    let mut next = prev.axpy(-nu, residual);
    if let Some(bound) = clamp {
        next.rows
            .iter_mut()
            .flatten()
            .for_each(|x| *x = x.clamp(-bound, bound));
    }
    Ok(next)
}

/// Cost and reduced gradient (as a residual field) at control `u`.
pub fn cost_and_gradient(
    model: &Model,
    g0: &DensityPair,
    u: &ControlField,
    cost: &CostSpec,
) -> Result<(f64, ControlField)> {
    let traj = forward_solve(model, g0, u)?;
    let j = eval_cost(cost, &traj, u, model.mesh())?;
    let adjoint = adjoint_solve(model, &traj, u, cost)?;
    Ok((j, residual_field(model, &traj, u, &adjoint, cost)))
}

/// Cost of the state driven by `u`.
pub fn cost_of(model: &Model, g0: &DensityPair, u: &ControlField, cost: &CostSpec) -> Result<f64> {
    let traj = forward_solve(model, g0, u)?;
    eval_cost(cost, &traj, u, model.mesh())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub nu: f64,
    /// Relative tolerance on successive cost values.
    pub tol: f64,
    pub max_iter: usize,
    /// Bound `M` on `|u|`; `None` leaves the control unconstrained.
    pub clamp: Option<f64>,
    /// Halve `nu` for later sweeps when a sweep raises `J` by more than 10%.
    pub backstop: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            nu: 0.5,
            tol: 1e-4,
            max_iter: 100,
            clamp: None,
            backstop: true,
        }
    }
}

impl SweepOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::invalid("nu", format!("must be positive, got {}", self.nu)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tol", format!("must be nonnegative, got {}", self.tol)));
        }
        if let Some(m) = self.clamp {
            if !(m > 0.0) {
                return Err(Error::invalid("M", format!("bound must be positive, got {m}")));
            }
        }
        Ok(())
    }
}

const MAX_HALVINGS: u32 = 30;
const BACKSTOP_GROWTH: f64 = 1.1;

#[derive(Debug, Clone)]
pub struct SweepReport {
    /// Number of control updates performed.
    pub iterations: usize,
    /// `J` before the first update and after each update.
    pub cost_history: Vec<f64>,
    pub final_state: StateTrajectory,
    pub final_control: ControlField,
    /// Adjoint of the last sweep (computed with the control preceding
    /// `final_control`).
    pub final_adjoint: AdjointTrajectory,
    pub converged: bool,
    /// Step size in effect at the end (differs from the requested one only
    /// when the backstop fired).
    pub final_nu: f64,
}

/// Runs the sweeping algorithm from the initial guess `u = 0`.
pub fn sweep(model: &Model, g0: &DensityPair, cost: &CostSpec, options: &SweepOptions) -> Result<SweepReport> {
    sweep_from(model, g0, cost, options, ControlField::zeros(model.mesh()))
}

/// Runs the sweeping algorithm from an arbitrary initial control.
pub fn sweep_from(
    model: &Model,
    g0: &DensityPair,
    cost: &CostSpec,
    options: &SweepOptions,
    initial: ControlField,
) -> Result<SweepReport> {
    options.validate()?;
    let mesh = model.mesh();
    cost.validate(mesh)?;
    initial.check_shape(mesh)?;
    let wrap = |iteration: usize| move |e: Error| Error::Sweep { iteration, source: Box::new(e) };

    let mut u = initial;
    let mut state = forward_solve(model, g0, &u).map_err(wrap(0))?;
    let mut j = eval_cost(cost, &state, &u, mesh).map_err(wrap(0))?;
    if !j.is_finite() {
        return Err(wrap(0)(Error::NonFinite { what: "cost", step: 0 }));
    }
    let mut history = vec![j];
    let mut adjoint = AdjointTrajectory {
        adjoints: vec![AdjointPair::zeros(mesh.node_count()); mesh.time_node_count()],
    };
    let mut nu = options.nu;
    let mut halvings = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iter {
        let n = iterations + 1;
        adjoint = adjoint_solve(model, &state, &u, cost).map_err(wrap(n))?;
        let residual = residual_field(model, &state, &u, &adjoint, cost);
        u = update_control(&u, &residual, nu, options.clamp).map_err(wrap(n))?;
        state = forward_solve(model, g0, &u).map_err(wrap(n))?;
        let j_new = eval_cost(cost, &state, &u, mesh).map_err(wrap(n))?;
        if !j_new.is_finite() {
            return Err(wrap(n)(Error::NonFinite { what: "cost", step: n }));
        }
        history.push(j_new);
        iterations = n;
        debug!("sweep {n}: J = {j_new:.10e} (nu = {nu})");

        if options.backstop && j_new > BACKSTOP_GROWTH * j && halvings < MAX_HALVINGS {
            nu *= 0.5;
            halvings += 1;
            warn!("sweep {n}: cost rose from {j:.6e} to {j_new:.6e}; step size halved to {nu}");
        }
        let change = (j_new - j).abs();
        j = j_new;
        if change <= options.tol * j.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    info!(
        "sweep finished after {iterations} iterations: J = {j:.6e}, converged = {converged}"
    );
    Ok(SweepReport {
        iterations,
        cost_history: history,
        final_state: state,
        final_control: u,
        final_adjoint: adjoint,
        converged,
        final_nu: nu,
    })
}
