//! Backward solver for the adjoint system.
//!
//! Space: first-order upwind for the drift term, central second difference
//! for the diffusion. Time: implicit in the local terms, explicit in the
//! nonlocal `A*` integral, which is evaluated with `p^{t+1}`.

use crate::cost::{final_condition, grad_g_running, CostSpec};
use crate::error::{check_len, Result};
use crate::forward::{DensityPair, StateTrajectory};
use crate::kernels::Model;
use crate::mesh::Mesh;
use crate::sweep::ControlField;
use crate::tridiag::Tridiagonal;

/// Adjoint variables `(p_L, p_F)` at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointPair {
    pub pl: Vec<f64>,
    pub pf: Vec<f64>,
}

impl AdjointPair {
    pub fn new(pl: Vec<f64>, pf: Vec<f64>) -> Self {
        Self { pl, pf }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n], vec![0.0; n])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    /// One entry per time node `0..=Q`.
    pub adjoints: Vec<AdjointPair>,
}

impl AdjointTrajectory {
    pub fn len(&self) -> usize {
        self.adjoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjoints.is_empty()
    }
}

/// Nodal `dp/dw`: central differences inside, first-order one-sided at the
/// two boundary nodes.
pub fn nodal_derivative(p: &[f64], mesh: &Mesh) -> Vec<f64> {
    let n = p.len();
    let dw = mesh.dw();
    (0..n)
        .map(|i| match i {
            0 => (p[1] - p[0]) / dw,
            i if i == n - 1 => (p[n - 1] - p[n - 2]) / dw,
            i => (p[i + 1] - p[i - 1]) / (2.0 * dw),
        })
        .collect()
}

/// `A*[g, dp/dw]` at the nodes for given nodal derivatives of `p`.
pub fn astar_kernels(model: &Model, g: &DensityPair, dpl: &[f64], dpf: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = model.mesh().node_count();
    for v in [&g.gl, &g.gf] {
        check_len(n, v.len())?;
    }
    check_len(n, dpl.len())?;
    check_len(n, dpf.len())?;
    Ok(model.adjoint_nonlocal(&g.gl, &g.gf, dpl, dpf))
}

/// Left-hand matrix of one backward step for a species with nodal drift
/// `drift` and diffusion `diffusion`. Boundary rows replace the outside
/// neighbour by the boundary value (homogeneous Neumann).
pub fn adjoint_matrix(drift: &[f64], diffusion: &[f64], mesh: &Mesh) -> Tridiagonal {
    let n = drift.len();
    let r1 = mesh.ds() / mesh.dw();
    let r2 = mesh.ds() / (mesh.dw() * mesh.dw());
    let mut a = Tridiagonal::zeros(n);
    for i in 0..n {
        let up = drift[i].max(0.0);
        let down = drift[i].min(0.0);
        let c = diffusion[i];
        let lower = -r1 * up - r2 * c;
        let upper = r1 * down - r2 * c;
        a.diag[i] = 1.0 + 2.0 * r2 * c + r1 * (up - down);
        if i == 0 {
            a.diag[i] += lower;
        } else {
            a.lower[i] = lower;
        }
        if i == n - 1 {
            a.diag[i] += upper;
        } else {
            a.upper[i] = upper;
        }
    }
    a
}

/// One backward step for a single species:
/// `M p^t = p^{t+1} + ds (source + nonlocal)`.
pub fn adjoint_species_step(
    p_next: &[f64],
    drift: &[f64],
    diffusion: &[f64],
    source: &[f64],
    nonlocal: &[f64],
    mesh: &Mesh,
) -> Result<Vec<f64>> {
    let ds = mesh.ds();
    let rhs: Vec<f64> = (0..p_next.len())
        .map(|i| p_next[i] + ds * (source[i] + nonlocal[i]))
        .collect();
    adjoint_matrix(drift, diffusion, mesh).solve(&rhs)
}

/// Steps the adjoint from time node `t + 1` back to `t`, using the state and
/// control at `t`.
pub fn adjoint_step(
    model: &Model,
    p_next: &AdjointPair,
    g: &DensityPair,
    u: &[f64],
    cost: &CostSpec,
) -> Result<AdjointPair> {
    let mesh = model.mesh();
    let fields = model.node_coefficients(&g.gl, &g.gf, u);
    let (src_l, src_f) = grad_g_running(cost, g, u, mesh);
    let dpl = nodal_derivative(&p_next.pl, mesh);
    let dpf = nodal_derivative(&p_next.pf, mesh);
    let (nl_l, nl_f) = model.adjoint_nonlocal(&g.gl, &g.gf, &dpl, &dpf);
    let pl = adjoint_species_step(&p_next.pl, &fields.drift_l, &fields.diffusion_l, &src_l, &nl_l, mesh)?;
    let pf = adjoint_species_step(&p_next.pf, &fields.drift_f, &fields.diffusion_f, &src_f, &nl_f, mesh)?;
    Ok(AdjointPair::new(pl, pf))
}

/// Solves the adjoint system backwards from `p(T) = dJ_T/dg`.
pub fn adjoint_solve(
    model: &Model,
    traj: &StateTrajectory,
    u: &ControlField,
    cost: &CostSpec,
) -> Result<AdjointTrajectory> {
    let mesh = model.mesh();
    check_len(mesh.time_node_count(), traj.len())?;
    u.check_shape(mesh)?;
    let q = mesh.steps();
    let mut adjoints = vec![AdjointPair::zeros(0); q + 1];
    adjoints[q] = final_condition(cost, traj.last());
    for t in (0..q).rev() {
        let p = adjoint_step(model, &adjoints[t + 1], &traj.densities[t], u.slice(t), cost)?;
        if p.pl.iter().chain(&p.pf).any(|x| !x.is_finite()) {
            return Err(crate::error::Error::NonFinite { what: "adjoint", step: t });
        }
        adjoints[t] = p;
    }
    Ok(AdjointTrajectory { adjoints })
}
