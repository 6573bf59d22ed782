//! The four cost functionals of the control problem and the derivative
//! objects the optimality system needs.
//!
//! Every functional splits as `J = J_T[g(T)] + int_0^T J_s[g, u] ds`; space
//! and time integrals use trapezoid weights on the mesh.

use log::warn;

use crate::adjoint::AdjointPair;
use crate::error::{check_len, Error, Result};
use crate::forward::{DensityPair, StateTrajectory};
use crate::mesh::Mesh;
use crate::sweep::ControlField;

#[derive(Debug, Clone, PartialEq)]
pub enum CostSpec {
    /// `1/2 int int (|w - w_dL|^2 + beta u^2) g_L + (|w - w_dF|^2 + beta u^2) g_F`.
    CentringBoth { w_dl: f64, w_df: f64, beta: f64 },
    /// `1/2 int int (|w - w_dF|^2 + beta u^2) g_F`.
    CentringFollower { w_df: f64, beta: f64 },
    /// `1/2 int |g(T) - g_target|^2 + beta/2 int int u^2`.
    FinalTimeBoth { target: DensityPair, beta: f64 },
    /// `1/2 int (g_F(T) - g_target)^2 + beta/2 int int u^2`.
    FinalTimeFollower { target: Vec<f64>, beta: f64 },
}

impl CostSpec {
    pub fn beta(&self) -> f64 {
        match self {
            CostSpec::CentringBoth { beta, .. }
            | CostSpec::CentringFollower { beta, .. }
            | CostSpec::FinalTimeBoth { beta, .. }
            | CostSpec::FinalTimeFollower { beta, .. } => *beta,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CostSpec::CentringBoth { .. } => "centring_both",
            CostSpec::CentringFollower { .. } => "centring_follower",
            CostSpec::FinalTimeBoth { .. } => "final_time_both",
            CostSpec::FinalTimeFollower { .. } => "final_time_follower",
        }
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let beta = self.beta();
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
        }
        match self {
            CostSpec::FinalTimeBoth { target, .. } => {
                check_len(mesh.node_count(), target.gl.len())?;
                check_len(mesh.node_count(), target.gf.len())
            }
            CostSpec::FinalTimeFollower { target, .. } => check_len(mesh.node_count(), target.len()),
            _ => Ok(()),
        }
    }

    /// Running integrand `J_s` integrated over space at one time slice.
    fn running(&self, g: &DensityPair, u: &[f64], mesh: &Mesh) -> f64 {
        let nodes = mesh.nodes();
        let integrand: Vec<f64> = match self {
            CostSpec::CentringBoth { w_dl, w_df, beta } => (0..nodes.len())
                .map(|i| {
                    let w = nodes[i];
                    let pen = beta * u[i] * u[i];
                    0.5 * (((w - w_dl).powi(2) + pen) * g.gl[i] + ((w - w_df).powi(2) + pen) * g.gf[i])
                })
                .collect(),
            CostSpec::CentringFollower { w_df, beta } => (0..nodes.len())
                .map(|i| 0.5 * ((nodes[i] - w_df).powi(2) + beta * u[i] * u[i]) * g.gf[i])
                .collect(),
            CostSpec::FinalTimeBoth { beta, .. } | CostSpec::FinalTimeFollower { beta, .. } => {
                u.iter().map(|u| 0.5 * beta * u * u).collect()
            }
        };
        mesh.quad_unchecked(&integrand)
    }

    /// Final-time part `J_T`.
    fn terminal(&self, g: &DensityPair, mesh: &Mesh) -> f64 {
        let sq = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).collect() };
        match self {
            CostSpec::FinalTimeBoth { target, .. } => {
                0.5 * (mesh.quad_unchecked(&sq(&g.gl, &target.gl)) + mesh.quad_unchecked(&sq(&g.gf, &target.gf)))
            }
            CostSpec::FinalTimeFollower { target, .. } => 0.5 * mesh.quad_unchecked(&sq(&g.gf, target)),
            _ => 0.0,
        }
    }
}

/// Evaluates the cost of a trajectory/control pair.
pub fn eval_cost(cost: &CostSpec, traj: &StateTrajectory, u: &ControlField, mesh: &Mesh) -> Result<f64> {
    check_len(mesh.time_node_count(), traj.len())?;
    u.check_shape(mesh)?;
    let running: f64 = traj
        .densities
        .iter()
        .enumerate()
        .map(|(t, g)| mesh.time_weight(t) * cost.running(g, u.slice(t), mesh))
        .sum();
    Ok(running + cost.terminal(traj.last(), mesh))
}

/// Functional derivative of `J_s` with respect to `(g_L, g_F)` at one slice.
/// None of the functionals depend on `g` beyond linearly, so the density
/// argument only fixes the slice.
pub fn grad_g_running(cost: &CostSpec, _g: &DensityPair, u: &[f64], mesh: &Mesh) -> (Vec<f64>, Vec<f64>) {
    let n = mesh.node_count();
    let nodes = mesh.nodes();
    match cost {
        CostSpec::CentringBoth { w_dl, w_df, beta } => (
            (0..n).map(|i| 0.5 * ((nodes[i] - w_dl).powi(2) + beta * u[i] * u[i])).collect(),
            (0..n).map(|i| 0.5 * ((nodes[i] - w_df).powi(2) + beta * u[i] * u[i])).collect(),
        ),
        CostSpec::CentringFollower { w_df, beta } => (
            vec![0.0; n],
            (0..n).map(|i| 0.5 * ((nodes[i] - w_df).powi(2) + beta * u[i] * u[i])).collect(),
        ),
        CostSpec::FinalTimeBoth { .. } | CostSpec::FinalTimeFollower { .. } => (vec![0.0; n], vec![0.0; n]),
    }
}

/// Functional derivative of `J_s` with respect to `u` at one slice.
pub fn grad_u_running(cost: &CostSpec, g: &DensityPair, u: &[f64]) -> Vec<f64> {
    match cost {
        CostSpec::CentringBoth { beta, .. } => {
            (0..u.len()).map(|i| beta * u[i] * (g.gl[i] + g.gf[i])).collect()
        }
        CostSpec::CentringFollower { beta, .. } => (0..u.len()).map(|i| beta * u[i] * g.gf[i]).collect(),
        CostSpec::FinalTimeBoth { beta, .. } | CostSpec::FinalTimeFollower { beta, .. } => {
            u.iter().map(|u| beta * u).collect()
        }
    }
}

/// Adjoint final condition `p(T) = dJ_T/dg`.
pub fn final_condition(cost: &CostSpec, g_final: &DensityPair) -> AdjointPair {
    let n = g_final.gl.len();
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    match cost {
        CostSpec::FinalTimeBoth { target, .. } => {
            AdjointPair::new(diff(&g_final.gl, &target.gl), diff(&g_final.gf, &target.gf))
        }
        CostSpec::FinalTimeFollower { target, .. } => AdjointPair::new(vec![0.0; n], diff(&g_final.gf, target)),
        _ => AdjointPair::zeros(n),
    }
}

/// Tracking target `g_I(w) = (1 - w^2)^2 q(w)` with `q` quadratic.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDensity {
    pub values: Vec<f64>,
    /// `q(w) = q[0] + q[1] w + q[2] w^2`.
    pub q: [f64; 3],
    /// Whether any negative interpolant value was clipped to zero.
    pub clipped: bool,
}

impl TargetDensity {
    pub fn eval(&self, w: f64) -> f64 {
        let [a, b, c] = self.q;
        (1.0 - w * w).powi(2) * (a + b * w + c * w * w)
    }
}

/// Interpolates three interior constraints `(w_k, value_k)` with double roots
/// at `w = -1` and `w = 1`.
pub fn interpolate_target(constraints: [(f64, f64); 3], mesh: &Mesh) -> Result<TargetDensity> {
    // Solve the 3x3 Vandermonde system for q by Gaussian elimination.
    let mut a = [[0.0; 4]; 3];
    for (row, &(w, v)) in a.iter_mut().zip(&constraints) {
        let bump = (1.0 - w * w).powi(2);
        if bump == 0.0 {
            return Err(Error::invalid("target", "constraint placed on a boundary root"));
        }
        *row = [1.0, w, w * w, v / bump];
    }
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        if a[col][col].abs() < 1e-14 {
            return Err(Error::invalid("target", "interpolation nodes must be distinct"));
        }
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..4 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let q = [a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]];
    let mut target = TargetDensity {
        values: Vec::new(),
        q,
        clipped: false,
    };
    let mut values = mesh.sample(|w| target.eval(w));
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
            target.clipped = true;
        }
    }
    if target.clipped {
        warn!("target density interpolant went negative; clipped to 0");
    }
    target.values = values;
    Ok(target)
}

/// Reference tracking target: `g_I(-0.5) = 0.5`, `g_I(0) = 0.25`, `g_I(0.5) = 1`.
pub fn build_target_density(mesh: &Mesh) -> TargetDensity {
    interpolate_target([(-0.5, 0.5), (0.0, 0.25), (0.5, 1.0)], mesh).expect("reference constraints are well posed")
}
