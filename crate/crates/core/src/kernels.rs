//! Compromise kernels, the diffusion envelope and the nonlocal drift
//! operators `K`, `M`, `N`, plus assembly of the drift/diffusion fields of the
//! two-species Fokker–Planck system.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_len, Error, Result};
use crate::mesh::Mesh;

/// Compromise function `P(x, y)` weighting the attraction of opinion `x`
/// towards `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompromiseKernel {
    /// `1` if `|x - y| < radius`, else `0`.
    BoundedConfidence { radius: f64 },
    /// `b (1 - x^2)`, independent of `y`.
    Sznajd { b: f64 },
    Constant { c: f64 },
}

impl CompromiseKernel {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            CompromiseKernel::BoundedConfidence { radius } => {
                if (x - y).abs() < radius {
                    1.0
                } else {
                    0.0
                }
            }
            CompromiseKernel::Sznajd { b } => b * (1.0 - x * x),
            CompromiseKernel::Constant { c } => c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CompromiseKernel::BoundedConfidence { radius } if !(radius > 0.0 && radius <= 2.0) => {
                Err(Error::invalid("kernel", format!("radius {radius} not in (0, 2]")))
            }
            CompromiseKernel::Sznajd { b } if !(-1.0..=1.0).contains(&b) => {
                Err(Error::invalid("kernel", format!("Sznajd weight {b} not in [-1, 1]")))
            }
            CompromiseKernel::Constant { c } if !(0.0..=1.0).contains(&c) => {
                Err(Error::invalid("kernel", format!("constant {c} not in [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for CompromiseKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompromiseKernel::BoundedConfidence { radius } => write!(f, "bounded_confidence({radius})"),
            CompromiseKernel::Sznajd { b } => write!(f, "sznajd({b})"),
            CompromiseKernel::Constant { c } => write!(f, "constant({c})"),
        }
    }
}

impl FromStr for CompromiseKernel {
    type Err = String;

    /// Parses `bounded_confidence(0.5)`, `sznajd(-1)` or `constant(1)`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(open) if s.ends_with(')') => (&s[..open], Some(&s[open + 1..s.len() - 1])),
            Some(_) => return Err(format!("unbalanced parentheses in `{s}`")),
            None => (s, None),
        };
        let value = |default: Option<f64>| -> std::result::Result<f64, String> {
            match arg {
                Some(a) => a
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| format!("bad kernel argument `{a}`: {e}")),
                None => default.ok_or_else(|| format!("kernel `{name}` needs an argument")),
            }
        };
        let kernel = match name.trim() {
            "bounded_confidence" | "bc" => CompromiseKernel::BoundedConfidence {
                radius: value(Some(0.5))?,
            },
            "sznajd" => CompromiseKernel::Sznajd { b: value(Some(-1.0))? },
            "constant" => CompromiseKernel::Constant { c: value(None)? },
            other => return Err(format!("unknown kernel `{other}`")),
        };
        kernel.validate().map_err(|e| e.to_string())?;
        Ok(kernel)
    }
}

/// Diffusion envelope `D(w) = (1 - w^2)^alpha`.
pub fn diffusion_envelope(w: f64, alpha: f64) -> f64 {
    (1.0 - w * w).max(0.0).powf(alpha)
}

/// `D'(w) = -2 alpha w (1 - w^2)^(alpha - 1)`.
pub fn diffusion_envelope_slope(w: f64, alpha: f64) -> f64 {
    let base = (1.0 - w * w).max(0.0);
    if base == 0.0 {
        // alpha > 1 makes the slope vanish at the boundary; alpha = 1 gives -2w.
        return if alpha > 1.0 { 0.0 } else { -2.0 * alpha * w };
    }
    -2.0 * alpha * w * base.powf(alpha - 1.0)
}

/// Trapezoid quadrature of `v -> P(w, v) (w - v) g(v)` over `[-1, 1]`.
pub fn nonlocal_drift(kernel: &CompromiseKernel, g: &[f64], w: f64, mesh: &Mesh) -> Result<f64> {
    check_len(mesh.node_count(), g.len())?;
    Ok(mesh
        .nodes()
        .iter()
        .zip(g)
        .enumerate()
        .map(|(j, (&v, &gv))| mesh.weight(j) * kernel.eval(w, v) * (w - v) * gv)
        .sum())
}

/// Parameters of the Fokker–Planck system. Defaults reproduce the reference
/// experiments (bounded confidence with `r = 0.5` on every channel).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub tau_ll: f64,
    /// Relaxation time of the follower–leader channel. Both `tau_LF` and
    /// `tau_FL` in the follower diffusion coefficient refer to this value.
    pub tau_fl: f64,
    pub tau_ff: f64,
    pub lambda_l: f64,
    pub lambda_f: f64,
    /// Ratio `gamma_L / gamma_F` scaling the follower drift.
    pub alpha_lf: f64,
    /// `P_L`, leader–leader.
    pub kernel_l: CompromiseKernel,
    /// `P_F`, follower–follower.
    pub kernel_f: CompromiseKernel,
    /// `P~`, follower attracted by a leader.
    pub kernel_lf: CompromiseKernel,
    /// Exponent of the diffusion envelope.
    pub d_alpha: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        let bc = CompromiseKernel::BoundedConfidence { radius: 0.5 };
        Self {
            tau_ll: 0.2,
            tau_fl: 2.0,
            tau_ff: 0.2,
            lambda_l: 0.05,
            lambda_f: 0.05,
            alpha_lf: 1.0,
            kernel_l: bc,
            kernel_f: bc,
            kernel_lf: bc,
            d_alpha: 2.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau_LL", self.tau_ll),
            ("tau_FL", self.tau_fl),
            ("tau_FF", self.tau_ff),
            ("lambda_L", self.lambda_l),
            ("lambda_F", self.lambda_f),
            ("alpha_LF", self.alpha_lf),
            ("D_alpha", self.d_alpha),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::invalid(name, format!("must be positive, got {value}")));
            }
        }
        self.kernel_l.validate()?;
        self.kernel_f.validate()?;
        self.kernel_lf.validate()
    }

    /// Leader diffusion constant: `C_L = c_L D^2` with `c_L = lambda_L / (2 tau_LL)`.
    pub fn diffusion_scale_l(&self) -> f64 {
        self.lambda_l / (2.0 * self.tau_ll)
    }

    /// Follower diffusion constant `lambda_F / (4 tau_FL) + lambda_F / (2 tau_FF)`.
    pub fn diffusion_scale_f(&self) -> f64 {
        self.lambda_f / (4.0 * self.tau_fl) + self.lambda_f / (2.0 * self.tau_ff)
    }
}

/// Dense nonlocal drift operator evaluated at a fixed set of points:
/// `(Op g)_k = sum_j omega_j P(x_k, v_j) (x_k - v_j) g_j`.
#[derive(Debug, Clone)]
pub struct DriftOperator {
    rows: usize,
    cols: usize,
    /// Row-major, quadrature weights folded in.
    weights: Vec<f64>,
}

impl DriftOperator {
    pub fn new(kernel: &CompromiseKernel, points: &[f64], mesh: &Mesh) -> Self {
        let cols = mesh.node_count();
        let mut weights = Vec::with_capacity(points.len() * cols);
        for &x in points {
            for (j, &v) in mesh.nodes().iter().enumerate() {
                weights.push(mesh.weight(j) * kernel.eval(x, v) * (x - v));
            }
        }
        Self {
            rows: points.len(),
            cols,
            weights,
        }
    }

    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.cols);
        self.weights
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(g).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Adjoint-side integral `out_j = sum_k omega_k P(w_k, v_j) (v_j - w_k) h_k`
    /// for an operator built on the nodes themselves (`rows == cols`).
    ///
    /// With node weights folded into `self`, this is
    /// `-(1/omega_j) sum_k omega_k W_{kj} h_k` where `W_{kj} = omega_j P (w_k - v_j)`.
    pub fn apply_adjoint(&self, h: &[f64], mesh: &Mesh) -> Vec<f64> {
        debug_assert_eq!(self.rows, self.cols);
        let mut out = vec![0.0; self.cols];
        for (k, row) in self.weights.chunks_exact(self.cols).enumerate() {
            let scale = mesh.weight(k) * h[k];
            if scale == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o -= scale * w;
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o /= mesh.weight(j);
        }
        out
    }
}

/// Drift and diffusion fields of both species at a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFields {
    /// `A_L[g] + B[u]`.
    pub drift_l: Vec<f64>,
    /// `A_F[g]`.
    pub drift_f: Vec<f64>,
    pub diffusion_l: Vec<f64>,
    pub diffusion_f: Vec<f64>,
    /// `dC_L/dw`, analytic.
    pub diffusion_slope_l: Vec<f64>,
    pub diffusion_slope_f: Vec<f64>,
}

/// Precomputed nonlocal operators and diffusion fields of a model on a mesh,
/// at the half nodes (forward fluxes) and at the nodes (adjoint stencil).
#[derive(Debug, Clone)]
pub struct Model {
    params: ModelParams,
    mesh: Mesh,
    half: Operators,
    node: Operators,
}

#[derive(Debug, Clone)]
struct Operators {
    k: DriftOperator,
    m: DriftOperator,
    n: DriftOperator,
    diffusion_l: Vec<f64>,
    diffusion_f: Vec<f64>,
    slope_l: Vec<f64>,
    slope_f: Vec<f64>,
}

impl Operators {
    fn new(params: &ModelParams, points: &[f64], mesh: &Mesh) -> Self {
        let cl = params.diffusion_scale_l();
        let cf = params.diffusion_scale_f();
        let alpha = params.d_alpha;
        let d2: Vec<f64> = points
            .iter()
            .map(|&w| diffusion_envelope(w, alpha).powi(2))
            .collect();
        let dd: Vec<f64> = points
            .iter()
            .map(|&w| 2.0 * diffusion_envelope(w, alpha) * diffusion_envelope_slope(w, alpha))
            .collect();
        Self {
            k: DriftOperator::new(&params.kernel_l, points, mesh),
            m: DriftOperator::new(&params.kernel_lf, points, mesh),
            n: DriftOperator::new(&params.kernel_f, points, mesh),
            diffusion_l: d2.iter().map(|d| cl * d).collect(),
            diffusion_f: d2.iter().map(|d| cf * d).collect(),
            slope_l: dd.iter().map(|d| cl * d).collect(),
            slope_f: dd.iter().map(|d| cf * d).collect(),
        }
    }

    fn fields(&self, params: &ModelParams, gl: &[f64], gf: &[f64], u: &[f64]) -> CoefficientFields {
        let k = self.k.apply(gl);
        let m = self.m.apply(gl);
        let n = self.n.apply(gf);
        let drift_l = k
            .iter()
            .zip(u)
            .map(|(k, u)| k / params.tau_ll + u / (2.0 * params.tau_ll))
            .collect();
        let drift_f = m
            .iter()
            .zip(&n)
            .map(|(m, n)| params.alpha_lf * (m / (2.0 * params.tau_fl) + n / params.tau_ff))
            .collect();
        CoefficientFields {
            drift_l,
            drift_f,
            diffusion_l: self.diffusion_l.clone(),
            diffusion_f: self.diffusion_f.clone(),
            diffusion_slope_l: self.slope_l.clone(),
            diffusion_slope_f: self.slope_f.clone(),
        }
    }
}

impl Model {
    pub fn new(params: ModelParams, mesh: Mesh) -> Result<Self> {
        params.validate()?;
        let half = Operators::new(&params, &mesh.half_nodes(), &mesh);
        let node = Operators::new(&params, mesh.nodes(), &mesh);
        Ok(Self {
            params,
            mesh,
            half,
            node,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Coefficients at the half nodes `w_{i+1/2}`; the nodal control is
    /// averaged onto the half nodes.
    pub fn half_node_coefficients(&self, gl: &[f64], gf: &[f64], u: &[f64]) -> CoefficientFields {
        let u_half: Vec<f64> = u.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        self.half.fields(&self.params, gl, gf, &u_half)
    }

    /// Coefficients at the nodes, used by the adjoint stencil.
    pub fn node_coefficients(&self, gl: &[f64], gf: &[f64], u: &[f64]) -> CoefficientFields {
        self.node.fields(&self.params, gl, gf, u)
    }

    /// `A*[g, dp/dw]` at the nodes: `(kappa / tau_LL + alpha_LF mu / (2 tau_FL),
    /// alpha_LF nu / tau_FF)`.
    pub fn adjoint_nonlocal(&self, gl: &[f64], gf: &[f64], dpl: &[f64], dpf: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let hl: Vec<f64> = gl.iter().zip(dpl).map(|(g, d)| g * d).collect();
        let hf: Vec<f64> = gf.iter().zip(dpf).map(|(g, d)| g * d).collect();
        let kappa = self.node.k.apply_adjoint(&hl, &self.mesh);
        let mu = self.node.m.apply_adjoint(&hf, &self.mesh);
        let nu = self.node.n.apply_adjoint(&hf, &self.mesh);
        let first = kappa
            .iter()
            .zip(&mu)
            .map(|(k, m)| k / p.tau_ll + p.alpha_lf * m / (2.0 * p.tau_fl))
            .collect();
        let second = nu.iter().map(|n| p.alpha_lf * n / p.tau_ff).collect();
        (first, second)
    }
}

/// Drift and diffusion fields at the half nodes for the given densities and
/// nodal control slice.
pub fn assemble_coefficients(
    params: &ModelParams,
    gl: &[f64],
    gf: &[f64],
    u: &[f64],
    mesh: &Mesh,
) -> Result<CoefficientFields> {
    for v in [gl, gf, u] {
        check_len(mesh.node_count(), v.len())?;
    }
    let model = Model::new(params.clone(), mesh.clone())?;
    Ok(model.half_node_coefficients(gl, gf, u))
}
