//! Forward solver for the two-species Fokker–Planck system: Chang–Cooper
//! fluxes written in production–destruction form, integrated with the
//! second-order modified Patankar–Runge–Kutta scheme (MPRK2).
//!
//! Node `i` owns the control volume of width `omega_i` (its trapezoid
//! weight), so the scheme conserves the trapezoid mass of each species and
//! not merely the plain nodal sum.

use log::debug;

use crate::error::{check_len, Error, Result};
use crate::kernels::{CoefficientFields, Model};
use crate::mesh::Mesh;
use crate::sweep::ControlField;
use crate::tridiag::Tridiagonal;

const SERIES_CUTOFF: f64 = 1e-2;

/// Leader and follower densities at the mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPair {
    pub gl: Vec<f64>,
    pub gf: Vec<f64>,
}

impl DensityPair {
    pub fn new(gl: Vec<f64>, gf: Vec<f64>) -> Self {
        Self { gl, gf }
    }

    /// Checks positivity and unit trapezoid mass within `1e-10`.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        for (name, g) in [("g_L", &self.gl), ("g_F", &self.gf)] {
            check_len(mesh.node_count(), g.len())?;
            if g.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::invalid(name, "density must be strictly positive and finite"));
            }
            let mass = mesh.quad_unchecked(g);
            if (mass - 1.0).abs() > 1e-10 {
                return Err(Error::invalid(name, format!("mass {mass} is not 1")));
            }
        }
        Ok(())
    }
}

/// Densities at every time node `0..=Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub densities: Vec<DensityPair>,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    pub fn initial(&self) -> &DensityPair {
        &self.densities[0]
    }

    pub fn last(&self) -> &DensityPair {
        self.densities.last().expect("trajectory is never empty")
    }
}

/// Chang–Cooper weight `1 / (1 - e^lambda) + 1 / lambda`, with the removable
/// singularity at `0` filled by its Taylor series.
pub fn chang_cooper_delta(lambda: f64) -> f64 {
    if lambda < 0.0 {
        // delta(-x) = 1 - delta(x); evaluating one side keeps the scheme
        // mirror-symmetric in floating point.
        return 1.0 - chang_cooper_delta(-lambda);
    }
    if lambda < SERIES_CUTOFF {
        let l2 = lambda * lambda;
        0.5 - lambda / 12.0 + lambda * l2 / 720.0 - lambda * l2 * l2 / 30240.0
    } else if lambda == f64::INFINITY {
        0.0
    } else {
        1.0 / lambda - 1.0 / lambda.exp_m1()
    }
}

/// Weight at a half node with drift `alpha` and diffusion `c`; a vanishing
/// diffusion maps to the `lambda -> +-inf` limits.
fn flux_weight(alpha: f64, c: f64, dw: f64) -> f64 {
    if c > 0.0 {
        chang_cooper_delta(alpha * dw / c)
    } else if alpha > 0.0 {
        0.0
    } else if alpha < 0.0 {
        1.0
    } else {
        0.5
    }
}

/// Production–destruction rates of one species, stored per half node.
///
/// Rates are mass rates (density rates times the control volume). Between
/// nodes `h` and `h + 1`:
/// `into_lower[h] = P_{h, h+1}` (into node `h` from `h + 1`) and
/// `into_upper[h] = P_{h+1, h}`. Destruction is the transpose,
/// `D_{i,j} = P_{j,i}`, so mass cancels exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PdRates {
    pub into_lower: Vec<f64>,
    pub into_upper: Vec<f64>,
    weights: Vec<f64>,
}

impl PdRates {
    fn mass_rate(&self, i: usize, j: usize) -> f64 {
        if j == i + 1 {
            self.into_lower[i]
        } else if i == j + 1 {
            self.into_upper[j]
        } else {
            0.0
        }
    }

    /// Production `p_{i,j}` in density units.
    pub fn production(&self, i: usize, j: usize) -> f64 {
        self.mass_rate(i, j) / self.weights[i]
    }

    /// Destruction `d_{i,j}` in density units.
    pub fn destruction(&self, i: usize, j: usize) -> f64 {
        self.mass_rate(j, i) / self.weights[i]
    }

    /// Semi-discrete time derivative `sum_j p_{i,j} - d_{i,j}` at every node.
    pub fn net_rate(&self) -> Vec<f64> {
        let n = self.weights.len();
        let mut out = vec![0.0; n];
        for h in 0..n - 1 {
            let flux = self.into_lower[h] - self.into_upper[h];
            out[h] += flux;
            out[h + 1] -= flux;
        }
        out.iter_mut().zip(&self.weights).for_each(|(o, w)| *o /= w);
        out
    }

    fn added(&self, other: &PdRates) -> PdRates {
        PdRates {
            into_lower: self.into_lower.iter().zip(&other.into_lower).map(|(a, b)| a + b).collect(),
            into_upper: self.into_upper.iter().zip(&other.into_upper).map(|(a, b)| a + b).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Chang–Cooper production/destruction rates for density `g` with
/// half-node drift `alpha` (already including `C'`) and diffusion `c`.
/// The two outermost half-node fluxes are absent (no-flow).
pub fn pd_rates(g: &[f64], alpha: &[f64], c: &[f64], mesh: &Mesh) -> Result<PdRates> {
    check_len(mesh.node_count(), g.len())?;
    check_len(mesh.cells(), alpha.len())?;
    check_len(mesh.cells(), c.len())?;
    let dw = mesh.dw();
    let cells = mesh.cells();
    let mut into_lower = Vec::with_capacity(cells);
    let mut into_upper = Vec::with_capacity(cells);
    for h in 0..cells {
        let (a, c) = (alpha[h], c[h]);
        if a.is_nan() || c.is_nan() {
            return Err(Error::NonFinite { what: "flux coefficients", step: h });
        }
        let delta = flux_weight(a, c, dw);
        let blend = (1.0 - delta) * g[h + 1] + delta * g[h];
        into_lower.push(a.max(0.0) * blend + c * g[h + 1] / dw);
        into_upper.push(-a.min(0.0) * blend + c * g[h] / dw);
    }
    Ok(PdRates {
        into_lower,
        into_upper,
        weights: mesh.weights(),
    })
}

/// Solves one Patankar-weighted linear stage
/// `omega_i x_i = omega_i base_i + scale (sum_j P_ij x_j / den_j - sum_j P_ji x_i / den_i)`.
fn patankar_stage(base: &[f64], den: &[f64], rates: &PdRates, scale: f64, mesh: &Mesh) -> Result<Vec<f64>> {
    let n = base.len();
    let mut a = Tridiagonal::zeros(n);
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let omega = mesh.weight(i);
        let mut loss = 0.0;
        if i > 0 {
            a.lower[i] = -scale * rates.into_upper[i - 1] / den[i - 1];
            loss += rates.into_lower[i - 1];
        }
        if i + 1 < n {
            a.upper[i] = -scale * rates.into_lower[i] / den[i + 1];
            loss += rates.into_upper[i];
        }
        a.diag[i] = omega + scale * loss / den[i];
        rhs[i] = omega * base[i];
    }
    a.solve(&rhs)
}

fn require_positive(g: &[f64], step: usize) -> Result<()> {
    if g.iter().all(|&x| x > 0.0 && x.is_finite()) {
        Ok(())
    } else if g.iter().any(|x| !x.is_finite()) {
        Err(Error::NonFinite { what: "density", step })
    } else {
        Err(Error::invalid("density", format!("non-positive value at step {step}")))
    }
}

/// One MPRK2 step for a single species. `rates_at` maps a density to its
/// production–destruction rates; it is called at `g` and at the Euler stage.
pub fn mprk2_step(
    g: &[f64],
    mesh: &Mesh,
    mut rates_at: impl FnMut(&[f64]) -> Result<PdRates>,
) -> Result<Vec<f64>> {
    require_positive(g, 0)?;
    let ds = mesh.ds();
    let rates = rates_at(g)?;
    let stage = patankar_stage(g, g, &rates, ds, mesh)?;
    let stage_rates = rates_at(&stage)?;
    patankar_stage(g, &stage, &rates.added(&stage_rates), 0.5 * ds, mesh)
}

fn species_rates(fields: &CoefficientFields, gl: &[f64], gf: &[f64], mesh: &Mesh) -> Result<(PdRates, PdRates)> {
    let alpha_l: Vec<f64> = fields.drift_l.iter().zip(&fields.diffusion_slope_l).map(|(a, c)| a + c).collect();
    let alpha_f: Vec<f64> = fields.drift_f.iter().zip(&fields.diffusion_slope_f).map(|(a, c)| a + c).collect();
    Ok((
        pd_rates(gl, &alpha_l, &fields.diffusion_l, mesh)?,
        pd_rates(gf, &alpha_f, &fields.diffusion_f, mesh)?,
    ))
}

/// Integrates the state system from `g0` over the whole horizon with control
/// `u` (`u[t]` drives the rates evaluated at time node `t`).
pub fn forward_solve(model: &Model, g0: &DensityPair, u: &ControlField) -> Result<StateTrajectory> {
    let mesh = model.mesh();
    check_len(mesh.node_count(), g0.gl.len())?;
    check_len(mesh.node_count(), g0.gf.len())?;
    u.check_shape(mesh)?;
    require_positive(&g0.gl, 0)?;
    require_positive(&g0.gf, 0)?;
    let ds = mesh.ds();
    let mut densities = Vec::with_capacity(mesh.time_node_count());
    densities.push(g0.clone());
    for t in 0..mesh.steps() {
        let cur = &densities[t];
        let fields = model.half_node_coefficients(&cur.gl, &cur.gf, u.slice(t));
        let (rl, rf) = species_rates(&fields, &cur.gl, &cur.gf, mesh)?;
        let bar_l = patankar_stage(&cur.gl, &cur.gl, &rl, ds, mesh)?;
        let bar_f = patankar_stage(&cur.gf, &cur.gf, &rf, ds, mesh)?;
        require_positive(&bar_l, t).and(require_positive(&bar_f, t))?;

        let fields_bar = model.half_node_coefficients(&bar_l, &bar_f, u.slice(t + 1));
        let (rl_bar, rf_bar) = species_rates(&fields_bar, &bar_l, &bar_f, mesh)?;
        let next_l = patankar_stage(&cur.gl, &bar_l, &rl.added(&rl_bar), 0.5 * ds, mesh)?;
        let next_f = patankar_stage(&cur.gf, &bar_f, &rf.added(&rf_bar), 0.5 * ds, mesh)?;
        if next_l.iter().chain(&next_f).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "density", step: t + 1 });
        }
        require_positive(&next_l, t + 1).and(require_positive(&next_f, t + 1))?;
        densities.push(DensityPair::new(next_l, next_f));
    }
    debug!("forward solve: {} steps", mesh.steps());
    Ok(StateTrajectory { densities })
}

/// Plateau profile `tanh(k (R - |w - c|)) + 1` normalised to unit trapezoid mass.
pub fn initial_density(radius: f64, centre: f64, sharpness: f64, mesh: &Mesh) -> Result<Vec<f64>> {
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::invalid("R", format!("radius {radius} not in (0, 1)")));
    }
    if !(-1.0..=1.0).contains(&centre) {
        return Err(Error::invalid("c", format!("centre {centre} not in [-1, 1]")));
    }
    if !(sharpness > 0.0) || !sharpness.is_finite() {
        return Err(Error::invalid("k", format!("sharpness {sharpness} must be positive")));
    }
    let raw = mesh.sample(|w| (sharpness * (radius - (w - centre).abs())).tanh() + 1.0);
    let mass = mesh.quad_unchecked(&raw);
    if !(mass > 0.0) {
        return Err(Error::invalid("initial density", "zero mass"));
    }
    Ok(raw.into_iter().map(|x| x / mass).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{CompromiseKernel, ModelParams};

    #[test]
    fn delta_limits() {
        assert_eq!(chang_cooper_delta(0.0), 0.5);
        assert!((chang_cooper_delta(1e-9) - 0.5).abs() < 1e-9);
        assert_eq!(chang_cooper_delta(f64::INFINITY), 0.0);
        assert_eq!(chang_cooper_delta(f64::NEG_INFINITY), 1.0);
        assert!(chang_cooper_delta(800.0) < 1.3e-3);
        assert!((chang_cooper_delta(-800.0) - 1.0).abs() < 1.3e-3);
        // 1 / (1 - e) + 1
        let e = std::f64::consts::E;
        let closed = 1.0 / (1.0 - e) + 1.0;
        assert!((closed - 0.4180232931).abs() < 1e-10);
        assert!((chang_cooper_delta(1.0) - closed).abs() < 1e-15);
    }

    #[test]
    fn delta_branches_agree_and_reflect() {
        for &l in &[-2e-2, -1.0001e-2, -0.999e-2, 0.999e-2, 1.0001e-2, 2e-2, 0.5, 3.0, 40.0] {
            let direct = 1.0 / (1.0 - f64::exp(l)) + 1.0 / l;
            assert!((chang_cooper_delta(l) - direct).abs() < 1e-12, "lambda {l}");
            assert!((chang_cooper_delta(-l) - (1.0 - chang_cooper_delta(l))).abs() < 1e-14);
        }
        let mut prev = 1.0;
        for k in -400..=400 {
            let d = chang_cooper_delta(k as f64 * 0.05);
            assert!(d <= prev && (0.0..=1.0).contains(&d));
            prev = d;
        }
    }

    #[test]
    fn rates_reference_value() {
        let mesh = Mesh::new(4, 0.1, 1.0).unwrap();
        let g = vec![1.0; 5];
        let rates = pd_rates(&g, &[1.0; 4], &[1.0; 4], &mesh).unwrap();
        // [1 * ((1 - d) + d) + 1 / 0.5] / 0.5
        assert!((rates.production(1, 2) - 6.0).abs() < 1e-14);
        assert_eq!(rates.production(1, 3), 0.0);
        assert_eq!(rates.destruction(2, 1), rates.production(1, 2));
    }

    #[test]
    fn pure_diffusion_of_constant_is_steady() {
        let mesh = Mesh::new(10, 0.1, 1.0).unwrap();
        let g = vec![0.5; 11];
        let rates = pd_rates(&g, &[0.0; 10], &[0.3; 10], &mesh).unwrap();
        for (i, r) in rates.net_rate().iter().enumerate() {
            assert!(r.abs() < 1e-14, "node {i}: {r}");
        }
        for i in 1..10 {
            assert_eq!(rates.production(i, i + 1), rates.production(i, i - 1));
        }
    }

    #[test]
    fn spike_touches_only_neighbours() {
        let mesh = Mesh::new(8, 0.1, 1.0).unwrap();
        let mut g = vec![0.0; 9];
        g[4] = 1.0;
        let rates = pd_rates(&g, &[0.7; 8], &[0.2; 8], &mesh).unwrap();
        let net = rates.net_rate();
        for (i, r) in net.iter().enumerate() {
            if !(3..=5).contains(&i) {
                assert_eq!(*r, 0.0, "node {i}");
            }
        }
        assert!(net[4] < 0.0);
    }

    #[test]
    fn zero_rates_give_identity_step() {
        let mesh = Mesh::new(6, 0.3, 3.0).unwrap();
        let g = mesh.sample(|w| 1.0 + 0.3 * w);
        let next = mprk2_step(&g, &mesh, |g| pd_rates(g, &[0.0; 6], &[0.0; 6], &mesh)).unwrap();
        assert_eq!(next, g);
    }

    #[test]
    fn steady_diffusion_step() {
        let mesh = Mesh::new(12, 0.5, 3.0).unwrap();
        let g = vec![0.5; 13];
        let next = mprk2_step(&g, &mesh, |g| pd_rates(g, &[0.0; 12], &[0.8; 12], &mesh)).unwrap();
        for x in next {
            assert!((x - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn step_conserves_trapezoid_mass_and_stays_positive() {
        let mesh = Mesh::new(20, 2.0, 2.0).unwrap();
        let g = initial_density(0.3, 0.4, 10.0, &mesh).unwrap();
        let next = mprk2_step(&g, &mesh, |g| {
            let alpha: Vec<f64> = mesh.half_nodes().iter().map(|w| 40.0 * w).collect();
            pd_rates(g, &alpha, &[0.01; 20], &mesh)
        })
        .unwrap();
        assert!(next.iter().all(|&x| x > 0.0));
        assert!((mesh.quad_trapezoid(&next).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn initial_density_properties() {
        let mesh = Mesh::new(80, 0.125, 10.0).unwrap();
        let g = initial_density(0.85, 0.0, 10.0, &mesh).unwrap();
        assert!((mesh.quad_trapezoid(&g).unwrap() - 1.0).abs() < 1e-14);
        for i in 0..=80 {
            assert_eq!(g[i], g[80 - i]);
        }
        // plateau height close to 1 / (2R)
        assert!((g[40] - 1.0 / 1.7).abs() < 0.01);
        assert!(initial_density(0.0, 0.0, 10.0, &mesh).is_err());
        assert!(initial_density(0.5, 0.0, -1.0, &mesh).is_err());
    }

    #[test]
    fn sharp_plateau_tends_to_indicator() {
        let mesh = Mesh::new(400, 0.1, 1.0).unwrap();
        let g = initial_density(0.5, 0.0, 400.0, &mesh).unwrap();
        let expected = 1.0 / (2.0 * 0.5);
        assert!((g[200] - expected).abs() < 0.01);
        assert!(g[mesh.nearest_node(0.8)] < 1e-6);
    }

    #[test]
    fn one_step_from_reference_data_conserves_mass() {
        let mesh = Mesh::new(80, 0.125, 0.125).unwrap();
        let model = Model::new(ModelParams::default(), mesh.clone()).unwrap();
        let g = initial_density(0.85, 0.0, 10.0, &mesh).unwrap();
        let g0 = DensityPair::new(g.clone(), g);
        let traj = forward_solve(&model, &g0, &ControlField::zeros(&mesh)).unwrap();
        assert_eq!(traj.len(), 2);
        let last = traj.last();
        assert!((mesh.quad_trapezoid(&last.gl).unwrap() - 1.0).abs() < 1e-10);
        assert!((mesh.quad_trapezoid(&last.gf).unwrap() - 1.0).abs() < 1e-10);
        // production equals destruction at the semi-discrete level
        let fields = model.half_node_coefficients(&g0.gl, &g0.gf, &vec![0.0; 81]);
        let (rl, _) = species_rates(&fields, &g0.gl, &g0.gf, &mesh).unwrap();
        let total: f64 = rl.net_rate().iter().zip(mesh.weights()).map(|(r, w)| r * w).sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn pure_diffusion_spreads() {
        let params = ModelParams {
            kernel_l: CompromiseKernel::Constant { c: 0.0 },
            lambda_l: 2.0,
            ..ModelParams::default()
        };
        let mesh = Mesh::new(40, 0.01, 0.2).unwrap();
        let model = Model::new(params, mesh.clone()).unwrap();
        let g = initial_density(0.2, 0.0, 20.0, &mesh).unwrap();
        let traj = forward_solve(&model, &DensityPair::new(g.clone(), g), &ControlField::zeros(&mesh)).unwrap();
        let variance = |g: &[f64]| {
            let w2: Vec<f64> = g.iter().zip(mesh.nodes()).map(|(g, w)| g * w * w).collect();
            mesh.quad_trapezoid(&w2).unwrap()
        };
        let v: Vec<f64> = traj.densities.iter().map(|d| variance(&d.gl)).collect();
        for pair in v.windows(2) {
            assert!(pair[1] > pair[0]);
        }
    }
}
