//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use leadfollow::adjoint::adjoint_species_step;
use leadfollow::cost::{final_condition, grad_g_running, grad_u_running};
use leadfollow::runner::{self, preset_config, Outcome};
use leadfollow::sweep::{cost_of, residual_field};
use leadfollow::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn trapz(mesh: &Mesh, f: &[f64]) -> f64 {
    let dw = mesh.dw();
    let n = f.len();
    dw * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1]))
}

fn l1(mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    trapz(mesh, &d)
}

fn interior_maxima(g: &[f64]) -> Vec<usize> {
    (1..g.len() - 1).filter(|&i| g[i] > g[i - 1] && g[i] > g[i + 1]).collect()
}

fn forward(name: &str) -> (Mesh, StateTrajectory, Duration) {
    let cfg = preset_config(name).unwrap();
    let start = Instant::now();
    let (mesh, outcome) = runner::run_forward(&cfg).unwrap();
    let elapsed = start.elapsed();
    match outcome {
        Outcome::Forward { trajectory } => (mesh, trajectory, elapsed),
        _ => unreachable!(),
    }
}

fn optimize(name: &str) -> (Mesh, SweepReport) {
    let (mesh, outcome) = runner::run_optimize(&preset_config(name).unwrap()).unwrap();
    match outcome {
        Outcome::Sweep { report } => (mesh, report),
        _ => unreachable!(),
    }
}

fn criterion_1(mesh: &Mesh, traj: &StateTrajectory, elapsed: Duration) -> Verdict {
    let mut worst = 0.0f64;
    let mut min = f64::INFINITY;
    for g in &traj.densities {
        for v in [&g.gl, &g.gf] {
            worst = worst.max((trapz(mesh, v) - 1.0).abs());
            min = v.iter().copied().fold(min, f64::min);
        }
    }
    let secs = elapsed.as_secs_f64();
    verdict(
        worst <= 1e-10 && min > 0.0 && secs < 5.0,
        format!("max |mass - 1| = {worst:.2e}, min g = {min:.3e}, runtime {:.1} ms", secs * 1e3),
    )
}

fn criterion_2(traj: &StateTrajectory) -> Verdict {
    let mut worst = 0.0f64;
    for g in &traj.densities {
        for v in [&g.gl, &g.gf] {
            let n = v.len();
            for i in 0..n {
                worst = worst.max((v[i] - v[n - 1 - i]).abs());
            }
        }
    }
    verdict(worst <= 1e-10, format!("max mirror defect = {worst:.2e}"))
}

fn criterion_3(mesh: &Mesh, traj: &StateTrajectory) -> Verdict {
    let gf = &traj.last().gf;
    let peaks = interior_maxima(gf);
    let where_: Vec<String> = peaks.iter().map(|&i| format!("{:+.3}", mesh.node(i))).collect();
    if peaks.len() != 2 {
        return verdict(false, format!("{} interior maxima of g_F(T) at w = [{}]", peaks.len(), where_.join(", ")));
    }
    let (a, b) = (peaks[0], peaks[1]);
    let split = (a..=b).min_by(|&i, &j| gf[i].total_cmp(&gf[j])).unwrap();
    let left = trapz(mesh, &gf[..=split]);
    let right = trapz(mesh, &gf[split..]);
    let mirrored = a + b == mesh.cells();
    let ratio = (left - right).abs() / left.max(right);
    verdict(
        mirrored && ratio <= 0.02,
        format!("maxima at w = [{}], peak masses {left:.4} / {right:.4}", where_.join(", ")),
    )
}

fn perturbation(mesh: &Mesh, rng: &mut ChaCha8Rng) -> ControlField {
    let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let phase: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
    let b: [f64; 2] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let t = mesh.horizon();
    ControlField::from_fn(mesh, move |s, w| {
        let space: f64 = (0..3)
            .map(|k| a[k] * ((k + 1) as f64 * std::f64::consts::FRAC_PI_2 * (w + 1.0) + phase[k]).sin())
            .sum();
        space * (1.0 + 0.5 * b[0] + 0.5 * b[1] * (std::f64::consts::PI * s / t).cos())
    })
}

/// Relative errors of the residual against central differences of J.
fn gradient_errors(cells: usize, ds: f64, seed: u64) -> Vec<f64> {
    let cfg = preset_config("E1").unwrap();
    let mesh = Mesh::new(cells, ds, cfg.horizon).unwrap();
    let model = Model::new(cfg.model.clone(), mesh.clone()).unwrap();
    let g0 = runner::initial_state(&cfg, &mesh).unwrap();
    let cost = cfg.cost_spec(&mesh).unwrap();
    let u0 = ControlField::zeros(&mesh);
    let traj = forward_solve(&model, &g0, &u0).unwrap();
    let adj = adjoint_solve(&model, &traj, &u0, &cost).unwrap();
    let eps_field = residual_field(&model, &traj, &u0, &adj, &cost);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-4;
    (0..5)
        .map(|_| {
            let du = perturbation(&mesh, &mut rng);
            let jp = cost_of(&model, &g0, &u0.axpy(h, &du), &cost).unwrap();
            let jm = cost_of(&model, &g0, &u0.axpy(-h, &du), &cost).unwrap();
            let fd = (jp - jm) / (2.0 * h);
            ((fd - eps_field.inner(&du, &mesh)) / fd).abs()
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let coarse = gradient_errors(80, 0.125, 4);
    let fine = gradient_errors(160, 0.0625, 4);
    let secs = start.elapsed().as_secs_f64();
    let worst = coarse.iter().copied().fold(0.0, f64::max);
    let (mc, mf) = (median(&coarse), median(&fine));
    let fmt = |v: &[f64]| v.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>().join(" ");
    verdict(
        worst <= 5e-2 && mf < mc && secs < 120.0,
        format!(
            "rel errors L=80 [{}], L=160 [{}], median {mc:.3} -> {mf:.3}, runtime {secs:.1} s",
            fmt(&coarse),
            fmt(&fine)
        ),
    )
}

fn criterion_5(e1: &SweepReport, e3: &SweepReport) -> Verdict {
    let ends = |r: &SweepReport| (r.cost_history[0], *r.cost_history.last().unwrap());
    let (j0, j1) = ends(e1);
    let (k0, k1) = ends(e3);
    verdict(
        j1 < j0 && j1 / j0 <= 0.9 && k1 < k0,
        format!("E1 J {j0:.5} -> {j1:.5} (ratio {:.3}), E3 J {k0:.5} -> {k1:.5}", j1 / j0),
    )
}

fn criterion_6(mesh: &Mesh, e1: &SweepReport) -> Verdict {
    let g = e1.final_state.last();
    let (lo, hi) = (mesh.nearest_node(-0.75), mesh.nearest_node(-0.25));
    assert!((mesh.node(lo) + 0.75).abs() < 1e-12 && (mesh.node(hi) + 0.25).abs() < 1e-12);
    let share = trapz(mesh, &g.gl[lo..=hi]);
    let peaks = interior_maxima(&g.gf);
    let global = (0..g.gf.len()).max_by(|&i, &j| g.gf[i].total_cmp(&g.gf[j])).unwrap();
    let secondary: Vec<f64> = peaks
        .iter()
        .filter(|&&i| i != global && (0.7..=0.9).contains(&mesh.node(i)))
        .map(|&i| mesh.node(i))
        .collect();
    verdict(
        share >= 0.5 && !secondary.is_empty(),
        format!(
            "leader mass in [-0.75, -0.25] = {share:.3}, follower secondary maxima in [0.7, 0.9] at {secondary:?}"
        ),
    )
}

fn criterion_7(mesh: &Mesh, e6: &SweepReport, uncontrolled: &StateTrajectory) -> Verdict {
    let target = build_target_density(mesh).values;
    let ctl = l1(mesh, &e6.final_state.last().gf, &target);
    let unc = l1(mesh, &uncontrolled.last().gf, &target);
    verdict(
        ctl <= 0.8 * unc,
        format!("L1 to g_I: controlled {ctl:.4}, uncontrolled {unc:.4}, ratio {:.3}", ctl / unc),
    )
}

/// Explicit Euler with upwinded drift, nodal drift averaged to the half
/// nodes and conservative central diffusion `(C g)_{i+1} - (C g)_i`.
fn euler_reference(params: &ModelParams, cells: usize, horizon: f64) -> (Mesh, DensityPair) {
    let dw = 2.0 / cells as f64;
    let ds = dw * dw / 10.0;
    let mesh = Mesh::new(cells, ds, horizon).unwrap();
    let n = cells + 1;
    let w: Vec<f64> = (0..n).map(|i| -1.0 + i as f64 * dw).collect();
    let omega: Vec<f64> = (0..n).map(|i| if i == 0 || i == cells { dw / 2.0 } else { dw }).collect();
    let op = |k: &CompromiseKernel, g: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| omega[j] * k.eval(w[i], w[j]) * (w[i] - w[j]) * g[j]).sum())
            .collect()
    };
    let env: Vec<f64> = w.iter().map(|x| (1.0 - x * x).powf(params.d_alpha).powi(2)).collect();
    let cl = params.lambda_l / (2.0 * params.tau_ll);
    let cf = params.lambda_f / (4.0 * params.tau_fl) + params.lambda_f / (2.0 * params.tau_ff);
    let step = |g: &[f64], a: &[f64], c: f64| -> Vec<f64> {
        let mut flux = vec![0.0; n + 1];
        for i in 0..cells {
            let ah = 0.5 * (a[i] + a[i + 1]);
            let adv = if ah > 0.0 { ah * g[i + 1] } else { ah * g[i] };
            flux[i + 1] = adv + c * (env[i + 1] * g[i + 1] - env[i] * g[i]) / dw;
        }
        (0..n).map(|i| g[i] + ds * (flux[i + 1] - flux[i]) / omega[i]).collect()
    };
    let profile: Vec<f64> = w.iter().map(|x| (10.0 * (0.85 - x.abs())).tanh() + 1.0).collect();
    let mass: f64 = profile.iter().zip(&omega).map(|(g, o)| g * o).sum();
    let mut gl: Vec<f64> = profile.iter().map(|g| g / mass).collect();
    let mut gf = gl.clone();
    for _ in 0..mesh.steps() {
        let k = op(&params.kernel_l, &gl);
        let m = op(&params.kernel_lf, &gl);
        let nf = op(&params.kernel_f, &gf);
        let al: Vec<f64> = k.iter().map(|k| k / params.tau_ll).collect();
        let af: Vec<f64> = (0..n)
            .map(|i| params.alpha_lf * (m[i] / (2.0 * params.tau_fl) + nf[i] / params.tau_ff))
            .collect();
        let next_l = step(&gl, &al, cl);
        let next_f = step(&gf, &af, cf);
        gl = next_l;
        gf = next_f;
    }
    (mesh, DensityPair::new(gl, gf))
}

fn forward_vs_reference(cells: usize, horizon: f64) -> f64 {
    let params = ModelParams::default();
    let (mesh, reference) = euler_reference(&params, cells, horizon);
    let model = Model::new(params, mesh.clone()).unwrap();
    let g = initial_density(0.85, 0.0, 10.0, &mesh).unwrap();
    let traj = forward_solve(&model, &DensityPair::new(g.clone(), g), &ControlField::zeros(&mesh)).unwrap();
    let last = traj.last();
    l1(&mesh, &last.gl, &reference.gl).max(l1(&mesh, &last.gf, &reference.gf))
}

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Worst difference between the tridiagonal adjoint step and a dense solve
/// of the same upwind system with Neumann ghost nodes.
fn adjoint_dense_defect(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for cells in [2usize, 5, 10, 20] {
        for _ in 0..20 {
            let mesh = Mesh::new(cells, rng.random_range(0.01..0.5), 1.0).unwrap();
            let n = cells + 1;
            let mut draw = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
            let drift = draw(-3.0, 3.0);
            let diffusion = draw(0.0, 0.5);
            let p_next = draw(-1.0, 1.0);
            let source = draw(-1.0, 1.0);
            let nonlocal = draw(-1.0, 1.0);
            let (dw, ds) = (mesh.dw(), mesh.ds());
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                // ds * (a dp/dw upwinded + C d2p/dw2), ghost p_{-1} = p_0, p_{n} = p_{n-1}
                let fwd = drift[i].max(0.0) * ds / dw;
                let bwd = drift[i].min(0.0) * ds / dw;
                let c = diffusion[i] * ds / (dw * dw);
                let left = if i == 0 { 0 } else { i - 1 };
                let right = if i == n - 1 { n - 1 } else { i + 1 };
                a[i][i] += 1.0;
                a[i][i] += fwd;
                a[i][left] -= fwd;
                a[i][right] += bwd;
                a[i][i] -= bwd;
                a[i][right] -= c;
                a[i][left] -= c;
                a[i][i] += 2.0 * c;
            }
            let b: Vec<f64> = (0..n).map(|i| p_next[i] + ds * (source[i] + nonlocal[i])).collect();
            let dense = dense_solve(a, b);
            let tri = adjoint_species_step(&p_next, &drift, &diffusion, &source, &nonlocal, &mesh).unwrap();
            for (x, y) in dense.iter().zip(&tri) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

fn criterion_8() -> Verdict {
    let coarse = forward_vs_reference(20, 0.1);
    let fine = forward_vs_reference(40, 0.1);
    let defect = adjoint_dense_defect(&mut ChaCha8Rng::seed_from_u64(8));
    verdict(
        coarse <= 5e-2 && fine < coarse && defect <= 1e-12,
        format!("forward vs Euler L1 at T = 0.1: L=20 {coarse:.2e}, L=40 {fine:.2e}; adjoint vs dense {defect:.1e}"),
    )
}

fn criterion_9(mesh: &Mesh, traj: &StateTrajectory) -> Verdict {
    let params = ModelParams::default();
    let kinetic = KineticParams::from_model(&params, 0.01).unwrap();
    let ensemble = Ensemble::from_profile(100_000, 100_000, 0.85, 0.0, 10.0, 9).unwrap();
    let start = Instant::now();
    let run = mc_run(&kinetic, &ensemble, mesh.horizon(), mesh, &[mesh.horizon()], None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = l1(mesh, &run.histograms[0].gf, &traj.last().gf);
    verdict(
        err <= 0.1 && secs < 300.0,
        format!("L1(g_F MC, g_F FP) at T = {err:.4}, {} steps, runtime {secs:.1} s", run.steps),
    )
}

fn random_pair(n: usize, rng: &mut ChaCha8Rng) -> DensityPair {
    let mut v = || (0..n).map(|_| rng.random_range(0.1..2.0)).collect::<Vec<f64>>();
    DensityPair::new(v(), v())
}

fn rel(fd: f64, exact: f64, scale: f64) -> f64 {
    (fd - exact).abs() / exact.abs().max(1e-3 * scale).max(1e-300)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Worst relative error of the running/terminal derivatives against
/// central differences of `eval_cost`, one entry at a time.
fn cost_derivative_errors(cost: &CostSpec, mesh: &Mesh, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let n = mesh.node_count();
    let q = mesh.steps();
    let traj = StateTrajectory {
        densities: (0..=q).map(|_| random_pair(n, rng)).collect(),
    };
    let rows: Vec<Vec<f64>> = (0..=q).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let u = ControlField::from_rows(rows.clone(), mesh).unwrap();
    let h = 1e-5;
    let j = |traj: &StateTrajectory, u: &ControlField| eval_cost(cost, traj, u, mesh).unwrap();
    let mut errs = [0.0f64; 3];
    for t in 0..=q {
        let g = &traj.densities[t];
        let (dl, df) = grad_g_running(cost, g, &rows[t], mesh);
        let du = grad_u_running(cost, g, &rows[t]);
        let fin = final_condition(cost, g);
        let wt = mesh.time_weight(t);
        let scale_g = max_abs(&dl).max(max_abs(&df));
        let scale_f = max_abs(&fin.pl).max(max_abs(&fin.pf));
        for i in 0..n {
            let wi = mesh.weight(i);
            for species in 0..2 {
                let bump = |sign: f64| {
                    let mut tr = traj.clone();
                    let v = if species == 0 { &mut tr.densities[t].gl } else { &mut tr.densities[t].gf };
                    v[i] += sign * h;
                    j(&tr, &u)
                };
                let fd = (bump(1.0) - bump(-1.0)) / (2.0 * h) / wi;
                let running = if species == 0 { dl[i] } else { df[i] };
                if t < q {
                    errs[0] = errs[0].max(rel(fd / wt, running, scale_g));
                } else {
                    let terminal = if species == 0 { fin.pl[i] } else { fin.pf[i] };
                    errs[2] = errs[2].max(rel(fd - wt * running, terminal, scale_f.max(wt * scale_g)));
                }
            }
            let bump = |sign: f64| {
                let mut r = rows.clone();
                r[t][i] += sign * h;
                j(&traj, &ControlField::from_rows(r, mesh).unwrap())
            };
            let fd = (bump(1.0) - bump(-1.0)) / (2.0 * h) / (wi * wt);
            errs[1] = errs[1].max(rel(fd, du[i], max_abs(&du)));
        }
    }
    errs
}

fn criterion_10() -> Verdict {
    let mesh = Mesh::new(10, 0.25, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let target = random_pair(mesh.node_count(), &mut rng);
    let costs = [
        CostSpec::CentringBoth { w_dl: -0.5, w_df: 0.3, beta: 0.05 },
        CostSpec::CentringFollower { w_df: -0.5, beta: 0.2 },
        CostSpec::FinalTimeBoth { target: target.clone(), beta: 0.05 },
        CostSpec::FinalTimeFollower { target: target.gf.clone(), beta: 0.3 },
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for cost in &costs {
        let e = cost_derivative_errors(cost, &mesh, &mut rng);
        worst = e.iter().copied().fold(worst, f64::max);
        parts.push(format!("{} {:.1e}/{:.1e}/{:.1e}", cost.name(), e[0], e[1], e[2]));
    }
    verdict(worst <= 1e-6, format!("max rel error (g/u/final): {}", parts.join(", ")))
}

fn main() -> ExitCode {
    let (mesh0, e0, elapsed) = forward("E0");
    let (mesh1, e1) = optimize("E1");
    let (_, e3) = optimize("E3");
    let (mesh6, e6) = optimize("E6");
    let results = [
        (1, "conservation and positivity", criterion_1(&mesh0, &e0, elapsed)),
        (2, "symmetry", criterion_2(&e0)),
        (3, "uncontrolled clustering", criterion_3(&mesh0, &e0)),
        (4, "gradient correctness", criterion_4()),
        (5, "descent", criterion_5(&e1, &e3)),
        (6, "controlled concentration", criterion_6(&mesh1, &e1)),
        (7, "target tracking", criterion_7(&mesh6, &e6, &e0)),
        (8, "oracle equivalence", criterion_8()),
        (9, "kinetic limit", criterion_9(&mesh0, &e0)),
        (10, "derivative-object consistency", criterion_10()),
    ];
    let mut failed = 0;
    for (n, name, v) in &results {
        println!("{} criterion {n} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
