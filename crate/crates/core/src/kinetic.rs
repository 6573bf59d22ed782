//! Monte Carlo simulation of the binary leader/follower interactions.
//!
//! Each agent decides independently per step whether to interact, picks a
//! partner uniformly at random (with replacement) from the snapshot of the
//! previous step and applies a one-sided update. Time is reported in the
//! scaled variable `s = gamma_L * t` so histograms can be compared with
//! [`forward_solve`](crate::forward_solve) output.

use log::debug;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{diffusion_envelope, CompromiseKernel, ModelParams};
use crate::mesh::Mesh;
use crate::sweep::ControlField;

/// Draws per noise sample before giving up.
pub const REJECTION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub leaders: Vec<f64>,
    pub followers: Vec<f64>,
    pub rng_seed: u64,
}

impl Ensemble {
    pub fn new(leaders: Vec<f64>, followers: Vec<f64>, rng_seed: u64) -> Result<Self> {
        let e = Self {
            leaders,
            followers,
            rng_seed,
        };
        e.validate()?;
        Ok(e)
    }

    /// `n` agents per species drawn by rejection from the plateau profile
    /// `tanh(k (R - |w - c|)) + 1`.
    pub fn from_profile(n_leaders: usize, n_followers: usize, radius: f64, centre: f64, k: f64, seed: u64) -> Result<Self> {
        if !(radius > 0.0 && radius < 1.0) || !(-1.0..=1.0).contains(&centre) || !(k > 0.0) {
            return Err(Error::invalid("profile", format!("R={radius}, c={centre}, k={k}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = |w: f64| (k * (radius - (w - centre).abs())).tanh() + 1.0;
        let mut draw = |n: usize| -> Vec<f64> {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let w: f64 = rng.random_range(-1.0..=1.0);
                if 2.0 * rng.random::<f64>() < profile(w) {
                    out.push(w);
                }
            }
            out
        };
        let leaders = draw(n_leaders);
        let followers = draw(n_followers);
        Self::new(leaders, followers, seed.wrapping_add(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.leaders.is_empty() {
            return Err(Error::EmptySpecies("leader"));
        }
        if self.followers.is_empty() {
            return Err(Error::EmptySpecies("follower"));
        }
        for &w in self.leaders.iter().chain(&self.followers) {
            if !(-1.0..=1.0).contains(&w) {
                return Err(Error::OutOfDomain {
                    value: w,
                    interaction: "initial",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticParams {
    pub gamma_l: f64,
    pub gamma_f: f64,
    pub sigma_l: f64,
    pub sigma_f: f64,
    pub kernel_l: CompromiseKernel,
    pub kernel_f: CompromiseKernel,
    pub kernel_lf: CompromiseKernel,
    pub d_alpha: f64,
    /// Leader-leader frequency `1/tau_LL`.
    pub freq_ll: f64,
    /// Follower-follower frequency `1/tau_FF`.
    pub freq_ff: f64,
    /// Leader-follower frequency `1/tau_FL`.
    pub freq_fl: f64,
    pub dt: f64,
}

impl KineticParams {
    /// Microscopic parameters whose quasi-invariant limit is `params`:
    /// `gamma_F = alpha_LF gamma_L`, `sigma_nu^2 = lambda_nu gamma_L`.
    pub fn from_model(params: &ModelParams, gamma_l: f64) -> Result<Self> {
        params.validate()?;
        let freq_ll = 1.0 / params.tau_ll;
        let freq_ff = 1.0 / params.tau_ff;
        let freq_fl = 1.0 / params.tau_fl;
        let kp = Self {
            gamma_l,
            gamma_f: params.alpha_lf * gamma_l,
            sigma_l: (params.lambda_l * gamma_l).sqrt(),
            sigma_f: (params.lambda_f * gamma_l).sqrt(),
            kernel_l: params.kernel_l,
            kernel_f: params.kernel_f,
            kernel_lf: params.kernel_lf,
            d_alpha: params.d_alpha,
            freq_ll,
            freq_ff,
            freq_fl,
            dt: 0.5 / (freq_ll + freq_fl).max(freq_ff + 0.5 * freq_fl),
        };
        kp.validate()?;
        Ok(kp)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("gamma_L", self.gamma_l), ("gamma_F", self.gamma_f)] {
            if !(0.0..0.5).contains(&g) {
                return Err(Error::invalid(name, format!("{g} not in [0, 1/2)")));
            }
        }
        for (name, s) in [("sigma_L", self.sigma_l), ("sigma_F", self.sigma_f)] {
            if !(0.0..1.0).contains(&s) {
                return Err(Error::invalid(name, format!("{s} not in [0, 1)")));
            }
        }
        for (name, f) in [("freq_LL", self.freq_ll), ("freq_FF", self.freq_ff), ("freq_FL", self.freq_fl)] {
            if !(f >= 0.0) || !f.is_finite() {
                return Err(Error::invalid(name, format!("{f} is not a frequency")));
            }
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", format!("{} must be positive", self.dt)));
        }
        if (self.freq_ll + self.freq_fl) * self.dt > 1.0 || (self.freq_ff + 0.5 * self.freq_fl) * self.dt > 1.0 {
            return Err(Error::invalid("dt", format!("{} makes an interaction probability exceed 1", self.dt)));
        }
        for k in [&self.kernel_l, &self.kernel_f, &self.kernel_lf] {
            k.validate()?;
        }
        if !(self.d_alpha > 0.0) {
            return Err(Error::invalid("d_alpha", "must be positive"));
        }
        Ok(())
    }
}

fn compromise(w: f64, v: f64, gamma: f64, kernel: &CompromiseKernel) -> f64 {
    w + gamma * kernel.eval(w, v) * (v - w)
}

fn in_domain(w: f64, interaction: &'static str) -> Result<f64> {
    if (-1.0..=1.0).contains(&w) {
        Ok(w)
    } else {
        Err(Error::OutOfDomain { value: w, interaction })
    }
}

/// Leader-leader rule: `w* = w + gamma P(w,v)(v-w) + eta_w D(w) + gamma u(w) / 2`.
pub fn interact_ll(
    w: f64,
    v: f64,
    gamma_l: f64,
    kernel: &CompromiseKernel,
    eta: (f64, f64),
    u: (f64, f64),
    d_alpha: f64,
) -> Result<(f64, f64)> {
    let ws = compromise(w, v, gamma_l, kernel) + eta.0 * diffusion_envelope(w, d_alpha) + 0.5 * gamma_l * u.0;
    let vs = compromise(v, w, gamma_l, kernel) + eta.1 * diffusion_envelope(v, d_alpha) + 0.5 * gamma_l * u.1;
    Ok((in_domain(ws, "leader-leader")?, in_domain(vs, "leader-leader")?))
}

/// Leader-follower rule; the leader is unaffected.
pub fn interact_lf(
    w_l: f64,
    w_f: f64,
    gamma_f: f64,
    kernel: &CompromiseKernel,
    eta: f64,
    d_alpha: f64,
) -> Result<(f64, f64)> {
    let ws = compromise(w_f, w_l, gamma_f, kernel) + eta * diffusion_envelope(w_f, d_alpha);
    Ok((w_l, in_domain(ws, "leader-follower")?))
}

pub fn interact_ff(
    w: f64,
    v: f64,
    gamma_f: f64,
    kernel: &CompromiseKernel,
    eta: (f64, f64),
    d_alpha: f64,
) -> Result<(f64, f64)> {
    let ws = compromise(w, v, gamma_f, kernel) + eta.0 * diffusion_envelope(w, d_alpha);
    let vs = compromise(v, w, gamma_f, kernel) + eta.1 * diffusion_envelope(v, d_alpha);
    Ok((in_domain(ws, "follower-follower")?, in_domain(vs, "follower-follower")?))
}

/// Uniform noise on `[-sqrt(3) sigma, sqrt(3) sigma]`, redrawn until
/// `base + eta * envelope` lies in `[-1, 1]`. Returns the draw and the number
/// of rejections.
pub fn sample_eta<R: Rng + ?Sized>(sigma: f64, base: f64, envelope: f64, rng: &mut R) -> Result<(f64, usize)> {
    if sigma == 0.0 {
        return Ok((0.0, 0));
    }
    let half = 3f64.sqrt() * sigma;
    for attempt in 0..REJECTION_CAP {
        let eta = rng.random_range(-half..=half);
        if (-1.0..=1.0).contains(&(base + eta * envelope)) {
            return Ok((eta, attempt));
        }
    }
    Err(Error::RejectionCap { attempts: REJECTION_CAP })
}

/// Density-normalised nodal histograms at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// Scaled time `s`.
    pub time: f64,
    pub gl: Vec<f64>,
    pub gf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticRun {
    pub histograms: Vec<Histogram>,
    pub final_ensemble: Ensemble,
    pub steps: usize,
    pub dt: f64,
    pub rejections: usize,
}

/// Node-centred bins `[w_i - dw/2, w_i + dw/2]`, halved at the ends, so the
/// trapezoid mass of the result is exactly one.
pub fn histogram(samples: &[f64], mesh: &Mesh) -> Vec<f64> {
    let mut counts = vec![0usize; mesh.node_count()];
    for &w in samples {
        counts[mesh.nearest_node(w)] += 1;
    }
    let n = samples.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 / (n * mesh.weight(i)))
        .collect()
}

/// Control at scaled time `s`: nearest time node, linear in `w`.
fn control_at(u: &ControlField, mesh: &Mesh, s: f64, w: f64) -> f64 {
    let t = ((s / mesh.ds()).round() as usize).min(mesh.steps());
    let row = u.slice(t);
    let x = ((w + 1.0) / mesh.dw()).clamp(0.0, mesh.cells() as f64);
    let i = (x.floor() as usize).min(mesh.cells() - 1);
    let f = x - i as f64;
    (1.0 - f) * row[i] + f * row[i + 1]
}

/// Simulates up to scaled time `horizon` and records histograms at each of
/// `output_times` (scaled, nondecreasing, within the horizon). The control,
/// if any, enters the leader rule literally as `+gamma_L u / 2`.
pub fn mc_run(
    params: &KineticParams,
    ensemble0: &Ensemble,
    horizon: f64,
    mesh: &Mesh,
    output_times: &[f64],
    control: Option<&ControlField>,
) -> Result<KineticRun> {
    params.validate()?;
    ensemble0.validate()?;
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("horizon", format!("{horizon} must be nonnegative")));
    }
    if output_times.windows(2).any(|p| p[1] < p[0]) || output_times.iter().any(|&s| !(0.0..=horizon).contains(&s)) {
        return Err(Error::invalid("output_times", "must be sorted and within the horizon"));
    }
    if let Some(u) = control {
        u.check_shape(mesh)?;
    }

    let (steps, dt) = if params.gamma_l > 0.0 && horizon > 0.0 {
        let t_end = horizon / params.gamma_l;
        let steps = (t_end / params.dt).ceil() as usize;
        (steps, t_end / steps as f64)
    } else {
        (0, params.dt)
    };
    let ds = params.gamma_l * dt;

    let mut rng = ChaCha8Rng::seed_from_u64(ensemble0.rng_seed);
    let mut leaders = ensemble0.leaders.clone();
    let mut followers = ensemble0.followers.clone();
    let (mut prev_l, mut prev_f) = (leaders.clone(), followers.clone());
    let p_ll = params.freq_ll * dt;
    let p_ff = params.freq_ff * dt;
    let p_fl = 0.5 * params.freq_fl * dt;
    let d_alpha = params.d_alpha;
    let mut rejections = 0;
    let mut histograms = Vec::with_capacity(output_times.len());
    let mut next_out = 0;

    for step in 0..=steps {
        let s = step as f64 * ds;
        while next_out < output_times.len() && (step == steps || output_times[next_out] <= s + 0.5 * ds) {
            histograms.push(Histogram {
                time: s,
                gl: histogram(&leaders, mesh),
                gf: histogram(&followers, mesh),
            });
            next_out += 1;
        }
        if step == steps {
            break;
        }
        prev_l.copy_from_slice(&leaders);
        prev_f.copy_from_slice(&followers);

        for w in leaders.iter_mut() {
            // The leader-follower channel (probability b dt) leaves leaders unchanged.
            if rng.random::<f64>() >= p_ll {
                continue;
            }
            let v = prev_l[rng.random_range(0..prev_l.len())];
            let uw = control.map_or(0.0, |u| control_at(u, mesh, s, *w));
            let base = compromise(*w, v, params.gamma_l, &params.kernel_l) + 0.5 * params.gamma_l * uw;
            in_domain(base, "leader-leader")?;
            let env = diffusion_envelope(*w, d_alpha);
            let (eta, r) = sample_eta(params.sigma_l, base, env, &mut rng)?;
            rejections += r;
            *w = base + eta * env;
        }
        for w in followers.iter_mut() {
            let x = rng.random::<f64>();
            let (base, what) = if x < p_ff {
                let v = prev_f[rng.random_range(0..prev_f.len())];
                (compromise(*w, v, params.gamma_f, &params.kernel_f), "follower-follower")
            } else if x < p_ff + p_fl {
                let v = prev_l[rng.random_range(0..prev_l.len())];
                (compromise(*w, v, params.gamma_f, &params.kernel_lf), "leader-follower")
            } else {
                continue;
            };
            in_domain(base, what)?;
            let env = diffusion_envelope(*w, d_alpha);
            let (eta, r) = sample_eta(params.sigma_f, base, env, &mut rng)?;
            rejections += r;
            *w = base + eta * env;
        }
    }
    debug!("kinetic run: {steps} steps of dt={dt}, {rejections} noise rejections");

    Ok(KineticRun {
        histograms,
        final_ensemble: Ensemble {
            leaders,
            followers,
            rng_seed: ensemble0.rng_seed,
        },
        steps,
        dt,
        rejections,
    })
}
