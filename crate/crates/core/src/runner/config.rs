//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! ```text
//! preset = E1        # optional, must come before any section
//! [mesh]
//! L = 80
//! [model]
//! kernel_LF = sznajd(-1)
//! ```
//!
//! Every resolved field carries a [`Source`] so the manifest can say where
//! its value came from.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::cost::{build_target_density, CostSpec};
use crate::error::{Error, Result};
use crate::forward::DensityPair;
use crate::kernels::{CompromiseKernel, ModelParams};
use crate::mesh::Mesh;
use crate::sweep::SweepOptions;

use super::presets;

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Default,
    Preset(String),
    User { line: usize },
    Cli,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Default => write!(f, "default"),
            Source::Preset(name) => write!(f, "preset {name}"),
            Source::User { line } => write!(f, "user (line {line})"),
            Source::Cli => write!(f, "command line"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    CentringBoth,
    CentringFollower,
    FinalTimeBoth,
    FinalTimeFollower,
}

impl CostKind {
    fn parse(s: &str) -> Option<Option<Self>> {
        Some(match s {
            "none" => None,
            "centring_both" => Some(CostKind::CentringBoth),
            "centring_follower" => Some(CostKind::CentringFollower),
            "final_time_both" => Some(CostKind::FinalTimeBoth),
            "final_time_follower" => Some(CostKind::FinalTimeFollower),
            _ => return None,
        })
    }

    fn name(kind: Option<Self>) -> &'static str {
        match kind {
            None => "none",
            Some(CostKind::CentringBoth) => "centring_both",
            Some(CostKind::CentringFollower) => "centring_follower",
            Some(CostKind::FinalTimeBoth) => "final_time_both",
            Some(CostKind::FinalTimeFollower) => "final_time_follower",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub cells: usize,
    pub ds_factor: f64,
    pub horizon: f64,
    pub model: ModelParams,
    pub radius: f64,
    pub centre: f64,
    pub steepness: f64,
    pub cost: Option<CostKind>,
    pub w_dl: f64,
    pub w_df: f64,
    pub beta: f64,
    pub sweep: SweepOptions,
    pub gamma_l: f64,
    pub agents: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub write_adjoint: bool,
    provenance: BTreeMap<&'static str, Source>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut cfg = Self {
            preset: None,
            cells: 80,
            ds_factor: 5.0,
            horizon: 10.0,
            model: ModelParams::default(),
            radius: 0.85,
            centre: 0.0,
            steepness: 10.0,
            cost: None,
            w_dl: -0.5,
            w_df: -0.5,
            beta: 0.05,
            sweep: SweepOptions::default(),
            gamma_l: 0.01,
            agents: 100_000,
            seed: 1,
            out_dir: PathBuf::from("out"),
            write_adjoint: false,
            provenance: BTreeMap::new(),
        };
        for key in KEYS {
            cfg.provenance.insert(key, Source::Default);
        }
        cfg
    }
}

/// Every accepted key, as `section.key`.
pub const KEYS: [&str; 30] = [
    "mesh.L",
    "mesh.ds_factor",
    "mesh.T",
    "model.tau_LL",
    "model.tau_FL",
    "model.tau_FF",
    "model.lambda_L",
    "model.lambda_F",
    "model.alpha_LF",
    "model.D_alpha",
    "model.kernel_L",
    "model.kernel_F",
    "model.kernel_LF",
    "initial.R",
    "initial.c",
    "initial.k",
    "cost.kind",
    "cost.w_dL",
    "cost.w_dF",
    "cost.beta",
    "sweep.nu",
    "sweep.tol",
    "sweep.max_iter",
    "sweep.M",
    "sweep.backstop",
    "kinetic.gamma_L",
    "kinetic.agents",
    "kinetic.seed",
    "output.dir",
    "output.adjoint",
];

fn bad(line: usize, reason: impl Into<String>) -> Error {
    Error::ConfigParse {
        line,
        reason: reason.into(),
    }
}

fn number<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| bad(line, format!("`{key}`: cannot parse `{value}`")))
}

fn boolean(value: &str, line: usize, key: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(bad(line, format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

impl ExperimentConfig {
    pub fn provenance(&self, key: &str) -> Option<&Source> {
        self.provenance.get(key)
    }

    pub fn keys() -> impl Iterator<Item = &'static str> {
        KEYS.iter().copied()
    }

    /// Sets `section.key` from its textual value.
    pub fn set(&mut self, key: &str, value: &str, source: Source) -> Result<()> {
        let line = match source {
            Source::User { line } => line,
            _ => 0,
        };
        let canonical = Self::keys()
            .find(|k| *k == key)
            .ok_or_else(|| bad(line, format!("unknown key `{key}`")))?;
        let m = &mut self.model;
        match canonical {
            "mesh.L" => self.cells = number(value, line, key)?,
            "mesh.ds_factor" => self.ds_factor = number(value, line, key)?,
            "mesh.T" => self.horizon = number(value, line, key)?,
            "model.tau_LL" => m.tau_ll = number(value, line, key)?,
            "model.tau_FL" => m.tau_fl = number(value, line, key)?,
            "model.tau_FF" => m.tau_ff = number(value, line, key)?,
            "model.lambda_L" => m.lambda_l = number(value, line, key)?,
            "model.lambda_F" => m.lambda_f = number(value, line, key)?,
            "model.alpha_LF" => m.alpha_lf = number(value, line, key)?,
            "model.D_alpha" => m.d_alpha = number(value, line, key)?,
            "model.kernel_L" => m.kernel_l = kernel(value, line)?,
            "model.kernel_F" => m.kernel_f = kernel(value, line)?,
            "model.kernel_LF" => m.kernel_lf = kernel(value, line)?,
            "initial.R" => self.radius = number(value, line, key)?,
            "initial.c" => self.centre = number(value, line, key)?,
            "initial.k" => self.steepness = number(value, line, key)?,
            "cost.kind" => {
                self.cost = CostKind::parse(value).ok_or_else(|| bad(line, format!("unknown cost kind `{value}`")))?
            }
            "cost.w_dL" => self.w_dl = number(value, line, key)?,
            "cost.w_dF" => self.w_df = number(value, line, key)?,
            "cost.beta" => self.beta = number(value, line, key)?,
            "sweep.nu" => self.sweep.nu = number(value, line, key)?,
            "sweep.tol" => self.sweep.tol = number(value, line, key)?,
            "sweep.max_iter" => self.sweep.max_iter = number(value, line, key)?,
            "sweep.M" => {
                self.sweep.clamp = match value {
                    "none" => None,
                    v => Some(number(v, line, key)?),
                }
            }
            "sweep.backstop" => self.sweep.backstop = boolean(value, line, key)?,
            "kinetic.gamma_L" => self.gamma_l = number(value, line, key)?,
            "kinetic.agents" => self.agents = number(value, line, key)?,
            "kinetic.seed" => self.seed = number(value, line, key)?,
            "output.dir" => self.out_dir = PathBuf::from(value),
            "output.adjoint" => self.write_adjoint = boolean(value, line, key)?,
            _ => unreachable!("key table out of sync: {canonical}"),
        }
        self.provenance.insert(canonical, source);
        Ok(())
    }

    /// Textual value of `section.key`, in a form [`set`](Self::set) accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        let m = &self.model;
        Some(match key {
            "mesh.L" => self.cells.to_string(),
            "mesh.ds_factor" => self.ds_factor.to_string(),
            "mesh.T" => self.horizon.to_string(),
            "model.tau_LL" => m.tau_ll.to_string(),
            "model.tau_FL" => m.tau_fl.to_string(),
            "model.tau_FF" => m.tau_ff.to_string(),
            "model.lambda_L" => m.lambda_l.to_string(),
            "model.lambda_F" => m.lambda_f.to_string(),
            "model.alpha_LF" => m.alpha_lf.to_string(),
            "model.D_alpha" => m.d_alpha.to_string(),
            "model.kernel_L" => m.kernel_l.to_string(),
            "model.kernel_F" => m.kernel_f.to_string(),
            "model.kernel_LF" => m.kernel_lf.to_string(),
            "initial.R" => self.radius.to_string(),
            "initial.c" => self.centre.to_string(),
            "initial.k" => self.steepness.to_string(),
            "cost.kind" => CostKind::name(self.cost).to_string(),
            "cost.w_dL" => self.w_dl.to_string(),
            "cost.w_dF" => self.w_df.to_string(),
            "cost.beta" => self.beta.to_string(),
            "sweep.nu" => self.sweep.nu.to_string(),
            "sweep.tol" => self.sweep.tol.to_string(),
            "sweep.max_iter" => self.sweep.max_iter.to_string(),
            "sweep.M" => self.sweep.clamp.map_or("none".to_string(), |m| m.to_string()),
            "sweep.backstop" => self.sweep.backstop.to_string(),
            "kinetic.gamma_L" => self.gamma_l.to_string(),
            "kinetic.agents" => self.agents.to_string(),
            "kinetic.seed" => self.seed.to_string(),
            "output.dir" => self.out_dir.display().to_string(),
            "output.adjoint" => self.write_adjoint.to_string(),
            _ => return None,
        })
    }

    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::with_ds_factor(self.cells, self.ds_factor, self.horizon).map_err(|e| invalid_field("mesh", e))
    }

    /// The configured cost functional, with the tracking target built on `mesh`.
    pub fn cost_spec(&self, mesh: &Mesh) -> Option<CostSpec> {
        let beta = self.beta;
        self.cost.map(|kind| match kind {
            CostKind::CentringBoth => CostSpec::CentringBoth {
                w_dl: self.w_dl,
                w_df: self.w_df,
                beta,
            },
            CostKind::CentringFollower => CostSpec::CentringFollower { w_df: self.w_df, beta },
            CostKind::FinalTimeBoth => {
                let t = build_target_density(mesh).values;
                CostSpec::FinalTimeBoth {
                    target: DensityPair::new(t.clone(), t),
                    beta,
                }
            }
            CostKind::FinalTimeFollower => CostSpec::FinalTimeFollower {
                target: build_target_density(mesh).values,
                beta,
            },
        })
    }

    /// Checks every field; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let mesh = self.mesh()?;
        self.model.validate().map_err(|e| invalid_field("model", e))?;
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return Err(field_error("initial.R", format!("{} not in (0, 1)", self.radius)));
        }
        if !(-1.0..=1.0).contains(&self.centre) {
            return Err(field_error("initial.c", format!("{} not in [-1, 1]", self.centre)));
        }
        if !(self.steepness > 0.0) || !self.steepness.is_finite() {
            return Err(field_error("initial.k", format!("{} must be positive", self.steepness)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(field_error("cost.beta", format!("{} must be positive", self.beta)));
        }
        for (key, w) in [("cost.w_dL", self.w_dl), ("cost.w_dF", self.w_df)] {
            if !(-1.0..=1.0).contains(&w) {
                return Err(field_error(key, format!("{w} not in [-1, 1]")));
            }
        }
        if let Some(spec) = self.cost_spec(&mesh) {
            spec.validate(&mesh).map_err(|e| invalid_field("cost", e))?;
        }
        self.sweep.validate().map_err(|e| invalid_field("sweep", e))?;
        if !(0.0..0.5).contains(&self.gamma_l) || self.gamma_l == 0.0 {
            return Err(field_error("kinetic.gamma_L", format!("{} not in (0, 1/2)", self.gamma_l)));
        }
        if !(0.0..0.5).contains(&(self.model.alpha_lf * self.gamma_l)) {
            return Err(field_error("kinetic.gamma_L", "alpha_LF * gamma_L must stay below 1/2".to_string()));
        }
        if self.agents == 0 {
            return Err(field_error("kinetic.agents", "must be positive".to_string()));
        }
        Ok(())
    }

    /// The resolved configuration in the input format, each line annotated
    /// with its provenance.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.preset {
            out.push_str(&format!("preset = {p}\n"));
        }
        let mut section = "";
        for key in Self::keys() {
            let (sec, name) = key.split_once('.').expect("keys are section-qualified");
            if sec != section {
                out.push_str(&format!("[{sec}]\n"));
                section = sec;
            }
            let src = self.provenance.get(key).cloned().unwrap_or(Source::Default);
            let value = self.get(key).expect("every key has a value");
            out.push_str(&format!("{name} = {value}  # {src}\n"));
        }
        out
    }
}

fn kernel(value: &str, line: usize) -> Result<CompromiseKernel> {
    value.parse().map_err(|e: String| bad(line, e))
}

fn field_error(field: &str, reason: String) -> Error {
    Error::ConfigInvalid {
        field: field.to_string(),
        reason,
    }
}

fn invalid_field(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::ConfigInvalid {
            field: format!("{section}.{name}"),
            reason,
        },
        other => Error::ConfigInvalid {
            field: section.to_string(),
            reason: other.to_string(),
        },
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(head, _)| head).trim()
}

/// Parses configuration text. An optional `preset = <name>` line before the
/// first section selects the starting point; everything else overrides it.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries = Vec::new();
    let mut preset = None;
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| bad(line, "unterminated section header"))?
                .trim();
            if !KEYS.iter().any(|k| k.split_once('.').is_some_and(|(s, _)| s == name)) {
                return Err(bad(line, format!("unknown section `[{name}]`")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| bad(line, format!("expected `key = value`, got `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(bad(line, "empty key or value"));
        }
        match &section {
            None if key == "preset" => {
                if preset.is_some() {
                    return Err(bad(line, "preset given twice"));
                }
                preset = Some(value.to_string());
            }
            None => return Err(bad(line, format!("`{key}` appears before any [section]"))),
            Some(sec) => entries.push((format!("{sec}.{key}"), value.to_string(), line)),
        }
    }

    let mut cfg = match preset {
        Some(name) => presets::preset_config(&name)?,
        None => ExperimentConfig::default(),
    };
    let mut seen = BTreeMap::new();
    for (key, value, line) in entries {
        if let Some(first) = seen.insert(key.clone(), line) {
            return Err(bad(line, format!("`{key}` already set on line {first}")));
        }
        cfg.set(&key, &value, Source::User { line })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}
