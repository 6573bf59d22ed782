//! CSV and manifest output.
//!
//! Numbers are written with 17 significant digits so reading a file back
//! reproduces the in-memory values bit for bit. All files are rendered in
//! memory before the first one is written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

use super::config::ExperimentConfig;
use super::Outcome;

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Time nodes closest to `{0, T/4, T/2, 3T/4, T}`.
pub fn snapshot_indices(mesh: &Mesh) -> Vec<usize> {
    let q = mesh.steps();
    let mut idx: Vec<usize> = (0..=4).map(|k| (k * q + 2) / 4).collect();
    idx.dedup();
    idx
}

fn profile_csv(header: &str, mesh: &Mesh, a: &[f64], b: &[f64]) -> String {
    let mut s = String::with_capacity(64 * mesh.node_count());
    s.push_str(header);
    s.push('\n');
    for (i, w) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", fmt_num(*w), fmt_num(a[i]), fmt_num(b[i]));
    }
    s
}

/// File name and contents of every output of `outcome`, manifest last.
pub fn render_outputs(outcome: &Outcome, cfg: &ExperimentConfig, mesh: &Mesh) -> Result<Vec<(String, String)>> {
    let snaps = snapshot_indices(mesh);
    let mut files = Vec::new();
    let mut summary = Vec::new();
    match outcome {
        Outcome::Forward { trajectory } => {
            if trajectory.is_empty() {
                return Err(Error::EmptyOutput("state trajectory"));
            }
            for &t in &snaps {
                let g = trajectory
                    .densities
                    .get(t)
                    .ok_or(Error::EmptyOutput("state snapshot"))?;
                files.push((format!("state_{t}.csv"), profile_csv("w,g_L,g_F", mesh, &g.gl, &g.gf)));
            }
        }
        Outcome::Sweep { report } => {
            if report.final_state.is_empty() || report.cost_history.is_empty() {
                return Err(Error::EmptyOutput("sweep report"));
            }
            for &t in &snaps {
                let g = report
                    .final_state
                    .densities
                    .get(t)
                    .ok_or(Error::EmptyOutput("state snapshot"))?;
                files.push((format!("state_{t}.csv"), profile_csv("w,g_L,g_F", mesh, &g.gl, &g.gf)));
            }
            let mut control = String::from("t,w,u\n");
            for (t, row) in report.final_control.rows().iter().enumerate() {
                let s = fmt_num(mesh.time(t));
                for (w, u) in mesh.nodes().iter().zip(row) {
                    let _ = writeln!(control, "{s},{},{}", fmt_num(*w), fmt_num(*u));
                }
            }
            files.push(("control.csv".into(), control));
            let mut history = String::from("sweep,J\n");
            for (n, j) in report.cost_history.iter().enumerate() {
                let _ = writeln!(history, "{n},{}", fmt_num(*j));
            }
            files.push(("cost_history.csv".into(), history));
            if cfg.write_adjoint {
                for &t in &snaps {
                    let p = &report.final_adjoint.adjoints[t];
                    files.push((format!("adjoint_{t}.csv"), profile_csv("w,p_L,p_F", mesh, &p.pl, &p.pf)));
                }
            }
            summary.push(format!("iterations = {}", report.iterations));
            summary.push(format!("converged = {}", report.converged));
            summary.push(format!("final_nu = {}", report.final_nu));
        }
        Outcome::Kinetic { run } => {
            if run.histograms.is_empty() {
                return Err(Error::EmptyOutput("kinetic histograms"));
            }
            for (h, &t) in run.histograms.iter().zip(&snaps) {
                files.push((format!("mc_{t}.csv"), profile_csv("w,g_L,g_F", mesh, &h.gl, &h.gf)));
            }
            summary.push(format!("steps = {}", run.steps));
            summary.push(format!("dt = {}", run.dt));
            summary.push(format!("rejections = {}", run.rejections));
        }
    }

    let mut manifest = String::from("# leadfollow run manifest\n");
    for line in &summary {
        let _ = writeln!(manifest, "# {line}");
    }
    manifest.push_str(&cfg.render());
    for (name, body) in &files {
        let digest = Sha256::digest(body.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let _ = writeln!(manifest, "# sha256 {hex}  {name}");
    }
    files.push(("manifest.txt".into(), manifest));
    Ok(files)
}

/// Renders and writes all outputs of `outcome` into `dir`.
pub fn write_outputs(outcome: &Outcome, cfg: &ExperimentConfig, mesh: &Mesh, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = render_outputs(outcome, cfg, mesh)?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a three-column profile file (`w,g_L,g_F` or `w,p_L,p_F`).
pub fn read_profile_csv(path: &Path) -> Result<[Vec<f64>; 3]> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cols: [Vec<f64>; 3] = Default::default();
    for (n, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::ConfigParse {
                line: n + 1,
                reason: format!("{}: expected 3 columns", path.display()),
            });
        }
        for (col, f) in cols.iter_mut().zip(fields) {
            col.push(f.parse().map_err(|_| Error::ConfigParse {
                line: n + 1,
                reason: format!("{}: bad number `{f}`", path.display()),
            })?);
        }
    }
    Ok(cols)
}
