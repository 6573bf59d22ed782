use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use leadfollow::runner::{
    self, load_config, parse_config, preset_config, write_outputs, ExperimentConfig, Outcome, Source,
};
use leadfollow::Error;

/// Leader-follower opinion dynamics: forward solves, optimal control sweeps
/// and kinetic Monte Carlo runs.
#[derive(Parser, Debug)]
#[command(name = "leadfollow", version)]
struct Cli {
    /// Configuration file (`key = value` lines with `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for kinetic runs; overrides `kinetic.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Uncontrolled forward solve.
    Forward,
    /// Optimal control sweep for the configured cost functional.
    Optimize,
    /// Kinetic Monte Carlo simulation of the binary interactions.
    Mc,
    /// Run one of the reference experiments E0..E6.
    Preset { name: String },
}

fn resolve(cli: &Cli) -> leadfollow::Result<ExperimentConfig> {
    let mut cfg = match (&cli.command, &cli.config) {
        (Command::Preset { name }, None) => preset_config(name)?,
        (Command::Preset { name }, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            parse_config(&format!("preset = {name}\n{text}"))
                .map_err(|e| match e {
                    Error::ConfigParse { line, reason } if line > 1 => Error::ConfigParse { line: line - 1, reason },
                    other => other,
                })?
        }
        (_, Some(path)) => load_config(path)?,
        (_, None) => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.set("output.dir", &out.display().to_string(), Source::Cli)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("kinetic.seed", &seed.to_string(), Source::Cli)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig, command: &Command) -> leadfollow::Result<Vec<PathBuf>> {
    let (mesh, outcome) = match command {
        Command::Forward => runner::run_forward(cfg)?,
        Command::Optimize => runner::run_optimize(cfg)?,
        Command::Mc => runner::run_kinetic(cfg)?,
        Command::Preset { .. } => runner::run_experiment(cfg)?,
    };
    if let Outcome::Sweep { report } = &outcome {
        println!(
            "J: {:.6e} -> {:.6e} after {} sweeps (converged: {})",
            report.cost_history[0],
            report.cost_history.last().copied().unwrap_or(f64::NAN),
            report.iterations,
            report.converged
        );
    }
    write_outputs(&outcome, cfg, &mesh, &cfg.out_dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cfg, &cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
