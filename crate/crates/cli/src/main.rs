//! `lmcf`: runs configured flow experiments, frame checks, convergence
//! ladders and parameter sweeps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 flow error, 4 invariant
//! breach.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lmcf_core::experiments::{
    load_config, run_experiment, sweep, worker_count, ExperimentConfig, ExperimentError, RunManifest, Scenario,
    ScenarioKind, SUMMARY_FILE,
};

#[derive(Parser)]
#[command(
    name = "lmcf",
    version,
    about = "Equivariant Lagrangian mean curvature flow experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flow with boundary on the Lawlor neck.
    Lawlor {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Flow with boundary on the shrinking Clifford torus.
    Clifford {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Checks the boundary-frame identities on random frames.
    FrameCheck {
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out/frame-check")]
        output_dir: PathBuf,
    },
    /// Runs a grid-refinement ladder and reports observed orders.
    Convergence {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Runs a template once per parameter value, in parallel.
    Sweep {
        template: PathBuf,
        /// Bare key or `section.key`, e.g. `alpha` or `lawlor.grid_n`.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `--values=-0.4,0,0.4`; may be empty.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_values)]
        values: Values,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone)]
struct Values(Vec<f64>);

fn parse_values(text: &str) -> Result<Values, String> {
    text.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Values)
}

#[derive(Subcommand)]
enum RunAction {
    /// Runs the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn load(
    path: &Path,
    output_dir: Option<PathBuf>,
    expect: Option<ScenarioKind>,
) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = load_config(path)?;
    if let Some(kind) = expect {
        if cfg.scenario.kind() != kind {
            return Err(ExperimentError::Config(
                lmcf_core::experiments::ConfigError::InvariantViolation {
                    line: None,
                    message: format!("expected scenario {kind:?}, found {:?}", cfg.scenario.kind()),
                },
            ));
        }
    }
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    Ok(cfg)
}

fn report(m: &RunManifest, dir: &std::path::Path) {
    println!("scenario: {}", m.scenario);
    println!("termination: {}", m.termination);
    println!("wall time: {:.3} s", m.wall_time_s);
    for (k, v) in &m.final_diagnostics {
        println!("  {k} = {v:.12e}");
    }
    println!("outputs: {}", dir.display());
}

fn run_one(cfg: ExperimentConfig) -> Result<(), ExperimentError> {
    let m = run_experiment(&cfg)?;
    report(&m, &cfg.output_dir);
    Ok(())
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Lawlor {
            action: RunAction::Run { config, output_dir },
        } => run_one(load(&config, output_dir, Some(ScenarioKind::Lawlor))?),
        Command::Clifford {
            action: RunAction::Run { config, output_dir },
        } => run_one(load(&config, output_dir, Some(ScenarioKind::Clifford))?),
        Command::Convergence { config, output_dir } => {
            run_one(load(&config, output_dir, Some(ScenarioKind::Convergence))?)
        }
        Command::FrameCheck {
            n,
            alpha,
            trials,
            seed,
            output_dir,
        } => run_one(ExperimentConfig {
            scenario: Scenario::FrameCheck {
                n: n as usize,
                alpha,
                trials,
                seed,
            },
            output_dir,
            output_times: Vec::new(),
            emit_svg: false,
        }),
        Command::Sweep {
            template,
            param,
            values,
            output_dir,
        } => {
            let cfg = load(&template, output_dir, None)?;
            let workers = worker_count();
            let summary = sweep(&cfg, &param, &values.0, workers)?;
            for row in &summary.rows {
                match &row.error {
                    None => println!("{param} = {}: ok ({})", row.value, row.termination),
                    Some((kind, msg)) => println!("{param} = {}: failed [{kind}] {msg}", row.value),
                }
            }
            println!(
                "{} runs, {} failed, {workers} workers; summary: {}",
                summary.rows.len(),
                summary.failures(),
                cfg.output_dir.join(SUMMARY_FILE).display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
