//! `node-sim`: configuration, persistence and report front end for the
//! `ionphoton` simulation and analysis stack.
//!
//! Every command resolves a [`config::NodeConfig`] from a preset, an
//! optional TOML file and `--set` overrides, writes its outputs plus
//! `config.toml` and `manifest.json` into the output directory and maps
//! failures to exit status 1 (validation), 2 (non-convergence) or 3 (I/O).

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{Context, HeatmapSpec, Outcome, SettingsKind};
use config::{resolve, ConfigSources};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "node-sim", version, about = "Ion-cavity entanglement node: budget, simulation, tomography, calibration")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML configuration layered over the preset.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Dotted override, e.g. experiment.state.white_noise=0.03.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Attempts per analysis setting.
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Worker cap; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// paper, ideal or unstable-geometry; `paper` unless --config is given.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Also write minimal SVG renderings of the plot data.
    #[arg(long, global = true)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Efficiency chain and entanglement rate.
    Budget,
    /// Monte Carlo run of the entanglement sequence.
    Simulate {
        #[arg(long, value_enum, default_value_t = SettingsKind::Tomography)]
        settings: SettingsKind,
        /// Also write every clicked attempt as JSON lines.
        #[arg(long)]
        shot_log: bool,
    },
    /// Fidelity bounds and state reconstruction from summary CSV files.
    Tomo {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
    /// Fiber fit and waveplate angles from a reflection heat map.
    Calibrate { heatmap: PathBuf },
    /// Synthetic reflection heat map (radians).
    Heatmap {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delta: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        hwp_offset: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        qwp_offset: f64,
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long, default_value_t = 180.0)]
        span_deg: f64,
    },
    /// Ramsey coherence of the Zeeman and hyperfine qubits.
    Ramsey,
    /// Check a finished output directory against its manifest.
    Verify { dir: PathBuf },
}

/// Text for stdout and warnings for stderr of a successful command.
#[derive(Debug, Clone)]
pub struct Completed {
    pub stdout: String,
    pub warnings: Vec<String>,
}

impl From<Outcome> for Completed {
    fn from(o: Outcome) -> Self {
        Self {
            stdout: o.stdout,
            warnings: o.warnings,
        }
    }
}

fn context(cli: &Cli, command_line: &[String]) -> Result<Context, CliError> {
    let c = &cli.common;
    let resolved = resolve(&ConfigSources {
        preset: c.preset.clone(),
        config: c.config.clone(),
        sets: c.sets.clone(),
        seed: c.seed,
        shots: c.shots,
    })?;
    Ok(Context {
        resolved,
        out: c.out.clone(),
        command_line: command_line.to_vec(),
        svg: c.svg,
    })
}

fn dispatch(cli: &Cli, command_line: &[String]) -> Result<Completed, CliError> {
    if let Command::Verify { dir } = &cli.command {
        return commands::cmd_verify(dir).map(|stdout| Completed {
            stdout,
            warnings: Vec::new(),
        });
    }
    let ctx = context(cli, command_line)?;
    let outcome = match &cli.command {
        Command::Budget => commands::cmd_budget(&ctx)?,
        Command::Simulate { settings, shot_log } => commands::cmd_simulate(&ctx, *settings, *shot_log)?,
        Command::Tomo { summaries } => commands::cmd_tomo(&ctx, summaries)?,
        Command::Calibrate { heatmap } => commands::cmd_calibrate(&ctx, heatmap)?,
        Command::Heatmap {
            alpha,
            beta,
            delta,
            hwp_offset,
            qwp_offset,
            grid,
            span_deg,
        } => commands::cmd_heatmap(
            &ctx,
            &HeatmapSpec {
                fiber: ionphoton::FiberModel::new(*alpha, *beta, *delta),
                offsets: ionphoton::jones::Offsets {
                    hwp: *hwp_offset,
                    qwp: *qwp_offset,
                },
                n_hwp: *grid,
                n_qwp: *grid,
                span_rad: span_deg.to_radians(),
            },
        )?,
        Command::Ramsey => commands::cmd_ramsey(&ctx)?,
        Command::Verify { .. } => unreachable!("handled above"),
    };
    Ok(outcome.into())
}

/// Runs a parsed command line, honouring `--threads`.
pub fn run(cli: &Cli, command_line: &[String]) -> Result<Completed, CliError> {
    match cli.common.threads {
        Some(0) => Err(CliError::validation("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::validation(format!("cannot start {n} worker threads: {e}")))?;
            pool.install(|| dispatch(cli, command_line))
        }
        None => dispatch(cli, command_line),
    }
}

/// Full process behaviour: parse, run, print, return the exit status.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli, &args) {
        Ok(done) => {
            for w in &done.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", done.stdout);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
