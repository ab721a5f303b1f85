//! `dockrl` command-line entry point: train, eval, plot, check.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dockrl::agents::Policy;
use dockrl::harness::{self, evaluate, plot_trajectories, read_trajectory_csv, train, write_evaluation};
use dockrl::{DockError, RunConfig};

#[derive(Parser)]
#[command(name = "dockrl", version, about = "AUV docking reinforcement-learning benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides env.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted override, e.g. `--set agent.gamma=0.98`. Repeatable; applied in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, DockError> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("env.seed={seed}"));
        }
        RunConfig::load(&self.config, &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured agent.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory (default: $DOCKRL_OUT/<algo>_seed<seed>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate an actor checkpoint with the deterministic policy.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Actor checkpoint (`actor.bin`).
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of evaluation runs (default: harness.eval_runs).
        #[arg(long)]
        runs: Option<usize>,
        /// Episodes per run (default: harness.eval_episodes).
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Plot trajectory CSVs (files or directories) into one SVG.
    Plot {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Config used to draw the dock and classify outcomes (defaults if absent).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Validate a config and print the resolved version.
    Check {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn out_root() -> PathBuf {
    std::env::var_os("DOCKRL_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn default_out(cfg: &RunConfig, suffix: &str) -> PathBuf {
    out_root().join(format!("{}_seed{}{suffix}", cfg.algo, cfg.seed()))
}

fn error_line(err: &DockError) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("error".into(), err.kind().into());
    match err {
        DockError::Config { key, message } => {
            obj.insert("key".into(), key.clone().into());
            obj.insert("message".into(), message.clone().into());
        }
        DockError::Format { field, message } => {
            obj.insert("field".into(), field.clone().into());
            obj.insert("message".into(), message.clone().into());
        }
        DockError::Io { path, source } => {
            obj.insert("path".into(), path.display().to_string().into());
            obj.insert("message".into(), source.to_string().into());
        }
        other => {
            obj.insert("message".into(), other.to_string().into());
        }
    }
    serde_json::Value::Object(obj).to_string()
}

fn collect_csvs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, DockError> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|e| DockError::io(input, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn run(cli: Cli) -> Result<(), DockError> {
    match cli.command {
        Command::Check { cfg } => {
            let resolved = cfg.resolve()?;
            emit(&resolved.to_json());
        }
        Command::Train { cfg, out } => {
            let resolved = cfg.resolve()?;
            let out = out.unwrap_or_else(|| default_out(&resolved, ""));
            let report = train(&resolved, &out)?;
            let goals = report
                .curve
                .iter()
                .filter(|r| r.outcome == dockrl::env::TerminalKind::Goal)
                .count();
            emit(&format!(
                "trained {} for {} steps: {} episodes ({} goals), {:.1}s; checkpoints in {}",
                resolved.algo,
                report.total_steps,
                report.episodes(),
                goals,
                report.wall_seconds,
                report.final_checkpoint.display()
            ));
        }
        Command::Eval {
            cfg,
            checkpoint,
            out,
            runs,
            episodes,
        } => {
            let resolved = cfg.resolve()?;
            let policy = Policy::from_checkpoint(&resolved.algo, &checkpoint)?;
            let runs = runs.unwrap_or(resolved.harness.eval_runs);
            let episodes = episodes.unwrap_or(resolved.harness.eval_episodes);
            let out = out.unwrap_or_else(|| default_out(&resolved, "_eval"));
            std::fs::create_dir_all(&out).map_err(|e| DockError::io(&out, e))?;
            std::fs::write(out.join("config.resolved.json"), resolved.to_json())
                .map_err(|e| DockError::io(&out, e))?;
            let evaluation = evaluate(&policy, &resolved, runs, episodes)?;
            write_evaluation(&evaluation, &resolved, &out)?;
            emit(&serde_json::to_string(&evaluation.summary).expect("summary serialises"));
        }
        Command::Plot { inputs, out, config } => {
            let resolved = match config {
                Some(path) => RunConfig::load(&path, &[])?,
                None => RunConfig::default(),
            };
            let files = collect_csvs(&inputs)?;
            let records = files
                .iter()
                .map(|f| read_trajectory_csv(f, &resolved.reward.geometry, &resolved.env, 0))
                .collect::<Result<Vec<_>, _>>()?;
            let svg = plot_trajectories(&records, &resolved.reward.geometry, &resolved.env)?;
            write_file(&out, svg.as_bytes())?;
            let summary = harness::summarize(&records);
            emit(&serde_json::to_string(&summary).expect("summary serialises"));
        }
    }
    Ok(())
}

/// Print to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DockError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| DockError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| DockError::io(path, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_line(&err));
            ExitCode::from(match err {
                DockError::Config { .. } => 2,
                _ => 1,
            })
        }
    }
}
