use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::agents::{build_learner, rng_stream, streams, Experience, Learner};
use crate::config::RunConfig;
use crate::env::DockingEnv;
use crate::error::{DockError, Result};
use crate::harness::records::{write_all, CurveRow, CURVE_HEADER};

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub curve: Vec<CurveRow>,
    pub total_steps: usize,
    pub final_checkpoint: PathBuf,
    pub learning_curve: PathBuf,
    pub wall_seconds: f64,
}

impl TrainReport {
    pub fn episodes(&self) -> usize {
        self.curve.len()
    }
}

fn checkpoint_dir(out: &Path, label: &str) -> PathBuf {
    out.join("checkpoints").join(label)
}

/// Train `cfg.algo` for `cfg.harness.total_timesteps` environment steps.
///
/// Writes into `out`: `config.resolved.json`, `learning_curve.csv`,
/// `train.log`, and `checkpoints/{step_N,final}/<net>.bin`.
pub fn train(cfg: &RunConfig, out: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| DockError::io(out, e))?;
    write_all(&out.join("config.resolved.json"), cfg.to_json().as_bytes())?;

    let curve_path = out.join("learning_curve.csv");
    let curve_file = fs::File::create(&curve_path).map_err(|e| DockError::io(&curve_path, e))?;
    let mut curve_out = BufWriter::new(curve_file);
    writeln!(curve_out, "{CURVE_HEADER}").map_err(|e| DockError::io(&curve_path, e))?;
    let log_path = out.join("train.log");
    let mut log = BufWriter::new(fs::File::create(&log_path).map_err(|e| DockError::io(&log_path, e))?);

    let started = Instant::now();
    let seed = cfg.seed();
    let mut env = DockingEnv::new(cfg.env_spec())?;
    let mut learner = build_learner(&cfg.algo, &cfg.agent, seed)?;
    let mut env_rng = rng_stream(seed, streams::ENV);

    let total = cfg.harness.total_timesteps;
    let mut curve = Vec::new();
    let mut obs = None;
    let mut episode_return = 0.0;

    for global_step in 1..=total {
        let current = match obs {
            Some(o) => o,
            None => {
                episode_return = 0.0;
                env.reset(&mut env_rng)
            }
        };
        let action = learner.act(&current);
        let step = match env.step(action) {
            Ok(s) => s,
            Err(e) => return Err(abort(out, learner.as_ref(), global_step, &e.to_string())),
        };
        episode_return += step.reward;
        let ended = step.terminal.ends_episode();
        let report = learner.observe(Experience {
            obs: current,
            action: step.info.action,
            reward: step.reward,
            next_obs: step.observation,
            terminal: step.terminal.is_terminal(),
            episode_end: ended,
        })?;
        if let Some(r) = report {
            if !r.is_finite() {
                return Err(abort(out, learner.as_ref(), global_step, &format!("non-finite loss {r:?}")));
            }
        }
        if ended {
            let row = CurveRow {
                global_step,
                episode: curve.len(),
                episode_return,
                steps: env.steps(),
                outcome: step.terminal,
            };
            writeln!(curve_out, "{}", row.to_csv_line()).map_err(|e| DockError::io(&curve_path, e))?;
            curve.push(row);
            obs = None;
        } else {
            obs = Some(step.observation);
        }
        if global_step % cfg.harness.checkpoint_interval == 0 {
            learner.save_checkpoints(&checkpoint_dir(out, &format!("step_{global_step}")))?;
            let recent = &curve[curve.len().saturating_sub(cfg.harness.smoothing_window)..];
            let mean = if recent.is_empty() {
                f64::NAN
            } else {
                recent.iter().map(|r| r.episode_return).sum::<f64>() / recent.len() as f64
            };
            let goals = recent.iter().filter(|r| r.outcome == crate::env::TerminalKind::Goal).count();
            writeln!(
                log,
                "step {global_step} episodes {} recent_mean_return {mean:.1} recent_goals {goals}/{} elapsed {:.1}s",
                curve.len(),
                recent.len(),
                started.elapsed().as_secs_f64()
            )
            .map_err(|e| DockError::io(&log_path, e))?;
        }
    }

    curve_out.flush().map_err(|e| DockError::io(&curve_path, e))?;
    let final_dir = checkpoint_dir(out, "final");
    learner.save_checkpoints(&final_dir)?;
    writeln!(log, "done: {} steps, {} episodes", total, curve.len()).map_err(|e| DockError::io(&log_path, e))?;
    log.flush().map_err(|e| DockError::io(&log_path, e))?;

    Ok(TrainReport {
        curve,
        total_steps: total,
        final_checkpoint: final_dir,
        learning_curve: curve_path,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

fn abort(out: &Path, learner: &(dyn Learner + Send), step: usize, why: &str) -> DockError {
    let dir = checkpoint_dir(out, "diagnostic");
    let saved = match learner.save_checkpoints(&dir) {
        Ok(()) => format!("diagnostic checkpoint in {}", dir.display()),
        Err(e) => format!("diagnostic checkpoint failed: {e}"),
    };
    DockError::Training(format!("step {step}: {why}; {saved}"))
}
