use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agents::Policy;
use crate::config::RunConfig;
use crate::env::{DockingEnv, EnvSpec, TerminalKind};
use crate::error::{DockError, Result};
use crate::harness::plot::plot_trajectories;
use crate::harness::records::{summarize, write_all, write_trajectory_csv, EpisodeRecord, EvalSummary, StepRow};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Spawn seed for evaluation episode `(run, episode)`:
/// `splitmix64(splitmix64(master) ^ (run << 32 | episode))`.
/// Independent of the algorithm, so every agent sees the same spawns.
pub fn eval_spawn_seed(master: u64, run: usize, episode: usize) -> u64 {
    splitmix64(splitmix64(master) ^ (((run as u64) << 32) | episode as u64))
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub summary: EvalSummary,
    /// In (run, episode) order.
    pub records: Vec<EpisodeRecord>,
    pub n_runs: usize,
    pub n_episodes: usize,
}

/// Run one greedy episode from the spawn drawn with `seed`.
pub fn run_episode(spec: &EnvSpec, policy: &Policy, seed: u64) -> Result<EpisodeRecord> {
    let mut env = DockingEnv::new(spec.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = env.reset(&mut rng);
    let initial_state = *env.state();
    let mut rows = Vec::with_capacity(spec.env.max_steps);
    loop {
        let action = policy.act(&obs);
        let step = env.step(action)?;
        rows.push(StepRow {
            t: step.info.step_index,
            state: step.info.state,
            action: step.info.action,
            reward: step.reward,
            in_triangle: step.info.in_triangle,
        });
        if step.terminal.ends_episode() {
            return Ok(EpisodeRecord {
                seed,
                initial_state,
                episode_return: rows.iter().map(|r| r.reward).sum(),
                steps: rows.len(),
                outcome: step.terminal,
                rows,
            });
        }
        obs = step.observation;
    }
}

/// `n_runs × n_episodes` deterministic episodes on seeded spawns.
pub fn evaluate(policy: &Policy, cfg: &RunConfig, n_runs: usize, n_episodes: usize) -> Result<Evaluation> {
    if n_runs == 0 || n_episodes == 0 {
        return Err(DockError::Usage("evaluation needs at least one run and one episode".into()));
    }
    let spec = cfg.env_spec();
    let jobs: Vec<(usize, usize)> = (0..n_runs)
        .flat_map(|r| (0..n_episodes).map(move |e| (r, e)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(r, e)| run_episode(&spec, policy, eval_spawn_seed(cfg.harness.eval_seed, r, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation {
        summary: summarize(&records),
        records,
        n_runs,
        n_episodes,
    })
}

/// Write `summary.json`, `trajectories/run{r}_ep{e}.csv` and
/// `trajectories.svg` into `dir`.
pub fn write_evaluation(eval: &Evaluation, cfg: &RunConfig, dir: &Path) -> Result<()> {
    let traj_dir = dir.join("trajectories");
    fs::create_dir_all(&traj_dir).map_err(|e| DockError::io(&traj_dir, e))?;
    let summary = serde_json::to_string_pretty(&eval.summary).expect("summary serialises");
    write_all(&dir.join("summary.json"), summary.as_bytes())?;
    for (i, record) in eval.records.iter().enumerate() {
        let (r, e) = (i / eval.n_episodes, i % eval.n_episodes);
        write_trajectory_csv(record, &cfg.reward.geometry, &traj_dir.join(format!("run{r}_ep{e}.csv")))?;
    }
    let svg = plot_trajectories(&eval.records, &cfg.reward.geometry, &cfg.env)?;
    write_all(&dir.join("trajectories.svg"), svg.as_bytes())
}

pub fn outcome_counts(records: &[EpisodeRecord]) -> [usize; 4] {
    let mut c = [0; 4];
    for r in records {
        let i = match r.outcome {
            TerminalKind::None => 0,
            TerminalKind::Goal => 1,
            TerminalKind::Violation => 2,
            TerminalKind::Timeout => 3,
        };
        c[i] += 1;
    }
    c
}
