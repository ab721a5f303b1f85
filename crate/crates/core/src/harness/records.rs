use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{BodyVelocity, Pose2D, ThrusterState};
use crate::env::{classify_terminal, Action, AuvState, EnvConfig, TerminalKind};
use crate::error::{DockError, Result};
use crate::reward::{in_docking_triangle, DockGeometry};

pub const TRAJECTORY_HEADER: &str =
    "t,x,y,psi,u,v,r,n1,n2,n3,action1,action2,action3,reward,in_triangle";
pub const CURVE_HEADER: &str = "global_step,episode,episode_return,steps,outcome";

/// State after step `t` together with the action that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRow {
    pub t: usize,
    pub state: AuvState,
    pub action: Action,
    pub reward: f64,
    pub in_triangle: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub initial_state: AuvState,
    pub rows: Vec<StepRow>,
    pub outcome: TerminalKind,
    pub episode_return: f64,
    pub steps: usize,
}

impl EpisodeRecord {
    /// Positions including the spawn point.
    pub fn path(&self) -> Vec<(f64, f64)> {
        std::iter::once(&self.initial_state)
            .chain(self.rows.iter().map(|r| &r.state))
            .map(|s| (s.pose.x, s.pose.y))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mean_return: f64,
    /// Population standard deviation over all episodes.
    pub std_return: f64,
    /// Mean step count over Goal episodes; absent when none succeeded.
    pub mean_steps_to_goal: Option<f64>,
    pub success_count: usize,
    pub episode_count: usize,
}

pub fn summarize(records: &[EpisodeRecord]) -> EvalSummary {
    let n = records.len();
    let returns: Vec<f64> = records.iter().map(|r| r.episode_return).collect();
    let mean = if n == 0 { 0.0 } else { returns.iter().sum::<f64>() / n as f64 };
    let var = if n == 0 {
        0.0
    } else {
        returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64
    };
    let goal_steps: Vec<f64> = records
        .iter()
        .filter(|r| r.outcome == TerminalKind::Goal)
        .map(|r| r.steps as f64)
        .collect();
    EvalSummary {
        mean_return: mean,
        std_return: var.sqrt(),
        mean_steps_to_goal: if goal_steps.is_empty() {
            None
        } else {
            Some(goal_steps.iter().sum::<f64>() / goal_steps.len() as f64)
        },
        success_count: goal_steps.len(),
        episode_count: n,
    }
}

fn state_fields(s: &AuvState) -> [f64; 9] {
    s.observation()
}

/// Trajectory CSV; row `t = 0` is the spawn state with zero action and reward.
pub fn trajectory_csv(record: &EpisodeRecord, geom: &DockGeometry) -> String {
    let mut out = String::with_capacity(64 * (record.rows.len() + 2));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    let spawn = StepRow {
        t: 0,
        state: record.initial_state,
        action: [0.0; 3],
        reward: 0.0,
        in_triangle: in_docking_triangle(&record.initial_state.pose, geom),
    };
    for row in std::iter::once(&spawn).chain(&record.rows) {
        out.push_str(&row.t.to_string());
        for v in state_fields(&row.state).iter().chain(&row.action) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push(',');
        out.push_str(&row.reward.to_string());
        out.push(',');
        out.push_str(if row.in_triangle { "1" } else { "0" });
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(record: &EpisodeRecord, geom: &DockGeometry, path: &Path) -> Result<()> {
    fs::write(path, trajectory_csv(record, geom)).map_err(|e| DockError::io(path, e))
}

/// Rebuild an episode from its trajectory CSV. The outcome is re-derived
/// from the final state and step count.
pub fn read_trajectory_csv(
    path: &Path,
    geom: &DockGeometry,
    env: &EnvConfig,
    seed: u64,
) -> Result<EpisodeRecord> {
    let text = fs::read_to_string(path).map_err(|e| DockError::io(path, e))?;
    parse_trajectory_csv(&text, geom, env, seed)
}

pub fn parse_trajectory_csv(
    text: &str,
    geom: &DockGeometry,
    env: &EnvConfig,
    seed: u64,
) -> Result<EpisodeRecord> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRAJECTORY_HEADER => {}
        _ => return Err(DockError::format("header", format!("expected {TRAJECTORY_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(DockError::format(
                format!("row {}", lineno + 1),
                format!("expected 15 columns, found {}", fields.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].trim().parse::<f64>().map_err(|e| {
                DockError::format(format!("row {} column {}", lineno + 1, i + 1), e.to_string())
            })
        };
        let t = fields[0].trim().parse::<usize>().map_err(|e| {
            DockError::format(format!("row {} column t", lineno + 1), e.to_string())
        })?;
        let state = AuvState {
            pose: Pose2D { x: num(1)?, y: num(2)?, psi: num(3)? },
            vel: BodyVelocity { u: num(4)?, v: num(5)?, r: num(6)? },
            thr: ThrusterState { n1: num(7)?, n2: num(8)?, n3: num(9)? },
        };
        rows.push(StepRow {
            t,
            state,
            action: [num(10)?, num(11)?, num(12)?],
            reward: num(13)?,
            in_triangle: fields[14].trim() == "1",
        });
    }
    if rows.is_empty() || rows[0].t != 0 {
        return Err(DockError::format("row 1", "missing spawn row with t = 0"));
    }
    let spawn = rows.remove(0);
    let steps = rows.len();
    let outcome = match rows.last() {
        Some(last) => classify_terminal(&last.state, geom, env, steps),
        None => TerminalKind::None,
    };
    Ok(EpisodeRecord {
        seed,
        initial_state: spawn.state,
        episode_return: rows.iter().map(|r| r.reward).sum(),
        steps,
        outcome,
        rows,
    })
}

/// One learning-curve entry, written when an episode ends.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub global_step: usize,
    pub episode: usize,
    pub episode_return: f64,
    pub steps: usize,
    pub outcome: TerminalKind,
}

impl CurveRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.global_step,
            self.episode,
            self.episode_return,
            self.steps,
            self.outcome.as_str()
        )
    }
}

pub fn read_learning_curve(path: &Path) -> Result<Vec<CurveRow>> {
    let text = fs::read_to_string(path).map_err(|e| DockError::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CURVE_HEADER) {
        return Err(DockError::format("header", format!("expected {CURVE_HEADER:?}")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| DockError::format(format!("row {} {what}", i + 1), line.to_string());
            if f.len() != 5 {
                return Err(bad("column count"));
            }
            Ok(CurveRow {
                global_step: f[0].parse().map_err(|_| bad("global_step"))?,
                episode: f[1].parse().map_err(|_| bad("episode"))?,
                episode_return: f[2].parse().map_err(|_| bad("episode_return"))?,
                steps: f[3].parse().map_err(|_| bad("steps"))?,
                outcome: TerminalKind::parse(f[4]).ok_or_else(|| bad("outcome"))?,
            })
        })
        .collect()
}

/// Trailing mean over the last `window` returns (shorter at the start).
pub fn smoothed_returns(curve: &[CurveRow], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..curve.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let slice = &curve[lo..=i];
            slice.iter().map(|r| r.episode_return).sum::<f64>() / slice.len() as f64
        })
        .collect()
}

pub(crate) fn write_all(path: &Path, contents: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| DockError::io(path, e))?;
    f.write_all(contents).map_err(|e| DockError::io(path, e))
}
