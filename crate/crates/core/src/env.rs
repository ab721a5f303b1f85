//! Episodic docking environment: dynamics + reward behind a reset/step
//! interface with the 9-component observation
//! `[x, y, psi, u, v, r, n1, n2, n3]`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step_dynamics, BodyVelocity, HydroParams, Pose2D, ThrusterState};
use crate::error::{DockError, Result};
use crate::reward::{
    final_reward, reward_function, DockGeometry, RewardBreakdown, RewardConfig, RewardFunction,
};

pub const OBS_DIM: usize = 9;
pub const ACT_DIM: usize = 3;

pub type Observation = [f64; OBS_DIM];
pub type Action = [f64; ACT_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AuvState {
    pub pose: Pose2D,
    pub vel: BodyVelocity,
    pub thr: ThrusterState,
}

impl AuvState {
    /// Raw observation in the fixed `[x, y, psi, u, v, r, n1, n2, n3]` order.
    pub fn observation(&self) -> Observation {
        [
            self.pose.x,
            self.pose.y,
            self.pose.psi,
            self.vel.u,
            self.vel.v,
            self.vel.r,
            self.thr.n1,
            self.thr.n2,
            self.thr.n3,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TerminalKind {
    #[default]
    None,
    Goal,
    Violation,
    /// Time limit reached; a truncation, not an environment outcome.
    Timeout,
}

impl TerminalKind {
    /// True for outcomes after which the value of the next state is zero.
    pub fn is_terminal(self) -> bool {
        matches!(self, TerminalKind::Goal | TerminalKind::Violation)
    }

    pub fn ends_episode(self) -> bool {
        self != TerminalKind::None
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TerminalKind::None => "none",
            TerminalKind::Goal => "goal",
            TerminalKind::Violation => "violation",
            TerminalKind::Timeout => "timeout",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(TerminalKind::None),
            "goal" => Some(TerminalKind::Goal),
            "violation" => Some(TerminalKind::Violation),
            "timeout" => Some(TerminalKind::Timeout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub workspace_half_extent: f64,
    pub spawn_inner: f64,
    pub spawn_outer: f64,
    pub max_steps: usize,
    /// Divisors applied to the raw observation, component-wise.
    pub obs_scaling: [f64; OBS_DIM],
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            workspace_half_extent: 9.0,
            spawn_inner: 7.0,
            spawn_outer: 9.0,
            max_steps: 150,
            obs_scaling: [9.0, 9.0, PI, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}.{k}");
        if !(self.spawn_inner > 0.0) {
            return Err(DockError::config(key("spawn_inner"), "must be > 0"));
        }
        if !(self.spawn_inner < self.spawn_outer) {
            return Err(DockError::config(key("spawn_outer"), "must exceed spawn_inner"));
        }
        if !(self.spawn_outer <= self.workspace_half_extent) || !self.workspace_half_extent.is_finite() {
            return Err(DockError::config(
                key("workspace_half_extent"),
                "must be finite and >= spawn_outer",
            ));
        }
        if self.max_steps < 1 {
            return Err(DockError::config(key("max_steps"), "must be >= 1"));
        }
        if self.obs_scaling.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(DockError::config(key("obs_scaling"), "divisors must be finite and > 0"));
        }
        Ok(())
    }

    pub fn scale(&self, raw: &Observation) -> Observation {
        let mut out = [0.0; OBS_DIM];
        for (o, (x, d)) in out.iter_mut().zip(raw.iter().zip(self.obs_scaling.iter())) {
            *o = x / d;
        }
        out
    }
}

/// Spawn on the outer band of the workspace with the vehicle at rest.
pub fn sample_initial_state<R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> AuvState {
    let coord = |rng: &mut R| {
        let magnitude = rng.random_range(cfg.spawn_inner..=cfg.spawn_outer);
        if rng.random_bool(0.5) {
            magnitude
        } else {
            -magnitude
        }
    };
    let x = coord(rng);
    let y = coord(rng);
    let psi = rng.random_range(-PI..PI);
    AuvState {
        pose: Pose2D { x, y, psi },
        ..AuvState::default()
    }
}

/// Precedence: Violation > Goal > Timeout > None.
pub fn classify_terminal(
    state: &AuvState,
    geom: &DockGeometry,
    cfg: &EnvConfig,
    step_index: usize,
) -> TerminalKind {
    let bound = cfg.workspace_half_extent;
    if state.pose.x.abs() > bound || state.pose.y.abs() > bound {
        return TerminalKind::Violation;
    }
    if geom.distance_to_goal(&state.pose) <= geom.goal_pos_tol
        && geom.yaw_error(&state.pose).abs() <= geom.goal_yaw_tol
    {
        return TerminalKind::Goal;
    }
    if step_index >= cfg.max_steps {
        return TerminalKind::Timeout;
    }
    TerminalKind::None
}

/// Diagnostics attached to every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Unscaled state after the step.
    pub state: AuvState,
    pub in_triangle: bool,
    pub components: RewardBreakdown,
    /// Action actually applied (after clamping).
    pub action: Action,
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: TerminalKind,
    pub info: StepInfo,
}

/// Full environment configuration as used by the harness.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub env: EnvConfig,
    pub dynamics: HydroParams,
    pub reward: RewardConfig,
}

pub struct DockingEnv {
    spec: EnvSpec,
    reward_fn: Box<dyn RewardFunction>,
    state: AuvState,
    steps: usize,
    phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    NeedsReset,
    Running,
    Finished,
}

impl DockingEnv {
    pub fn new(spec: EnvSpec) -> Result<Self> {
        spec.env.validate("env")?;
        spec.dynamics.validate("dynamics")?;
        spec.reward.validate("reward")?;
        let reward_fn = reward_function(&spec.reward)?;
        Ok(DockingEnv {
            spec,
            reward_fn,
            state: AuvState::default(),
            steps: 0,
            phase: Phase::NeedsReset,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn state(&self) -> &AuvState {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Observation {
        let state = sample_initial_state(&self.spec.env, rng);
        self.reset_to(state)
    }

    /// Start an episode from a given state.
    pub fn reset_to(&mut self, state: AuvState) -> Observation {
        self.state = state;
        self.steps = 0;
        self.phase = Phase::Running;
        self.spec.env.scale(&state.observation())
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        match self.phase {
            Phase::NeedsReset => return Err(DockError::Usage("step called before reset".into())),
            Phase::Finished => {
                return Err(DockError::Usage(
                    "step called after the episode ended; call reset".into(),
                ))
            }
            Phase::Running => {}
        }
        if action.iter().any(|a| a.is_nan()) {
            return Err(DockError::Domain(format!("NaN in action {action:?}")));
        }
        let cmd = ThrusterState::new(action[0], action[1], action[2]);
        let p = &self.spec.dynamics;
        let (pose, vel, thr) =
            step_dynamics(&self.state.pose, &self.state.vel, &self.state.thr, &cmd, p, p.dt)?;
        self.state = AuvState { pose, vel, thr };
        self.steps += 1;

        let geom = &self.spec.reward.geometry;
        let components = self.reward_fn.evaluate(&self.state, geom);
        let terminal = classify_terminal(&self.state, geom, &self.spec.env, self.steps);
        let reward = final_reward(components.total(), terminal, &self.spec.reward.terminal);
        if terminal.ends_episode() {
            self.phase = Phase::Finished;
        }
        Ok(StepResult {
            observation: self.spec.env.scale(&self.state.observation()),
            reward,
            terminal,
            info: StepInfo {
                state: self.state,
                in_triangle: components.inside,
                components,
                action: cmd.as_array(),
                step_index: self.steps,
            },
        })
    }
}
