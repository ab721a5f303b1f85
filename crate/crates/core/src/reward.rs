//! Docking reward: distance to the goal, thruster utilisation, and heading /
//! cross-track alignment that only applies inside the docking triangle in
//! front of the dock opening, plus the terminal goal and violation rewards.

use serde::{Deserialize, Serialize};

use crate::dynamics::{wrap_unchecked, BodyVelocity, Pose2D, ThrusterState};
use crate::env::{AuvState, TerminalKind};
use crate::error::{DockError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_d_inside: f64,
    pub w_d_outside: f64,
    pub w_th: [f64; 3],
    pub w_psi: f64,
    pub w_y: f64,
    /// Exchange the inside/outside distance weights (the alternative reading
    /// where the distance weight is reduced inside the triangle).
    pub swap_distance_weights: bool,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_d_inside: 30.0,
            w_d_outside: 5.0,
            w_th: [2.0, 5.0, 5.0],
            w_psi: 1.3,
            w_y: 1.2,
            swap_distance_weights: false,
        }
    }
}

impl RewardWeights {
    pub fn distance_weight(&self, inside: bool) -> f64 {
        let (w_in, w_out) = if self.swap_distance_weights {
            (self.w_d_outside, self.w_d_inside)
        } else {
            (self.w_d_inside, self.w_d_outside)
        };
        if inside {
            w_in
        } else {
            w_out
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let checks = [
            ("w_d_inside", self.w_d_inside),
            ("w_d_outside", self.w_d_outside),
            ("w_th", self.w_th[0].min(self.w_th[1]).min(self.w_th[2])),
            ("w_psi", self.w_psi),
            ("w_y", self.w_y),
        ];
        for (name, value) in checks {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(DockError::config(
                    format!("{prefix}.{name}"),
                    "weights must be finite and >= 0",
                ));
            }
        }
        Ok(())
    }
}

/// Goal pose and the docking triangle whose apex sits on the goal and whose
/// axis points along the goal heading (the dock opening direction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DockGeometry {
    pub goal: Pose2D,
    pub triangle_half_angle: f64,
    pub triangle_length: f64,
    pub goal_pos_tol: f64,
    pub goal_yaw_tol: f64,
}

impl Default for DockGeometry {
    fn default() -> Self {
        DockGeometry {
            goal: Pose2D::default(),
            triangle_half_angle: 30f64.to_radians(),
            triangle_length: 6.0,
            goal_pos_tol: 0.5,
            goal_yaw_tol: 0.3,
        }
    }
}

impl DockGeometry {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let half = std::f64::consts::FRAC_PI_2;
        if !(self.triangle_half_angle > 0.0 && self.triangle_half_angle < half) {
            return Err(DockError::config(
                format!("{prefix}.triangle_half_angle"),
                "must lie in (0, pi/2)",
            ));
        }
        for (name, value) in [
            ("triangle_length", self.triangle_length),
            ("goal_pos_tol", self.goal_pos_tol),
            ("goal_yaw_tol", self.goal_yaw_tol),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(DockError::config(format!("{prefix}.{name}"), "must be > 0"));
            }
        }
        let g = &self.goal;
        if !(g.x.is_finite() && g.y.is_finite() && g.psi.is_finite()) {
            return Err(DockError::config(format!("{prefix}.goal"), "must be finite"));
        }
        Ok(())
    }

    pub fn distance_to_goal(&self, pose: &Pose2D) -> f64 {
        (pose.x - self.goal.x).hypot(pose.y - self.goal.y)
    }

    pub fn yaw_error(&self, pose: &Pose2D) -> f64 {
        wrap_unchecked(pose.psi - self.goal.psi)
    }

    /// Position of `pose` in the dock frame: (distance along the axis,
    /// lateral offset).
    pub fn dock_frame(&self, pose: &Pose2D) -> (f64, f64) {
        let (s, c) = self.goal.psi.sin_cos();
        let dx = pose.x - self.goal.x;
        let dy = pose.y - self.goal.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminalRewards {
    pub r_goal: f64,
    pub r_violation: f64,
}

impl Default for TerminalRewards {
    fn default() -> Self {
        TerminalRewards {
            r_goal: 10_000.0,
            r_violation: -25_000.0,
        }
    }
}

impl TerminalRewards {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.r_goal > 0.0) {
            return Err(DockError::config(format!("{prefix}.r_goal"), "must be > 0"));
        }
        if !(self.r_violation < 0.0) {
            return Err(DockError::config(format!("{prefix}.r_violation"), "must be < 0"));
        }
        Ok(())
    }
}

pub fn in_docking_triangle(pose: &Pose2D, geom: &DockGeometry) -> bool {
    let (along, lateral) = geom.dock_frame(pose);
    along >= 0.0
        && along <= geom.triangle_length
        && lateral.abs() <= along * geom.triangle_half_angle.tan()
}

pub fn distance_reward(pose: &Pose2D, geom: &DockGeometry, w: &RewardWeights, inside: bool) -> f64 {
    -w.distance_weight(inside) * geom.distance_to_goal(pose)
}

pub fn thruster_reward(thr: &ThrusterState, w: &RewardWeights) -> f64 {
    -thr.as_array()
        .iter()
        .zip(w.w_th.iter())
        .map(|(n, wi)| wi * n.abs())
        .sum::<f64>()
}

pub fn alignment_reward(pose: &Pose2D, geom: &DockGeometry, w: &RewardWeights, inside: bool) -> f64 {
    if !inside {
        return 0.0;
    }
    -w.w_psi * geom.yaw_error(pose).abs() - w.w_y * (pose.y - geom.goal.y).abs()
}

/// Per-component view of one continuous reward evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub distance: f64,
    pub thrust: f64,
    pub alignment: f64,
    pub inside: bool,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.distance + self.thrust + self.alignment
    }
}

pub fn continuous_breakdown(
    pose: &Pose2D,
    thr: &ThrusterState,
    geom: &DockGeometry,
    w: &RewardWeights,
) -> RewardBreakdown {
    let inside = in_docking_triangle(pose, geom);
    RewardBreakdown {
        distance: distance_reward(pose, geom, w, inside),
        thrust: thruster_reward(thr, w),
        alignment: alignment_reward(pose, geom, w, inside),
        inside,
    }
}

/// Sum of the distance, thruster and alignment components. Velocity is not
/// penalised directly.
pub fn continuous_reward(
    pose: &Pose2D,
    _vel: &BodyVelocity,
    thr: &ThrusterState,
    geom: &DockGeometry,
    w: &RewardWeights,
) -> f64 {
    continuous_breakdown(pose, thr, geom, w).total()
}

pub fn final_reward(cont: f64, outcome: TerminalKind, tr: &TerminalRewards) -> f64 {
    match outcome {
        TerminalKind::Goal => tr.r_goal + cont,
        TerminalKind::Violation => tr.r_violation,
        TerminalKind::None | TerminalKind::Timeout => cont,
    }
}

/// All reward settings, as found under the `reward` config key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Name of the continuous reward implementation, see [`reward_function`].
    pub kind: String,
    pub weights: RewardWeights,
    pub geometry: DockGeometry,
    pub terminal: TerminalRewards,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            kind: "continuous".to_string(),
            weights: RewardWeights::default(),
            geometry: DockGeometry::default(),
            terminal: TerminalRewards::default(),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !REWARD_KINDS.contains(&self.kind.as_str()) {
            return Err(DockError::config(
                format!("{prefix}.kind"),
                format!("unknown reward kind {:?}, expected one of {REWARD_KINDS:?}", self.kind),
            ));
        }
        self.weights.validate(&format!("{prefix}.weights"))?;
        self.geometry.validate(&format!("{prefix}.geometry"))?;
        self.terminal.validate(&format!("{prefix}.terminal"))
    }
}

/// A continuous (per-step, pre-terminal) reward. Terminal rewards are added
/// on top by [`final_reward`] regardless of the implementation.
pub trait RewardFunction: Send + Sync {
    fn name(&self) -> &'static str;
    fn evaluate(&self, state: &AuvState, geom: &DockGeometry) -> RewardBreakdown;
}

/// Distance + thruster + in-triangle alignment.
#[derive(Debug, Clone)]
pub struct DockingReward {
    pub weights: RewardWeights,
}

impl RewardFunction for DockingReward {
    fn name(&self) -> &'static str {
        "continuous"
    }

    fn evaluate(&self, state: &AuvState, geom: &DockGeometry) -> RewardBreakdown {
        continuous_breakdown(&state.pose, &state.thr, geom, &self.weights)
    }
}

/// Terminal rewards only.
#[derive(Debug, Clone, Copy)]
pub struct SparseReward;

impl RewardFunction for SparseReward {
    fn name(&self) -> &'static str {
        "sparse"
    }

    fn evaluate(&self, state: &AuvState, geom: &DockGeometry) -> RewardBreakdown {
        RewardBreakdown {
            inside: in_docking_triangle(&state.pose, geom),
            ..RewardBreakdown::default()
        }
    }
}

pub const REWARD_KINDS: [&str; 2] = ["continuous", "sparse"];

pub fn reward_function(cfg: &RewardConfig) -> Result<Box<dyn RewardFunction>> {
    match cfg.kind.as_str() {
        "continuous" => Ok(Box::new(DockingReward {
            weights: cfg.weights.clone(),
        })),
        "sparse" => Ok(Box::new(SparseReward)),
        other => Err(DockError::config(
            "reward.kind",
            format!("unknown reward kind {other:?}"),
        )),
    }
}

/// Lower bound of the continuous reward over all poses with
/// `|x|, |y| <= half_extent` and any thruster state.
pub fn continuous_lower_bound(cfg: &RewardConfig, half_extent: f64) -> f64 {
    let w = &cfg.weights;
    let g = &cfg.geometry;
    let far = (half_extent + g.goal.x.abs()).hypot(half_extent + g.goal.y.abs());
    let thrust: f64 = w.w_th.iter().sum();
    let outside = w.distance_weight(false) * far;
    let reach = g.triangle_length / g.triangle_half_angle.cos();
    let inside = w.distance_weight(true) * reach
        + w.w_psi * std::f64::consts::PI
        + w.w_y * (reach + g.goal.y.abs() + half_extent);
    -(outside.max(inside) + thrust)
}
