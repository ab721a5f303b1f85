use dockrl::dynamics::{Pose2D, ThrusterState};
use dockrl::env::TerminalKind;
use dockrl::reward::{
    alignment_reward, continuous_reward, distance_reward, final_reward, in_docking_triangle,
    thruster_reward, DockGeometry, RewardWeights, TerminalRewards,
};

use super::Outcome;

pub const TOL: f64 = 1e-9;

pub struct Case {
    pub name: &'static str,
    pub got: f64,
    pub want: f64,
}

fn case(name: &'static str, got: f64, want: f64) -> Case {
    Case { name, got, want }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Hand-derived values with the default weights (inside 30/[2,5,5]/1.3/1.2,
/// outside 5) and the default dock: apex at the origin, axis +x, 30°, 6 m.
pub fn cases() -> Vec<Case> {
    let w = RewardWeights::default();
    let g = DockGeometry::default();
    let tr = TerminalRewards::default();
    let eval_tr = TerminalRewards {
        r_goal: 15000.0,
        ..tr
    };
    let zero = ThrusterState::default();
    let still = Default::default();
    let pose = |x, y, psi| Pose2D::new(x, y, psi);
    let cont = |p: Pose2D, t: ThrusterState| continuous_reward(&p, &still, &t, &g, &w);
    let tan30 = (30f64).to_radians().tan();

    vec![
        case("weights: inside distance", w.w_d_inside, 30.0),
        case("weights: outside distance", w.w_d_outside, 5.0),
        case("weights: thrusters", w.w_th.iter().sum(), 12.0),
        case("weights: yaw", w.w_psi, 1.3),
        case("weights: cross-track", w.w_y, 1.2),
        case("triangle: apex", flag(in_docking_triangle(&pose(0.0, 0.0, 0.0), &g)), 1.0),
        case("triangle: beyond length", flag(in_docking_triangle(&pose(7.0, 0.0, 0.0), &g)), 0.0),
        case(
            "triangle: half the local half-width",
            flag(in_docking_triangle(&pose(3.0, 3.0 * tan30 * 0.5, 0.0), &g)),
            1.0,
        ),
        case("triangle: far edge is closed", flag(in_docking_triangle(&pose(6.0, 0.0, 2.0), &g)), 1.0),
        case("triangle: behind the dock", flag(in_docking_triangle(&pose(-0.5, 0.0, 0.0), &g)), 0.0),
        case("distance: at goal", distance_reward(&pose(0.0, 0.0, 0.0), &g, &w, false), 0.0),
        case("distance: (3,4) outside", distance_reward(&pose(3.0, 4.0, 0.0), &g, &w, false), -25.0),
        case("distance: (2,0) inside", distance_reward(&pose(2.0, 0.0, 0.0), &g, &w, true), -60.0),
        case("thrust: idle", thruster_reward(&zero, &w), 0.0),
        case("thrust: full forward", thruster_reward(&ThrusterState::new(1.0, 1.0, 1.0), &w), -12.0),
        case("thrust: mixed signs", thruster_reward(&ThrusterState::new(-0.5, 0.2, -0.2), &w), -3.0),
        case("alignment: outside is zero", alignment_reward(&pose(-3.0, 2.0, 1.0), &g, &w, false), 0.0),
        case("alignment: perfectly aligned", alignment_reward(&pose(2.0, 0.0, 0.0), &g, &w, true), 0.0),
        case("alignment: 0.5 rad and 1 m off", alignment_reward(&pose(4.0, 1.0, 0.5), &g, &w, true), -1.85),
        case(
            "alignment: yaw wraps through 2π",
            alignment_reward(&pose(4.0, 0.0, 2.0 * std::f64::consts::PI - 0.2), &g, &w, true),
            -0.26,
        ),
        case("alignment: yaw near ±π", alignment_reward(&pose(3.0, -1.0, -3.0), &g, &w, true), -5.1),
        case("continuous: at goal, idle", cont(pose(0.0, 0.0, 0.0), zero), 0.0),
        case("continuous: (3,4) outside, full thrust", cont(pose(3.0, 4.0, 0.0), ThrusterState::new(1.0, 1.0, 1.0)), -37.0),
        case("continuous: (2,0) inside aligned", cont(pose(2.0, 0.0, 0.0), zero), -60.0),
        case("continuous: behind the dock", cont(pose(-2.0, 0.0, 0.0), zero), -10.0),
        case("continuous: just past the far edge", cont(pose(6.5, 0.0, 0.0), zero), -32.5),
        case(
            "continuous: inside with thrust and misalignment",
            cont(pose(5.0, -2.0, 0.1), ThrusterState::new(-1.0, 0.5, 0.0)),
            -30.0 * 29f64.sqrt() - 4.5 - 0.13 - 2.4,
        ),
        case("terminal: goal adds the bonus", final_reward(-10.0, TerminalKind::Goal, &tr), 9990.0),
        case("terminal: evaluation goal bonus", final_reward(-10.0, TerminalKind::Goal, &eval_tr), 14990.0),
        case("terminal: violation ignores the shaping", final_reward(-37.0, TerminalKind::Violation, &tr), -25000.0),
        case("terminal: violation at zero shaping", final_reward(0.0, TerminalKind::Violation, &tr), -25000.0),
        case("terminal: running step passes through", final_reward(-37.0, TerminalKind::None, &tr), -37.0),
        case("terminal: timeout passes through", final_reward(-5.0, TerminalKind::Timeout, &tr), -5.0),
    ]
}

pub fn run() -> Outcome {
    let cases = cases();
    let failed: Vec<String> = cases
        .iter()
        .filter(|c| !((c.got - c.want).abs() <= TOL))
        .map(|c| format!("{}: got {} want {}", c.name, c.got, c.want))
        .collect();
    if failed.is_empty() {
        Ok(format!("{} cases within {TOL:e}", cases.len()))
    } else {
        Err(failed.join("; "))
    }
}
