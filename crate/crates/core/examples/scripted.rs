//! Hand-written velocity-tracking controller, useful as a reference for how
//! quickly the default vehicle can dock.
//!
//! cargo run --release -p dockrl-core --example scripted [episodes]

use dockrl::agents::rng_stream;
use dockrl::dynamics::wrap_angle;
use dockrl::env::{AuvState, DockingEnv, TerminalKind};
use dockrl::RunConfig;

const SPEED_GAIN: f64 = 40.0;
const DECEL: f64 = 0.4;

/// Thruster commands that steer the body velocity toward the goal while
/// holding zero heading.
fn control(s: &AuvState, max_thrust: f64) -> [f64; 3] {
    let (sin, cos) = s.pose.psi.sin_cos();
    let (ex, ey) = (-s.pose.x, -s.pose.y);
    let bx = cos * ex + sin * ey;
    let by = -sin * ex + cos * ey;
    let d = bx.hypot(by).max(1e-9);
    let speed = (2.0 * DECEL * (d - 0.2).max(0.0)).sqrt().min(2.0);
    let fx = SPEED_GAIN * (bx / d * speed - s.vel.u);
    let fy = SPEED_GAIN * (by / d * speed - s.vel.v);
    let nz = -60.0 * wrap_angle(s.pose.psi).unwrap() - 20.0 * s.vel.r;
    let a1 = fx / max_thrust;
    let a2 = (fy / max_thrust + nz / (0.5 * max_thrust)) / 2.0;
    let a3 = (fy / max_thrust - nz / (0.5 * max_thrust)) / 2.0;
    let speed_cmd = |a: f64| (a.signum() * a.abs().sqrt()).clamp(-1.0, 1.0);
    [speed_cmd(a1), speed_cmd(a2), speed_cmd(a3)]
}

fn main() {
    let episodes: u64 = std::env::args().nth(1).map_or(200, |s| s.parse().expect("episode count"));
    let spec = RunConfig::default().env_spec();
    let max_thrust = spec.dynamics.k_t * spec.dynamics.n_max * spec.dynamics.n_max;
    let mut env = DockingEnv::new(spec).unwrap();
    let mut steps = Vec::new();
    for seed in 0..episodes {
        env.reset(&mut rng_stream(seed, 1));
        loop {
            let r = env.step(control(env.state(), max_thrust)).unwrap();
            if r.terminal.ends_episode() {
                if r.terminal == TerminalKind::Goal {
                    steps.push(r.info.step_index);
                }
                break;
            }
        }
    }
    steps.sort_unstable();
    println!(
        "docked {}/{episodes}, median steps {:?}",
        steps.len(),
        steps.get(steps.len() / 2)
    );
}
