use dockrl::dynamics::{kinetic_energy, step_dynamics, wrap_angle, BodyVelocity, HydroParams, Pose2D, ThrusterState};
use dockrl::env::{DockingEnv, EnvSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ensure, Outcome};

pub const MIRROR_TOL: f64 = 1e-12;
pub const STEPS: usize = 150;

type State = (Pose2D, BodyVelocity, ThrusterState);

pub fn random_state(rng: &mut ChaCha8Rng, p: &HydroParams) -> State {
    let pose = Pose2D::new(rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-3.1..3.1));
    let vel = BodyVelocity {
        u: rng.random_range(-p.u_max..=p.u_max),
        v: rng.random_range(-p.v_max..=p.v_max),
        r: rng.random_range(-p.r_max..=p.r_max),
    };
    let thr = random_thrust(rng);
    (pose, vel, thr)
}

pub fn random_thrust(rng: &mut ChaCha8Rng) -> ThrusterState {
    ThrusterState::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
}

pub fn rollout(start: State, cmds: &[ThrusterState], p: &HydroParams, dt: f64) -> Vec<State> {
    let mut out = vec![start];
    let mut s = start;
    for c in cmds {
        s = step_dynamics(&s.0, &s.1, &s.2, c, p, dt).expect("default dynamics stay finite");
        out.push(s);
    }
    out
}

/// Reflection across the x axis: y, psi, v, r and both lateral thrusters
/// change sign.
pub fn mirror(s: &State) -> State {
    (
        Pose2D::new(s.0.x, -s.0.y, -s.0.psi),
        BodyVelocity { u: s.1.u, v: -s.1.v, r: -s.1.r },
        mirror_thrust(&s.2),
    )
}

pub fn mirror_thrust(t: &ThrusterState) -> ThrusterState {
    ThrusterState { n1: t.n1, n2: -t.n2, n3: -t.n3 }
}

fn mirror_gap(a: &State, b: &State) -> f64 {
    let m = mirror(a);
    let yaw = wrap_angle(m.0.psi - b.0.psi).unwrap().abs();
    [
        (m.0.x - b.0.x).abs(),
        (m.0.y - b.0.y).abs(),
        yaw,
        (m.1.u - b.1.u).abs(),
        (m.1.v - b.1.v).abs(),
        (m.1.r - b.1.r).abs(),
        (m.2.n1 - b.2.n1).abs(),
        (m.2.n2 - b.2.n2).abs(),
        (m.2.n3 - b.2.n3).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn dissipation(rollouts: usize, seed: u64) -> Outcome {
    let p = HydroParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idle = vec![ThrusterState::default(); STEPS];
    for k in 0..rollouts {
        let (pose, vel, _) = random_state(&mut rng, &p);
        let traj = rollout((pose, vel, ThrusterState::default()), &idle, &p, p.dt);
        for (t, pair) in traj.windows(2).enumerate() {
            let (before, after) = (kinetic_energy(&pair[0].1, &p), kinetic_energy(&pair[1].1, &p));
            ensure(after <= before, || {
                format!("rollout {k} step {t}: energy rose from {before} to {after} at {:?}", pair[0].1)
            })?;
        }
    }
    Ok(format!("energy non-increasing over {rollouts} idle rollouts"))
}

pub fn mirror_symmetry(rollouts: usize, seed: u64) -> Outcome {
    let p = HydroParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..rollouts {
        let start = random_state(&mut rng, &p);
        let cmds: Vec<ThrusterState> = (0..STEPS).map(|_| random_thrust(&mut rng)).collect();
        let mirrored_cmds: Vec<ThrusterState> = cmds.iter().map(mirror_thrust).collect();
        let a = rollout(start, &cmds, &p, p.dt);
        let b = rollout(mirror(&start), &mirrored_cmds, &p, p.dt);
        for (t, (sa, sb)) in a.iter().zip(&b).enumerate() {
            let gap = mirror_gap(sa, sb);
            worst = worst.max(gap);
            ensure(gap <= MIRROR_TOL, || format!("rollout {k} step {t}: mirror gap {gap:e}"))?;
        }
    }
    Ok(format!("worst mirror gap {worst:.1e} over {rollouts} rollouts"))
}

/// Record random actions in the environment, then replay them from the same
/// seed and require identical bits.
pub fn replay(rollouts: usize, seed: u64) -> Outcome {
    let spec = EnvSpec::default();
    for k in 0..rollouts as u64 {
        let mut env = DockingEnv::new(spec.clone()).unwrap();
        let mut spawn = ChaCha8Rng::seed_from_u64(seed + k);
        let mut act_rng = ChaCha8Rng::seed_from_u64(!(seed + k));
        env.reset(&mut spawn);
        let mut actions = Vec::new();
        let mut states = vec![*env.state()];
        let mut rewards = Vec::new();
        loop {
            let a = [act_rng.random_range(-1.0..=1.0), act_rng.random_range(-1.0..=1.0), act_rng.random_range(-1.0..=1.0)];
            let r = env.step(a).unwrap();
            actions.push(a);
            states.push(r.info.state);
            rewards.push(r.reward);
            if r.terminal.ends_episode() {
                break;
            }
        }
        let mut again = DockingEnv::new(spec.clone()).unwrap();
        again.reset(&mut ChaCha8Rng::seed_from_u64(seed + k));
        ensure(again.state() == &states[0], || format!("rollout {k}: spawn differs"))?;
        for (t, a) in actions.iter().enumerate() {
            let r = again.step(*a).unwrap();
            let same = r.info.state == states[t + 1] && r.reward.to_bits() == rewards[t].to_bits();
            ensure(same, || format!("rollout {k} step {t}: replay diverged"))?;
        }
    }
    Ok(format!("{rollouts} recorded episodes replayed bit-exactly"))
}

/// Endpoint of a 150-step constant-command maneuver at dt versus 300 steps
/// at dt/2, as a fraction of the path length flown at dt. Path length keeps
/// the measure meaningful for arcs that close back on the start.
pub fn timestep_convergence(rollouts: usize, seed: u64) -> f64 {
    let p = HydroParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..rollouts {
        let start = (Pose2D::default(), BodyVelocity::default(), ThrusterState::default());
        let cmd = random_thrust(&mut rng);
        let coarse = rollout(start, &vec![cmd; STEPS], &p, p.dt);
        let fine = rollout(start, &vec![cmd; 2 * STEPS], &p, p.dt / 2.0);
        let path: f64 = coarse.windows(2).map(|w| (w[1].0.x - w[0].0.x).hypot(w[1].0.y - w[0].0.y)).sum();
        let (a, b) = (coarse[STEPS].0, fine[2 * STEPS].0);
        worst = worst.max((a.x - b.x).hypot(a.y - b.y) / path.max(1e-9));
    }
    worst
}

pub fn run(rollouts: usize) -> Outcome {
    let parts = [dissipation(rollouts, 11)?, mirror_symmetry(rollouts, 12)?, replay(rollouts, 13)?];
    Ok(parts.join("; "))
}
