use dockrl::agents::ppo::{clipped_surrogate, Ppo};
use dockrl::agents::sac::{sac_target, squashed_gaussian_log_prob, Sac};
use dockrl::agents::td3::{td3_target, Td3};
use dockrl::agents::{gae, AgentConfig, Experience, GaeStep, Learner, ReplayBatch, Transition};
use dockrl::env::{DockingEnv, EnvSpec, TerminalKind, ACT_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ensure, Outcome};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn small_cfg() -> AgentConfig {
    AgentConfig {
        hidden_sizes: vec![16, 16],
        batch_size: 8,
        warmup_steps: 0,
        ..AgentConfig::default()
    }
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> ReplayBatch {
    let items: Vec<Transition> = (0..n)
        .map(|i| Transition {
            state: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            action: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            reward: rng.random_range(-1.0..0.0),
            next_state: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            terminal: i % 5 == 0,
        })
        .collect();
    ReplayBatch::from_transitions(&items)
}

pub fn td3_target_cases() -> Result<(), String> {
    ensure(close(td3_target(1.0, 0.99, false, 2.0, 3.0), 2.98, 1e-12), || "td3 target 2.98".into())?;
    ensure(td3_target(1.0, 0.99, true, 2.0, 3.0) == 1.0, || "td3 terminal target".into())?;
    ensure(
        td3_target(0.2, 0.9, false, 4.0, -1.5) == td3_target(0.2, 0.9, false, -1.5, 4.0),
        || "td3 target depends on critic order".into(),
    )
}

/// With `policy_delay = 2` the actor moves only on even-numbered calls.
pub fn td3_delay_counter() -> Result<(), String> {
    let cfg = AgentConfig {
        policy_delay: 2,
        ..small_cfg()
    };
    let mut agent = Td3::new(cfg, 5).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for call in 1..=6 {
        let before = agent.actor.params_flat();
        let target_before = agent.actor_target.params_flat();
        agent.update(&random_batch(&mut rng, 8)).map_err(|e| e.to_string())?;
        let moved = agent.actor.params_flat() != before;
        let target_moved = agent.actor_target.params_flat() != target_before;
        ensure(moved == (call % 2 == 0) && target_moved == moved, || {
            format!("call {call}: actor moved = {moved}, target moved = {target_moved}")
        })?;
    }
    Ok(())
}

pub fn sac_target_cases() -> Result<(), String> {
    ensure(close(sac_target(0.0, 0.99, false, 1.0, 2.0, 0.5, -1.0), 1.485, 1e-12), || "sac target 1.485".into())?;
    ensure(
        sac_target(0.3, 0.9, false, 1.0, 2.0, 0.0, -7.0) == td3_target(0.3, 0.9, false, 1.0, 2.0),
        || "α = 0 must reduce to the clipped double-Q target".into(),
    )?;
    ensure(sac_target(0.3, 0.9, true, 1.0, 2.0, 0.5, -7.0) == 0.3, || "sac terminal target".into())
}

/// Density of `tanh(u)`, `u ~ N(m, s²)`, near `a0` from the empirical CDF of
/// `samples` draws, against the closed-form log-prob.
pub fn sac_log_prob_vs_monte_carlo(samples: usize) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    // (mean, log_std, a0, half-width): windows keep the finite-difference bias
    // under 0.4% and at least ~26k hits (σ ≤ 0.62%)
    let cases: [(f64, f64, f64, f64); 4] =
        [(0.3, -0.5, 0.2, 0.05), (-0.5, 0.3, -0.6, 0.04), (1.0, 0.0, 0.9, 0.01), (0.0, 0.5, -0.85, 0.02)];
    for &(mean, log_std, a0, delta) in &cases {
        let std = f64::exp(log_std);
        let (lo, hi) = ((a0 - delta).max(-1.0), (a0 + delta).min(1.0));
        let hits = (0..samples)
            .filter(|_| {
                let z: f64 = rng.sample(StandardNormal);
                let a = (mean + std * z).tanh();
                a > lo && a <= hi
            })
            .count();
        let empirical = hits as f64 / samples as f64 / (hi - lo);
        let analytic = squashed_gaussian_log_prob(&[mean], &[log_std], &[f64::atanh(a0)]).exp();
        let err = (empirical - analytic).abs() / analytic;
        worst = worst.max(err);
        ensure(err <= 0.02, || {
            format!("N({mean}, e^{log_std}) at a = {a0}: Monte-Carlo {empirical:.5} vs {analytic:.5}")
        })?;
    }
    Ok(worst)
}

pub fn sac_log_prob_finite_at_edges() -> Result<(), String> {
    for u in [-40.0, -20.0, -9.0, 9.0, 20.0, 40.0, 400.0] {
        let lp = squashed_gaussian_log_prob(&[0.0, u], &[0.0, -3.0], &[u, u]);
        ensure(lp.is_finite(), || format!("log-prob not finite at u = {u}"))?;
    }
    Ok(())
}

fn sac_with_log_std(log_std: f32) -> Sac {
    let mut sac = Sac::new(small_cfg(), 3).unwrap();
    let last = sac.actor.layers_mut().last_mut().unwrap();
    last.weight.iter_mut().for_each(|w| *w = 0.0);
    for (j, b) in last.bias.iter_mut().enumerate() {
        *b = if j < ACT_DIM { 0.0 } else { log_std };
    }
    sac
}

/// Low-entropy policy (−log π below the target) must raise α and a
/// high-entropy one must lower it.
pub fn sac_temperature_sign() -> Result<(), String> {
    ensure(Sac::temperature_gradient(&[5.0, 6.0], -3.0) < 0.0, || "gradient sign for low entropy".into())?;
    ensure(Sac::temperature_gradient(&[-1.0, 0.0], -3.0) > 0.0, || "gradient sign for high entropy".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let batch = random_batch(&mut rng, 8);
    let mut narrow = sac_with_log_std(-5.0);
    let a0 = narrow.alpha();
    narrow.update(&batch).map_err(|e| e.to_string())?;
    ensure(narrow.alpha() > a0, || format!("narrow policy: α {a0} -> {}", narrow.alpha()))?;
    let mut wide = sac_with_log_std(0.0);
    let a0 = wide.alpha();
    wide.update(&batch).map_err(|e| e.to_string())?;
    ensure(wide.alpha() < a0, || format!("wide policy: α {a0} -> {}", wide.alpha()))
}

fn gstep(reward: f64, value: f64, next_value: f64, terminal: bool, episode_end: bool) -> GaeStep {
    GaeStep { reward, value, next_value, terminal, episode_end }
}

pub fn gae_cases() -> Result<(), String> {
    let (adv, _) = gae(&[gstep(0.0, 0.0, 0.0, false, false); 4], 0.99, 0.95);
    ensure(adv.iter().all(|a| *a == 0.0), || "zero signal".into())?;
    let (adv, _) = gae(&[gstep(1.0, 0.5, 9.0, true, true)], 0.99, 0.95);
    ensure(close(adv[0], 0.5, 1e-12), || format!("single terminal step: {adv:?}"))?;
    let (adv, ret) = gae(&[gstep(1.0, 0.0, 0.0, false, false), gstep(1.0, 0.0, 0.0, true, true)], 1.0, 1.0);
    ensure(close(adv[0], 2.0, 1e-12) && close(adv[1], 1.0, 1e-12), || format!("two steps: {adv:?}"))?;
    ensure(ret == adv, || "returns = advantages + values".into())
}

pub fn ppo_clip_cases() -> Result<(), String> {
    ensure(close(clipped_surrogate(1.5, 1.0, 0.2), 1.2, 1e-12), || "ρ = 1.5, A = 1".into())?;
    ensure(close(clipped_surrogate(0.5, -1.0, 0.2), -0.8, 1e-12), || "ρ = 0.5, A = −1".into())?;
    ensure(clipped_surrogate(1.0, 0.7, 0.2) == 0.7, || "ρ = 1 passes the advantage".into())?;
    let mean_adv: f64 = [0.5, -0.2, -0.3].iter().map(|a| clipped_surrogate(1.0, *a, 0.2)).sum::<f64>() / 3.0;
    ensure(close(mean_adv, 0.0, 1e-12), || "normalised advantages average zero".into())
}

/// PPO's first minibatch must reproduce the stored log-probabilities.
pub fn ppo_initial_ratio() -> Result<f64, String> {
    let cfg = AgentConfig {
        rollout_length: 128,
        minibatch_size: 32,
        epochs_per_rollout: 2,
        ..small_cfg()
    };
    let mut ppo = Ppo::new(cfg, 8).map_err(|e| e.to_string())?;
    let mut env = DockingEnv::new(EnvSpec::default()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut obs = env.reset(&mut rng);
    loop {
        let a = ppo.act(&obs);
        let s = env.step(a).map_err(|e| e.to_string())?;
        let ended = s.terminal.ends_episode();
        let report = ppo
            .observe(Experience {
                obs,
                action: s.info.action,
                reward: s.reward,
                next_obs: s.observation,
                terminal: s.terminal.is_terminal(),
                episode_end: ended,
            })
            .map_err(|e| e.to_string())?;
        if let Some(r) = report {
            let err = r.initial_ratio_error.ok_or("missing ratio diagnostic")?;
            ensure(err <= 1e-6, || format!("first-minibatch |ρ − 1| = {err:e}"))?;
            return Ok(err);
        }
        obs = if ended { env.reset(&mut rng) } else { s.observation };
    }
}

/// A time-limit step stays bootstrappable end to end: the environment flags
/// it as non-terminal, the replay buffer stores it that way, and both
/// targets keep the discounted next-state value.
pub fn truncation_bootstrap() -> Result<(), String> {
    let mut spec = EnvSpec::default();
    spec.env.max_steps = 1;
    let mut env = DockingEnv::new(spec).map_err(|e| e.to_string())?;
    let obs = env.reset(&mut ChaCha8Rng::seed_from_u64(0));
    let s = env.step([0.0; ACT_DIM]).map_err(|e| e.to_string())?;
    ensure(s.terminal == TerminalKind::Timeout && !s.terminal.is_terminal(), || {
        format!("expected a non-terminal timeout, got {:?}", s.terminal)
    })?;

    let cfg = AgentConfig {
        warmup_steps: 100,
        ..small_cfg()
    };
    let mut td3 = Td3::new(cfg, 0).map_err(|e| e.to_string())?;
    td3.observe(Experience {
        obs,
        action: s.info.action,
        reward: s.reward,
        next_obs: s.observation,
        terminal: s.terminal.is_terminal(),
        episode_end: true,
    })
    .map_err(|e| e.to_string())?;
    let stored = td3.buffer().iter_oldest_first().next().copied().ok_or("buffer empty")?;
    ensure(!stored.terminal, || "timeout stored as terminal".into())?;
    ensure(stored.next_state == s.observation.map(|v| v as f32), || "next state not kept".into())?;

    ensure(close(td3_target(-1.0, 0.9, stored.terminal, 2.0, 3.0), -1.0 + 0.9 * 2.0, 1e-12), || {
        "td3 target dropped the bootstrap".into()
    })?;
    let (adv, _) = gae(&[gstep(1.0, 0.5, 2.0, false, true)], 0.9, 0.95);
    ensure(close(adv[0], 1.0 + 0.9 * 2.0 - 0.5, 1e-12), || format!("gae truncation: {adv:?}"))
}

pub fn run() -> Outcome {
    td3_target_cases()?;
    td3_delay_counter()?;
    sac_target_cases()?;
    let mc = sac_log_prob_vs_monte_carlo(1_000_000)?;
    sac_log_prob_finite_at_edges()?;
    sac_temperature_sign()?;
    gae_cases()?;
    ppo_clip_cases()?;
    let ratio = ppo_initial_ratio()?;
    truncation_bootstrap()?;
    Ok(format!(
        "targets, delay counter, temperature sign, GAE, clipping, truncation ok; log-prob vs Monte-Carlo worst {:.2}%; PPO initial |ρ−1| {ratio:.1e}",
        mc * 100.0
    ))
}

