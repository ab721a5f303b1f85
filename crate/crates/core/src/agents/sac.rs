//! Soft actor-critic with a tanh-squashed Gaussian policy and automatic
//! temperature tuning.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::agents::{
    mse_grad, rng_stream, streams, to_f32, AgentConfig, Experience, Learner, LossReport, Policy,
    ReplayBatch, ReplayBuffer, Transition,
};
use crate::env::{Action, Observation, ACT_DIM, OBS_DIM};
use crate::error::Result;
use crate::nn::{adam_step, polyak_update, Activation, AdamState, Matrix, MlpNet};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Soft target `r + γ·(1 − terminal)·(min(q1, q2) − α·log π(a'|s'))`.
pub fn sac_target(
    reward: f64,
    gamma: f64,
    terminal: bool,
    q1_next: f64,
    q2_next: f64,
    alpha: f64,
    next_log_prob: f64,
) -> f64 {
    let live = if terminal { 0.0 } else { 1.0 };
    reward + gamma * live * (q1_next.min(q2_next) - alpha * next_log_prob)
}

/// `log(1 − tanh²(u))` written as `2·(ln 2 − u − softplus(−2u))`, finite for
/// any `u`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    let x = -2.0 * u;
    let softplus = if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    2.0 * (LN_2 - u - softplus)
}

/// Log-density of `tanh(u)` where `u ~ N(mean, exp(log_std)²)`, evaluated at
/// the pre-squash value `u`, summed over dimensions.
pub fn squashed_gaussian_log_prob(mean: &[f64], log_std: &[f64], pre_tanh: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(pre_tanh)
        .map(|((m, ls), u)| {
            let ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let z = (u - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln() - log_one_minus_tanh_sq(*u)
        })
        .sum()
}

/// Draw (or take the mode of) the squashed Gaussian. Returns the action and
/// its log-probability.
pub fn sac_select_action<R: Rng + ?Sized>(
    actor: &MlpNet<f32>,
    state: &Observation,
    rng: &mut R,
    deterministic: bool,
) -> (Action, f64) {
    let out = actor
        .forward(&to_f32(state))
        .expect("actor input matches observation size");
    let mean: Vec<f64> = out[..ACT_DIM].iter().map(|v| *v as f64).collect();
    let log_std: Vec<f64> = out[ACT_DIM..]
        .iter()
        .map(|v| (*v as f64).clamp(LOG_STD_MIN, LOG_STD_MAX))
        .collect();
    let mut pre = [0.0; ACT_DIM];
    for j in 0..ACT_DIM {
        let z: f64 = if deterministic { 0.0 } else { rng.sample(StandardNormal) };
        pre[j] = mean[j] + log_std[j].exp() * z;
    }
    let log_prob = squashed_gaussian_log_prob(&mean, &log_std, &pre);
    let mut action = [0.0; ACT_DIM];
    for (a, u) in action.iter_mut().zip(&pre) {
        *a = u.tanh();
    }
    (action, log_prob)
}

/// Batched reparameterised sample from actor outputs `[mean | log_std]`.
struct SquashedSample {
    actions: Matrix<f32>,
    log_probs: Vec<f64>,
    /// Standard-normal noise used per entry.
    noise: Vec<f64>,
    std: Vec<f64>,
    /// Whether log_std was inside the clamp range (gradient passes).
    log_std_free: Vec<bool>,
}

fn sample_batch(out: &Matrix<f32>, rng: &mut ChaCha8Rng) -> SquashedSample {
    let n = out.rows();
    let mut actions = Matrix::zeros(n, ACT_DIM);
    let mut log_probs = vec![0.0; n];
    let mut noise = vec![0.0; n * ACT_DIM];
    let mut std = vec![0.0; n * ACT_DIM];
    let mut log_std_free = vec![true; n * ACT_DIM];
    for i in 0..n {
        let row = out.row(i);
        let mut lp = 0.0;
        for j in 0..ACT_DIM {
            let k = i * ACT_DIM + j;
            let m = row[j] as f64;
            let raw_ls = row[ACT_DIM + j] as f64;
            let ls = raw_ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
            log_std_free[k] = ls == raw_ls;
            let z: f64 = rng.sample(StandardNormal);
            let s = ls.exp();
            let u = m + s * z;
            lp += -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln() - log_one_minus_tanh_sq(u);
            actions.row_mut(i)[j] = u.tanh() as f32;
            noise[k] = z;
            std[k] = s;
        }
        log_probs[i] = lp;
    }
    SquashedSample {
        actions,
        log_probs,
        noise,
        std,
        log_std_free,
    }
}

pub struct Sac {
    cfg: AgentConfig,
    pub actor: MlpNet<f32>,
    pub critics: [MlpNet<f32>; 2],
    pub critic_targets: [MlpNet<f32>; 2],
    actor_opt: AdamState<f32>,
    critic_opts: [AdamState<f32>; 2],
    log_alpha: f64,
    alpha_opt: AdamState<f64>,
    buffer: ReplayBuffer,
    explore_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    steps_seen: usize,
}

impl Sac {
    pub fn new(cfg: AgentConfig, seed: u64) -> Result<Self> {
        cfg.validate("agent")?;
        let mut init = rng_stream(seed, streams::INIT);
        let actor = MlpNet::new(
            &cfg.layer_sizes(OBS_DIM, 2 * ACT_DIM),
            Activation::Identity,
            cfg.actor_final_scale,
            &mut init,
        )?;
        let critic_sizes = cfg.layer_sizes(OBS_DIM + ACT_DIM, 1);
        let critics = [
            MlpNet::new(&critic_sizes, Activation::Identity, 1.0, &mut init)?,
            MlpNet::new(&critic_sizes, Activation::Identity, 1.0, &mut init)?,
        ];
        let actor_lr = cfg.lr_or(cfg.actor_lr, 3e-4);
        let critic_lr = cfg.lr_or(cfg.critic_lr, 3e-4);
        Ok(Sac {
            actor_opt: AdamState::for_net(&actor, actor_lr),
            critic_opts: [
                AdamState::for_net(&critics[0], critic_lr),
                AdamState::for_net(&critics[1], critic_lr),
            ],
            critic_targets: critics.clone(),
            actor,
            critics,
            log_alpha: cfg.sac_initial_alpha.ln(),
            alpha_opt: AdamState::new(&[1], cfg.alpha_lr),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            explore_rng: rng_stream(seed, streams::EXPLORE),
            sample_rng: rng_stream(seed, streams::SAMPLE),
            steps_seen: 0,
            cfg,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.log_alpha = alpha.ln();
    }

    /// Gradient of the temperature loss `−log α·(log π + H_target)` with
    /// respect to `log α`, averaged over the batch.
    pub fn temperature_gradient(log_probs: &[f64], target_entropy: f64) -> f64 {
        let n = log_probs.len().max(1) as f64;
        -log_probs.iter().map(|lp| lp + target_entropy).sum::<f64>() / n
    }

    pub fn update(&mut self, batch: &ReplayBatch) -> Result<LossReport> {
        let n = batch.len();
        let gamma = self.cfg.gamma;
        let alpha = self.alpha();

        // critic targets with a fresh next action
        let next_out = self.actor.forward_batch(&batch.next_states)?;
        let next = sample_batch(&next_out, &mut self.sample_rng);
        let next_input = batch.next_states.hcat(&next.actions)?;
        let q1_next = self.critic_targets[0].forward_batch(&next_input)?;
        let q2_next = self.critic_targets[1].forward_batch(&next_input)?;
        let targets: Vec<f32> = (0..n)
            .map(|i| {
                sac_target(
                    batch.rewards[i] as f64,
                    gamma,
                    batch.terminals[i],
                    q1_next.get(i, 0) as f64,
                    q2_next.get(i, 0) as f64,
                    alpha,
                    next.log_probs[i],
                ) as f32
            })
            .collect();

        let input = batch.states.hcat(&batch.actions)?;
        let mut critic_loss = 0.0;
        for (critic, opt) in self.critics.iter_mut().zip(self.critic_opts.iter_mut()) {
            let q = critic.forward_cached(&input)?;
            let (grad, loss) = mse_grad(&q, &targets);
            critic.zero_grads();
            critic.backward(&grad)?;
            adam_step(critic, opt);
            critic_loss += loss;
        }

        // actor: minimise α·log π(a|s) − min(Q1, Q2)(s, a)
        let out = self.actor.forward_cached(&batch.states)?;
        let sample = sample_batch(&out, &mut self.sample_rng);
        let pi_input = batch.states.hcat(&sample.actions)?;
        let q1 = self.critics[0].forward_cached(&pi_input)?;
        let q2 = self.critics[1].forward_cached(&pi_input)?;
        let mut up1 = Matrix::zeros(n, 1);
        let mut up2 = Matrix::zeros(n, 1);
        let mut actor_loss = 0.0;
        let inv_n = 1.0 / n as f64;
        for i in 0..n {
            let (a, b) = (q1.get(i, 0), q2.get(i, 0));
            let q_min = if a <= b {
                up1.data_mut()[i] = -inv_n as f32;
                a
            } else {
                up2.data_mut()[i] = -inv_n as f32;
                b
            };
            actor_loss += alpha * sample.log_probs[i] - q_min as f64;
        }
        actor_loss *= inv_n;
        let g1 = self.critics[0].backward_input(&up1)?;
        let g2 = self.critics[1].backward_input(&up2)?;

        let mut actor_grad = Matrix::zeros(n, 2 * ACT_DIM);
        for i in 0..n {
            let row = actor_grad.row_mut(i);
            for j in 0..ACT_DIM {
                let k = i * ACT_DIM + j;
                let a = sample.actions.get(i, j) as f64;
                // d(−minQ)/da, already divided by n
                let dq = (g1.get(i, OBS_DIM + j) + g2.get(i, OBS_DIM + j)) as f64;
                let dpre_from_q = dq * (1.0 - a * a);
                // d(α·log π)/du = 2α·tanh(u)
                let dpre_from_lp = alpha * 2.0 * a * inv_n;
                let dpre = dpre_from_q + dpre_from_lp;
                row[j] = dpre as f32;
                if sample.log_std_free[k] {
                    let dls = dpre * sample.std[k] * sample.noise[k] - alpha * inv_n;
                    row[ACT_DIM + j] = dls as f32;
                }
            }
        }
        self.actor.zero_grads();
        self.actor.backward(&actor_grad)?;
        adam_step(&mut self.actor, &mut self.actor_opt);

        // temperature
        let grad = Self::temperature_gradient(&sample.log_probs, self.cfg.sac_target_entropy);
        let mut la = [self.log_alpha];
        self.alpha_opt.begin_step();
        self.alpha_opt.update(0, &mut la, &[grad]);
        self.log_alpha = la[0];

        let tau = self.cfg.tau;
        for (t, s) in self.critic_targets.iter_mut().zip(&self.critics) {
            polyak_update(t, s, tau)?;
        }

        let entropy = -sample.log_probs.iter().sum::<f64>() * inv_n;
        Ok(LossReport {
            critic: critic_loss / 2.0,
            actor: Some(actor_loss),
            alpha: Some(self.alpha()),
            entropy: Some(entropy),
            initial_ratio_error: None,
        })
    }
}

impl Learner for Sac {
    fn algo(&self) -> &'static str {
        "sac"
    }

    fn act(&mut self, obs: &Observation) -> Action {
        if self.steps_seen < self.cfg.warmup_steps {
            let mut a = [0.0; ACT_DIM];
            for v in &mut a {
                *v = self.explore_rng.random_range(-1.0..=1.0);
            }
            return a;
        }
        sac_select_action(&self.actor, obs, &mut self.explore_rng, false).0
    }

    fn observe(&mut self, exp: Experience) -> Result<Option<LossReport>> {
        self.buffer.push(Transition {
            state: to_f32(&exp.obs),
            action: to_f32(&exp.action),
            reward: (exp.reward * self.cfg.reward_scale) as f32,
            next_state: to_f32(&exp.next_obs),
            terminal: exp.terminal,
        });
        self.steps_seen += 1;
        if self.steps_seen < self.cfg.warmup_steps || self.buffer.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample(&mut self.sample_rng, self.cfg.batch_size)?;
        self.update(&batch).map(Some)
    }

    fn policy(&self) -> Policy {
        Policy::SquashedMean(self.actor.clone())
    }

    fn networks(&self) -> Vec<(&'static str, &MlpNet<f32>)> {
        vec![
            ("actor", &self.actor),
            ("critic1", &self.critics[0]),
            ("critic2", &self.critics[1]),
        ]
    }
}
