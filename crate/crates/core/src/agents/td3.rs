//! Twin delayed deep deterministic policy gradient.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::agents::{
    mean_f64, mse_grad, rng_stream, streams, to_f32, AgentConfig, Experience, Learner, LossReport,
    Policy, ReplayBatch, ReplayBuffer, Transition,
};
use crate::env::{Action, Observation, ACT_DIM, OBS_DIM};
use crate::error::{DockError, Result};
use crate::nn::{adam_step, polyak_update, Activation, AdamState, Matrix, MlpNet};

/// Clipped double-Q target `r + γ·(1 − terminal)·min(q1, q2)`.
pub fn td3_target(reward: f64, gamma: f64, terminal: bool, q1_next: f64, q2_next: f64) -> f64 {
    let live = if terminal { 0.0 } else { 1.0 };
    reward + gamma * live * q1_next.min(q2_next)
}

/// `clamp(actor(s) + N(0, σ²), −1, 1)`; `noise_std = 0` is the greedy action.
pub fn td3_select_action<R: Rng + ?Sized>(
    actor: &MlpNet<f32>,
    state: &Observation,
    noise_std: f64,
    rng: &mut R,
) -> Action {
    let mean = actor
        .forward(&to_f32(state))
        .expect("actor input matches observation size");
    let mut out = [0.0; ACT_DIM];
    for (o, m) in out.iter_mut().zip(&mean) {
        let noise = if noise_std > 0.0 {
            noise_std * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        *o = (*m as f64 + noise).clamp(-1.0, 1.0);
    }
    out
}

pub struct Td3 {
    cfg: AgentConfig,
    pub actor: MlpNet<f32>,
    pub actor_target: MlpNet<f32>,
    pub critics: [MlpNet<f32>; 2],
    pub critic_targets: [MlpNet<f32>; 2],
    actor_opt: AdamState<f32>,
    critic_opts: [AdamState<f32>; 2],
    buffer: ReplayBuffer,
    explore_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    update_calls: u64,
    steps_seen: usize,
}

impl Td3 {
    pub fn new(cfg: AgentConfig, seed: u64) -> Result<Self> {
        cfg.validate("agent")?;
        let mut init = rng_stream(seed, streams::INIT);
        let actor = MlpNet::new(
            &cfg.layer_sizes(OBS_DIM, ACT_DIM),
            Activation::Tanh,
            cfg.actor_final_scale,
            &mut init,
        )?;
        let critic_sizes = cfg.layer_sizes(OBS_DIM + ACT_DIM, 1);
        let critics = [
            MlpNet::new(&critic_sizes, Activation::Identity, 1.0, &mut init)?,
            MlpNet::new(&critic_sizes, Activation::Identity, 1.0, &mut init)?,
        ];
        let actor_lr = cfg.lr_or(cfg.actor_lr, 1e-3);
        let critic_lr = cfg.lr_or(cfg.critic_lr, 1e-3);
        Ok(Td3 {
            actor_opt: AdamState::for_net(&actor, actor_lr),
            critic_opts: [
                AdamState::for_net(&critics[0], critic_lr),
                AdamState::for_net(&critics[1], critic_lr),
            ],
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            explore_rng: rng_stream(seed, streams::EXPLORE),
            sample_rng: rng_stream(seed, streams::SAMPLE),
            update_calls: 0,
            steps_seen: 0,
            cfg,
        })
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn update_calls(&self) -> u64 {
        self.update_calls
    }

    /// One critic update, plus an actor/target update every
    /// `policy_delay` calls.
    pub fn update(&mut self, batch: &ReplayBatch) -> Result<LossReport> {
        let n = batch.len();
        let gamma = self.cfg.gamma;

        // smoothed target action
        let mut next_actions = self.actor_target.forward_batch(&batch.next_states)?;
        if self.cfg.target_noise_std > 0.0 {
            let noise = Normal::new(0.0, self.cfg.target_noise_std)
                .map_err(|e| DockError::Domain(e.to_string()))?;
            let clip = self.cfg.target_noise_clip;
            for a in next_actions.data_mut() {
                let eps: f64 = noise.sample(&mut self.sample_rng);
                *a = (*a as f64 + eps.clamp(-clip, clip)).clamp(-1.0, 1.0) as f32;
            }
        }
        let next_input = batch.next_states.hcat(&next_actions)?;
        let q1_next = self.critic_targets[0].forward_batch(&next_input)?;
        let q2_next = self.critic_targets[1].forward_batch(&next_input)?;
        let targets: Vec<f32> = (0..n)
            .map(|i| {
                td3_target(
                    batch.rewards[i] as f64,
                    gamma,
                    batch.terminals[i],
                    q1_next.get(i, 0) as f64,
                    q2_next.get(i, 0) as f64,
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

        self.update_calls += 1;
        let mut report = LossReport {
            critic: critic_loss / 2.0,
            ..LossReport::default()
        };
        if self.update_calls.is_multiple_of(self.cfg.policy_delay as u64) {
            let actions = self.actor.forward_cached(&batch.states)?;
            let q = self.critics[0].forward_cached(&batch.states.hcat(&actions)?)?;
            report.actor = Some(-mean_f64(q.data().iter().copied()));
            let upstream = Matrix::from_vec(n, 1, vec![-1.0 / n as f32; n])?;
            let dq_dinput = self.critics[0].backward_input(&upstream)?;
            let dq_daction = dq_dinput.columns(OBS_DIM, OBS_DIM + ACT_DIM);
            self.actor.zero_grads();
            self.actor.backward(&dq_daction)?;
            adam_step(&mut self.actor, &mut self.actor_opt);

            let tau = self.cfg.tau;
            polyak_update(&mut self.actor_target, &self.actor, tau)?;
            for (t, s) in self.critic_targets.iter_mut().zip(&self.critics) {
                polyak_update(t, s, tau)?;
            }
        }
        Ok(report)
    }
}

impl Learner for Td3 {
    fn algo(&self) -> &'static str {
        "td3"
    }

    fn act(&mut self, obs: &Observation) -> Action {
        if self.steps_seen < self.cfg.warmup_steps {
            let mut a = [0.0; ACT_DIM];
            for v in &mut a {
                *v = self.explore_rng.random_range(-1.0..=1.0);
            }
            return a;
        }
        td3_select_action(&self.actor, obs, self.cfg.exploration_noise_std, &mut self.explore_rng)
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
        Policy::Deterministic(self.actor.clone())
    }

    fn networks(&self) -> Vec<(&'static str, &MlpNet<f32>)> {
        vec![
            ("actor", &self.actor),
            ("critic1", &self.critics[0]),
            ("critic2", &self.critics[1]),
        ]
    }
}
