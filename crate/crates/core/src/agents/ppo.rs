//! Proximal policy optimisation with a clipped surrogate, a diagonal
//! Gaussian policy with state-independent log-std, and GAE advantages.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::agents::{
    clip_grad_norm, gae, mse_grad, rng_stream, streams, to_f32, AgentConfig, Experience, GaeStep,
    Learner, LossReport, Policy,
};
use crate::env::{Action, Observation, ACT_DIM, OBS_DIM};
use crate::error::Result;
use crate::nn::{adam_step, Activation, AdamState, Matrix, MlpNet};

/// `min(ρ·A, clamp(ρ, 1 − ε, 1 + ε)·A)`
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Diagonal Gaussian log-density.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct RolloutStep {
    obs: [f32; OBS_DIM],
    /// Unclamped Gaussian sample.
    action: [f64; ACT_DIM],
    log_prob: f64,
    value: f64,
    reward: f64,
    next_value: f64,
    terminal: bool,
    episode_end: bool,
}

/// On-policy batch with advantages (normalised) and returns.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub states: Matrix<f32>,
    pub actions: Vec<[f64; ACT_DIM]>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

fn normalise(values: &mut [f64]) {
    let n = values.len() as f64;
    if values.is_empty() {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
}

pub struct Ppo {
    cfg: AgentConfig,
    pub policy_net: MlpNet<f32>,
    pub log_std: Vec<f32>,
    pub value_net: MlpNet<f32>,
    policy_opt: AdamState<f32>,
    log_std_opt: AdamState<f32>,
    value_opt: AdamState<f32>,
    rollout: Vec<RolloutStep>,
    pending: Option<(Action, f64, f64)>,
    explore_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
}

impl Ppo {
    pub fn new(cfg: AgentConfig, seed: u64) -> Result<Self> {
        cfg.validate("agent")?;
        let mut init = rng_stream(seed, streams::INIT);
        let policy_net = MlpNet::new(
            &cfg.layer_sizes(OBS_DIM, ACT_DIM),
            Activation::Identity,
            cfg.actor_final_scale,
            &mut init,
        )?;
        let value_net = MlpNet::new(&cfg.layer_sizes(OBS_DIM, 1), Activation::Identity, 1.0, &mut init)?;
        let lr_pi = cfg.lr_or(cfg.actor_lr, 3e-4);
        let lr_v = cfg.lr_or(cfg.critic_lr, 3e-4);
        Ok(Ppo {
            policy_opt: AdamState::for_net(&policy_net, lr_pi),
            log_std_opt: AdamState::new(&[ACT_DIM], lr_pi),
            value_opt: AdamState::for_net(&value_net, lr_v),
            log_std: vec![cfg.ppo_initial_log_std as f32; ACT_DIM],
            policy_net,
            value_net,
            rollout: Vec::with_capacity(cfg.rollout_length),
            pending: None,
            explore_rng: rng_stream(seed, streams::EXPLORE),
            sample_rng: rng_stream(seed, streams::SAMPLE),
            cfg,
        })
    }

    fn value_of(&self, obs: &[f32; OBS_DIM]) -> f64 {
        self.value_net.forward(obs).expect("value net input size")[0] as f64
    }

    fn log_std_f64(&self) -> Vec<f64> {
        self.log_std.iter().map(|v| *v as f64).collect()
    }

    /// Assemble the rollout into a batch with GAE advantages.
    fn build_batch(&self) -> RolloutBatch {
        let steps: Vec<GaeStep> = self
            .rollout
            .iter()
            .map(|s| GaeStep {
                reward: s.reward,
                value: s.value,
                next_value: s.next_value,
                terminal: s.terminal,
                episode_end: s.episode_end,
            })
            .collect();
        let (mut advantages, returns) = gae(&steps, self.cfg.gamma, self.cfg.gae_lambda);
        normalise(&mut advantages);
        let obs: Vec<[f32; OBS_DIM]> = self.rollout.iter().map(|s| s.obs).collect();
        RolloutBatch {
            states: Matrix::from_rows(&obs).expect("uniform rows"),
            actions: self.rollout.iter().map(|s| s.action).collect(),
            log_probs: self.rollout.iter().map(|s| s.log_prob).collect(),
            advantages,
            returns,
        }
    }

    /// Epochs of minibatch updates on one rollout.
    pub fn update(&mut self, batch: &RolloutBatch) -> Result<LossReport> {
        let n = batch.log_probs.len();
        let mb = self.cfg.minibatch_size.min(n);
        let clip = self.cfg.ppo_clip;
        let mut order: Vec<usize> = (0..n).collect();
        let mut report = LossReport::default();
        let (mut pi_loss_sum, mut v_loss_sum, mut count) = (0.0, 0.0, 0usize);

        for epoch in 0..self.cfg.epochs_per_rollout {
            order.shuffle(&mut self.sample_rng);
            for (chunk_idx, chunk) in order.chunks(mb).enumerate() {
                let m = chunk.len();
                let rows: Vec<&[f32]> = chunk.iter().map(|&i| batch.states.row(i)).collect();
                let states = Matrix::from_rows(&rows)?;

                // policy
                let means = self.policy_net.forward_cached(&states)?;
                let log_std = self.log_std_f64();
                let std: Vec<f64> = log_std.iter().map(|l| l.exp()).collect();
                let mut d_mean = Matrix::zeros(m, ACT_DIM);
                let mut d_log_std = vec![0.0f64; ACT_DIM];
                let mut pi_loss = 0.0;
                let mut max_ratio_err: f64 = 0.0;
                for (r, &i) in chunk.iter().enumerate() {
                    let mean: Vec<f64> = means.row(r).iter().map(|v| *v as f64).collect();
                    let action = &batch.actions[i];
                    let lp = gaussian_log_prob(&mean, &log_std, action);
                    let ratio = (lp - batch.log_probs[i]).exp();
                    max_ratio_err = max_ratio_err.max((ratio - 1.0).abs());
                    let adv = batch.advantages[i];
                    pi_loss -= clipped_surrogate(ratio, adv, clip);
                    // gradient flows only through the unclipped branch when it is the min
                    let unclipped_active = ratio * adv <= ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
                    let d_lp = if unclipped_active { -ratio * adv / m as f64 } else { 0.0 };
                    for j in 0..ACT_DIM {
                        let z = (action[j] - mean[j]) / std[j];
                        d_mean.row_mut(r)[j] = (d_lp * z / std[j]) as f32;
                        d_log_std[j] += d_lp * (z * z - 1.0);
                    }
                }
                if epoch == 0 && chunk_idx == 0 {
                    report.initial_ratio_error = Some(max_ratio_err);
                }
                pi_loss /= m as f64;
                // entropy bonus: H = Σ (log σ + ½ ln 2πe)
                let entropy: f64 = log_std.iter().map(|l| l + 0.5 * (2.0 * PI * std::f64::consts::E).ln()).sum();
                for g in &mut d_log_std {
                    *g -= self.cfg.entropy_coef;
                }
                self.policy_net.zero_grads();
                self.policy_net.backward(&d_mean)?;
                let mut g_ls: Vec<f32> = d_log_std.iter().map(|g| *g as f32).collect();
                clip_grad_norm(&mut [&mut self.policy_net], &mut g_ls, self.cfg.max_grad_norm);
                adam_step(&mut self.policy_net, &mut self.policy_opt);
                self.log_std_opt.begin_step();
                self.log_std_opt.update(0, &mut self.log_std, &g_ls);
                report.entropy = Some(entropy);

                // value
                let values = self.value_net.forward_cached(&states)?;
                let targets: Vec<f32> = chunk.iter().map(|&i| batch.returns[i] as f32).collect();
                let (mut grad, v_loss) = mse_grad(&values, &targets);
                let coef = self.cfg.value_coef as f32;
                grad.data_mut().iter_mut().for_each(|g| *g *= coef);
                self.value_net.zero_grads();
                self.value_net.backward(&grad)?;
                clip_grad_norm(&mut [&mut self.value_net], &mut [], self.cfg.max_grad_norm);
                adam_step(&mut self.value_net, &mut self.value_opt);

                pi_loss_sum += pi_loss;
                v_loss_sum += v_loss;
                count += 1;
            }
        }
        report.actor = Some(pi_loss_sum / count.max(1) as f64);
        report.critic = v_loss_sum / count.max(1) as f64;
        Ok(report)
    }
}

impl Learner for Ppo {
    fn algo(&self) -> &'static str {
        "ppo"
    }

    fn act(&mut self, obs: &Observation) -> Action {
        let o = to_f32(obs);
        let mean: Vec<f64> = self
            .policy_net
            .forward(&o)
            .expect("policy input size")
            .iter()
            .map(|v| *v as f64)
            .collect();
        let log_std = self.log_std_f64();
        let mut sample = [0.0; ACT_DIM];
        for j in 0..ACT_DIM {
            let z: f64 = self.explore_rng.sample(StandardNormal);
            sample[j] = mean[j] + log_std[j].exp() * z;
        }
        let log_prob = gaussian_log_prob(&mean, &log_std, &sample);
        let value = self.value_of(&o);
        self.pending = Some((sample, log_prob, value));
        let mut applied = sample;
        applied.iter_mut().for_each(|a| *a = a.clamp(-1.0, 1.0));
        applied
    }

    fn observe(&mut self, exp: Experience) -> Result<Option<LossReport>> {
        let (action, log_prob, value) = self.pending.take().ok_or_else(|| {
            crate::error::DockError::Usage("observe called without a preceding act".into())
        })?;
        let rollout_full = self.rollout.len() + 1 >= self.cfg.rollout_length;
        // bootstrap value for truncation and for a rollout cut mid-episode;
        // otherwise filled from the next step's value below
        let next_value = if exp.terminal {
            0.0
        } else if exp.episode_end || rollout_full {
            self.value_of(&to_f32(&exp.next_obs))
        } else {
            f64::NAN
        };
        if let Some(prev) = self.rollout.last_mut() {
            if prev.next_value.is_nan() {
                prev.next_value = value;
            }
        }
        self.rollout.push(RolloutStep {
            obs: to_f32(&exp.obs),
            action,
            log_prob,
            value,
            reward: exp.reward * self.cfg.reward_scale,
            next_value,
            terminal: exp.terminal,
            episode_end: exp.episode_end,
        });
        if !rollout_full {
            return Ok(None);
        }
        let batch = self.build_batch();
        self.rollout.clear();
        self.update(&batch).map(Some)
    }

    fn policy(&self) -> Policy {
        Policy::ClampedMean(self.policy_net.clone())
    }

    fn networks(&self) -> Vec<(&'static str, &MlpNet<f32>)> {
        vec![("actor", &self.policy_net), ("value", &self.value_net)]
    }
}
