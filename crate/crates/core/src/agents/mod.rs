//! TD3, SAC and PPO learners plus the replay buffer and advantage estimator
//! they share.

pub mod gae;
pub mod ppo;
pub mod replay;
pub mod sac;
pub mod td3;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Observation, ACT_DIM, OBS_DIM};
use crate::error::{DockError, Result};
use crate::nn::{checkpoint, Activation, Matrix, MlpNet};

pub use gae::{gae, GaeStep};
pub use ppo::{clipped_surrogate, Ppo};
pub use replay::{ReplayBatch, ReplayBuffer, Transition};
pub use sac::{sac_target, squashed_gaussian_log_prob, Sac};
pub use td3::{td3_target, Td3};

pub const ALGORITHMS: [&str; 3] = ["td3", "sac", "ppo"];

/// Hyperparameters for all three learners (under the `agent` config key).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub hidden_sizes: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Uniform-random action steps before off-policy updates start.
    pub warmup_steps: usize,
    pub exploration_noise_std: f64,
    pub target_noise_std: f64,
    pub target_noise_clip: f64,
    pub policy_delay: usize,
    pub sac_initial_alpha: f64,
    pub sac_target_entropy: f64,
    pub ppo_clip: f64,
    pub gae_lambda: f64,
    pub rollout_length: usize,
    pub epochs_per_rollout: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub ppo_initial_log_std: f64,
    /// Defaults to 1e-3 for TD3 and 3e-4 for SAC/PPO when absent.
    pub actor_lr: Option<f64>,
    pub critic_lr: Option<f64>,
    pub alpha_lr: f64,
    /// Multiplier applied to rewards before they reach value estimates.
    pub reward_scale: f64,
    /// Initial scale of the actor's output layer.
    pub actor_final_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            hidden_sizes: vec![64, 64],
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            buffer_capacity: 100_000,
            warmup_steps: 1000,
            exploration_noise_std: 0.1,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            policy_delay: 2,
            sac_initial_alpha: 0.2,
            sac_target_entropy: -(ACT_DIM as f64),
            ppo_clip: 0.2,
            gae_lambda: 0.95,
            rollout_length: 2048,
            epochs_per_rollout: 10,
            minibatch_size: 64,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            ppo_initial_log_std: 0.0,
            actor_lr: None,
            critic_lr: None,
            alpha_lr: 3e-4,
            reward_scale: 1e-3,
            actor_final_scale: 1e-3,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}.{k}");
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(DockError::config(key("hidden_sizes"), "needs at least one non-zero layer"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(DockError::config(key("gamma"), "must lie in (0, 1)"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(DockError::config(key("tau"), "must lie in (0, 1]"));
        }
        if !(self.ppo_clip > 0.0) {
            return Err(DockError::config(key("ppo_clip"), "must be > 0"));
        }
        if self.policy_delay < 1 {
            return Err(DockError::config(key("policy_delay"), "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(DockError::config(key("gae_lambda"), "must lie in [0, 1]"));
        }
        for (name, value) in [
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("rollout_length", self.rollout_length),
            ("epochs_per_rollout", self.epochs_per_rollout),
            ("minibatch_size", self.minibatch_size),
        ] {
            if value == 0 {
                return Err(DockError::config(key(name), "must be >= 1"));
            }
        }
        if self.batch_size > self.buffer_capacity {
            return Err(DockError::config(key("batch_size"), "must not exceed buffer_capacity"));
        }
        for (name, value) in [
            ("exploration_noise_std", self.exploration_noise_std),
            ("target_noise_std", self.target_noise_std),
            ("target_noise_clip", self.target_noise_clip),
            ("entropy_coef", self.entropy_coef),
            ("value_coef", self.value_coef),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(DockError::config(key(name), "must be finite and >= 0"));
            }
        }
        for (name, value) in [
            ("sac_initial_alpha", self.sac_initial_alpha),
            ("alpha_lr", self.alpha_lr),
            ("reward_scale", self.reward_scale),
            ("actor_final_scale", self.actor_final_scale),
            ("actor_lr", self.actor_lr.unwrap_or(1.0)),
            ("critic_lr", self.critic_lr.unwrap_or(1.0)),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(DockError::config(key(name), "must be finite and > 0"));
            }
        }
        if !self.sac_target_entropy.is_finite() {
            return Err(DockError::config(key("sac_target_entropy"), "must be finite"));
        }
        if !self.ppo_initial_log_std.is_finite() {
            return Err(DockError::config(key("ppo_initial_log_std"), "must be finite"));
        }
        Ok(())
    }

    fn lr_or(&self, explicit: Option<f64>, algo_default: f64) -> f64 {
        explicit.unwrap_or(algo_default)
    }

    pub fn layer_sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut sizes = vec![input];
        sizes.extend(&self.hidden_sizes);
        sizes.push(output);
        sizes
    }
}

/// Losses and diagnostics from one update call.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub critic: f64,
    pub actor: Option<f64>,
    pub alpha: Option<f64>,
    pub entropy: Option<f64>,
    /// PPO only: largest |ratio − 1| over the first minibatch of the first epoch.
    pub initial_ratio_error: Option<f64>,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        self.critic.is_finite()
            && [self.actor, self.alpha, self.entropy]
                .iter()
                .all(|v| v.is_none_or(f64::is_finite))
    }
}

/// One environment step as seen by a learner. Observations are scaled,
/// `reward` is the unscaled environment reward.
#[derive(Debug, Clone, Copy)]
pub struct Experience {
    pub obs: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Observation,
    /// Goal or violation: no bootstrapping.
    pub terminal: bool,
    /// Episode ended for any reason, including timeout.
    pub episode_end: bool,
}

/// A training-time agent driven step by step by the harness.
pub trait Learner {
    fn algo(&self) -> &'static str;

    /// Action to execute for `obs` (includes exploration).
    fn act(&mut self, obs: &Observation) -> Action;

    /// Record the outcome of the last action; may run one or more updates.
    fn observe(&mut self, exp: Experience) -> Result<Option<LossReport>>;

    /// Deterministic evaluation policy.
    fn policy(&self) -> Policy;

    /// Named networks to checkpoint.
    fn networks(&self) -> Vec<(&'static str, &MlpNet<f32>)>;

    fn save_checkpoints(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| DockError::io(dir, e))?;
        for (name, net) in self.networks() {
            checkpoint::save(net, &dir.join(format!("{name}.bin")))?;
        }
        Ok(())
    }
}

pub fn build_learner(algo: &str, cfg: &AgentConfig, seed: u64) -> Result<Box<dyn Learner + Send>> {
    match algo {
        "td3" => Ok(Box::new(Td3::new(cfg.clone(), seed)?)),
        "sac" => Ok(Box::new(Sac::new(cfg.clone(), seed)?)),
        "ppo" => Ok(Box::new(Ppo::new(cfg.clone(), seed)?)),
        other => Err(DockError::config(
            "algo",
            format!("unknown algorithm {other:?}, expected one of {ALGORITHMS:?}"),
        )),
    }
}

/// Deterministic action selection used for evaluation.
#[derive(Debug, Clone)]
pub enum Policy {
    /// Actor with tanh output producing the action directly (TD3).
    Deterministic(MlpNet<f32>),
    /// `tanh(mean)` from an actor emitting `[mean, log_std]` (SAC).
    SquashedMean(MlpNet<f32>),
    /// Gaussian mean clamped to `[-1, 1]` (PPO).
    ClampedMean(MlpNet<f32>),
    /// Fixed action regardless of observation.
    Constant(Action),
}

impl Policy {
    pub fn act(&self, obs: &Observation) -> Action {
        let run = |net: &MlpNet<f32>| -> Vec<f32> {
            net.forward(&to_f32(obs)).expect("policy network matches the observation size")
        };
        let mut out = [0.0; ACT_DIM];
        match self {
            Policy::Deterministic(net) => {
                let y = run(net);
                for (o, v) in out.iter_mut().zip(&y) {
                    *o = *v as f64;
                }
            }
            Policy::SquashedMean(net) => {
                let y = run(net);
                for (o, v) in out.iter_mut().zip(&y[..ACT_DIM]) {
                    *o = (*v as f64).tanh();
                }
            }
            Policy::ClampedMean(net) => {
                let y = run(net);
                for (o, v) in out.iter_mut().zip(&y) {
                    *o = (*v as f64).clamp(-1.0, 1.0);
                }
            }
            Policy::Constant(a) => out = *a,
        }
        out
    }

    /// Load the actor checkpoint written by a learner of `algo`.
    pub fn from_checkpoint(algo: &str, path: &Path) -> Result<Policy> {
        let policy = match algo {
            "td3" => Policy::Deterministic(checkpoint::load(path, Activation::Tanh)?),
            "sac" => Policy::SquashedMean(checkpoint::load(path, Activation::Identity)?),
            "ppo" => Policy::ClampedMean(checkpoint::load(path, Activation::Identity)?),
            other => return Err(DockError::config("algo", format!("unknown algorithm {other:?}"))),
        };
        let (input, output) = match &policy {
            Policy::Deterministic(n) | Policy::SquashedMean(n) | Policy::ClampedMean(n) => {
                (n.input_dim(), n.output_dim())
            }
            Policy::Constant(_) => unreachable!(),
        };
        let expected_out = if algo == "sac" { 2 * ACT_DIM } else { ACT_DIM };
        if input != OBS_DIM {
            return Err(DockError::format("layer[0].cols", format!("actor takes {input} inputs, expected {OBS_DIM}")));
        }
        if output != expected_out {
            return Err(DockError::format(
                "layer_count",
                format!("actor emits {output} outputs, {algo} expects {expected_out}"),
            ));
        }
        Ok(policy)
    }
}

pub(crate) fn to_f32<const N: usize>(x: &[f64; N]) -> [f32; N] {
    let mut out = [0.0f32; N];
    for (o, v) in out.iter_mut().zip(x) {
        *o = *v as f32;
    }
    out
}

/// Independent random stream `stream` derived from `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids, one per purpose.
pub mod streams {
    pub const ENV: u64 = 1;
    pub const INIT: u64 = 2;
    pub const EXPLORE: u64 = 3;
    pub const SAMPLE: u64 = 4;
    pub const EVAL: u64 = 5;
}

pub(crate) fn mean_f64<T: crate::nn::Scalar>(values: impl IntoIterator<Item = T>) -> f64 {
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for v in values {
        sum += v.as_f64();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Upstream gradient of `mean((q − y)²)` with respect to `q`, and the loss.
pub(crate) fn mse_grad(q: &Matrix<f32>, target: &[f32]) -> (Matrix<f32>, f64) {
    let n = q.rows();
    let mut grad = Matrix::zeros(n, 1);
    let mut loss = 0.0f64;
    for (i, (g, y)) in grad.data_mut().iter_mut().zip(target).enumerate() {
        let diff = q.get(i, 0) - *y;
        loss += (diff as f64) * (diff as f64);
        *g = 2.0 * diff / n as f32;
    }
    (grad, loss / n as f64)
}

/// Scale all gradients of `nets` (plus `extra` raw gradients) so their
/// global L2 norm is at most `max_norm`.
pub(crate) fn clip_grad_norm(nets: &mut [&mut MlpNet<f32>], extra: &mut [f32], max_norm: f64) {
    let mut sq = extra.iter().map(|g| (*g as f64).powi(2)).sum::<f64>();
    for net in nets.iter() {
        for l in net.layers() {
            sq += l.grad_weight.iter().chain(&l.grad_bias).map(|g| (*g as f64).powi(2)).sum::<f64>();
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = (max_norm / norm) as f32;
        extra.iter_mut().for_each(|g| *g *= scale);
        for net in nets.iter_mut() {
            for l in net.layers_mut() {
                l.grad_weight.iter_mut().chain(l.grad_bias.iter_mut()).for_each(|g| *g *= scale);
            }
        }
    }
}
