//! Deep Q-learning with a hard-synced target network and linear epsilon decay.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::learners::replay::{Batch, ReplayBuffer};
use crate::learners::{DiscreteTask, EpisodeLog, TrainingLog};
use crate::nn::{layer_sizes, Activation, Adam, AdamConfig, Mlp, DEFAULT_HIDDEN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub episodes: usize,
    /// Environment steps between gradient steps.
    pub update_interval: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of all training steps over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    /// Gradient steps between hard target copies.
    pub target_sync: usize,
    /// Environment steps before the first gradient step.
    pub warmup_steps: usize,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            episodes: 30_000,
            update_interval: 1,
            batch_size: 64,
            lr: 1e-4,
            gamma: 1.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.2,
            target_sync: 1000,
            warmup_steps: 1000,
            hidden: DEFAULT_HIDDEN.to_vec(),
            buffer_capacity: 1_000_000,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid("lr", "learning rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("gamma", "discount must lie in [0, 1]"));
        }
        if !(0.0 <= self.epsilon_end && self.epsilon_end <= self.epsilon_start && self.epsilon_start <= 1.0) {
            return Err(invalid("epsilon_start", "need 0 <= epsilon_end <= epsilon_start <= 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return Err(invalid("epsilon_decay_fraction", "must lie in [0, 1]"));
        }
        if self.update_interval == 0 || self.target_sync == 0 || self.batch_size == 0 {
            return Err(invalid("update_interval", "intervals and batch must be positive"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(invalid("buffer_capacity", "buffer must hold at least one batch"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(invalid("hidden", "layer widths must be positive"));
        }
        Ok(())
    }

    /// Exploration rate after `step` of `total_steps` environment steps.
    pub fn epsilon_at(&self, step: usize, total_steps: usize) -> f64 {
        let horizon = self.epsilon_decay_fraction * total_steps as f64;
        if horizon <= 0.0 {
            return self.epsilon_end;
        }
        let frac = step as f64 / horizon;
        if frac >= 1.0 {
            return self.epsilon_end;
        }
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }
}

/// Index of the largest value, ties resolved to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn greedy_action(qnet: &Mlp, obs: &[f64]) -> usize {
    argmax(&qnet.forward(obs).expect("observation width"))
}

/// Epsilon-greedy action selection.
pub fn dqn_act<R: Rng + ?Sized>(qnet: &Mlp, obs: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..qnet.output_dim())
    } else {
        greedy_action(qnet, obs)
    }
}

#[derive(Clone, Debug)]
pub struct DqnAgent {
    pub qnet: Mlp,
    pub target: Mlp,
    opt: Adam,
    gamma: f64,
    target_sync: usize,
    updates: usize,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, n_actions: usize, config: &DqnConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let qnet = Mlp::new(&layer_sizes(obs_dim, &config.hidden, n_actions), Activation::Tanh, 1.0, rng)?;
        Ok(DqnAgent {
            target: qnet.clone(),
            opt: Adam::for_net(AdamConfig::with_lr(config.lr), &qnet),
            qnet,
            gamma: config.gamma,
            target_sync: config.target_sync,
            updates: 0,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.qnet.output_dim()
    }

    /// TD targets `r + gamma * max_a' Q_target(s', a')`, no bootstrap at terminals.
    pub fn td_targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        let next_q = self.target.forward_batch(batch.next_obs.view())?;
        Ok((0..batch.rewards.len())
            .map(|i| {
                let row: Vec<f64> = next_q.row(i).to_vec();
                let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                batch.rewards[i] + self.gamma * (1.0 - batch.terminal[i]) * best
            })
            .collect())
    }

    /// One squared-error step on the taken actions; returns the batch loss.
    pub fn update(&mut self, batch: &Batch) -> Result<f64> {
        let rows = batch.rewards.len();
        let n = rows as f64;
        let y = self.td_targets(batch)?;
        let (q, cache) = self.qnet.forward_cached(batch.obs.view())?;
        let mut up = Array2::zeros(q.raw_dim());
        let mut loss = 0.0;
        for i in 0..rows {
            let a = batch.actions[[i, 0]] as usize;
            let e = q[[i, a]] - y[i];
            loss += e * e / n;
            up[[i, a]] = 2.0 * e / n;
        }
        let (grads, _) = self.qnet.backward(&cache, up.view())?;
        self.opt.step(&mut self.qnet, &grads)?;
        self.updates += 1;
        if self.updates % self.target_sync == 0 {
            self.target = self.qnet.clone();
        }
        Ok(loss)
    }
}

/// Epsilon-greedy collection with one gradient step every `update_interval`
/// environment steps.
pub fn train_dqn<T: DiscreteTask, R: Rng>(
    task: &mut T,
    config: &DqnConfig,
    rng: &mut R,
) -> Result<(DqnAgent, TrainingLog)> {
    let mut agent = DqnAgent::new(task.obs_dim(), task.n_actions(), config, rng)?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity, task.obs_dim(), 1);
    let total_steps = config.episodes * task.episode_len_hint();
    let mut log = TrainingLog::default();
    let mut steps_done = 0usize;
    let mut loss = 0.0;
    for episode in 0..config.episodes {
        let mut obs = task.reset(rng)?;
        let mut ep_return = 0.0;
        let mut steps = 0;
        loop {
            let epsilon = config.epsilon_at(steps_done, total_steps);
            let action = dqn_act(&agent.qnet, &obs, epsilon, rng);
            let out = task.step(action, rng)?;
            buffer.push(&obs, &[action as f64], out.reward, &out.obs, out.terminal);
            ep_return += out.reward;
            steps_done += 1;
            steps += 1;
            if steps_done >= config.warmup_steps
                && steps_done % config.update_interval == 0
                && buffer.len() >= config.batch_size
            {
                let batch = buffer.sample(config.batch_size, rng)?;
                loss = agent.update(&batch)?;
            }
            obs = out.obs;
            if out.done {
                log.episodes.push(EpisodeLog {
                    episode,
                    steps,
                    total_reward: ep_return,
                    terminal_wealth: out.wealth,
                    loss,
                    policy_loss: 0.0,
                    exploration: epsilon,
                });
                break;
            }
        }
    }
    Ok((agent, log))
}
