//! Soft actor-critic with twin critics, Polyak-averaged targets and an
//! automatically tuned entropy temperature.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::learners::replay::{Batch, ReplayBuffer};
use crate::learners::{ContinuousTask, EpisodeLog, TrainingLog};
use crate::nn::{layer_sizes, Activation, Adam, AdamConfig, Gradients, Mlp, DEFAULT_HIDDEN};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub episodes: usize,
    /// Environment steps between update rounds.
    pub update_interval: usize,
    /// Gradient steps per update round.
    pub gradient_steps: usize,
    /// Steps of uniform-random exploration before the actor is used.
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Fixed temperature; `None` tunes it toward `-action_dim` entropy.
    pub alpha: Option<f64>,
    pub initial_alpha: f64,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            episodes: 30_000,
            update_interval: 1000,
            gradient_steps: 1000,
            warmup_steps: 1000,
            batch_size: 64,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            lr_alpha: 3e-4,
            gamma: 1.0,
            tau: 0.005,
            alpha: None,
            initial_alpha: 0.2,
            hidden: DEFAULT_HIDDEN.to_vec(),
            buffer_capacity: 1_000_000,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
            ("lr_alpha", self.lr_alpha),
            ("initial_alpha", self.initial_alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("gamma", "discount must lie in [0, 1]"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(invalid("tau", "target smoothing must lie in (0, 1]"));
        }
        if let Some(a) = self.alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(invalid("alpha", "temperature must be non-negative"));
            }
        }
        if self.update_interval == 0 || self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(invalid(
                "batch_size",
                "update interval and batch must be positive and fit in the buffer",
            ));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(invalid("hidden", "layer widths must be positive"));
        }
        Ok(())
    }
}

/// Squashed-Gaussian policy: the network emits a mean and a log standard
/// deviation per action dimension, actions are `scale * tanh(u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Actor {
    pub net: Mlp,
    action_dim: usize,
    action_scale: f64,
}

/// Reparameterised batch of actions with everything needed for the gradient.
#[derive(Clone, Debug)]
pub struct SquashedSample {
    pub actions: Array2<f64>,
    pub log_prob: Array1<f64>,
    pre_tanh: Array2<f64>,
    std: Array2<f64>,
    noise: Array2<f64>,
    /// Whether the raw log-std fell inside the clamp range (gradient passes).
    log_std_free: Array2<bool>,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        action_scale: f64,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let net = Mlp::new(
            &layer_sizes(obs_dim, hidden, 2 * action_dim),
            Activation::Tanh,
            0.01,
            rng,
        )?;
        Ok(Actor {
            net,
            action_dim,
            action_scale,
        })
    }

    pub fn from_net(net: Mlp, action_scale: f64) -> Result<Self> {
        if net.output_dim() % 2 != 0 {
            return Err(invalid("actor", "output width must be twice the action dimension"));
        }
        let action_dim = net.output_dim() / 2;
        Ok(Actor {
            net,
            action_dim,
            action_scale,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn action_scale(&self) -> f64 {
        self.action_scale
    }

    /// Pre-squash Gaussian means.
    pub fn mean_raw(&self, obs: &[f64]) -> Vec<f64> {
        let out = self.net.forward(obs).expect("observation width");
        out[..self.action_dim].to_vec()
    }

    /// Squashed mean, the action used at evaluation time.
    pub fn act_deterministic(&self, obs: &[f64]) -> Vec<f64> {
        self.mean_raw(obs)
            .into_iter()
            .map(|m| self.action_scale * m.tanh())
            .collect()
    }

    pub fn act_stochastic<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Vec<f64> {
        let out = self.net.forward(obs).expect("observation width");
        (0..self.action_dim)
            .map(|j| {
                let std = out[self.action_dim + j].clamp(LOG_STD_MIN, LOG_STD_MAX).exp();
                let eps: f64 = rng.sample(StandardNormal);
                self.action_scale * (out[j] + std * eps).tanh()
            })
            .collect()
    }

    /// Samples `a = scale * tanh(mean + std * noise)` for a batch of network
    /// outputs with caller-supplied standard-normal noise.
    pub fn squash(&self, out: &Array2<f64>, noise: Array2<f64>) -> SquashedSample {
        let d = self.action_dim;
        let rows = out.nrows();
        let mean = out.slice(s![.., ..d]);
        let raw_log_std = out.slice(s![.., d..]);
        let log_std = raw_log_std.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        let log_std_free = raw_log_std.mapv(|v| (LOG_STD_MIN..=LOG_STD_MAX).contains(&v));
        let std = log_std.mapv(f64::exp);
        let pre_tanh = &mean + &(&std * &noise);
        let actions = pre_tanh.mapv(|u| self.action_scale * u.tanh());
        let ln_scale = self.action_scale.ln();
        let mut log_prob = Array1::zeros(rows);
        for i in 0..rows {
            let mut lp = 0.0;
            for j in 0..d {
                let u = pre_tanh[[i, j]];
                let e = noise[[i, j]];
                // log(1 - tanh(u)^2) = 2 (ln 2 - u - softplus(-2u))
                let log_det = 2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u));
                lp += -0.5 * e * e - log_std[[i, j]] - HALF_LN_2PI - ln_scale - log_det;
            }
            log_prob[i] = lp;
        }
        SquashedSample {
            actions,
            log_prob,
            pre_tanh,
            std,
            noise,
            log_std_free,
        }
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, self.action_dim), || rng.sample(StandardNormal))
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Critic input: observation followed by the action rescaled to `[-1, 1]`.
fn critic_input(obs: ArrayView2<f64>, actions: &Array2<f64>, scale: f64) -> Array2<f64> {
    let scaled = actions / scale;
    concatenate(Axis(1), &[obs, scaled.view()]).expect("matching batch rows")
}

/// Soft policy loss `mean(alpha * log_pi - min_i Q_i(s, a))` for fixed noise,
/// and its gradient with respect to the actor parameters.
pub fn actor_loss_and_grad(
    actor: &Actor,
    critics: &[Mlp; 2],
    obs: ArrayView2<f64>,
    noise: Array2<f64>,
    alpha: f64,
) -> Result<(f64, Gradients, Array1<f64>)> {
    let rows = obs.nrows();
    let n = rows as f64;
    let d = actor.action_dim;
    let obs_dim = obs.ncols();
    let scale = actor.action_scale;
    let (out, cache) = actor.net.forward_cached(obs)?;
    let sample = actor.squash(&out, noise);
    let input = critic_input(obs, &sample.actions, scale);
    let (q1, c1) = critics[0].forward_cached(input.view())?;
    let (q2, c2) = critics[1].forward_cached(input.view())?;

    let mut up1 = Array2::zeros((rows, 1));
    let mut up2 = Array2::zeros((rows, 1));
    let mut loss = 0.0;
    for i in 0..rows {
        let (q, first) = if q1[[i, 0]] <= q2[[i, 0]] {
            (q1[[i, 0]], true)
        } else {
            (q2[[i, 0]], false)
        };
        loss += alpha * sample.log_prob[i] - q;
        if first {
            up1[[i, 0]] = -1.0 / n;
        } else {
            up2[[i, 0]] = -1.0 / n;
        }
    }
    loss /= n;
    let (_, dx1) = critics[0].backward(&c1, up1.view())?;
    let (_, dx2) = critics[1].backward(&c2, up2.view())?;
    // dL/da through the critic input a / scale
    let da = (&dx1.slice(s![.., obs_dim..]) + &dx2.slice(s![.., obs_dim..])) / scale;

    let mut d_out = Array2::zeros((rows, 2 * d));
    for i in 0..rows {
        for j in 0..d {
            let u = sample.pre_tanh[[i, j]];
            let t = u.tanh();
            let d_logp_du = 2.0 * t;
            let d_u = alpha / n * d_logp_du + da[[i, j]] * scale * (1.0 - t * t);
            d_out[[i, j]] = d_u;
            if sample.log_std_free[[i, j]] {
                d_out[[i, d + j]] = -alpha / n + d_u * sample.std[[i, j]] * sample.noise[[i, j]];
            }
        }
    }
    let (grads, _) = actor.net.backward(&cache, d_out.view())?;
    Ok((loss, grads, sample.log_prob))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SacLosses {
    pub critic: f64,
    pub actor: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug)]
pub struct SacAgent {
    pub actor: Actor,
    pub critics: [Mlp; 2],
    pub targets: [Mlp; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    log_alpha: f64,
    alpha_opt: Adam,
    target_entropy: f64,
    config: SacConfig,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        action_scale: f64,
        config: SacConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let actor = Actor::new(obs_dim, action_dim, action_scale, &config.hidden, rng)?;
        let critic_sizes = layer_sizes(obs_dim + action_dim, &config.hidden, 1);
        let c1 = Mlp::new(&critic_sizes, Activation::Tanh, 1.0, rng)?;
        let c2 = Mlp::new(&critic_sizes, Activation::Tanh, 1.0, rng)?;
        let actor_opt = Adam::for_net(AdamConfig::with_lr(config.lr_actor), &actor.net);
        let critic_opts = [
            Adam::for_net(AdamConfig::with_lr(config.lr_critic), &c1),
            Adam::for_net(AdamConfig::with_lr(config.lr_critic), &c2),
        ];
        let log_alpha = config.alpha.unwrap_or(config.initial_alpha).ln();
        Ok(SacAgent {
            actor,
            targets: [c1.clone(), c2.clone()],
            critics: [c1, c2],
            actor_opt,
            critic_opts,
            log_alpha,
            alpha_opt: Adam::new(AdamConfig::with_lr(config.lr_alpha), 1),
            target_entropy: -(action_dim as f64),
            config,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn alpha(&self) -> f64 {
        match self.config.alpha {
            Some(a) => a,
            None => self.log_alpha.exp(),
        }
    }

    /// Soft Bellman target `r + gamma (1 - done) (min Q' - alpha log pi')`.
    fn targets_for(&self, batch: &Batch, noise: Array2<f64>) -> Result<Array1<f64>> {
        let out = self.actor.net.forward_batch(batch.next_obs.view())?;
        let next = self.actor.squash(&out, noise);
        let input = critic_input(batch.next_obs.view(), &next.actions, self.actor.action_scale);
        let q1 = self.targets[0].forward_batch(input.view())?;
        let q2 = self.targets[1].forward_batch(input.view())?;
        let alpha = self.alpha();
        let gamma = self.config.gamma;
        Ok(Array1::from_shape_fn(batch.rewards.len(), |i| {
            let soft = q1[[i, 0]].min(q2[[i, 0]]) - alpha * next.log_prob[i];
            batch.rewards[i] + gamma * (1.0 - batch.terminal[i]) * soft
        }))
    }

    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<SacLosses> {
        let rows = batch.rewards.len();
        let n = rows as f64;
        let next_noise = self.actor.sample_noise(rows, rng);
        let y = self.targets_for(batch, next_noise)?;

        let input = critic_input(batch.obs.view(), &batch.actions, self.actor.action_scale);
        let mut critic_loss = 0.0;
        for (critic, opt) in self.critics.iter_mut().zip(&mut self.critic_opts) {
            let (q, cache) = critic.forward_cached(input.view())?;
            let mut up = Array2::zeros((rows, 1));
            for i in 0..rows {
                let e = q[[i, 0]] - y[i];
                critic_loss += e * e / n;
                up[[i, 0]] = 2.0 * e / n;
            }
            let (grads, _) = critic.backward(&cache, up.view())?;
            opt.step(critic, &grads)?;
        }

        let noise = self.actor.sample_noise(rows, rng);
        let alpha = self.alpha();
        let (actor_loss, grads, log_prob) =
            actor_loss_and_grad(&self.actor, &self.critics, batch.obs.view(), noise, alpha)?;
        self.actor_opt.step(&mut self.actor.net, &grads)?;

        if self.config.alpha.is_none() {
            let g = -(log_prob.mean().unwrap_or(0.0) + self.target_entropy);
            let mut la = [self.log_alpha];
            self.alpha_opt.step_flat(la.iter_mut(), &[g])?;
            self.log_alpha = la[0];
        }

        let tau = self.config.tau;
        for (t, c) in self.targets.iter_mut().zip(&self.critics) {
            t.soft_update_from(c, tau);
        }
        Ok(SacLosses {
            critic: critic_loss / 2.0,
            actor: actor_loss,
            alpha: self.alpha(),
        })
    }
}

/// Runs the collect/update schedule on `task` for `config.episodes` episodes.
pub fn train_sac<T: ContinuousTask, R: Rng>(
    task: &mut T,
    config: &SacConfig,
    rng: &mut R,
) -> Result<(SacAgent, TrainingLog)> {
    let mut agent = SacAgent::new(
        task.obs_dim(),
        task.action_dim(),
        task.action_scale(),
        config.clone(),
        rng,
    )?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity, task.obs_dim(), task.action_dim());
    let mut log = TrainingLog::default();
    let mut losses = SacLosses::default();
    let mut total_steps = 0usize;
    let scale = task.action_scale();
    for episode in 0..config.episodes {
        let mut obs = task.reset(rng)?;
        let mut ep_return = 0.0;
        let mut steps = 0;
        loop {
            let action: Vec<f64> = if total_steps < config.warmup_steps {
                (0..task.action_dim())
                    .map(|_| rng.random_range(-scale..=scale))
                    .collect()
            } else {
                agent.actor.act_stochastic(&obs, rng)
            };
            let out = task.step(&action, rng)?;
            buffer.push(&obs, &action, out.reward, &out.obs, out.terminal);
            ep_return += out.reward;
            total_steps += 1;
            steps += 1;
            if total_steps % config.update_interval == 0 && buffer.len() >= config.batch_size {
                for _ in 0..config.gradient_steps {
                    let batch = buffer.sample(config.batch_size, rng)?;
                    losses = agent.update(&batch, rng)?;
                }
            }
            obs = out.obs;
            if out.done {
                log.episodes.push(EpisodeLog {
                    episode,
                    steps,
                    total_reward: ep_return,
                    terminal_wealth: out.wealth,
                    loss: losses.critic,
                    policy_loss: losses.actor,
                    exploration: losses.alpha,
                });
                break;
            }
        }
    }
    Ok((agent, log))
}
