//! Off-policy learners (SAC, DQN), their replay buffer, and the market
//! training tasks they are run on.

mod dqn;
mod replay;
mod sac;
mod tasks;

use std::io::Write;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use dqn::{argmax, dqn_act, greedy_action, train_dqn, DqnAgent, DqnConfig};
pub use replay::{Batch, ReplayBuffer};
pub use sac::{actor_loss_and_grad, train_sac, Actor, SacAgent, SacConfig, SacLosses, SquashedSample};
pub use tasks::{
    train_adversary_sac, train_gate_dqn, train_mm_sac, AdversaryTask, GateTask, MmTask, TrainedActor,
    TrainedGate,
};

/// Result of one environment step as seen by a learner.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// The episode is over (terminal or truncated).
    pub done: bool,
    /// The episode ended for real; no bootstrapping past this step.
    pub terminal: bool,
    /// Task-specific episode metric reported at `done` (wealth gained over the episode for markets).
    pub wealth: f64,
}

pub trait ContinuousTask {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Actions live in `[-scale, scale]` per dimension.
    fn action_scale(&self) -> f64;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<TaskStep>;
}

pub trait DiscreteTask {
    fn obs_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Expected episode length, used to lay out the exploration schedule.
    fn episode_len_hint(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Vec<f64>>;
    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<TaskStep>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    pub total_reward: f64,
    pub terminal_wealth: f64,
    /// Last critic / Q loss seen during the episode.
    pub loss: f64,
    pub policy_loss: f64,
    /// Entropy temperature (SAC) or epsilon (DQN).
    pub exploration: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeLog>,
}

impl TrainingLog {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Training curve, one row per episode.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        for e in &self.episodes {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}
