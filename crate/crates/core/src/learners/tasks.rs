use rand::{Rng, RngCore};

use crate::adversary::{fixed_params, params_from_unit, AdversaryKind, AdversaryPolicy};
use crate::env::{self, begin_episode, expand_quote_mode, EnvConfig, EnvState, MarketMaker, QuoteAction, OFFSET_BOUND};
use crate::error::{invalid, Error, Result};
use crate::learners::dqn::{train_dqn, DqnConfig};
use crate::learners::sac::{train_sac, Actor, SacConfig};
use crate::learners::{ContinuousTask, DiscreteTask, TaskStep, TrainingLog};
use crate::nn::Mlp;

const OBS_DIM: usize = 2;

fn started(state: &mut Option<EnvState>) -> Result<&mut EnvState> {
    state.as_mut().ok_or_else(|| invalid("task", "step called before reset"))
}

fn task_step(out: env::StepOutcome, reward: f64, state: &EnvState, initial_wealth: f64) -> TaskStep {
    TaskStep {
        obs: out.observation.features().to_vec(),
        reward,
        done: out.terminal,
        terminal: out.terminal,
        wealth: state.wealth() - initial_wealth,
    }
}

/// Always-quoting market maker: continuous `(bid, ask)` offsets in `[-3, 3]^2`.
pub struct MmTask<'a> {
    config: EnvConfig,
    adversary: &'a dyn AdversaryPolicy,
    state: Option<EnvState>,
    initial_wealth: f64,
}

impl<'a> MmTask<'a> {
    pub fn new(config: EnvConfig, adversary: &'a dyn AdversaryPolicy) -> Result<Self> {
        config.validate()?;
        Ok(MmTask {
            config,
            adversary,
            state: None,
            initial_wealth: 0.0,
        })
    }
}

impl ContinuousTask for MmTask<'_> {
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn action_scale(&self) -> f64 {
        OFFSET_BOUND
    }

    fn reset(&mut self, mut rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let state = begin_episode(&self.config, self.adversary, &mut rng);
        let obs = state.observation().features().to_vec();
        self.initial_wealth = state.wealth();
        self.state = Some(state);
        Ok(obs)
    }

    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<TaskStep> {
        let quote = QuoteAction::two_sided(
            action[0].clamp(-OFFSET_BOUND, OFFSET_BOUND),
            action[1].clamp(-OFFSET_BOUND, OFFSET_BOUND),
        )?;
        let risk = self.config.risk;
        let state = started(&mut self.state)?;
        let out = env::step(state, &risk, &quote, self.adversary, rng)?;
        Ok(task_step(out, out.mm_reward, state, self.initial_wealth))
    }
}

/// Strategic adversary against a fixed market-maker behaviour; actions are
/// squashed outputs in `[-1, 1]^d` mapped into the coefficient box.
pub struct AdversaryTask<'a> {
    config: EnvConfig,
    kind: AdversaryKind,
    mm: &'a dyn MarketMaker,
    state: Option<EnvState>,
    initial_wealth: f64,
}

impl<'a> AdversaryTask<'a> {
    pub fn new(config: EnvConfig, kind: AdversaryKind, mm: &'a dyn MarketMaker) -> Result<Self> {
        config.validate()?;
        if !kind.is_strategic() {
            return Err(invalid("adversary kind", format!("`{kind}` has nothing to train")));
        }
        Ok(AdversaryTask {
            config,
            kind,
            mm,
            state: None,
            initial_wealth: 0.0,
        })
    }
}

impl ContinuousTask for AdversaryTask<'_> {
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn action_dim(&self) -> usize {
        self.kind.action_dim()
    }

    fn action_scale(&self) -> f64 {
        1.0
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let params = fixed_params(&self.config.market);
        let state = env::reset(&params, self.config.init_inventory, rng);
        let obs = state.observation().features().to_vec();
        self.initial_wealth = state.wealth();
        self.state = Some(state);
        Ok(obs)
    }

    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<TaskStep> {
        let params = params_from_unit(self.kind, &self.config.market, action)?;
        let risk = self.config.risk;
        let state = started(&mut self.state)?;
        let quote = self.mm.quote(&state.observation())?;
        let out = env::step_with_params(state, &risk, &quote, params, rng)?;
        Ok(task_step(out, out.adv_reward, state, self.initial_wealth))
    }
}

/// Discrete quote gate delegating offsets to a frozen always-quoting policy.
pub struct GateTask<'a> {
    config: EnvConfig,
    adversary: &'a dyn AdversaryPolicy,
    frozen: &'a dyn MarketMaker,
    n_actions: usize,
    state: Option<EnvState>,
    initial_wealth: f64,
}

impl<'a> GateTask<'a> {
    pub fn new(
        config: EnvConfig,
        adversary: &'a dyn AdversaryPolicy,
        frozen: &'a dyn MarketMaker,
        n_actions: usize,
    ) -> Result<Self> {
        config.validate()?;
        if n_actions != 2 && n_actions != 4 {
            return Err(invalid("actions", "quote gate has 2 or 4 actions"));
        }
        Ok(GateTask {
            config,
            adversary,
            frozen,
            n_actions,
            state: None,
            initial_wealth: 0.0,
        })
    }
}

impl DiscreteTask for GateTask<'_> {
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn episode_len_hint(&self) -> usize {
        self.config.market.n_steps
    }

    fn reset(&mut self, mut rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let state = begin_episode(&self.config, self.adversary, &mut rng);
        let obs = state.observation().features().to_vec();
        self.initial_wealth = state.wealth();
        self.state = Some(state);
        Ok(obs)
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<TaskStep> {
        let risk = self.config.risk;
        let n_actions = self.n_actions;
        let frozen = self.frozen;
        let adversary = self.adversary;
        let state = started(&mut self.state)?;
        let quote = expand_quote_mode(action, n_actions, Some(frozen), &state.observation())?;
        let out = env::step(state, &risk, &quote, adversary, rng)?;
        Ok(task_step(out, out.mm_reward, state, self.initial_wealth))
    }
}

#[derive(Clone, Debug)]
pub struct TrainedActor {
    pub actor: Actor,
    pub log: TrainingLog,
}

#[derive(Clone, Debug)]
pub struct TrainedGate {
    pub qnet: Mlp,
    pub n_actions: usize,
    pub log: TrainingLog,
}

/// Trains the always-quoting market maker against `adversary`.
pub fn train_mm_sac<R: Rng>(
    config: &EnvConfig,
    adversary: &dyn AdversaryPolicy,
    sac: &SacConfig,
    rng: &mut R,
) -> Result<TrainedActor> {
    let mut task = MmTask::new(*config, adversary)?;
    let (agent, log) = train_sac(&mut task, sac, rng)?;
    Ok(TrainedActor {
        actor: agent.actor,
        log,
    })
}

/// Trains a strategic adversary of `kind` to minimise `mm`'s reward.
pub fn train_adversary_sac<R: Rng>(
    config: &EnvConfig,
    mm: &dyn MarketMaker,
    kind: AdversaryKind,
    sac: &SacConfig,
    rng: &mut R,
) -> Result<TrainedActor> {
    let mut task = AdversaryTask::new(*config, kind, mm)?;
    let (agent, log) = train_sac(&mut task, sac, rng)?;
    Ok(TrainedActor {
        actor: agent.actor,
        log,
    })
}

/// Trains a 2- or 4-action quote gate on top of a frozen market maker.
pub fn train_gate_dqn<R: Rng>(
    config: &EnvConfig,
    frozen_mm: Option<&dyn MarketMaker>,
    adversary: &dyn AdversaryPolicy,
    n_actions: usize,
    dqn: &DqnConfig,
    rng: &mut R,
) -> Result<TrainedGate> {
    let frozen = frozen_mm.ok_or_else(|| Error::MissingPolicy("frozen always-quoting market maker".into()))?;
    let mut task = GateTask::new(*config, adversary, frozen, n_actions)?;
    let (agent, log) = train_dqn(&mut task, dqn, rng)?;
    Ok(TrainedGate {
        qnet: agent.qnet,
        n_actions,
        log,
    })
}
