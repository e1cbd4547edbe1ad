//! Episodic market-making game: binds the market equations, an adversary and
//! a market maker's quotes into a step function.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryPolicy;
use crate::error::{invalid, Error, Result};
use crate::market::{
    self, fill_probability, fills_from_uniforms, step_price, Fills, MarketParams, Offset, Portfolio,
    RiskConfig,
};

/// Offsets accepted for a quoted side.
pub const OFFSET_BOUND: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuoteMode {
    TwoSided,
    NoQuote,
    AskOnly,
    BidOnly,
}

/// Quote posted for one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuoteAction {
    pub mode: QuoteMode,
    pub bid: Offset,
    pub ask: Offset,
}

fn check_offset(name: &'static str, d: f64) -> Result<Offset> {
    if !(-OFFSET_BOUND..=OFFSET_BOUND).contains(&d) {
        return Err(invalid(name, format!("offset {d} outside [-3, 3]")));
    }
    Ok(Offset::Finite(d))
}

impl QuoteAction {
    pub fn two_sided(bid: f64, ask: f64) -> Result<Self> {
        Ok(QuoteAction {
            mode: QuoteMode::TwoSided,
            bid: check_offset("bid offset", bid)?,
            ask: check_offset("ask offset", ask)?,
        })
    }

    pub fn no_quote() -> Self {
        QuoteAction {
            mode: QuoteMode::NoQuote,
            bid: Offset::Infinite,
            ask: Offset::Infinite,
        }
    }

    pub fn ask_only(ask: f64) -> Result<Self> {
        Ok(QuoteAction {
            mode: QuoteMode::AskOnly,
            bid: Offset::Infinite,
            ask: check_offset("ask offset", ask)?,
        })
    }

    pub fn bid_only(bid: f64) -> Result<Self> {
        Ok(QuoteAction {
            mode: QuoteMode::BidOnly,
            bid: check_offset("bid offset", bid)?,
            ask: Offset::Infinite,
        })
    }

    /// Quoted width `bid + ask`, defined only for two-sided quotes.
    pub fn spread(&self) -> Option<f64> {
        match (self.mode, self.bid, self.ask) {
            (QuoteMode::TwoSided, Offset::Finite(b), Offset::Finite(a)) => Some(b + a),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.mode {
            QuoteMode::TwoSided => self.bid.is_finite() && self.ask.is_finite(),
            QuoteMode::NoQuote => !self.bid.is_finite() && !self.ask.is_finite(),
            QuoteMode::AskOnly => !self.bid.is_finite() && self.ask.is_finite(),
            QuoteMode::BidOnly => self.bid.is_finite() && !self.ask.is_finite(),
        };
        if !ok {
            return Err(invalid("quote action", format!("offsets inconsistent with mode {:?}", self.mode)));
        }
        for (name, side) in [("bid offset", self.bid), ("ask offset", self.ask)] {
            if let Offset::Finite(d) = side {
                check_offset(name, d)?;
            }
        }
        Ok(())
    }
}

/// What an agent sees: the time and its own inventory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub step: usize,
    pub t: f64,
    pub inventory: i64,
    n_steps: usize,
    inventory_scale: f64,
}

impl Observation {
    pub fn new(step: usize, inventory: i64, params: &MarketParams) -> Self {
        Observation {
            step,
            t: step as f64 * params.dt,
            inventory,
            n_steps: params.n_steps,
            inventory_scale: params.inventory_scale(),
        }
    }

    /// Network input: elapsed fraction of the episode and scaled inventory.
    pub fn features(&self) -> [f64; 2] {
        [
            self.step as f64 / self.n_steps as f64,
            self.inventory as f64 / self.inventory_scale,
        ]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitInventory {
    #[default]
    Zero,
    /// Uniform integer over `[h_min, h_max]`.
    Uniform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub market: MarketParams,
    pub risk: RiskConfig,
    pub init_inventory: InitInventory,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.risk.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub step: usize,
    pub portfolio: Portfolio,
    pub price: f64,
    /// Coefficients currently in force.
    pub params: MarketParams,
}

impl EnvState {
    pub fn time(&self) -> f64 {
        self.step as f64 * self.params.dt
    }

    pub fn is_terminal(&self) -> bool {
        self.step >= self.params.n_steps
    }

    pub fn observation(&self) -> Observation {
        Observation::new(self.step, self.portfolio.inventory, &self.params)
    }

    pub fn wealth(&self) -> f64 {
        self.portfolio.wealth(self.price)
    }
}

/// Fresh episode state: `n = 0`, `X = 0`, `Z = z0`, inventory per `rule`.
pub fn reset<R: Rng + ?Sized>(params: &MarketParams, rule: InitInventory, rng: &mut R) -> EnvState {
    let inventory = match rule {
        InitInventory::Zero => 0,
        InitInventory::Uniform => rng.random_range(params.h_min..=params.h_max),
    };
    EnvState {
        step: 0,
        portfolio: Portfolio::with_inventory(inventory),
        price: params.z0,
        params: *params,
    }
}

/// Per-step log line consumed by the evaluation harness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub observation: Observation,
    pub action: QuoteAction,
    pub fills: Fills,
    pub reward: f64,
    pub wealth_delta: f64,
}

impl StepRecord {
    pub fn mode(&self) -> QuoteMode {
        self.action.mode
    }

    pub fn spread(&self) -> Option<f64> {
        self.action.spread()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub mm_reward: f64,
    pub adv_reward: f64,
    pub terminal: bool,
    pub record: StepRecord,
}

/// Advances `state` one step with the coefficients already chosen.
///
/// Order: fill probabilities from the offsets, fills booked at the current
/// mid, price move, then wealth change and rewards on post-step inventory.
pub fn step_with_params<R: Rng + ?Sized>(
    state: &mut EnvState,
    risk: &RiskConfig,
    action: &QuoteAction,
    params: MarketParams,
    rng: &mut R,
) -> Result<StepOutcome> {
    if state.is_terminal() {
        return Err(Error::TerminalState(state.step));
    }
    action.validate()?;
    let observation = state.observation();
    state.params = params;
    let wealth_before = state.wealth();

    let p_bid = fill_probability(action.bid, params.arrival_scale, params.decay, params.dt);
    let p_ask = fill_probability(action.ask, params.arrival_scale, params.decay, params.dt);
    let u_bid: f64 = rng.random();
    let u_ask: f64 = rng.random();
    let noise: f64 = rng.sample(StandardNormal);

    let fills = fills_from_uniforms(u_bid, u_ask, p_bid, p_ask, &state.portfolio, &params);
    state.portfolio.apply(state.price, action.bid, action.ask, fills)?;
    state.price = step_price(state.price, &params, noise);
    state.step += 1;

    let wealth_delta = state.wealth() - wealth_before;
    let terminal = state.is_terminal();
    let mm_reward = market::reward(wealth_delta, state.portfolio.inventory, risk, terminal);
    let record = StepRecord {
        observation,
        action: *action,
        fills,
        reward: mm_reward,
        wealth_delta,
    };
    Ok(StepOutcome {
        observation: state.observation(),
        mm_reward,
        adv_reward: -mm_reward,
        terminal,
        record,
    })
}

/// One full game step: the adversary picks coefficients from the current
/// observation, then the market maker's quote is executed.
pub fn step<R: RngCore + ?Sized>(
    state: &mut EnvState,
    risk: &RiskConfig,
    action: &QuoteAction,
    adversary: &dyn AdversaryPolicy,
    rng: &mut R,
) -> Result<StepOutcome> {
    if state.is_terminal() {
        return Err(Error::TerminalState(state.step));
    }
    let params = adversary.act(&state.observation(), &state.params);
    step_with_params(state, risk, action, params, rng)
}

/// Starts an episode with the adversary's opening coefficients.
pub fn begin_episode<R: RngCore>(
    config: &EnvConfig,
    adversary: &dyn AdversaryPolicy,
    rng: &mut R,
) -> EnvState {
    let params = adversary.begin_episode(&config.market, rng);
    reset(&params, config.init_inventory, rng)
}

/// Deterministic quoting behaviour evaluated at an observation.
pub trait MarketMaker: Sync {
    fn quote(&self, obs: &Observation) -> Result<QuoteAction>;
}

/// Maps a discrete gate action onto a concrete quote, borrowing offsets from
/// a frozen always-quoting policy.
///
/// `0` withdraws both sides, `1` posts the frozen two-sided quote; with four
/// actions `2` keeps only the ask and `3` only the bid.
pub fn expand_quote_mode(
    action: usize,
    n_actions: usize,
    frozen: Option<&dyn MarketMaker>,
    obs: &Observation,
) -> Result<QuoteAction> {
    if !(n_actions == 2 || n_actions == 4) || action >= n_actions {
        return Err(Error::InvalidAction {
            index: action,
            n_actions,
        });
    }
    if action == 0 {
        return Ok(QuoteAction::no_quote());
    }
    let frozen = frozen.ok_or_else(|| Error::MissingPolicy("frozen always-quoting market maker".into()))?;
    let base = frozen.quote(obs)?;
    let (bid, ask) = match (base.mode, base.bid, base.ask) {
        (QuoteMode::TwoSided, Offset::Finite(b), Offset::Finite(a)) => (b, a),
        _ => {
            return Err(invalid(
                "frozen policy",
                "frozen market maker must quote both sides",
            ))
        }
    };
    match action {
        1 => QuoteAction::two_sided(bid, ask),
        2 => QuoteAction::ask_only(ask),
        3 => QuoteAction::bid_only(bid),
        _ => unreachable!(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub terminal_wealth: f64,
    pub initial_wealth: f64,
    pub final_state: EnvState,
    pub records: Vec<StepRecord>,
}

/// Plays one episode to the horizon.
pub fn run_episode<R: RngCore>(
    config: &EnvConfig,
    mm: &dyn MarketMaker,
    adversary: &dyn AdversaryPolicy,
    rng: &mut R,
) -> Result<EpisodeResult> {
    let mut state = begin_episode(config, adversary, rng);
    let initial_wealth = state.wealth();
    let mut records = Vec::with_capacity(config.market.n_steps);
    while !state.is_terminal() {
        let action = mm.quote(&state.observation())?;
        let out = step(&mut state, &config.risk, &action, adversary, rng)?;
        records.push(out.record);
    }
    Ok(EpisodeResult {
        terminal_wealth: state.wealth(),
        initial_wealth,
        final_state: state,
        records,
    })
}
