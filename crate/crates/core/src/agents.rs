//! Concrete market-maker behaviours: scripted quoters, the frozen SAC actor,
//! and the discrete quote gate built on top of it.

use crate::env::{expand_quote_mode, MarketMaker, Observation, QuoteAction, OFFSET_BOUND};
use crate::error::{invalid, Result};
use crate::learners::{greedy_action, Actor};
use crate::nn::Mlp;

/// Never quotes.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoQuote;

impl MarketMaker for NoQuote {
    fn quote(&self, _: &Observation) -> Result<QuoteAction> {
        Ok(QuoteAction::no_quote())
    }
}

/// Quotes the same two-sided offsets every step.
#[derive(Clone, Copy, Debug)]
pub struct ConstantQuote {
    pub bid: f64,
    pub ask: f64,
}

impl ConstantQuote {
    pub fn new(bid: f64, ask: f64) -> Result<Self> {
        QuoteAction::two_sided(bid, ask)?;
        Ok(ConstantQuote { bid, ask })
    }

    /// Symmetric quotes at `1 / k`, the single-step profit maximiser in the
    /// low-intensity limit.
    pub fn myopic(decay: f64) -> Result<Self> {
        if !(decay > 0.0) {
            return Err(invalid("decay", "decay must be positive"));
        }
        Self::new(1.0 / decay, 1.0 / decay)
    }
}

impl MarketMaker for ConstantQuote {
    fn quote(&self, _: &Observation) -> Result<QuoteAction> {
        QuoteAction::two_sided(self.bid, self.ask)
    }
}

/// Trained always-quoting policy evaluated at its squashed mean.
#[derive(Clone, Debug)]
pub struct ActorQuoter {
    pub actor: Actor,
}

impl ActorQuoter {
    pub fn new(actor: Actor) -> Result<Self> {
        if actor.action_dim() != 2 || actor.obs_dim() != 2 {
            return Err(invalid("actor", "market-maker actor maps (t, H) to two offsets"));
        }
        Ok(ActorQuoter { actor })
    }

    pub fn offsets(&self, obs: &Observation) -> (f64, f64) {
        let a = self.actor.act_deterministic(&obs.features());
        (
            a[0].clamp(-OFFSET_BOUND, OFFSET_BOUND),
            a[1].clamp(-OFFSET_BOUND, OFFSET_BOUND),
        )
    }
}

impl MarketMaker for ActorQuoter {
    fn quote(&self, obs: &Observation) -> Result<QuoteAction> {
        let (bid, ask) = self.offsets(obs);
        QuoteAction::two_sided(bid, ask)
    }
}

/// Greedy quote gate: picks a quote mode from its Q-network and takes the
/// offsets from the frozen always-quoting policy.
#[derive(Clone, Debug)]
pub struct GateQuoter {
    pub qnet: Mlp,
    pub frozen: ActorQuoter,
}

impl GateQuoter {
    pub fn new(qnet: Mlp, frozen: ActorQuoter) -> Result<Self> {
        let n = qnet.output_dim();
        if n != 2 && n != 4 {
            return Err(invalid("gate", format!("gate needs 2 or 4 actions, network has {n}")));
        }
        Ok(GateQuoter { qnet, frozen })
    }

    pub fn n_actions(&self) -> usize {
        self.qnet.output_dim()
    }

    pub fn choose(&self, obs: &Observation) -> usize {
        greedy_action(&self.qnet, &obs.features())
    }
}

impl MarketMaker for GateQuoter {
    fn quote(&self, obs: &Observation) -> Result<QuoteAction> {
        expand_quote_mode(self.choose(obs), self.n_actions(), Some(&self.frozen), obs)
    }
}
