//! Stylized single-asset market: arithmetic Brownian mid-price, exponential
//! fill intensities, one-unit executions and mark-to-market accounting.
//!
//! Everything here is a pure function of its inputs plus an explicitly passed
//! random stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Distance of a quote from the mid-price.
///
/// `Infinite` is the no-quote sentinel: a side quoted at infinite offset has
/// fill probability exactly zero and can never trade.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Offset {
    Finite(f64),
    Infinite,
}

impl Offset {
    pub fn is_finite(self) -> bool {
        matches!(self, Offset::Finite(_))
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Offset::Finite(d) => Some(d),
            Offset::Infinite => None,
        }
    }
}

impl From<f64> for Offset {
    fn from(d: f64) -> Self {
        if d == f64::INFINITY {
            Offset::Infinite
        } else {
            Offset::Finite(d)
        }
    }
}

/// Market coefficients and simulation constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketParams {
    /// Drift `b` of the mid-price, price units per unit time.
    pub drift: f64,
    /// Order arrival scale `A` (> 0).
    pub arrival_scale: f64,
    /// Intensity decay `k` per price unit (> 0).
    pub decay: f64,
    /// Volatility `sigma`, price units per sqrt(time).
    pub volatility: f64,
    pub dt: f64,
    /// Initial mid-price.
    pub z0: f64,
    pub n_steps: usize,
    pub h_min: i64,
    pub h_max: i64,
}

impl Default for MarketParams {
    fn default() -> Self {
        MarketParams {
            drift: 0.0,
            arrival_scale: 140.0,
            decay: 1.5,
            volatility: 2.0,
            dt: 0.005,
            z0: 100.0,
            n_steps: 200,
            h_min: -50,
            h_max: 50,
        }
    }
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        if !self.drift.is_finite() {
            return Err(invalid("drift", "drift must be finite"));
        }
        if !(self.arrival_scale > 0.0 && self.arrival_scale.is_finite()) {
            return Err(invalid("arrival_scale", "arrival scale must be positive"));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(invalid("decay", "decay must be positive"));
        }
        if !(self.volatility >= 0.0 && self.volatility.is_finite()) {
            return Err(invalid("volatility", "volatility must be non-negative"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "time increment must be positive"));
        }
        if !self.z0.is_finite() {
            return Err(invalid("z0", "initial price must be finite"));
        }
        if self.n_steps < 1 {
            return Err(invalid("n_steps", "episode length must be at least 1"));
        }
        if self.h_min >= self.h_max {
            return Err(invalid("h_min", "inventory bounds must satisfy h_min < h_max"));
        }
        Ok(())
    }

    /// Episode horizon `T = n_steps * dt`.
    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Copy with the adversary-controlled coefficients replaced.
    pub fn with_coefficients(mut self, drift: f64, arrival_scale: f64, decay: f64) -> Self {
        self.drift = drift;
        self.arrival_scale = arrival_scale;
        self.decay = decay;
        self
    }

    /// Largest absolute inventory bound, used to scale observations.
    pub fn inventory_scale(&self) -> f64 {
        self.h_min.unsigned_abs().max(self.h_max.unsigned_abs()).max(1) as f64
    }
}

/// Inventory penalty coefficients. `(0, 0)` is risk-neutral.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskConfig {
    /// Terminal inventory penalty.
    pub eta: f64,
    /// Running inventory penalty.
    pub zeta: f64,
}

impl RiskConfig {
    pub fn new(eta: f64, zeta: f64) -> Result<Self> {
        let risk = RiskConfig { eta, zeta };
        risk.validate()?;
        Ok(risk)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(invalid("eta", "terminal penalty must be non-negative"));
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return Err(invalid("zeta", "running penalty must be non-negative"));
        }
        Ok(())
    }

    pub fn is_risk_neutral(&self) -> bool {
        self.eta == 0.0 && self.zeta == 0.0
    }
}

/// Units executed on each side in one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fills {
    /// Buy at the bid (`dN+`).
    pub bid: u8,
    /// Sell at the ask (`dN-`).
    pub ask: u8,
}

impl Fills {
    pub const NONE: Fills = Fills { bid: 0, ask: 0 };

    /// Inventory change `dN+ - dN-`.
    pub fn inventory_delta(self) -> i64 {
        self.bid as i64 - self.ask as i64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub cash: f64,
    pub inventory: i64,
    pub cum_buys: u64,
    pub cum_sells: u64,
}

impl Portfolio {
    /// Flat book holding `inventory` units with no trade history counted.
    ///
    /// A non-zero opening position is booked as prior buys or sells so that
    /// `inventory == cum_buys - cum_sells` holds from the start.
    pub fn with_inventory(inventory: i64) -> Self {
        Portfolio {
            cash: 0.0,
            inventory,
            cum_buys: inventory.max(0) as u64,
            cum_sells: (-inventory).max(0) as u64,
        }
    }

    /// Books the fills at mid-price `z` with the quoted offsets.
    pub fn apply(&mut self, z: f64, bid: Offset, ask: Offset, fills: Fills) -> Result<()> {
        self.cash = update_cash(self.cash, z, bid, ask, fills)?;
        self.inventory += fills.inventory_delta();
        self.cum_buys += fills.bid as u64;
        self.cum_sells += fills.ask as u64;
        Ok(())
    }

    pub fn wealth(&self, z: f64) -> f64 {
        wealth(self.cash, self.inventory, z)
    }
}

/// One Euler step of arithmetic Brownian motion driven by a standard-normal draw.
pub fn step_price(z: f64, params: &MarketParams, noise: f64) -> f64 {
    z + params.drift * params.dt + params.volatility * params.dt.sqrt() * noise
}

/// Per-step probability that a quote at `offset` is hit, given intensity
/// `A * exp(-k * offset)` over a window of length `dt`.
pub fn fill_probability(offset: Offset, arrival_scale: f64, decay: f64, dt: f64) -> f64 {
    match offset {
        Offset::Infinite => 0.0,
        Offset::Finite(d) => {
            let intensity = arrival_scale * (-decay * d).exp();
            -(-intensity * dt).exp_m1()
        }
    }
}

/// Turns two uniform draws into fills, suppressing any side that would take
/// inventory outside `[h_min, h_max]`.
pub fn fills_from_uniforms(
    u_bid: f64,
    u_ask: f64,
    p_bid: f64,
    p_ask: f64,
    portfolio: &Portfolio,
    params: &MarketParams,
) -> Fills {
    let bid = u_bid < p_bid && portfolio.inventory < params.h_max;
    let ask = u_ask < p_ask && portfolio.inventory > params.h_min;
    Fills {
        bid: bid as u8,
        ask: ask as u8,
    }
}

/// Independent Bernoulli fill per side. Always consumes two uniforms so the
/// random stream advances identically whatever is quoted.
pub fn sample_fills<R: Rng + ?Sized>(
    p_bid: f64,
    p_ask: f64,
    portfolio: &Portfolio,
    params: &MarketParams,
    rng: &mut R,
) -> Fills {
    let u_bid: f64 = rng.random();
    let u_ask: f64 = rng.random();
    fills_from_uniforms(u_bid, u_ask, p_bid, p_ask, portfolio, params)
}

/// Cash after executing `fills` at mid-price `z`: each fill earns its offset
/// and the inventory change is paid at mid.
pub fn update_cash(x: f64, z: f64, bid: Offset, ask: Offset, fills: Fills) -> Result<f64> {
    let mut cash = x;
    if fills.ask > 0 {
        let d = ask.value().ok_or(Error::FillOnWithdrawnSide { side: "ask" })?;
        cash += d * fills.ask as f64;
    }
    if fills.bid > 0 {
        let d = bid.value().ok_or(Error::FillOnWithdrawnSide { side: "bid" })?;
        cash += d * fills.bid as f64;
    }
    Ok(cash - z * fills.inventory_delta() as f64)
}

/// Marked-to-market wealth `X + H * Z`.
pub fn wealth(x: f64, h: i64, z: f64) -> f64 {
    x + h as f64 * z
}

/// Market-maker reward for one step, penalising post-step inventory.
pub fn reward(d_pi: f64, h_next: i64, risk: &RiskConfig, is_terminal: bool) -> f64 {
    let h2 = (h_next * h_next) as f64;
    let mut r = d_pi - risk.zeta * h2;
    if is_terminal {
        r -= risk.eta * h2;
    }
    r
}

/// Expected one-step profit of a single side quoted at `offset`.
pub fn myopic_spread_profit(offset: f64, arrival_scale: f64, decay: f64, dt: f64) -> f64 {
    offset * fill_probability(Offset::Finite(offset), arrival_scale, decay, dt)
}
