//! Adversary regimes that set the market coefficients `(b, A, k)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};
use crate::learners::Actor;
use crate::market::MarketParams;

pub const FIXED_DRIFT: f64 = 0.0;
pub const FIXED_ARRIVAL_SCALE: f64 = 140.0;
pub const FIXED_DECAY: f64 = 1.5;

pub const DRIFT_RANGE: (f64, f64) = (-5.0, 5.0);
pub const ARRIVAL_SCALE_RANGE: (f64, f64) = (105.0, 175.0);
pub const DECAY_RANGE: (f64, f64) = (1.125, 1.875);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryKind {
    Fixed,
    Random,
    #[serde(rename = "a")]
    StrategicA,
    #[serde(rename = "b")]
    StrategicB,
    #[serde(rename = "k")]
    StrategicK,
    #[serde(rename = "all")]
    StrategicAll,
}

impl AdversaryKind {
    /// Column order of the result tables.
    pub const ALL: [AdversaryKind; 6] = [
        AdversaryKind::Fixed,
        AdversaryKind::Random,
        AdversaryKind::StrategicA,
        AdversaryKind::StrategicB,
        AdversaryKind::StrategicK,
        AdversaryKind::StrategicAll,
    ];

    pub fn is_strategic(self) -> bool {
        !matches!(self, AdversaryKind::Fixed | AdversaryKind::Random)
    }

    /// Number of policy outputs a strategic adversary of this kind needs.
    pub fn action_dim(self) -> usize {
        match self {
            AdversaryKind::Fixed | AdversaryKind::Random => 0,
            AdversaryKind::StrategicAll => 3,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AdversaryKind::Fixed => "fixed",
            AdversaryKind::Random => "random",
            AdversaryKind::StrategicA => "a",
            AdversaryKind::StrategicB => "b",
            AdversaryKind::StrategicK => "k",
            AdversaryKind::StrategicAll => "all",
        }
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdversaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AdversaryKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown adversary `{s}` (expected one of fixed, random, a, b, k, all)"
                ))
            })
    }
}

/// The constant coefficients `b = 0, A = 140, k = 1.5` on top of `base`.
pub fn fixed_params(base: &MarketParams) -> MarketParams {
    base.with_coefficients(FIXED_DRIFT, FIXED_ARRIVAL_SCALE, FIXED_DECAY)
}

/// Independent uniform draws of `(b, A, k)` inside the adversary box.
pub fn sample_random_params<R: Rng + ?Sized>(base: &MarketParams, rng: &mut R) -> MarketParams {
    let b = rng.random_range(DRIFT_RANGE.0..=DRIFT_RANGE.1);
    let a = rng.random_range(ARRIVAL_SCALE_RANGE.0..=ARRIVAL_SCALE_RANGE.1);
    let k = rng.random_range(DECAY_RANGE.0..=DECAY_RANGE.1);
    base.with_coefficients(b, a, k)
}

fn unit_to_range(u: f64, (lo, hi): (f64, f64)) -> f64 {
    let u = if u.is_nan() { 0.0 } else { u.clamp(-1.0, 1.0) };
    (lo + 0.5 * (u + 1.0) * (hi - lo)).clamp(lo, hi)
}

/// Maps already-squashed outputs in `[-1, 1]` onto the legal coefficient box.
/// Coefficients the kind does not control stay at their fixed values.
pub fn params_from_unit(kind: AdversaryKind, base: &MarketParams, unit: &[f64]) -> Result<MarketParams> {
    if !kind.is_strategic() {
        return Err(Error::InvalidParameter {
            name: "adversary kind",
            reason: format!("`{kind}` is not a strategic adversary"),
        });
    }
    if unit.len() != kind.action_dim() {
        return Err(Error::DimensionMismatch {
            kind: kind.to_string(),
            expected: kind.action_dim(),
            actual: unit.len(),
        });
    }
    let fixed = fixed_params(base);
    let params = match kind {
        AdversaryKind::StrategicB => fixed.with_coefficients(
            unit_to_range(unit[0], DRIFT_RANGE),
            FIXED_ARRIVAL_SCALE,
            FIXED_DECAY,
        ),
        AdversaryKind::StrategicA => fixed.with_coefficients(
            FIXED_DRIFT,
            unit_to_range(unit[0], ARRIVAL_SCALE_RANGE),
            FIXED_DECAY,
        ),
        AdversaryKind::StrategicK => fixed.with_coefficients(
            FIXED_DRIFT,
            FIXED_ARRIVAL_SCALE,
            unit_to_range(unit[0], DECAY_RANGE),
        ),
        AdversaryKind::StrategicAll => fixed.with_coefficients(
            unit_to_range(unit[0], DRIFT_RANGE),
            unit_to_range(unit[1], ARRIVAL_SCALE_RANGE),
            unit_to_range(unit[2], DECAY_RANGE),
        ),
        AdversaryKind::Fixed | AdversaryKind::Random => unreachable!(),
    };
    Ok(params)
}

/// Squashes raw (unbounded) policy outputs with `tanh`, then maps them into the box.
pub fn strategic_act(kind: AdversaryKind, base: &MarketParams, raw: &[f64]) -> Result<MarketParams> {
    let unit: Vec<f64> = raw.iter().map(|r| r.tanh()).collect();
    params_from_unit(kind, base, &unit)
}

/// Anything that chooses market coefficients for the environment.
pub trait AdversaryPolicy: Sync {
    /// Coefficients in force at the start of an episode.
    fn begin_episode(&self, base: &MarketParams, rng: &mut dyn RngCore) -> MarketParams;

    /// Coefficients for the coming step, given the observation and the
    /// coefficients currently in force.
    fn act(&self, obs: &Observation, current: &MarketParams) -> MarketParams;
}

/// A trained strategic adversary, evaluated deterministically.
#[derive(Clone, Debug)]
pub struct StrategicAdversary {
    pub kind: AdversaryKind,
    pub actor: Actor,
    /// Choose coefficients once at the first step and hold them.
    pub per_episode: bool,
}

impl StrategicAdversary {
    pub fn new(kind: AdversaryKind, actor: Actor) -> Result<Self> {
        if actor.action_dim() != kind.action_dim() {
            return Err(Error::DimensionMismatch {
                kind: kind.to_string(),
                expected: kind.action_dim(),
                actual: actor.action_dim(),
            });
        }
        Ok(StrategicAdversary {
            kind,
            actor,
            per_episode: false,
        })
    }

    pub fn params_for(&self, obs: &Observation, base: &MarketParams) -> MarketParams {
        let raw = self.actor.mean_raw(&obs.features());
        strategic_act(self.kind, base, &raw).expect("actor dimension checked at construction")
    }
}

#[derive(Clone, Debug)]
pub enum Adversary {
    Fixed,
    Random,
    Strategic(StrategicAdversary),
}

impl Adversary {
    pub fn kind(&self) -> AdversaryKind {
        match self {
            Adversary::Fixed => AdversaryKind::Fixed,
            Adversary::Random => AdversaryKind::Random,
            Adversary::Strategic(s) => s.kind,
        }
    }
}

impl AdversaryPolicy for Adversary {
    fn begin_episode(&self, base: &MarketParams, rng: &mut dyn RngCore) -> MarketParams {
        match self {
            Adversary::Random => sample_random_params(base, rng),
            Adversary::Fixed | Adversary::Strategic(_) => fixed_params(base),
        }
    }

    fn act(&self, obs: &Observation, current: &MarketParams) -> MarketParams {
        match self {
            Adversary::Fixed | Adversary::Random => *current,
            Adversary::Strategic(s) if s.per_episode && obs.step > 0 => *current,
            Adversary::Strategic(s) => s.params_for(obs, current),
        }
    }
}

/// Leaves whatever coefficients it is handed untouched; used to run the
/// environment at exactly the configured market parameters.
#[derive(Clone, Copy, Debug, Default)]
pub struct Passive;

impl AdversaryPolicy for Passive {
    fn begin_episode(&self, base: &MarketParams, _rng: &mut dyn RngCore) -> MarketParams {
        *base
    }

    fn act(&self, _obs: &Observation, current: &MarketParams) -> MarketParams {
        *current
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn in_box(p: &MarketParams) -> bool {
        (DRIFT_RANGE.0..=DRIFT_RANGE.1).contains(&p.drift)
            && (ARRIVAL_SCALE_RANGE.0..=ARRIVAL_SCALE_RANGE.1).contains(&p.arrival_scale)
            && (DECAY_RANGE.0..=DECAY_RANGE.1).contains(&p.decay)
    }

    #[test]
    fn fixed_coefficients() {
        let base = MarketParams::default();
        let p = fixed_params(&base);
        assert_eq!((p.drift, p.arrival_scale, p.decay), (0.0, 140.0, 1.5));
        assert_eq!(p, fixed_params(&base));
        assert!(in_box(&p));
        assert_eq!((p.volatility, p.dt, p.z0), (2.0, 0.005, 100.0));
    }

    #[test]
    fn random_draws_centered_and_bounded() {
        let base = MarketParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            let p = sample_random_params(&base, &mut rng);
            assert!(in_box(&p));
            sums[0] += p.drift;
            sums[1] += p.arrival_scale;
            sums[2] += p.decay;
        }
        // uniform on [lo, hi] has sd (hi - lo) / sqrt(12)
        let checks = [(0.0, 10.0), (140.0, 70.0), (1.5, 0.75)];
        for (sum, (center, width)) in sums.iter().zip(checks) {
            let se = width / 12f64.sqrt() / (n as f64).sqrt();
            assert!((sum / n as f64 - center).abs() < 3.0 * se);
        }
    }

    #[test]
    fn strategic_mapping_midpoint_and_saturation() {
        let base = MarketParams::default();
        let p = strategic_act(AdversaryKind::StrategicB, &base, &[0.0]).unwrap();
        assert_eq!((p.drift, p.arrival_scale, p.decay), (0.0, 140.0, 1.5));
        let hi = strategic_act(AdversaryKind::StrategicAll, &base, &[1e3, 1e3, 1e3]).unwrap();
        assert_eq!((hi.drift, hi.arrival_scale, hi.decay), (5.0, 175.0, 1.875));
        let lo = strategic_act(AdversaryKind::StrategicAll, &base, &[-1e3, -1e3, -1e3]).unwrap();
        assert_eq!((lo.drift, lo.arrival_scale, lo.decay), (-5.0, 105.0, 1.125));
    }

    #[test]
    fn single_parameter_kinds_leave_others_fixed() {
        let base = MarketParams::default();
        let a = strategic_act(AdversaryKind::StrategicA, &base, &[0.7]).unwrap();
        assert_eq!((a.drift, a.decay), (0.0, 1.5));
        let k = strategic_act(AdversaryKind::StrategicK, &base, &[-0.7]).unwrap();
        assert_eq!((k.drift, k.arrival_scale), (0.0, 140.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let base = MarketParams::default();
        assert!(matches!(
            strategic_act(AdversaryKind::StrategicAll, &base, &[0.0]),
            Err(Error::DimensionMismatch { expected: 3, actual: 1, .. })
        ));
        assert!(strategic_act(AdversaryKind::Fixed, &base, &[]).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in AdversaryKind::ALL {
            assert_eq!(k.name().parse::<AdversaryKind>().unwrap(), k);
        }
        assert!("sideways".parse::<AdversaryKind>().is_err());
    }

    proptest! {
        #[test]
        fn outputs_always_in_box(raw in proptest::collection::vec(-1e6f64..1e6, 3)) {
            let base = MarketParams::default();
            let p = strategic_act(AdversaryKind::StrategicAll, &base, &raw).unwrap();
            prop_assert!(in_box(&p));
            let p = params_from_unit(AdversaryKind::StrategicAll, &base, &raw).unwrap();
            prop_assert!(in_box(&p));
        }
    }
}
