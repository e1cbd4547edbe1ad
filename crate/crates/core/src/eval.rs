//! Evaluation protocol: repeated runs of independent episodes, terminal-wealth
//! statistics, Sharpe ratio, quoting ratio and spread, and the experiment
//! matrix over risk settings, adversaries and agent types.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryKind, AdversaryPolicy};
use crate::env::{run_episode, EnvConfig, MarketMaker, QuoteMode, StepRecord};
use crate::error::{invalid, Error, Result};
use crate::market::RiskConfig;

/// The seven `(eta, zeta)` settings: risk-neutral first, then six risk-averse.
pub const RISK_SETTINGS: [(f64, f64); 7] = [
    (0.0, 0.0),
    (1.0, 0.0),
    (0.5, 0.0),
    (0.1, 0.0),
    (0.01, 0.0),
    (0.0, 0.01),
    (0.0, 0.001),
];

pub const CSV_HEADER: [&str; 14] = [
    "agent",
    "eta",
    "zeta",
    "adversary",
    "return_mean",
    "return_std",
    "sharpe",
    "qr_none",
    "qr_two_sided",
    "qr_ask_only",
    "qr_bid_only",
    "spread_mean",
    "spread_std",
    "episodes",
];

/// Two decimals, halves rounded away from zero.
pub fn round2(x: f64) -> f64 {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// `mean / std`; absent when the standard deviation is zero.
pub fn sharpe(mean: f64, std: f64) -> Option<f64> {
    if std > 0.0 {
        Some(mean / std)
    } else {
        None
    }
}

/// Percentage of steps spent in each quote mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuotingRatio {
    pub none: f64,
    pub two_sided: f64,
    pub ask_only: f64,
    pub bid_only: f64,
}

impl QuotingRatio {
    pub fn total(&self) -> f64 {
        self.none + self.two_sided + self.ask_only + self.bid_only
    }

    /// Share of steps with at least one side quoted.
    pub fn quoting(&self) -> f64 {
        self.two_sided + self.ask_only + self.bid_only
    }
}

impl fmt::Display for QuotingRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.2}+{:.2}+{:.2}+{:.2}",
            self.none, self.two_sided, self.ask_only, self.bid_only
        )
    }
}

/// Step counts per quote mode, in `[none, two-sided, ask-only, bid-only]` order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ModeCounts([u64; 4]);

impl ModeCounts {
    pub fn record(&mut self, mode: QuoteMode) {
        let i = match mode {
            QuoteMode::NoQuote => 0,
            QuoteMode::TwoSided => 1,
            QuoteMode::AskOnly => 2,
            QuoteMode::BidOnly => 3,
        };
        self.0[i] += 1;
    }

    pub fn merge(&mut self, other: &ModeCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn ratio(&self) -> Result<QuotingRatio> {
        let total = self.total();
        if total == 0 {
            return Err(invalid("records", "quoting ratio needs at least one step"));
        }
        let pct = |c: u64| round2(c as f64 * 100.0 / total as f64);
        Ok(QuotingRatio {
            none: pct(self.0[0]),
            two_sided: pct(self.0[1]),
            ask_only: pct(self.0[2]),
            bid_only: pct(self.0[3]),
        })
    }
}

pub fn quoting_ratio(records: &[StepRecord]) -> Result<QuotingRatio> {
    let mut counts = ModeCounts::default();
    records.iter().for_each(|r| counts.record(r.mode()));
    counts.ratio()
}

/// Streaming mean and sum of squared deviations, merged in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    /// Sample standard deviation; zero for fewer than two observations.
    pub fn sample_std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

/// Mean and sample standard deviation of `bid + ask` over two-sided steps.
pub fn spread_stats(records: &[StepRecord]) -> Option<(f64, f64)> {
    let mut m = Moments::default();
    records.iter().filter_map(StepRecord::spread).for_each(|s| m.push(s));
    (m.n > 0).then(|| (m.mean, m.sample_std()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub return_mean: f64,
    /// Sample standard deviation over all episodes pooled.
    pub return_std: f64,
    pub sharpe: Option<f64>,
    pub quoting: QuotingRatio,
    pub spread_mean: Option<f64>,
    pub spread_std: Option<f64>,
    pub episodes: usize,
    /// Mean terminal wealth of each run, in run order.
    pub run_means: Vec<f64>,
}

impl EvalStats {
    /// Standard error of the pooled mean.
    pub fn standard_error(&self) -> f64 {
        self.return_std / (self.episodes as f64).sqrt()
    }

    /// Sample standard deviation of the per-run means.
    pub fn run_mean_std(&self) -> f64 {
        let mut m = Moments::default();
        self.run_means.iter().for_each(|&x| m.push(x));
        m.sample_std()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub n_runs: usize,
    pub episodes_per_run: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_runs: 100,
            episodes_per_run: 1000,
            seed: 0,
            parallel: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 || self.episodes_per_run == 0 {
            return Err(invalid("n_runs", "evaluation needs at least one run of one episode"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct EpisodeSummary {
    wealth: f64,
    modes: ModeCounts,
    spread: Moments,
}

/// Random stream for episode `index` of an evaluation seeded with `seed`.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn summarize(
    agent: &dyn MarketMaker,
    env: &EnvConfig,
    adversary: &dyn AdversaryPolicy,
    seed: u64,
    index: u64,
) -> Result<EpisodeSummary> {
    let mut rng = episode_rng(seed, index);
    let res = run_episode(env, agent, adversary, &mut rng)?;
    let mut modes = ModeCounts::default();
    let mut spread = Moments::default();
    for r in &res.records {
        modes.record(r.mode());
        if let Some(s) = r.spread() {
            spread.push(s);
        }
    }
    Ok(EpisodeSummary {
        wealth: res.terminal_wealth - res.initial_wealth,
        modes,
        spread,
    })
}

/// Runs `n_runs x episodes_per_run` independent episodes and aggregates them.
///
/// Every episode draws from its own stream derived from `cfg.seed`, and the
/// reduction runs in episode order, so serial and parallel evaluation agree
/// bit for bit.
pub fn evaluate(
    agent: &dyn MarketMaker,
    env: &EnvConfig,
    adversary: &dyn AdversaryPolicy,
    cfg: &EvalConfig,
) -> Result<EvalStats> {
    cfg.validate()?;
    env.validate()?;
    let total = (cfg.n_runs * cfg.episodes_per_run) as u64;
    let summaries: Vec<EpisodeSummary> = if cfg.parallel {
        (0..total)
            .into_par_iter()
            .map(|i| summarize(agent, env, adversary, cfg.seed, i))
            .collect::<Result<_>>()?
    } else {
        (0..total)
            .map(|i| summarize(agent, env, adversary, cfg.seed, i))
            .collect::<Result<_>>()?
    };

    let mut wealth = Moments::default();
    let mut modes = ModeCounts::default();
    let mut spread = Moments::default();
    let mut run_means = Vec::with_capacity(cfg.n_runs);
    for run in summaries.chunks(cfg.episodes_per_run) {
        let mut m = Moments::default();
        for s in run {
            m.push(s.wealth);
            modes.merge(&s.modes);
            spread.merge(&s.spread);
        }
        wealth.merge(&m);
        run_means.push(m.mean);
    }
    let return_std = wealth.sample_std();
    Ok(EvalStats {
        return_mean: wealth.mean,
        return_std,
        sharpe: sharpe(wealth.mean, return_std),
        quoting: modes.ratio()?,
        spread_mean: (spread.n > 0).then_some(spread.mean),
        spread_std: (spread.n > 0).then(|| spread.sample_std()),
        episodes: total as usize,
        run_means,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    AlwaysQuote,
    #[serde(rename = "gate-2")]
    Gate2,
    #[serde(rename = "gate-4")]
    Gate4,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::AlwaysQuote, AgentKind::Gate2, AgentKind::Gate4];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::AlwaysQuote => "always-quote",
            AgentKind::Gate2 => "gate-2",
            AgentKind::Gate4 => "gate-4",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown agent kind `{s}`")))
    }
}

/// One `(agent, risk, training adversary)` entry of the result tables.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentCell {
    pub agent: String,
    pub risk: RiskConfig,
    pub adversary: AdversaryKind,
    /// Absent when the policy for this cell is unavailable.
    pub stats: Option<EvalStats>,
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a matrix cell, stable under reordering of the other cells.
pub fn cell_seed(master: u64, agent: &str, risk_index: usize, adversary: AdversaryKind) -> u64 {
    let mut h = mix(master);
    for b in agent.bytes() {
        h = mix(h ^ b as u64);
    }
    h = mix(h ^ risk_index as u64);
    mix(h ^ adversary.name().bytes().fold(0u64, |a, b| a.wrapping_mul(131).wrapping_add(b as u64)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSpec {
    pub agents: Vec<String>,
    pub risks: Vec<RiskConfig>,
    pub adversaries: Vec<AdversaryKind>,
    /// Skip the single-coefficient adversaries for risk-averse rows.
    pub skip_single_param_risk_averse: bool,
}

impl Default for MatrixSpec {
    fn default() -> Self {
        MatrixSpec {
            agents: AgentKind::ALL.iter().map(|a| a.name().to_string()).collect(),
            risks: RISK_SETTINGS
                .iter()
                .map(|&(eta, zeta)| RiskConfig { eta, zeta })
                .collect(),
            adversaries: AdversaryKind::ALL.to_vec(),
            skip_single_param_risk_averse: true,
        }
    }
}

/// Evaluates every cell whose policy `load` can supply; cells whose loader
/// fails or returns `None` are reported as absent and the sweep continues.
pub fn experiment_matrix<F>(
    spec: &MatrixSpec,
    env: &EnvConfig,
    adversary: &dyn AdversaryPolicy,
    eval: &EvalConfig,
    mut load: F,
) -> Result<Vec<ExperimentCell>>
where
    F: FnMut(&str, &RiskConfig, AdversaryKind) -> Result<Option<Box<dyn MarketMaker>>>,
{
    let mut cells = Vec::new();
    for agent in &spec.agents {
        for (ri, risk) in spec.risks.iter().enumerate() {
            for &adv in &spec.adversaries {
                let single = matches!(
                    adv,
                    AdversaryKind::StrategicA | AdversaryKind::StrategicB | AdversaryKind::StrategicK
                );
                if spec.skip_single_param_risk_averse && single && !risk.is_risk_neutral() {
                    continue;
                }
                let policy = load(agent, risk, adv).unwrap_or(None);
                let stats = match policy {
                    Some(p) => {
                        let cfg = EvalConfig {
                            seed: cell_seed(eval.seed, agent, ri, adv),
                            ..*eval
                        };
                        let env = EnvConfig { risk: *risk, ..*env };
                        Some(evaluate(p.as_ref(), &env, adversary, &cfg)?)
                    }
                    None => None,
                };
                cells.push(ExperimentCell {
                    agent: agent.clone(),
                    risk: *risk,
                    adversary: adv,
                    stats,
                });
            }
        }
    }
    Ok(cells)
}

fn fmt2(x: f64) -> String {
    format!("{:.2}", round2(x))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt2).unwrap_or_default()
}

/// CSV row fields in [`CSV_HEADER`] order.
pub fn csv_row(agent: &str, risk: &RiskConfig, adversary: AdversaryKind, stats: Option<&EvalStats>) -> Vec<String> {
    let mut row = vec![
        agent.to_string(),
        risk.eta.to_string(),
        risk.zeta.to_string(),
        adversary.name().to_string(),
    ];
    match stats {
        Some(s) => row.extend([
            fmt2(s.return_mean),
            fmt2(s.return_std),
            fmt_opt(s.sharpe),
            fmt2(s.quoting.none),
            fmt2(s.quoting.two_sided),
            fmt2(s.quoting.ask_only),
            fmt2(s.quoting.bid_only),
            fmt_opt(s.spread_mean),
            fmt_opt(s.spread_std),
            s.episodes.to_string(),
        ]),
        None => row.extend(std::iter::repeat_n(String::new(), CSV_HEADER.len() - 4)),
    }
    row
}

pub fn write_cells_csv<W: Write>(cells: &[ExperimentCell], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in cells {
        w.write_record(csv_row(&c.agent, &c.risk, c.adversary, c.stats.as_ref()))?;
    }
    w.flush()?;
    Ok(())
}
