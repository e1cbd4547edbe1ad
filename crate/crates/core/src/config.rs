//! Run configuration: a sectioned TOML file with defaults for every key.
//!
//! ```toml
//! seed = 7
//! adversary = "fixed"
//!
//! [market]
//! decay = 1.5
//!
//! [risk]
//! eta = 0.1
//!
//! [sac]
//! episodes = 5000
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryKind;
use crate::env::{EnvConfig, InitInventory};
use crate::error::{Error, Result};
use crate::eval::{EvalConfig, MatrixSpec};
use crate::learners::{DqnConfig, SacConfig};
use crate::market::{MarketParams, RiskConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub agents: Vec<String>,
    /// `[eta, zeta]` pairs, one per row.
    pub risks: Vec<[f64; 2]>,
    pub adversaries: Vec<AdversaryKind>,
    pub skip_single_param_risk_averse: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        let m = MatrixSpec::default();
        ReportConfig {
            agents: m.agents,
            risks: m.risks.iter().map(|r| [r.eta, r.zeta]).collect(),
            adversaries: m.adversaries,
            skip_single_param_risk_averse: m.skip_single_param_risk_averse,
        }
    }
}

impl ReportConfig {
    pub fn matrix_spec(&self) -> Result<MatrixSpec> {
        let risks = self
            .risks
            .iter()
            .map(|&[eta, zeta]| RiskConfig::new(eta, zeta))
            .collect::<Result<_>>()?;
        Ok(MatrixSpec {
            agents: self.agents.clone(),
            risks,
            adversaries: self.adversaries.clone(),
            skip_single_param_risk_averse: self.skip_single_param_risk_averse,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Adversary regime used for training and for labelling outputs.
    pub adversary: AdversaryKind,
    /// Initial inventory rule during training.
    pub train_inventory: InitInventory,
    /// Initial inventory rule during evaluation.
    pub eval_inventory: InitInventory,
    /// Re-draw strategic coefficients only at the start of each episode.
    pub adversary_per_episode: bool,
    pub market: MarketParams,
    pub risk: RiskConfig,
    /// Market-maker learner.
    pub sac: SacConfig,
    /// Strategic-adversary learner.
    pub adversary_sac: SacConfig,
    pub dqn: DqnConfig,
    pub eval: EvalConfig,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            adversary: AdversaryKind::Fixed,
            train_inventory: InitInventory::Uniform,
            eval_inventory: InitInventory::Zero,
            adversary_per_episode: false,
            market: MarketParams::default(),
            risk: RiskConfig::default(),
            sac: SacConfig::default(),
            adversary_sac: SacConfig::default(),
            dqn: DqnConfig::default(),
            eval: EvalConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

fn in_section(section: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| Error::Config(format!("[{section}] {e}")))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        in_section("market", self.market.validate())?;
        in_section("risk", self.risk.validate())?;
        in_section("sac", self.sac.validate())?;
        in_section("adversary_sac", self.adversary_sac.validate())?;
        in_section("dqn", self.dqn.validate())?;
        in_section("eval", self.eval.validate())?;
        in_section("report", self.report.matrix_spec().map(|_| ()))
    }

    pub fn train_env(&self) -> EnvConfig {
        EnvConfig {
            market: self.market,
            risk: self.risk,
            init_inventory: self.train_inventory,
        }
    }

    pub fn eval_env(&self) -> EnvConfig {
        EnvConfig {
            init_inventory: self.eval_inventory,
            ..self.train_env()
        }
    }
}
