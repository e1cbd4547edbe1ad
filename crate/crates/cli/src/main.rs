use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robust_mm::adversary::{Adversary, AdversaryKind};
use robust_mm::agents::{ActorQuoter, ConstantQuote, NoQuote};
use robust_mm::checkpoint::{PolicyCheckpoint, PolicyKind};
use robust_mm::config::RunConfig;
use robust_mm::env::MarketMaker;
use robust_mm::eval::{evaluate, experiment_matrix, write_cells_csv, EvalConfig, ExperimentCell};
use robust_mm::learners::{train_adversary_sac, train_gate_dqn, train_mm_sac, TrainingLog};
use robust_mm::market::RiskConfig;

const OUT_ENV: &str = "ROBUST_MM_OUT";

#[derive(Parser, Debug)]
#[command(name = "robust-mm", version, about = "Train and evaluate adversarially robust market makers")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, env = OUT_ENV, default_value = "runs")]
    out: PathBuf,
    /// Training episodes, or episodes per evaluation run.
    #[arg(long, global = true)]
    episodes: Option<usize>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true)]
    zeta: Option<f64>,
    /// Adversary regime: fixed, random, a, b, k or all.
    #[arg(long, global = true)]
    adversary: Option<AdversaryKind>,
    #[arg(long, global = true)]
    adversary_checkpoint: Option<PathBuf>,
    #[arg(long, global = true)]
    mm_checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a strategic adversary against a market maker.
    TrainAdversary,
    /// Train the always-quoting market maker.
    TrainMm,
    /// Train a discrete quote gate on top of a frozen market maker.
    TrainGate {
        #[arg(long, default_value_t = 2, value_parser = parse_actions)]
        actions: usize,
    },
    /// Evaluate one agent and write its statistics.
    Evaluate {
        /// Checkpoint path, or one of `no-quote`, `myopic`, `constant:BID,ASK`.
        #[arg(long)]
        agent: String,
    },
    /// Evaluate every available checkpoint in the output directory.
    Report,
}

fn parse_actions(s: &str) -> std::result::Result<usize, String> {
    match s {
        "2" => Ok(2),
        "4" => Ok(4),
        _ => Err(format!("quote gate has 2 or 4 actions, not `{s}`")),
    }
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(e) = common.eta {
        cfg.risk.eta = e;
    }
    if let Some(z) = common.zeta {
        cfg.risk.zeta = z;
    }
    if let Some(a) = common.adversary {
        cfg.adversary = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// File stem identifying a policy by role, risk setting and adversary regime.
fn stem(role: &str, risk: &RiskConfig, adversary: AdversaryKind) -> String {
    format!("{role}_{adversary}_eta{}_zeta{}", risk.eta, risk.zeta)
}

fn write_log(log: &TrainingLog, path: &Path) -> Result<()> {
    log.write_csv(BufWriter::new(File::create(path)?))?;
    Ok(())
}

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir: dir.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records the resolved configuration next to an artifact.
    fn record(&self, stem: &str, cfg: &RunConfig, command: &str) -> Result<()> {
        let text = format!("# command = {command}\n{}", cfg.to_toml());
        fs::write(self.path(&format!("{stem}.run.toml")), text)?;
        eprintln!("{command}: seed {} -> {}", cfg.seed, self.dir.display());
        Ok(())
    }
}

fn load_checkpoint(path: &Path) -> Result<PolicyCheckpoint> {
    PolicyCheckpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

/// Builds the adversary for `cfg.adversary`; strategic kinds need a checkpoint.
fn build_adversary(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<Adversary> {
    match cfg.adversary {
        AdversaryKind::Fixed => Ok(Adversary::Fixed),
        AdversaryKind::Random => Ok(Adversary::Random),
        kind => {
            let path = checkpoint
                .with_context(|| format!("adversary `{kind}` needs --adversary-checkpoint"))?;
            let mut adv = load_checkpoint(path)?.strategic_adversary()?;
            if adv.kind != kind {
                bail!("adversary checkpoint holds `{}`, expected `{kind}`", adv.kind);
            }
            adv.per_episode = cfg.adversary_per_episode;
            Ok(Adversary::Strategic(adv))
        }
    }
}

fn train_adversary(common: &Common, mut cfg: RunConfig) -> Result<()> {
    if let Some(n) = common.episodes {
        cfg.adversary_sac.episodes = n;
    }
    let kind = cfg.adversary;
    if !kind.is_strategic() {
        bail!("train-adversary needs a strategic --adversary (a, b, k or all), got `{kind}`");
    }
    let opponent: Box<dyn MarketMaker> = match &common.mm_checkpoint {
        Some(p) => load_checkpoint(p)?.market_maker()?,
        None => Box::new(ConstantQuote::myopic(cfg.market.decay)?),
    };
    let out = Outputs::new(&common.out)?;
    let name = stem("adversary", &cfg.risk, kind);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trained = train_adversary_sac(&cfg.train_env(), opponent.as_ref(), kind, &cfg.adversary_sac, &mut rng)?;
    PolicyCheckpoint::adversary(kind, &trained.actor, cfg.seed, cfg.to_toml()).save(&out.path(&format!("{name}.ckpt")))?;
    write_log(&trained.log, &out.path(&format!("{name}.train.csv")))?;
    out.record(&name, &cfg, "train-adversary")
}

fn train_mm(common: &Common, mut cfg: RunConfig) -> Result<()> {
    if let Some(n) = common.episodes {
        cfg.sac.episodes = n;
    }
    let adversary = build_adversary(&cfg, common.adversary_checkpoint.as_deref())?;
    let out = Outputs::new(&common.out)?;
    let name = stem("always-quote", &cfg.risk, cfg.adversary);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trained = train_mm_sac(&cfg.train_env(), &adversary, &cfg.sac, &mut rng)?;
    PolicyCheckpoint::mm(&trained.actor, cfg.seed, cfg.to_toml()).save(&out.path(&format!("{name}.ckpt")))?;
    write_log(&trained.log, &out.path(&format!("{name}.train.csv")))?;
    out.record(&name, &cfg, "train-mm")
}

fn train_gate(common: &Common, mut cfg: RunConfig, actions: usize) -> Result<()> {
    if let Some(n) = common.episodes {
        cfg.dqn.episodes = n;
    }
    let frozen = match &common.mm_checkpoint {
        Some(p) => Some(load_checkpoint(p)?.mm_actor()?),
        None => None,
    };
    let quoter = frozen.clone().map(ActorQuoter::new).transpose()?;
    let adversary = build_adversary(&cfg, common.adversary_checkpoint.as_deref())?;
    let out = Outputs::new(&common.out)?;
    let name = stem(&format!("gate-{actions}"), &cfg.risk, cfg.adversary);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trained = train_gate_dqn(
        &cfg.train_env(),
        quoter.as_ref().map(|q| q as &dyn MarketMaker),
        &adversary,
        actions,
        &cfg.dqn,
        &mut rng,
    )?;
    let frozen = frozen.expect("training succeeded, so the frozen policy exists");
    PolicyCheckpoint::gate(&trained.qnet, &frozen, cfg.seed, cfg.to_toml()).save(&out.path(&format!("{name}.ckpt")))?;
    write_log(&trained.log, &out.path(&format!("{name}.train.csv")))?;
    out.record(&name, &cfg, "train-gate")
}

/// Resolves `--agent` to a behaviour and the label used in outputs.
fn parse_agent(spec: &str, cfg: &RunConfig) -> Result<(String, Box<dyn MarketMaker>)> {
    match spec {
        "no-quote" => Ok((spec.into(), Box::new(NoQuote))),
        "myopic" => Ok((spec.into(), Box::new(ConstantQuote::myopic(cfg.market.decay)?))),
        s if s.starts_with("constant:") => {
            let (bid, ask) = s["constant:".len()..]
                .split_once(',')
                .context("constant agent is `constant:BID,ASK`")?;
            let q = ConstantQuote::new(bid.trim().parse()?, ask.trim().parse()?)?;
            Ok(("constant".into(), Box::new(q)))
        }
        path => {
            let ck = load_checkpoint(Path::new(path))?;
            let label = match ck.kind {
                PolicyKind::Mm => "always-quote".to_string(),
                other => other.to_string(),
            };
            Ok((label, ck.market_maker()?))
        }
    }
}

fn run_evaluate(common: &Common, mut cfg: RunConfig, agent: &str) -> Result<()> {
    if let Some(n) = common.episodes {
        cfg.eval.episodes_per_run = n;
    }
    let (label, mm) = parse_agent(agent, &cfg)?;
    let adversary = build_adversary(&cfg, common.adversary_checkpoint.as_deref())?;
    let out = Outputs::new(&common.out)?;
    let stats = evaluate(mm.as_ref(), &cfg.eval_env(), &adversary, &EvalConfig { seed: cfg.seed, ..cfg.eval })?;
    let cell = ExperimentCell {
        agent: label,
        risk: cfg.risk,
        adversary: cfg.adversary,
        stats: Some(stats),
    };
    write_cells_csv(&[cell], BufWriter::new(File::create(out.path("evaluate.csv"))?))?;
    out.record("evaluate", &cfg, "evaluate")
}

fn run_report(common: &Common, mut cfg: RunConfig) -> Result<()> {
    if let Some(n) = common.episodes {
        cfg.eval.episodes_per_run = n;
    }
    let spec = cfg.report.matrix_spec()?;
    let out = Outputs::new(&common.out)?;
    let dir = out.dir.clone();
    let cells = experiment_matrix(
        &spec,
        &cfg.eval_env(),
        &Adversary::Fixed,
        &EvalConfig { seed: cfg.seed, ..cfg.eval },
        |agent, risk, adv| {
            let path = dir.join(format!("{}.ckpt", stem(agent, risk, adv)));
            if !path.exists() {
                return Ok(None);
            }
            match PolicyCheckpoint::load(&path).and_then(|c| c.market_maker()) {
                Ok(mm) => Ok(Some(mm)),
                Err(e) => {
                    eprintln!("skipping {}: {e}", path.display());
                    Ok(None)
                }
            }
        },
    )?;
    let present = cells.iter().filter(|c| c.stats.is_some()).count();
    write_cells_csv(&cells, BufWriter::new(File::create(out.path("report.csv"))?))?;
    eprintln!("report: {present} of {} cells evaluated", cells.len());
    out.record("report", &cfg, "report")
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli.common)?;
    let common = &cli.common;
    match cli.command {
        Command::TrainAdversary => train_adversary(common, cfg),
        Command::TrainMm => train_mm(common, cfg),
        Command::TrainGate { actions } => train_gate(common, cfg, actions),
        Command::Evaluate { agent } => run_evaluate(common, cfg, &agent),
        Command::Report => run_report(common, cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
