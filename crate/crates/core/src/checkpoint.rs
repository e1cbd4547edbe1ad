//! Binary policy checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `RMMPOLCY` |
//! | 4     | format version (u32) |
//! | 8     | header length (u64) |
//! | n     | JSON header: kind, network shapes, seed, config snapshot |
//! | 8     | parameter count (u64) |
//! | 8 * m | parameters (f64) |
//! | 32    | SHA-256 of everything above |

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::{AdversaryKind, StrategicAdversary};
use crate::agents::{ActorQuoter, GateQuoter};
use crate::env::MarketMaker;
use crate::error::{Error, Result};
use crate::learners::Actor;
use crate::nn::{Activation, Dense, Mlp};

pub const MAGIC: &[u8; 8] = b"RMMPOLCY";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Always-quoting market maker.
    Mm,
    Adversary { kind: AdversaryKind },
    Gate { n_actions: usize },
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Mm => f.write_str("mm"),
            PolicyKind::Adversary { kind } => write!(f, "adversary-{kind}"),
            PolicyKind::Gate { n_actions } => write!(f, "gate-{n_actions}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedNet {
    pub name: String,
    pub net: Mlp,
    /// Output scale for squashed-Gaussian actors.
    pub action_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct NetShape {
    name: String,
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    action_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: PolicyKind,
    networks: Vec<NetShape>,
    seed: u64,
    config: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyCheckpoint {
    pub kind: PolicyKind,
    pub nets: Vec<NamedNet>,
    /// Master seed of the run that produced the policy.
    pub seed: u64,
    /// Resolved run configuration, as TOML.
    pub config: String,
}

fn actor_net(name: &str, actor: &Actor) -> NamedNet {
    NamedNet {
        name: name.into(),
        net: actor.net.clone(),
        action_scale: Some(actor.action_scale()),
    }
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Checkpoint(format!("truncated file while reading {what}")));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn read_u64(bytes: &mut &[u8], what: &str) -> Result<u64> {
    Ok(u64::from_le_bytes(take(bytes, 8, what)?.try_into().expect("8 bytes")))
}

impl PolicyCheckpoint {
    pub fn mm(actor: &Actor, seed: u64, config: String) -> Self {
        PolicyCheckpoint {
            kind: PolicyKind::Mm,
            nets: vec![actor_net("actor", actor)],
            seed,
            config,
        }
    }

    pub fn adversary(kind: AdversaryKind, actor: &Actor, seed: u64, config: String) -> Self {
        PolicyCheckpoint {
            kind: PolicyKind::Adversary { kind },
            nets: vec![actor_net("actor", actor)],
            seed,
            config,
        }
    }

    /// Gate checkpoints carry the frozen always-quoting actor they delegate to.
    pub fn gate(qnet: &Mlp, frozen: &Actor, seed: u64, config: String) -> Self {
        PolicyCheckpoint {
            kind: PolicyKind::Gate {
                n_actions: qnet.output_dim(),
            },
            nets: vec![
                NamedNet {
                    name: "qnet".into(),
                    net: qnet.clone(),
                    action_scale: None,
                },
                actor_net("frozen_actor", frozen),
            ],
            seed,
            config,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            kind: self.kind,
            networks: self
                .nets
                .iter()
                .map(|n| NetShape {
                    name: n.name.clone(),
                    sizes: n.net.sizes(),
                    activations: n.net.activations(),
                    action_scale: n.action_scale,
                })
                .collect(),
            seed: self.seed,
            config: self.config.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header always serializes");
        let params: Vec<f64> = self.nets.iter().flat_map(|n| n.net.params()).collect();

        let mut out = Vec::with_capacity(MAGIC.len() + 20 + json.len() + 8 * params.len() + DIGEST_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for p in &params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest[..]);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + DIGEST_LEN || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Checkpoint("not a policy checkpoint".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body)[..] != *digest {
            return Err(Error::Checkpoint("checksum mismatch, file is corrupted".into()));
        }

        let mut rest = &body[12..];
        let header_len = read_u64(&mut rest, "header length")? as usize;
        let header: Header = serde_json::from_slice(take(&mut rest, header_len, "header")?)
            .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        let n_params = read_u64(&mut rest, "parameter count")? as usize;
        let raw = take(&mut rest, n_params.saturating_mul(8), "parameters")?;
        if !rest.is_empty() {
            return Err(Error::Checkpoint("trailing bytes after parameters".into()));
        }
        let params: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();

        let mut offset = 0;
        let mut nets = Vec::with_capacity(header.networks.len());
        for shape in header.networks {
            if shape.sizes.len() != shape.activations.len() + 1 {
                return Err(Error::Checkpoint(format!("network `{}` has inconsistent shape", shape.name)));
            }
            let layers = shape
                .sizes
                .windows(2)
                .zip(&shape.activations)
                .map(|(w, &a)| Dense::zeros(w[0], w[1], a))
                .collect();
            let mut net = Mlp::from_layers(layers)?;
            let n = net.num_params();
            let slice = params
                .get(offset..offset + n)
                .ok_or_else(|| Error::Checkpoint("parameter count does not match shapes".into()))?;
            net.set_params(slice)?;
            offset += n;
            nets.push(NamedNet {
                name: shape.name,
                net,
                action_scale: shape.action_scale,
            });
        }
        if offset != params.len() {
            return Err(Error::Checkpoint("parameter count does not match shapes".into()));
        }
        Ok(PolicyCheckpoint {
            kind: header.kind,
            nets,
            seed: header.seed,
            config: header.config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    fn expect(&self, expected: &str, ok: bool) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: expected.into(),
                found: self.kind.to_string(),
            })
        }
    }

    fn actor(&self, name: &str) -> Result<Actor> {
        let n = self
            .nets
            .iter()
            .find(|n| n.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("network `{name}` missing")))?;
        let scale = n
            .action_scale
            .ok_or_else(|| Error::Checkpoint(format!("network `{name}` has no action scale")))?;
        Actor::from_net(n.net.clone(), scale)
    }

    /// The always-quoting actor; fails for any other kind.
    pub fn mm_actor(&self) -> Result<Actor> {
        self.expect("mm", self.kind == PolicyKind::Mm)?;
        self.actor("actor")
    }

    pub fn strategic_adversary(&self) -> Result<StrategicAdversary> {
        let PolicyKind::Adversary { kind } = self.kind else {
            return Err(Error::KindMismatch {
                expected: "adversary".into(),
                found: self.kind.to_string(),
            });
        };
        StrategicAdversary::new(kind, self.actor("actor")?)
    }

    pub fn gate_quoter(&self) -> Result<GateQuoter> {
        self.expect("gate", matches!(self.kind, PolicyKind::Gate { .. }))?;
        let qnet = self
            .nets
            .iter()
            .find(|n| n.name == "qnet")
            .ok_or_else(|| Error::Checkpoint("network `qnet` missing".into()))?;
        GateQuoter::new(qnet.net.clone(), ActorQuoter::new(self.actor("frozen_actor")?)?)
    }

    /// Any market-maker checkpoint (always-quoting or gated) as a behaviour.
    pub fn market_maker(&self) -> Result<Box<dyn MarketMaker>> {
        match self.kind {
            PolicyKind::Mm => Ok(Box::new(ActorQuoter::new(self.mm_actor()?)?)),
            PolicyKind::Gate { .. } => Ok(Box::new(self.gate_quoter()?)),
            PolicyKind::Adversary { .. } => Err(Error::KindMismatch {
                expected: "market maker".into(),
                found: self.kind.to_string(),
            }),
        }
    }
}
