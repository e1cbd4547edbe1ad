//! Robust market making in a stylized limit-order market.
//!
//! The crate is organised bottom-up:
//!
//! - [`market`]: price dynamics, fill model, cash/inventory accounting, rewards
//! - [`adversary`]: fixed, random and strategic choices of the market coefficients
//! - [`env`]: the episodic game between a market maker and an adversary
//! - [`nn`]: small dense networks, Adam and gradient checking
//! - [`learners`]: soft actor-critic, deep Q-learning and the market training tasks
//! - [`agents`]: scripted and trained market-maker behaviours
//! - [`eval`]: evaluation protocol, metrics and the experiment matrix
//! - [`config`], [`checkpoint`]: run configuration and policy persistence

pub mod adversary;
pub mod agents;
pub mod checkpoint;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod learners;
pub mod market;
pub mod nn;

pub use error::{Error, Result};
