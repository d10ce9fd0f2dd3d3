//! Instance-based learning agents, with and without an opponent model, for
//! repeated two-asset Stackelberg security games.
//!
//! The crate is organized bottom-up:
//!
//! - [`rng`]: splittable seeded streams and the Gamma/Dirichlet/Beta samplers
//! - [`env`]: the game itself (asset values, payoffs)
//! - [`ibl`]: instance memory, activation, retrieval, blending, Boltzmann choice
//! - [`agents`]: Random, UCB, IBL and IBToM decision models and role switching
//! - [`harness`]: episodes, paired training, out-of-distribution evaluation
//! - [`stats`], [`config`], [`report`]: summaries, run configuration, output files
//!
//! ```
//! use ibtom::agents::{AgentParams, ModelKind};
//! use ibtom::harness::{play_pair, EpisodeConfig};
//!
//! let cfg = EpisodeConfig::default();
//! let records = play_pair(
//!     &AgentParams::new(ModelKind::IbToM),
//!     &AgentParams::new(ModelKind::Ibl),
//!     &cfg,
//!     42,
//!     0,
//! )
//! .unwrap();
//! assert_eq!(records.len(), 100);
//! ```

pub mod agents;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod ibl;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

/// The guide's chapters, compiled so their examples run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/game.md")]
    mod game {}
    #[doc = include_str!("../../../book/src/memory.md")]
    mod memory {}
    #[doc = include_str!("../../../book/src/agents.md")]
    mod agents {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
