//! The single-step, two-asset Stackelberg security game.
//!
//! Each trial the defender covers one asset and the attacker attacks one.
//! Choices are revealed simultaneously. A covered attack pays nothing to
//! either side; an uncovered attack pays the attacker the asset's value and
//! costs the defender the same amount.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{sample_asset_values, RngStream};

pub const NUM_ASSETS: usize = 2;
pub const DEFAULT_ALPHA: [f64; 2] = [3.0, 4.0];
pub const DEFAULT_SCALE: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AssetId(u8);

impl AssetId {
    pub fn new(id: usize) -> Result<Self> {
        if id < NUM_ASSETS {
            Ok(AssetId(id as u8))
        } else {
            Err(Error::AssetOutOfRange(id))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = AssetId> + Clone {
        (0..NUM_ASSETS as u8).map(AssetId)
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Defender,
    Attacker,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Defender => Role::Attacker,
            Role::Attacker => Role::Defender,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Defender => "defender",
            Role::Attacker => "attacker",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-episode asset values, fixed for every trial of the episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssetValues([f64; NUM_ASSETS]);

impl AssetValues {
    pub fn new(values: [f64; NUM_ASSETS]) -> Result<Self> {
        for v in values {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Input(format!("asset value must be positive, got {v}")));
            }
        }
        Ok(AssetValues(values))
    }

    pub fn get(&self, asset: AssetId) -> f64 {
        self.0[asset.index()]
    }

    pub fn as_array(&self) -> [f64; NUM_ASSETS] {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointAction {
    pub defender: AssetId,
    pub attacker: AssetId,
}

impl JointAction {
    pub fn new(defender: usize, attacker: usize) -> Result<Self> {
        Ok(JointAction {
            defender: AssetId::new(defender)?,
            attacker: AssetId::new(attacker)?,
        })
    }

    pub fn choice_of(&self, role: Role) -> AssetId {
        match role {
            Role::Defender => self.defender,
            Role::Attacker => self.attacker,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payoffs {
    pub defender: f64,
    pub attacker: f64,
}

impl Payoffs {
    pub fn of(&self, role: Role) -> f64 {
        match role {
            Role::Defender => self.defender,
            Role::Attacker => self.attacker,
        }
    }
}

pub fn resolve(values: &AssetValues, action: JointAction) -> Payoffs {
    if action.defender == action.attacker {
        Payoffs {
            defender: 0.0,
            attacker: 0.0,
        }
    } else {
        let gain = values.get(action.attacker);
        Payoffs {
            defender: -gain,
            attacker: gain,
        }
    }
}

/// Samples the asset values for a new episode.
pub fn new_episode(stream: &mut RngStream) -> AssetValues {
    new_episode_with(stream, DEFAULT_ALPHA, DEFAULT_SCALE).expect("default asset distribution is valid")
}

pub fn new_episode_with(stream: &mut RngStream, alpha: [f64; 2], scale: f64) -> Result<AssetValues> {
    let (v0, v1) = sample_asset_values(stream, alpha, scale)?;
    AssetValues::new([v0, v1])
}
