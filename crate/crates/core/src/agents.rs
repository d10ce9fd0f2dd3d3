//! Decision models: uniform random, UCB, plain IBL and IBL with an opponent
//! model (IBToM).
//!
//! All four share [`Agent`]. An agent acts at `clock + 1` and is told the full
//! joint outcome afterwards through [`Agent::observe`].
//!
//! The IBToM agent keeps two stores with mirrored layouts. The own store maps
//! `(own action | opponent action)` to the agent's outcome. The opponent store
//! maps `(opponent action | own action)` to what the opponent got (or to a
//! 1/0 choice indicator). Because both are joint-conditioned, exchanging them
//! at a role switch hands the agent a ready-made policy memory for the role
//! the opponent used to play.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{AssetId, Role, NUM_ASSETS};
use crate::error::{Error, Result};
use crate::ibl::{self, blended_value, softmax_choose, softmax_probs, IblParams, InstanceStore, OptionKey, Tick};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "IBToM", alias = "ibtom")]
    IbToM,
    #[serde(rename = "IBL", alias = "ibl")]
    Ibl,
    #[serde(rename = "UCB", alias = "ucb")]
    Ucb,
    #[serde(rename = "Random", alias = "random")]
    Random,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::IbToM, ModelKind::Ibl, ModelKind::Ucb, ModelKind::Random];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::IbToM => "IBToM",
            ModelKind::Ibl => "IBL",
            ModelKind::Ucb => "UCB",
            ModelKind::Random => "Random",
        }
    }

    pub fn default_transfer(self) -> TransferMode {
        match self {
            ModelKind::IbToM => TransferMode::Swap,
            _ => TransferMode::Carry,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ibtom" => Ok(ModelKind::IbToM),
            "ibl" => Ok(ModelKind::Ibl),
            "ucb" => Ok(ModelKind::Ucb),
            "random" | "rand" => Ok(ModelKind::Random),
            _ => Err(Error::Config(format!("unknown model `{s}`"))),
        }
    }
}

/// What the opponent store is trained on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpponentUpdate {
    /// The opponent's observed payoff.
    #[default]
    Outcome,
    /// 1 for the action the opponent took, 0 for the others.
    Indicator,
}

impl FromStr for OpponentUpdate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outcome" => Ok(OpponentUpdate::Outcome),
            "indicator" => Ok(OpponentUpdate::Indicator),
            _ => Err(Error::Config(format!("unknown opponent update `{s}`"))),
        }
    }
}

/// How the IBToM agent uses its opponent prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionMode {
    /// Sample one predicted opponent action per trial and value own actions
    /// conditioned on it.
    #[default]
    Sample,
    /// Value own actions by their expectation over the prediction
    /// distribution.
    Expected,
}

impl FromStr for PredictionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(PredictionMode::Sample),
            "expected" => Ok(PredictionMode::Expected),
            _ => Err(Error::Config(format!("unknown prediction mode `{s}`"))),
        }
    }
}

/// How an agent's memory carries over when roles are exchanged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferMode {
    /// Keep all memory and keep using it in the new role.
    Carry,
    /// Forget everything but the prepopulated instances.
    Reset,
    /// Exchange own and opponent memories (IBToM only).
    Swap,
}

impl FromStr for TransferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "carry" => Ok(TransferMode::Carry),
            "reset" => Ok(TransferMode::Reset),
            "swap" => Ok(TransferMode::Swap),
            _ => Err(Error::Config(format!("unknown transfer mode `{s}`"))),
        }
    }
}

impl fmt::Display for TransferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferMode::Carry => "carry",
            TransferMode::Reset => "reset",
            TransferMode::Swap => "swap",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub kind: ModelKind,
    pub ibl: IblParams,
    /// UCB exploration weight `c`.
    pub exploration: f64,
    /// Inverse temperature of the opponent prediction; `None` reuses
    /// `ibl.beta`.
    pub opponent_beta: Option<f64>,
    pub opponent_update: OpponentUpdate,
    pub prediction: PredictionMode,
    /// Sample UCB actions from a Boltzmann rule over the UCB scores instead
    /// of taking the argmax.
    pub ucb_softmax: bool,
    pub transfer: TransferMode,
}

impl AgentParams {
    pub fn new(kind: ModelKind) -> Self {
        AgentParams {
            kind,
            ibl: IblParams::default(),
            exploration: 10.0,
            opponent_beta: None,
            opponent_update: OpponentUpdate::default(),
            prediction: PredictionMode::default(),
            ucb_softmax: false,
            transfer: kind.default_transfer(),
        }
    }

    pub fn label(&self) -> &'static str {
        self.kind.label()
    }

    pub fn opponent_beta(&self) -> f64 {
        self.opponent_beta.unwrap_or(self.ibl.beta)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ModelKind::Ibl | ModelKind::IbToM => self.ibl.validate()?,
            ModelKind::Ucb => {
                if !self.ibl.beta.is_finite() || self.ibl.beta <= 0.0 {
                    return Err(Error::parameter(
                        "beta",
                        format!("must be positive, got {}", self.ibl.beta),
                    ));
                }
            }
            ModelKind::Random => {}
        }
        if !self.exploration.is_finite() || self.exploration < 0.0 {
            return Err(Error::parameter(
                "exploration",
                format!("must be nonnegative, got {}", self.exploration),
            ));
        }
        if let Some(b) = self.opponent_beta {
            if !b.is_finite() || b <= 0.0 {
                return Err(Error::parameter("opponent_beta", format!("must be positive, got {b}")));
            }
        }
        if self.transfer == TransferMode::Swap && matches!(self.kind, ModelKind::Ibl | ModelKind::Ucb) {
            return Err(Error::Config(format!(
                "transfer mode `swap` is only available to IBToM, not {}",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Per-action counts and reward sums for the UCB rule.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UcbStats {
    counts: [u64; NUM_ASSETS],
    sums: [f64; NUM_ASSETS],
}

impl UcbStats {
    pub fn count(&self, a: AssetId) -> u64 {
        self.counts[a.index()]
    }

    pub fn mean(&self, a: AssetId) -> f64 {
        match self.counts[a.index()] {
            0 => 0.0,
            n => self.sums[a.index()] / n as f64,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn update(&mut self, a: AssetId, reward: f64) {
        self.counts[a.index()] += 1;
        self.sums[a.index()] += reward;
    }

    /// `Q(a) + c * sqrt(ln t / N(a))`, or `None` for untried actions.
    pub fn score(&self, a: AssetId, c: f64) -> Option<f64> {
        let n = self.count(a);
        if n == 0 {
            return None;
        }
        let t = self.total() as f64;
        Some(self.mean(a) + c * (t.ln() / n as f64).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    params: AgentParams,
    role: Role,
    self_store: InstanceStore,
    opp_store: InstanceStore,
    ucb: UcbStats,
    clock: Tick,
}

fn joint_keys() -> impl Iterator<Item = OptionKey> {
    AssetId::all().flat_map(|a| AssetId::all().map(move |c| OptionKey::with_context(a, c)))
}

impl Agent {
    pub fn new(params: AgentParams, role: Role) -> Result<Self> {
        params.validate()?;
        let mut agent = Agent {
            params,
            role,
            self_store: InstanceStore::new(),
            opp_store: InstanceStore::new(),
            ucb: UcbStats::default(),
            clock: 0,
        };
        agent.clear_memory();
        Ok(agent)
    }

    fn clear_memory(&mut self) {
        let default = self.params.ibl.default_outcome;
        self.ucb = UcbStats::default();
        (self.self_store, self.opp_store) = match self.params.kind {
            ModelKind::Ibl => (
                InstanceStore::prepopulated(AssetId::all().map(OptionKey::plain), default),
                InstanceStore::new(),
            ),
            ModelKind::IbToM => (
                InstanceStore::prepopulated(joint_keys(), default),
                InstanceStore::prepopulated(joint_keys(), default),
            ),
            ModelKind::Ucb | ModelKind::Random => (InstanceStore::new(), InstanceStore::new()),
        };
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn clock(&self) -> Tick {
        self.clock
    }

    pub fn self_store(&self) -> &InstanceStore {
        &self.self_store
    }

    pub fn opp_store(&self) -> &InstanceStore {
        &self.opp_store
    }

    pub fn ucb(&self) -> &UcbStats {
        &self.ucb
    }

    fn now(&self) -> Tick {
        self.clock + 1
    }

    /// Blended value of each opponent action, marginal over the agent's own
    /// action context.
    pub fn opponent_values(&self, stream: &mut RngStream) -> Result<Vec<(AssetId, f64)>> {
        if self.params.kind != ModelKind::IbToM {
            return Err(Error::contract(format!(
                "opponent prediction requested from a {} agent",
                self.params.kind
            )));
        }
        let now = self.now();
        AssetId::all()
            .map(|o| {
                ibl::blended_value_where(&self.opp_store, |k| k.action == o, now, &self.params.ibl, stream)?
                    .map(|v| (o, v))
                    .ok_or(Error::MissingOption(OptionKey::plain(o)))
            })
            .collect()
    }

    /// Samples the opponent's next action from the Boltzmann distribution
    /// over [`Agent::opponent_values`].
    pub fn predict_opponent(&self, stream: &mut RngStream) -> Result<AssetId> {
        let values = self.opponent_values(stream)?;
        softmax_choose(&values, self.params.opponent_beta(), stream)
    }

    /// Own-action values, conditioned on `predicted` for IBToM.
    pub fn action_values(&self, predicted: Option<AssetId>, stream: &mut RngStream) -> Result<Vec<(AssetId, f64)>> {
        let now = self.now();
        AssetId::all()
            .map(|a| {
                let key = match predicted {
                    Some(o) => OptionKey::with_context(a, o),
                    None => OptionKey::plain(a),
                };
                Ok((a, blended_value(&self.self_store, &key, now, &self.params.ibl, stream)?))
            })
            .collect()
    }

    pub fn act(&mut self, stream: &mut RngStream) -> Result<AssetId> {
        match self.params.kind {
            ModelKind::Random => AssetId::new(stream.below(NUM_ASSETS)),
            ModelKind::Ucb => self.act_ucb(stream),
            ModelKind::Ibl => {
                let values = self.action_values(None, stream)?;
                softmax_choose(&values, self.params.ibl.beta, stream)
            }
            ModelKind::IbToM => {
                let values = match self.params.prediction {
                    PredictionMode::Sample => {
                        let predicted = self.predict_opponent(stream)?;
                        self.action_values(Some(predicted), stream)?
                    }
                    PredictionMode::Expected => self.expected_action_values(stream)?,
                };
                softmax_choose(&values, self.params.ibl.beta, stream)
            }
        }
    }

    fn expected_action_values(&self, stream: &mut RngStream) -> Result<Vec<(AssetId, f64)>> {
        let opp = self.opponent_values(stream)?;
        let raw: Vec<f64> = opp.iter().map(|o| o.1).collect();
        let probs = softmax_probs(&raw, self.params.opponent_beta())?;
        let mut expected: Vec<(AssetId, f64)> = AssetId::all().map(|a| (a, 0.0)).collect();
        for ((o, _), p) in opp.iter().zip(probs) {
            for (slot, (_, v)) in expected.iter_mut().zip(self.action_values(Some(*o), stream)?) {
                slot.1 += p * v;
            }
        }
        Ok(expected)
    }

    fn act_ucb(&self, stream: &mut RngStream) -> Result<AssetId> {
        let untried: Vec<AssetId> = AssetId::all().filter(|&a| self.ucb.count(a) == 0).collect();
        if !untried.is_empty() {
            return Ok(untried[stream.below(untried.len())]);
        }
        let c = self.params.exploration;
        let scored: Vec<(AssetId, f64)> = AssetId::all()
            .map(|a| (a, self.ucb.score(a, c).expect("all actions tried")))
            .collect();
        if self.params.ucb_softmax {
            return softmax_choose(&scored, self.params.ibl.beta, stream);
        }
        let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<AssetId> = scored.iter().filter(|s| s.1 == best).map(|s| s.0).collect();
        Ok(ties[stream.below(ties.len())])
    }

    /// Records the joint outcome of trial `time`.
    pub fn observe(
        &mut self,
        own_action: AssetId,
        own_outcome: f64,
        opp_action: AssetId,
        opp_outcome: f64,
        time: Tick,
    ) -> Result<()> {
        if time <= self.clock {
            return Err(Error::contract(format!(
                "observation at time {time} does not follow agent clock {}",
                self.clock
            )));
        }
        match self.params.kind {
            ModelKind::Random => {}
            ModelKind::Ucb => self.ucb.update(own_action, own_outcome),
            ModelKind::Ibl => self
                .self_store
                .record(OptionKey::plain(own_action), own_outcome, time)?,
            ModelKind::IbToM => {
                self.self_store
                    .record(OptionKey::with_context(own_action, opp_action), own_outcome, time)?;
                match self.params.opponent_update {
                    OpponentUpdate::Outcome => {
                        self.opp_store
                            .record(OptionKey::with_context(opp_action, own_action), opp_outcome, time)?;
                    }
                    OpponentUpdate::Indicator => {
                        for o in AssetId::all() {
                            let hit = if o == opp_action { 1.0 } else { 0.0 };
                            self.opp_store
                                .record(OptionKey::with_context(o, own_action), hit, time)?;
                        }
                    }
                }
            }
        }
        self.clock = time;
        Ok(())
    }

    /// Moves the agent into the other role.
    pub fn switch_role(&mut self, mode: TransferMode) -> Result<()> {
        match (self.params.kind, mode) {
            (ModelKind::Random, _) => {}
            (ModelKind::Ibl | ModelKind::Ucb, TransferMode::Swap) => {
                return Err(Error::Config(format!(
                    "transfer mode `swap` is only available to IBToM, not {}",
                    self.params.kind
                )))
            }
            (_, TransferMode::Carry) => {}
            (_, TransferMode::Reset) => self.clear_memory(),
            (ModelKind::IbToM, TransferMode::Swap) => {
                std::mem::swap(&mut self.self_store, &mut self.opp_store);
            }
        }
        self.role = self.role.other();
        Ok(())
    }
}
