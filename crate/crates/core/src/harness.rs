//! Episodes, paired training runs and out-of-distribution evaluation.
//!
//! Every episode draws from its own stream, `split_stream(seed, episode_id)`,
//! so results do not depend on the order in which episodes are executed or on
//! how many worker threads run them. Episode ids pack a cell index into the
//! high 32 bits and the repetition index into the low 32 bits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentParams, ModelKind};
use crate::env::{self, AssetValues, JointAction, Role, DEFAULT_ALPHA, DEFAULT_SCALE};
use crate::error::{Error, Result};
use crate::ibl::Tick;
use crate::rng::{sample_beta, split_stream, RngStream};
use crate::stats::Stats;

pub const ASSET_STREAM: u64 = 0;
pub const FOCAL_STREAM: u64 = 1;
pub const OPPONENT_STREAM: u64 = 2;
pub const PARAMS_STREAM: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub trials_per_role: u32,
    pub first_role: Role,
    /// Exchange roles after `trials_per_role` trials and play as many again.
    pub switch_roles: bool,
    pub alpha: [f64; 2],
    pub scale: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            trials_per_role: 50,
            first_role: Role::Attacker,
            switch_roles: true,
            alpha: DEFAULT_ALPHA,
            scale: DEFAULT_SCALE,
        }
    }
}

impl EpisodeConfig {
    pub fn total_trials(&self) -> u32 {
        if self.switch_roles {
            2 * self.trials_per_role
        } else {
            self.trials_per_role
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials_per_role == 0 {
            return Err(Error::parameter("trials_per_role", "must be at least 1"));
        }
        if self.alpha.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::parameter("alpha", "components must be positive"));
        }
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(Error::parameter("scale", "must be positive"));
        }
        Ok(())
    }

    /// Role the focal agent plays on `trial` (1-based).
    pub fn focal_role_at(&self, trial: Tick) -> Role {
        if self.switch_roles && trial > self.trials_per_role {
            self.first_role.other()
        } else {
            self.first_role
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub episode: u64,
    pub trial: Tick,
    pub focal_role: Role,
    pub defender_choice: usize,
    pub attacker_choice: usize,
    pub defender_reward: f64,
    pub attacker_reward: f64,
    pub values: [f64; 2],
}

impl TrialRecord {
    pub fn focal_reward(&self) -> f64 {
        match self.focal_role {
            Role::Defender => self.defender_reward,
            Role::Attacker => self.attacker_reward,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub pairing: String,
    pub trial: Tick,
    pub role: Role,
    pub mean: f64,
    pub sd: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Mean per-trial defender reward of one trained model against one opponent
/// kind (or `"all"` for the pooled population).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OodRow {
    pub trained: String,
    pub opponent: String,
    pub mean: f64,
    pub sd: f64,
    pub stderr: f64,
    pub n: usize,
}

/// How an OOD episode is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeScore {
    /// Mean reward per trial.
    #[default]
    Mean,
    /// Total reward over the episode.
    Sum,
}

/// Parameter perturbation for OOD opponents: `theta' = multiplier * theta *
/// B` with `B ~ Beta(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Randomization {
    pub a: f64,
    pub b: f64,
    pub multiplier: f64,
}

impl Default for Randomization {
    fn default() -> Self {
        Randomization {
            a: 10.0,
            b: 10.0,
            multiplier: 2.0,
        }
    }
}

impl Randomization {
    /// Perturbs the parameters the model actually uses: beta, noise and decay
    /// for IBL/IBToM, beta and exploration for UCB. Random agents are
    /// returned unchanged.
    pub fn apply(&self, params: &AgentParams, stream: &mut RngStream) -> Result<AgentParams> {
        let mut out = *params;
        let draw = |theta: f64, stream: &mut RngStream| -> Result<f64> {
            Ok(self.multiplier * theta * sample_beta(stream, self.a, self.b)?)
        };
        match params.kind {
            ModelKind::Ibl | ModelKind::IbToM => {
                out.ibl.beta = draw(params.ibl.beta, stream)?;
                out.ibl.noise = draw(params.ibl.noise, stream)?;
                out.ibl.decay = draw(params.ibl.decay, stream)?;
                if let Some(b) = params.opponent_beta {
                    out.opponent_beta = Some(draw(b, stream)?);
                }
            }
            ModelKind::Ucb => {
                out.ibl.beta = draw(params.ibl.beta, stream)?;
                out.exploration = draw(params.exploration, stream)?;
            }
            ModelKind::Random => {}
        }
        Ok(out)
    }
}

/// How many threads run episodes. Results never depend on this.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Executor {
    /// 1 runs on the calling thread; 0 uses rayon's default pool size.
    pub workers: usize,
}

impl Executor {
    pub fn sequential() -> Self {
        Executor { workers: 1 }
    }

    /// Evaluates `f` on `0..n`, returning results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self.workers {
            1 => (0..n).map(f).collect(),
            0 => (0..n).into_par_iter().map(f).collect(),
            w => rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .expect("thread pool")
                .install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }
}

pub fn episode_id(cell: usize, repetition: usize) -> u64 {
    ((cell as u64) << 32) | repetition as u64
}

fn opposing_roles(focal: &Agent, opponent: &Agent) -> Result<()> {
    if focal.role() == opponent.role() {
        return Err(Error::contract("both agents hold the same role"));
    }
    Ok(())
}

/// Plays one episode between two freshly constructed agents.
///
/// `stream` is the episode stream; asset values and each agent's draws come
/// from forks of it.
pub fn run_episode(
    focal: &mut Agent,
    opponent: &mut Agent,
    cfg: &EpisodeConfig,
    episode: u64,
    stream: &RngStream,
) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    if focal.role() != cfg.first_role {
        return Err(Error::contract("focal agent does not start in the configured role"));
    }
    opposing_roles(focal, opponent)?;
    let values: AssetValues = env::new_episode_with(&mut stream.fork(ASSET_STREAM), cfg.alpha, cfg.scale)?;
    let mut focal_rng = stream.fork(FOCAL_STREAM);
    let mut opp_rng = stream.fork(OPPONENT_STREAM);

    let total = cfg.total_trials();
    let mut records = Vec::with_capacity(total as usize);
    for trial in 1..=total {
        if cfg.switch_roles && trial == cfg.trials_per_role + 1 {
            focal.switch_role(focal.params().transfer)?;
            opponent.switch_role(opponent.params().transfer)?;
            opposing_roles(focal, opponent)?;
        }
        let focal_action = focal.act(&mut focal_rng)?;
        let opp_action = opponent.act(&mut opp_rng)?;
        let focal_role = focal.role();
        let joint = match focal_role {
            Role::Defender => JointAction {
                defender: focal_action,
                attacker: opp_action,
            },
            Role::Attacker => JointAction {
                defender: opp_action,
                attacker: focal_action,
            },
        };
        let pay = env::resolve(&values, joint);
        let focal_pay = pay.of(focal_role);
        let opp_pay = pay.of(focal_role.other());
        focal.observe(focal_action, focal_pay, opp_action, opp_pay, trial)?;
        opponent.observe(opp_action, opp_pay, focal_action, focal_pay, trial)?;
        records.push(TrialRecord {
            episode,
            trial,
            focal_role,
            defender_choice: joint.defender.index(),
            attacker_choice: joint.attacker.index(),
            defender_reward: pay.defender,
            attacker_reward: pay.attacker,
            values: values.as_array(),
        });
    }
    Ok(records)
}

/// Builds both agents and plays episode `episode` of the experiment seeded by
/// `seed`.
pub fn play_pair(
    focal: &AgentParams,
    opponent: &AgentParams,
    cfg: &EpisodeConfig,
    seed: u64,
    episode: u64,
) -> Result<Vec<TrialRecord>> {
    let mut f = Agent::new(*focal, cfg.first_role)?;
    let mut o = Agent::new(*opponent, cfg.first_role.other())?;
    run_episode(&mut f, &mut o, cfg, episode, &split_stream(seed, episode))
}

pub fn pairing_label(focal: &AgentParams, opponent: &AgentParams) -> String {
    format!("{}-vs-{}", focal.label(), opponent.label())
}

/// Summarizes focal rewards by trial index. All records are assumed to come
/// from the same pairing and configuration.
pub fn aggregate(pairing: &str, records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Input("no records to aggregate".into()));
    }
    let mut by_trial: std::collections::BTreeMap<Tick, (Role, Vec<f64>)> = Default::default();
    for r in records {
        let entry = by_trial.entry(r.trial).or_insert((r.focal_role, Vec::new()));
        if entry.0 != r.focal_role {
            return Err(Error::Input(format!("trial {} mixes focal roles", r.trial)));
        }
        entry.1.push(r.focal_reward());
    }
    by_trial
        .into_iter()
        .map(|(trial, (role, rewards))| {
            let s = Stats::of(&rewards)?;
            Ok(SummaryRow {
                pairing: pairing.to_string(),
                trial,
                role,
                mean: s.mean,
                sd: s.sd,
                stderr: s.stderr,
                n: s.n,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct PairingsOutput {
    pub rows: Vec<SummaryRow>,
    /// `(pairing, record)` for every trial, present when requested.
    pub traces: Option<Vec<(String, TrialRecord)>>,
}

/// Runs every ordered (focal, opponent) combination of `models` for
/// `pairs_per_combo` episodes each.
///
/// Rows are sorted by pairing label, then trial.
pub fn run_pairings(
    models: &[AgentParams],
    pairs_per_combo: usize,
    cfg: &EpisodeConfig,
    seed: u64,
    exec: &Executor,
    keep_traces: bool,
) -> Result<PairingsOutput> {
    if pairs_per_combo == 0 {
        return Err(Error::parameter("pairs", "must be at least 1"));
    }
    cfg.validate()?;
    for m in models {
        m.validate()?;
    }
    let mut out = PairingsOutput {
        rows: Vec::new(),
        traces: keep_traces.then(Vec::new),
    };
    for (i, focal) in models.iter().enumerate() {
        for (j, opponent) in models.iter().enumerate() {
            let cell = i * models.len() + j;
            let label = pairing_label(focal, opponent);
            let episodes: Vec<Result<Vec<TrialRecord>>> = exec.map(pairs_per_combo, |k| {
                play_pair(focal, opponent, cfg, seed, episode_id(cell, k))
            });
            let mut records = Vec::with_capacity(pairs_per_combo * cfg.total_trials() as usize);
            for ep in episodes {
                records.extend(ep?);
            }
            out.rows.extend(aggregate(&label, &records)?);
            if let Some(traces) = out.traces.as_mut() {
                traces.extend(records.into_iter().map(|r| (label.clone(), r)));
            }
        }
    }
    out.rows
        .sort_by(|a, b| a.pairing.cmp(&b.pairing).then(a.trial.cmp(&b.trial)));
    Ok(out)
}

/// Score of one OOD episode for the defending trained model.
pub fn score_episode(records: &[TrialRecord], score: EpisodeScore) -> f64 {
    let total: f64 = records.iter().map(|r| r.defender_reward).sum();
    match score {
        EpisodeScore::Sum => total,
        EpisodeScore::Mean => total / records.len() as f64,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OodConfig {
    pub samples: usize,
    pub randomization: Randomization,
    pub score: EpisodeScore,
}

impl Default for OodConfig {
    fn default() -> Self {
        OodConfig {
            samples: 1000,
            randomization: Randomization::default(),
            score: EpisodeScore::Mean,
        }
    }
}

/// Per-episode OOD scores, indexed `[trained][opponent kind][sample]`.
pub type OodScores = Vec<Vec<Vec<f64>>>;

/// Plays each trained model as defender against `samples` randomized
/// opponents of every kind in `population`.
///
/// Episode `k` against kind `j` uses the same stream, and so the same asset
/// values and opponent parameters, for every trained model.
pub fn ood_scores(
    trained: &[AgentParams],
    population: &[AgentParams],
    ood: &OodConfig,
    cfg: &EpisodeConfig,
    seed: u64,
    exec: &Executor,
) -> Result<OodScores> {
    if ood.samples == 0 {
        return Err(Error::parameter("samples", "must be at least 1"));
    }
    let cfg = EpisodeConfig {
        first_role: Role::Defender,
        switch_roles: false,
        ..cfg.clone()
    };
    cfg.validate()?;
    for m in trained.iter().chain(population) {
        m.validate()?;
    }
    trained
        .iter()
        .map(|t| {
            population
                .iter()
                .enumerate()
                .map(|(j, opp)| {
                    exec.map(ood.samples, |k| -> Result<f64> {
                        let id = episode_id(j, k);
                        let stream = split_stream(seed, id);
                        let opp_params = ood.randomization.apply(opp, &mut stream.fork(PARAMS_STREAM))?;
                        let mut defender = Agent::new(*t, Role::Defender)?;
                        let mut attacker = Agent::new(opp_params, Role::Attacker)?;
                        let records = run_episode(&mut defender, &mut attacker, &cfg, id, &stream)?;
                        Ok(score_episode(&records, ood.score))
                    })
                    .into_iter()
                    .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// OOD summary: one row per (trained model, opponent kind) cell followed by
/// one pooled `"all"` row per trained model.
pub fn run_ood(
    trained: &[AgentParams],
    population: &[AgentParams],
    ood: &OodConfig,
    cfg: &EpisodeConfig,
    seed: u64,
    exec: &Executor,
) -> Result<Vec<OodRow>> {
    let scores = ood_scores(trained, population, ood, cfg, seed, exec)?;
    ood_rows(trained, population, &scores)
}

pub fn ood_rows(trained: &[AgentParams], population: &[AgentParams], scores: &OodScores) -> Result<Vec<OodRow>> {
    let row = |t: &AgentParams, opponent: String, s: Stats| OodRow {
        trained: t.label().to_string(),
        opponent,
        mean: s.mean,
        sd: s.sd,
        stderr: s.stderr,
        n: s.n,
    };
    let mut rows = Vec::new();
    for (t, per_kind) in trained.iter().zip(scores) {
        for (opp, samples) in population.iter().zip(per_kind) {
            rows.push(row(t, opp.label().to_string(), Stats::of(samples)?));
        }
    }
    for (t, per_kind) in trained.iter().zip(scores) {
        let pooled: Vec<f64> = per_kind.iter().flatten().copied().collect();
        rows.push(row(t, "all".to_string(), Stats::of(&pooled)?));
    }
    Ok(rows)
}
