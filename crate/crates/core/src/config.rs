//! Run configuration: defaults, an optional TOML file, and command-line
//! flags, merged in that order of increasing precedence.
//!
//! The file schema mirrors the resolved configuration that every run writes
//! to `config.toml` in its output directory, so an echoed config can be fed
//! back with `--config` to repeat a run exactly. Unknown keys are rejected.
//!
//! ```toml
//! experiment = "pairings"        # pairings | ood | demo
//! seed = 42
//! pairs = 1000                   # episodes per ordered model pairing
//! samples = 1000                 # randomized opponents per kind (ood)
//! trials_per_role = 50
//! first_role = "attacker"        # focal agent's role in the first half
//! models = ["IBToM", "IBL", "UCB", "Random"]
//! opponents = ["IBToM", "IBL", "UCB", "Random"]   # ood population
//! ood_score = "mean"             # mean | sum
//! workers = 0                    # 0 = all cores, 1 = sequential
//! trace = false
//! formats = ["csv"]              # csv | json | plot
//! output_dir = "results"
//!
//! [assets]
//! alpha = [3.0, 4.0]
//! scale = 100.0
//!
//! [randomization]                # theta' = multiplier * theta * Beta(a, b)
//! a = 10.0
//! b = 10.0
//! multiplier = 2.0
//!
//! [defaults]                     # applied to every model
//! beta = 0.05
//! noise = 0.25
//! decay = 0.5
//! exploration = 10.0
//!
//! [model.IBToM]                  # per-model overrides, same keys as [defaults]
//! transfer = "swap"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentParams, ModelKind, OpponentUpdate, PredictionMode, TransferMode};
use crate::env::{Role, DEFAULT_ALPHA, DEFAULT_SCALE};
use crate::harness::{EpisodeConfig, EpisodeScore, Executor, OodConfig, Randomization};
use crate::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
}

impl ConfigError {
    fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Pairings,
    Ood,
    Demo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Plot,
}

/// Optional parameter settings, used both for `[defaults]` and for
/// `[model.<KIND>]` sections.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exploration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opponent_beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub default_outcome: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opponent_update: Option<OpponentUpdate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PredictionMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ucb_softmax: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferMode>,
}

impl ParamOverrides {
    /// Fields set in `other` replace those in `self`.
    pub fn merge(&mut self, other: &ParamOverrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            beta,
            noise,
            decay,
            tau,
            exploration,
            opponent_beta,
            default_outcome,
            opponent_update,
            prediction,
            ucb_softmax,
            transfer
        );
    }

    pub fn apply(&self, p: &mut AgentParams) {
        if let Some(v) = self.beta {
            p.ibl.beta = v;
        }
        if let Some(v) = self.noise {
            p.ibl.noise = v;
        }
        if let Some(v) = self.decay {
            p.ibl.decay = v;
        }
        if self.tau.is_some() {
            p.ibl.tau = self.tau;
        }
        if let Some(v) = self.exploration {
            p.exploration = v;
        }
        if self.opponent_beta.is_some() {
            p.opponent_beta = self.opponent_beta;
        }
        if let Some(v) = self.default_outcome {
            p.ibl.default_outcome = v;
        }
        if let Some(v) = self.opponent_update {
            p.opponent_update = v;
        }
        if let Some(v) = self.prediction {
            p.prediction = v;
        }
        if let Some(v) = self.ucb_softmax {
            p.ucb_softmax = v;
        }
        if let Some(v) = self.transfer {
            p.transfer = v;
        }
    }

    fn validate(&self, section: &str) -> Result<(), ConfigError> {
        let key = |k: &str| {
            if section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            }
        };
        let checks: [(&str, Option<f64>, bool); 6] = [
            ("beta", self.beta, false),
            ("noise", self.noise, true),
            ("decay", self.decay, true),
            ("tau", self.tau, false),
            ("exploration", self.exploration, true),
            ("opponent_beta", self.opponent_beta, false),
        ];
        for (name, value, zero_ok) in checks {
            if let Some(v) = value {
                let ok = v.is_finite() && if zero_ok { v >= 0.0 } else { v > 0.0 };
                if !ok {
                    let need = if zero_ok { "nonnegative" } else { "positive" };
                    return Err(ConfigError::invalid(key(name), format!("must be {need}, got {v}")));
                }
            }
        }
        if let Some(v) = self.default_outcome {
            if !v.is_finite() {
                return Err(ConfigError::invalid(key("default_outcome"), "must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetsSection {
    pub alpha: Option<[f64; 2]>,
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizationSection {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub multiplier: Option<f64>,
}

/// The on-disk schema. Every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub pairs: Option<usize>,
    pub samples: Option<usize>,
    pub trials_per_role: Option<u32>,
    pub first_role: Option<Role>,
    pub models: Option<Vec<ModelKind>>,
    pub opponents: Option<Vec<ModelKind>>,
    pub ood_score: Option<EpisodeScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub trace: Option<bool>,
    pub formats: Option<Vec<OutputFormat>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub assets: Option<AssetsSection>,
    pub randomization: Option<RandomizationSection>,
    pub defaults: Option<ParamOverrides>,
    pub model: Option<BTreeMap<ModelKind, ParamOverrides>>,
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// A fully resolved, validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub pairs: usize,
    pub samples: usize,
    pub trials_per_role: u32,
    pub first_role: Role,
    pub models: Vec<ModelKind>,
    pub opponents: Vec<ModelKind>,
    pub ood_score: EpisodeScore,
    pub workers: usize,
    pub trace: bool,
    pub formats: Vec<OutputFormat>,
    pub output_dir: PathBuf,
    pub alpha: [f64; 2],
    pub scale: f64,
    pub randomization: Randomization,
    pub defaults: ParamOverrides,
    pub model: BTreeMap<ModelKind, ParamOverrides>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: ExperimentKind::Pairings,
            seed: 42,
            pairs: 1000,
            samples: 1000,
            trials_per_role: 50,
            first_role: Role::Attacker,
            models: ModelKind::ALL.to_vec(),
            opponents: ModelKind::ALL.to_vec(),
            ood_score: EpisodeScore::Mean,
            workers: 0,
            trace: false,
            formats: vec![OutputFormat::Csv],
            output_dir: PathBuf::from("results"),
            alpha: DEFAULT_ALPHA,
            scale: DEFAULT_SCALE,
            randomization: Randomization::default(),
            defaults: ParamOverrides::default(),
            model: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn apply_file(&mut self, f: &ConfigFile) {
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = &f.$field { self.$field = v.clone(); } )* };
        }
        set!(
            experiment,
            seed,
            pairs,
            samples,
            trials_per_role,
            first_role,
            models,
            opponents,
            ood_score,
            workers,
            trace,
            formats,
            output_dir
        );
        if let Some(a) = &f.assets {
            if let Some(v) = a.alpha {
                self.alpha = v;
            }
            if let Some(v) = a.scale {
                self.scale = v;
            }
        }
        if let Some(r) = &f.randomization {
            if let Some(v) = r.a {
                self.randomization.a = v;
            }
            if let Some(v) = r.b {
                self.randomization.b = v;
            }
            if let Some(v) = r.multiplier {
                self.randomization.multiplier = v;
            }
        }
        if let Some(d) = &f.defaults {
            self.defaults.merge(d);
        }
        if let Some(models) = &f.model {
            for (kind, o) in models {
                self.model.entry(*kind).or_default().merge(o);
            }
        }
    }

    /// Effective parameters of one model kind.
    pub fn agent_params(&self, kind: ModelKind) -> AgentParams {
        let mut p = AgentParams::new(kind);
        self.defaults.apply(&mut p);
        if let Some(o) = self.model.get(&kind) {
            o.apply(&mut p);
        }
        p
    }

    pub fn model_params(&self) -> Vec<AgentParams> {
        self.models.iter().map(|&k| self.agent_params(k)).collect()
    }

    pub fn opponent_params(&self) -> Vec<AgentParams> {
        self.opponents.iter().map(|&k| self.agent_params(k)).collect()
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            trials_per_role: self.trials_per_role,
            first_role: self.first_role,
            switch_roles: true,
            alpha: self.alpha,
            scale: self.scale,
        }
    }

    pub fn ood(&self) -> OodConfig {
        OodConfig {
            samples: self.samples,
            randomization: self.randomization,
            score: self.ood_score,
        }
    }

    pub fn executor(&self) -> Executor {
        Executor { workers: self.workers }
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pairs == 0 {
            return Err(ConfigError::invalid("pairs", "must be at least 1"));
        }
        if self.samples == 0 {
            return Err(ConfigError::invalid("samples", "must be at least 1"));
        }
        if self.trials_per_role == 0 {
            return Err(ConfigError::invalid("trials_per_role", "must be at least 1"));
        }
        if self.models.is_empty() {
            return Err(ConfigError::invalid("models", "at least one model is required"));
        }
        if self.experiment == ExperimentKind::Ood && self.opponents.is_empty() {
            return Err(ConfigError::invalid(
                "opponents",
                "at least one opponent kind is required",
            ));
        }
        if self.formats.is_empty() {
            return Err(ConfigError::invalid(
                "formats",
                "at least one output format is required",
            ));
        }
        for (i, a) in self.alpha.iter().enumerate() {
            if !a.is_finite() || *a <= 0.0 {
                return Err(ConfigError::invalid(
                    "assets.alpha",
                    format!("component {i} must be positive"),
                ));
            }
        }
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(ConfigError::invalid("assets.scale", "must be positive"));
        }
        let r = &self.randomization;
        for (key, v) in [
            ("randomization.a", r.a),
            ("randomization.b", r.b),
            ("randomization.multiplier", r.multiplier),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(ConfigError::invalid(key, format!("must be positive, got {v}")));
            }
        }
        self.defaults.validate("")?;
        for (kind, o) in &self.model {
            o.validate(&format!("model.{kind}"))?;
        }
        let mut kinds: Vec<ModelKind> = self.models.iter().chain(&self.opponents).copied().collect();
        kinds.sort();
        kinds.dedup();
        for kind in kinds {
            self.agent_params(kind).validate().map_err(|e| match e {
                Error::Parameter { name, reason } => ConfigError::invalid(name, format!("{reason} (model {kind})")),
                Error::Config(msg) => ConfigError::invalid("transfer", msg),
                other => ConfigError::invalid(kind.label(), other.to_string()),
            })?;
        }
        Ok(())
    }

    /// The same configuration in file form, with every field present.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            experiment: Some(self.experiment),
            seed: Some(self.seed),
            pairs: Some(self.pairs),
            samples: Some(self.samples),
            trials_per_role: Some(self.trials_per_role),
            first_role: Some(self.first_role),
            models: Some(self.models.clone()),
            opponents: Some(self.opponents.clone()),
            ood_score: Some(self.ood_score),
            workers: Some(self.workers),
            trace: Some(self.trace),
            formats: Some(self.formats.clone()),
            output_dir: Some(self.output_dir.clone()),
            assets: Some(AssetsSection {
                alpha: Some(self.alpha),
                scale: Some(self.scale),
            }),
            randomization: Some(RandomizationSection {
                a: Some(self.randomization.a),
                b: Some(self.randomization.b),
                multiplier: Some(self.randomization.multiplier),
            }),
            defaults: Some(self.defaults.clone()),
            model: Some(self.model.clone()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }
}

/// Command-line flags. Every flag overrides the corresponding config file
/// value.
#[derive(Debug, Default, Parser)]
#[command(
    name = "ibtom",
    version,
    about = "Simulate IBL, IBToM, UCB and random agents in repeated two-asset security games"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub experiment: Option<ExperimentKind>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Episodes per ordered model pairing.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Randomized opponents per opponent kind (ood).
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub trials_per_role: Option<u32>,
    #[arg(long, value_parser = parse_role)]
    pub first_role: Option<Role>,
    /// Comma-separated model kinds: IBToM, IBL, UCB, Random.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    pub models: Option<Vec<ModelKind>>,
    /// Opponent kinds of the ood population.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    pub opponents: Option<Vec<ModelKind>>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub noise: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub decay: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub exploration: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub opponent_beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub default_outcome: Option<f64>,
    #[arg(long, value_parser = parse_update)]
    pub opponent_update: Option<OpponentUpdate>,
    #[arg(long, value_parser = parse_prediction)]
    pub prediction: Option<PredictionMode>,
    /// Per-model transfer mode, e.g. `--transfer IBL=reset`.
    #[arg(long, value_name = "KIND=MODE")]
    pub transfer: Vec<String>,
    /// Per-model parameter override, e.g. `--set IBToM.opponent_beta=0.2`.
    #[arg(long = "set", value_name = "KIND.KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_parser = parse_score)]
    pub ood_score: Option<EpisodeScore>,
    /// Output directory.
    #[arg(long = "out", value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Comma-separated output formats: csv, json, plot.
    #[arg(long = "format", value_delimiter = ',', value_enum)]
    pub formats: Option<Vec<OutputFormat>>,
    /// Write per-trial traces.
    #[arg(long)]
    pub trace: bool,
    /// Worker threads (0 = all cores, 1 = sequential). Never changes results.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_role(s: &str) -> Result<Role, String> {
    match s {
        "defender" => Ok(Role::Defender),
        "attacker" => Ok(Role::Attacker),
        _ => Err(format!("unknown role `{s}`")),
    }
}

fn parse_update(s: &str) -> Result<OpponentUpdate, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_prediction(s: &str) -> Result<PredictionMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_score(s: &str) -> Result<EpisodeScore, String> {
    match s {
        "mean" => Ok(EpisodeScore::Mean),
        "sum" => Ok(EpisodeScore::Sum),
        _ => Err(format!("unknown episode score `{s}`")),
    }
}

fn parse_set(entry: &str) -> Result<(ModelKind, ParamOverrides), ConfigError> {
    let (lhs, value) = entry
        .split_once('=')
        .ok_or_else(|| ConfigError::invalid("set", format!("expected KIND.KEY=VALUE, got `{entry}`")))?;
    let (kind, key) = lhs
        .split_once('.')
        .ok_or_else(|| ConfigError::invalid("set", format!("expected KIND.KEY=VALUE, got `{entry}`")))?;
    let kind: ModelKind = kind
        .parse()
        .map_err(|e: Error| ConfigError::invalid("set", e.to_string()))?;
    let snippet = if value.parse::<f64>().is_ok() || value == "true" || value == "false" {
        format!("{key} = {value}")
    } else {
        format!("{key} = \"{value}\"")
    };
    let o: ParamOverrides = toml::from_str(&snippet)
        .map_err(|e| ConfigError::invalid(format!("model.{kind}.{key}"), e.message().to_string()))?;
    Ok((kind, o))
}

impl Cli {
    fn overrides(&self) -> ParamOverrides {
        ParamOverrides {
            beta: self.beta,
            noise: self.noise,
            decay: self.decay,
            tau: self.tau,
            exploration: self.exploration,
            opponent_beta: self.opponent_beta,
            default_outcome: self.default_outcome,
            opponent_update: self.opponent_update,
            prediction: self.prediction,
            ucb_softmax: None,
            transfer: None,
        }
    }

    /// Merges defaults, the config file (if any) and these flags, then
    /// validates the result.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(&ConfigFile::load(path)?);
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = &self.$field { cfg.$field = v.clone(); } )* };
        }
        set!(
            experiment,
            seed,
            pairs,
            samples,
            trials_per_role,
            first_role,
            models,
            opponents,
            ood_score,
            workers,
            output_dir,
            formats
        );
        if self.trace {
            cfg.trace = true;
        }
        cfg.defaults.merge(&self.overrides());
        for entry in &self.set {
            let (kind, o) = parse_set(entry)?;
            cfg.model.entry(kind).or_default().merge(&o);
        }
        for entry in &self.transfer {
            let (kind, mode) = entry
                .split_once('=')
                .ok_or_else(|| ConfigError::invalid("transfer", format!("expected KIND=MODE, got `{entry}`")))?;
            let kind: ModelKind = kind
                .parse()
                .map_err(|e: Error| ConfigError::invalid("transfer", e.to_string()))?;
            let mode: TransferMode = mode
                .parse()
                .map_err(|e: Error| ConfigError::invalid("transfer", e.to_string()))?;
            cfg.model.entry(kind).or_default().transfer = Some(mode);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses command-line arguments (including the program name) into a
/// resolved configuration.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cli.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_arguments_gives_reference_defaults() {
        let cfg = parse_config(["ibtom"]).unwrap();
        assert_eq!(cfg.models, ModelKind::ALL.to_vec());
        assert_eq!((cfg.pairs, cfg.trials_per_role), (1000, 50));
        let tom = cfg.agent_params(ModelKind::IbToM);
        assert_eq!((tom.ibl.beta, tom.ibl.noise, tom.ibl.decay), (0.05, 0.25, 0.5));
        assert_eq!(cfg.agent_params(ModelKind::Ucb).exploration, 10.0);
    }

    #[test]
    fn flag_overrides_pairs() {
        let cfg = parse_config(["ibtom", "--pairs", "200"]).unwrap();
        assert_eq!(cfg.pairs, 200);
        assert!(cfg.to_toml().contains("pairs = 200"));
    }

    #[test]
    fn negative_decay_names_the_key() {
        let err = parse_config(["ibtom", "--decay", "-1"]).unwrap_err();
        assert_eq!(err.key(), Some("decay"));
        assert!(err.to_string().contains("decay"));
        let err = parse_config(["ibtom", "--trials-per-role", "0"]).unwrap_err();
        assert_eq!(err.key(), Some("trials_per_role"));
    }

    #[test]
    fn file_then_flags_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "pairs = 300\nseed = 9\n[defaults]\nnoise = 0.3\n[model.IBL]\ndecay = 0.7\n",
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let cfg = parse_config(["ibtom", "--config", p, "--seed", "11"]).unwrap();
        assert_eq!((cfg.pairs, cfg.seed), (300, 11));
        assert_eq!(cfg.agent_params(ModelKind::Ibl).ibl.decay, 0.7);
        assert_eq!(cfg.agent_params(ModelKind::IbToM).ibl.decay, 0.5);
        assert_eq!(cfg.agent_params(ModelKind::IbToM).ibl.noise, 0.3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ConfigFile::from_toml("pears = 3"), Err(ConfigError::Parse(_))));
        assert!(ConfigFile::from_toml("[defaults]\ndecay_rate = 1.0").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse_config([
            "ibtom",
            "--experiment",
            "ood",
            "--samples",
            "7",
            "--set",
            "IBToM.opponent_beta=0.2",
            "--transfer",
            "IBL=reset",
            "--format",
            "csv,json",
        ])
        .unwrap();
        let mut again = RunConfig::default();
        again.apply_file(&ConfigFile::from_toml(&cfg.to_toml()).unwrap());
        assert_eq!(again, cfg);
        assert_eq!(cfg.agent_params(ModelKind::IbToM).opponent_beta, Some(0.2));
        assert_eq!(cfg.agent_params(ModelKind::Ibl).transfer, TransferMode::Reset);
    }

    #[test]
    fn swap_for_ibl_is_a_usage_error() {
        let err = parse_config(["ibtom", "--transfer", "IBL=swap"]).unwrap_err();
        assert_eq!(err.key(), Some("transfer"));
        let err = parse_config(["ibtom", "--set", "UCB.exploration=-2"]).unwrap_err();
        assert_eq!(err.key(), Some("model.UCB.exploration"));
    }
}
