//! Instance-based learning memory.
//!
//! An [`InstanceStore`] holds consolidated instances: one per distinct
//! `(option, outcome)` pair, each with the list of trials on which it was
//! observed. Valuation of an option follows the usual three steps:
//!
//! ```text
//! activation   A_i = ln( sum_{t' in T_i} (now - t')^(-d) ) + sigma * ln((1 - xi) / xi)
//! retrieval    p_i = exp(A_i / tau) / sum_j exp(A_j / tau)
//! blending     V   = sum_i p_i * x_i
//! ```
//!
//! with `xi ~ U(0, 1)` drawn fresh per instance per evaluation and `tau`
//! defaulting to `sigma * sqrt(2)`. Choices between options use a Boltzmann
//! rule over blended values with inverse temperature `beta`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::env::AssetId;
use crate::error::{Error, Result};
use crate::rng::{sample_activation_noise, RngStream};

/// Trial index. Prepopulated instances live at time 0, the first trial is 1.
pub type Tick = u32;

/// An option: an own action, optionally conditioned on an opponent action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OptionKey {
    pub action: AssetId,
    pub context: Option<AssetId>,
}

impl OptionKey {
    pub fn plain(action: AssetId) -> Self {
        OptionKey { action, context: None }
    }

    pub fn with_context(action: AssetId, context: AssetId) -> Self {
        OptionKey {
            action,
            context: Some(context),
        }
    }
}

impl fmt::Display for OptionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.context {
            None => write!(f, "{}", self.action),
            Some(c) => write!(f, "{}|{}", self.action, c),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub key: OptionKey,
    pub outcome: f64,
    pub occurrences: Vec<Tick>,
    pub prepopulated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IblParams {
    pub decay: f64,
    pub noise: f64,
    /// Retrieval temperature; `None` derives `noise * sqrt(2)`.
    pub tau: Option<f64>,
    /// Inverse temperature of the choice rule.
    pub beta: f64,
    /// Outcome given to the single instance each option is seeded with.
    pub default_outcome: f64,
}

impl Default for IblParams {
    fn default() -> Self {
        IblParams {
            decay: 0.5,
            noise: 0.25,
            tau: None,
            beta: 0.05,
            default_outcome: 0.0,
        }
    }
}

impl IblParams {
    pub fn temperature(&self) -> Result<f64> {
        let tau = match self.tau {
            Some(t) => t,
            None if self.noise > 0.0 => self.noise * std::f64::consts::SQRT_2,
            None => return Err(Error::parameter("tau", "must be given explicitly when noise is 0")),
        };
        if !tau.is_finite() || tau <= 0.0 {
            return Err(Error::parameter("tau", format!("must be positive, got {tau}")));
        }
        Ok(tau)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.decay.is_finite() || self.decay < 0.0 {
            return Err(Error::parameter(
                "decay",
                format!("must be nonnegative, got {}", self.decay),
            ));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::parameter(
                "noise",
                format!("must be nonnegative, got {}", self.noise),
            ));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::parameter("beta", format!("must be positive, got {}", self.beta)));
        }
        if !self.default_outcome.is_finite() {
            return Err(Error::parameter("default_outcome", "must be finite"));
        }
        self.temperature().map(|_| ())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceStore {
    instances: BTreeMap<OptionKey, Vec<Instance>>,
    clock: Tick,
}

impl InstanceStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// A store holding one instance at time 0 with `default_outcome` for
    /// every key.
    pub fn prepopulated(keys: impl IntoIterator<Item = OptionKey>, default_outcome: f64) -> Self {
        let mut store = Self::new();
        for key in keys {
            store.instances.entry(key).or_default().push(Instance {
                key,
                outcome: default_outcome,
                occurrences: vec![0],
                prepopulated: true,
            });
        }
        store
    }

    pub fn clock(&self) -> Tick {
        self.clock
    }

    /// Adds an observation, consolidating with an existing instance that has
    /// the same key and outcome.
    pub fn record(&mut self, key: OptionKey, outcome: f64, time: Tick) -> Result<()> {
        if !outcome.is_finite() {
            return Err(Error::Input(format!("non-finite outcome {outcome}")));
        }
        if time < self.clock {
            return Err(Error::contract(format!(
                "record at time {time} precedes store clock {}",
                self.clock
            )));
        }
        let bucket = self.instances.entry(key).or_default();
        match bucket.iter_mut().find(|i| i.outcome == outcome) {
            Some(inst) => {
                if inst.occurrences.last().is_some_and(|&last| last >= time) {
                    return Err(Error::contract(format!(
                        "instance ({key}, {outcome}) already observed at time {time}"
                    )));
                }
                inst.occurrences.push(time);
            }
            None => bucket.push(Instance {
                key,
                outcome,
                occurrences: vec![time],
                prepopulated: false,
            }),
        }
        self.clock = time;
        Ok(())
    }

    pub fn instances(&self, key: &OptionKey) -> &[Instance] {
        self.instances.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn keys(&self) -> impl Iterator<Item = &OptionKey> {
        self.instances.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Instance> {
        self.instances.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.instances.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Deterministic listing sorted by key then outcome, one instance per
    /// line: `key<TAB>outcome<TAB>t1,t2,...`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (key, bucket) in &self.instances {
            let mut sorted: Vec<&Instance> = bucket.iter().collect();
            sorted.sort_by(|a, b| a.outcome.total_cmp(&b.outcome));
            for inst in sorted {
                let times: Vec<String> = inst.occurrences.iter().map(|t| t.to_string()).collect();
                let _ = writeln!(out, "{key}\t{:.6}\t{}", inst.outcome, times.join(","));
            }
        }
        out
    }
}

/// Activation of one instance at time `now`, including a fresh noise draw.
pub fn activation(instance: &Instance, now: Tick, params: &IblParams, stream: &mut RngStream) -> Result<f64> {
    if instance.occurrences.is_empty() {
        return Err(Error::contract(format!("instance {} has no occurrences", instance.key)));
    }
    let mut total = 0.0;
    for &t in &instance.occurrences {
        if t >= now {
            return Err(Error::contract(format!(
                "occurrence {t} is not before evaluation time {now}"
            )));
        }
        total += f64::from(now - t).powf(-params.decay);
    }
    Ok(total.ln() + sample_activation_noise(stream, params.noise))
}

fn retrieval_weights<'a>(
    instances: impl IntoIterator<Item = &'a Instance>,
    now: Tick,
    params: &IblParams,
    stream: &mut RngStream,
) -> Result<Vec<(&'a Instance, f64)>> {
    let tau = params.temperature()?;
    let mut scored = Vec::new();
    for inst in instances {
        let a = activation(inst, now, params, stream)?;
        scored.push((inst, a / tau));
    }
    let max = scored.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    let mut norm = 0.0;
    for (_, s) in scored.iter_mut() {
        *s = (*s - max).exp();
        norm += *s;
    }
    for (_, s) in scored.iter_mut() {
        *s /= norm;
    }
    Ok(scored)
}

/// Retrieval probability of every instance stored under `key`, in store
/// order.
pub fn retrieval_probs<'a>(
    store: &'a InstanceStore,
    key: &OptionKey,
    now: Tick,
    params: &IblParams,
    stream: &mut RngStream,
) -> Result<Vec<(&'a Instance, f64)>> {
    let bucket = store.instances(key);
    if bucket.is_empty() {
        return Err(Error::MissingOption(*key));
    }
    retrieval_weights(bucket, now, params, stream)
}

pub fn blended_value(
    store: &InstanceStore,
    key: &OptionKey,
    now: Tick,
    params: &IblParams,
    stream: &mut RngStream,
) -> Result<f64> {
    let weights = retrieval_probs(store, key, now, params, stream)?;
    Ok(weighted_outcome(&weights))
}

/// Blends over every instance whose key satisfies `select`, treating them as
/// a single option. Used to value an action marginally over its contexts.
pub fn blended_value_where(
    store: &InstanceStore,
    select: impl Fn(&OptionKey) -> bool,
    now: Tick,
    params: &IblParams,
    stream: &mut RngStream,
) -> Result<Option<f64>> {
    let selected: Vec<&Instance> = store.iter().filter(|i| select(&i.key)).collect();
    if selected.is_empty() {
        return Ok(None);
    }
    let weights = retrieval_weights(selected, now, params, stream)?;
    Ok(Some(weighted_outcome(&weights)))
}

fn weighted_outcome(weights: &[(&Instance, f64)]) -> f64 {
    let v: f64 = weights.iter().map(|(i, p)| p * i.outcome).sum();
    // Clamp rounding drift so the blend never leaves the outcome hull.
    let (lo, hi) = weights
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (i, _)| {
            (lo.min(i.outcome), hi.max(i.outcome))
        });
    v.clamp(lo, hi)
}

/// Boltzmann probabilities `exp(beta * v_k) / sum_j exp(beta * v_j)`.
pub fn softmax_probs(values: &[f64], beta: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Input("softmax over an empty option list".into()));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::parameter("beta", format!("must be positive, got {beta}")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite option value {v}")));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (beta * (v - max)).exp()).collect();
    let norm: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / norm).collect())
}

/// Samples one option from the Boltzmann distribution over `values`.
pub fn softmax_choose<K: Copy>(values: &[(K, f64)], beta: f64, stream: &mut RngStream) -> Result<K> {
    let raw: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
    let probs = softmax_probs(&raw, beta)?;
    let u = stream.uniform01();
    let mut acc = 0.0;
    for ((key, _), p) in values.iter().zip(&probs) {
        acc += p;
        if u < acc {
            return Ok(*key);
        }
    }
    Ok(values[values.len() - 1].0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::split_stream;
    use proptest::prelude::*;

    fn a(i: usize) -> AssetId {
        AssetId::new(i).unwrap()
    }

    fn quiet(tau: f64) -> IblParams {
        IblParams {
            noise: 0.0,
            tau: Some(tau),
            ..IblParams::default()
        }
    }

    fn inst(outcome: f64, occurrences: Vec<Tick>) -> Instance {
        Instance {
            key: OptionKey::plain(a(0)),
            outcome,
            occurrences,
            prepopulated: false,
        }
    }

    #[test]
    fn record_consolidates_by_outcome() {
        let k = OptionKey::plain(a(0));
        let mut store = InstanceStore::new();
        store.record(k, 75.0, 1).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.instances(&k)[0].occurrences, vec![1]);
        store.record(k, 75.0, 3).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.instances(&k)[0].occurrences, vec![1, 3]);
        store.record(k, 0.0, 4).unwrap();
        assert_eq!(store.instances(&k).len(), 2);
    }

    #[test]
    fn record_rejects_time_regression() {
        let k = OptionKey::plain(a(0));
        let mut store = InstanceStore::new();
        store.record(k, 1.0, 5).unwrap();
        assert!(matches!(store.record(k, 2.0, 4), Err(Error::Contract(_))));
        assert!(matches!(store.record(k, 1.0, 5), Err(Error::Contract(_))));
    }

    #[test]
    fn prepopulated_entries_at_time_zero() {
        let keys = AssetId::all().map(OptionKey::plain);
        let store = InstanceStore::prepopulated(keys, 0.0);
        assert_eq!(store.len(), 2);
        assert!(store.iter().all(|i| i.prepopulated && i.occurrences == vec![0]));
    }

    #[test]
    fn activation_examples() {
        let p = quiet(1.0);
        let mut s = split_stream(0, 0);
        assert_eq!(activation(&inst(0.0, vec![4]), 5, &p, &mut s).unwrap(), 0.0);
        let single = activation(&inst(0.0, vec![1]), 5, &p, &mut s).unwrap();
        assert!((single - (-std::f64::consts::LN_2)).abs() < 1e-12);
        let both = activation(&inst(0.0, vec![1, 4]), 5, &p, &mut s).unwrap();
        assert!((both - 1.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn activation_contract_violations() {
        let p = quiet(1.0);
        let mut s = split_stream(0, 0);
        assert!(activation(&inst(0.0, vec![]), 5, &p, &mut s).is_err());
        assert!(activation(&inst(0.0, vec![5]), 5, &p, &mut s).is_err());
    }

    #[test]
    fn retrieval_examples() {
        let k = OptionKey::plain(a(0));
        let mut s = split_stream(0, 0);
        let p = quiet(0.25 * std::f64::consts::SQRT_2);

        let mut one = InstanceStore::new();
        one.record(k, 3.0, 1).unwrap();
        let probs = retrieval_probs(&one, &k, 2, &p, &mut s).unwrap();
        assert_eq!(probs[0].1, 1.0);

        let mut eq = InstanceStore::new();
        eq.record(k, 75.0, 1).unwrap();
        let mut eq2 = InstanceStore::new();
        eq2.record(k, 0.0, 1).unwrap();
        eq.instances.get_mut(&k).unwrap().push(eq2.instances(&k)[0].clone());
        let probs = retrieval_probs(&eq, &k, 3, &p, &mut s).unwrap();
        assert_eq!((probs[0].1, probs[1].1), (0.5, 0.5));
    }

    #[test]
    fn retrieval_and_blend_two_instance_example() {
        // Activations (0, -ln 2) at now = 5: occurrences [4] and [1].
        let k = OptionKey::plain(a(0));
        let mut store = InstanceStore::new();
        store.record(k, 0.0, 1).unwrap();
        store.record(k, 75.0, 4).unwrap();
        let p = quiet(0.3536);
        let mut s = split_stream(0, 0);
        let probs = retrieval_probs(&store, &k, 5, &p, &mut s).unwrap();
        let p_recent = probs.iter().find(|(i, _)| i.outcome == 75.0).unwrap().1;
        let expected = 1.0 / (1.0 + (-std::f64::consts::LN_2 / 0.3536).exp());
        assert!((p_recent - expected).abs() < 1e-12);
        assert!((p_recent - 0.876).abs() < 1e-3);
        let v = blended_value(&store, &k, 5, &p, &mut s).unwrap();
        assert!((v - 75.0 * expected).abs() < 1e-9);
        assert!((v - 65.7).abs() < 0.05);
    }

    #[test]
    fn blend_singleton_and_missing() {
        let k = OptionKey::plain(a(1));
        let mut store = InstanceStore::new();
        store.record(k, 75.0, 1).unwrap();
        let mut s = split_stream(0, 0);
        let p = IblParams::default();
        assert_eq!(blended_value(&store, &k, 9, &p, &mut s).unwrap(), 75.0);
        let missing = OptionKey::plain(a(0));
        assert_eq!(
            blended_value(&store, &missing, 9, &p, &mut s),
            Err(Error::MissingOption(missing))
        );
    }

    #[test]
    fn weighted_mean_example() {
        let i10 = inst(10.0, vec![1]);
        let i0 = inst(0.0, vec![1]);
        assert!((weighted_outcome(&[(&i10, 0.7), (&i0, 0.3)]) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn temperature_derivation() {
        let p = IblParams::default();
        assert!((p.temperature().unwrap() - 0.25 * 2f64.sqrt()).abs() < 1e-15);
        let zero = IblParams {
            noise: 0.0,
            ..IblParams::default()
        };
        assert!(zero.temperature().is_err());
        let bad = IblParams {
            decay: -1.0,
            ..IblParams::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Parameter { name: "decay", .. })));
    }

    #[test]
    fn softmax_errors() {
        let mut s = split_stream(0, 0);
        let empty: [(u8, f64); 0] = [];
        assert!(softmax_choose(&empty, 0.05, &mut s).is_err());
        assert!(softmax_choose(&[(0u8, f64::NAN), (1, 0.0)], 0.05, &mut s).is_err());
    }

    fn frequency_first(values: [f64; 2], beta: f64, seed: u64, n: usize) -> f64 {
        let mut s = split_stream(seed, 0);
        let opts = [(0u8, values[0]), (1u8, values[1])];
        let hits = (0..n)
            .filter(|_| softmax_choose(&opts, beta, &mut s).unwrap() == 0)
            .count();
        hits as f64 / n as f64
    }

    #[test]
    fn softmax_examples() {
        assert!((frequency_first([10.0, 10.0], 0.05, 1, 100_000) - 0.5).abs() < 0.01);
        let expected = 1.0 / (1.0 + (-0.05f64 * 50.0).exp());
        assert!((expected - 0.924).abs() < 1e-3);
        assert!((frequency_first([75.0, 25.0], 0.05, 2, 100_000) - expected).abs() < 0.01);
        assert!(frequency_first([0.0, -1000.0], 0.05, 3, 100_000) > 0.9999);
    }

    #[test]
    fn softmax_shift_invariance() {
        let base = frequency_first([30.0, 10.0], 0.05, 4, 100_000);
        let shifted = frequency_first([530.0, 510.0], 0.05, 5, 100_000);
        assert!((base - shifted).abs() < 0.01);
        let p1 = softmax_probs(&[30.0, 10.0], 0.05).unwrap();
        let p2 = softmax_probs(&[-970.0, -990.0], 0.05).unwrap();
        assert!((p1[0] - p2[0]).abs() < 1e-12);
    }

    #[test]
    fn dump_is_sorted() {
        let mut store = InstanceStore::prepopulated(AssetId::all().map(OptionKey::plain), 0.0);
        store.record(OptionKey::plain(a(1)), -40.0, 1).unwrap();
        store.record(OptionKey::plain(a(0)), 0.0, 2).unwrap();
        assert_eq!(store.dump(), "0\t0.000000\t0,2\n1\t-40.000000\t1\n1\t0.000000\t0\n");
    }

    fn arb_store() -> impl Strategy<Value = (InstanceStore, Tick)> {
        proptest::collection::vec((0usize..2, -100i32..100, 1u32..30), 1..12).prop_map(|obs| {
            let mut obs = obs;
            obs.sort_by_key(|o| o.2);
            let mut store = InstanceStore::prepopulated(AssetId::all().map(OptionKey::plain), 0.0);
            let mut t = 0;
            for (action, outcome, dt) in obs {
                t += dt;
                store
                    .record(OptionKey::plain(AssetId::new(action).unwrap()), outcome as f64, t)
                    .unwrap();
            }
            (store, t + 1)
        })
    }

    proptest! {
        #[test]
        fn retrieval_normalizes_and_blend_is_bounded(
            (store, now) in arb_store(),
            noise in 0.0f64..2.0,
            seed in any::<u64>(),
        ) {
            let params = IblParams { noise, tau: Some(0.1 + noise * std::f64::consts::SQRT_2), ..IblParams::default() };
            let mut s = split_stream(seed, 0);
            for key in store.keys().copied().collect::<Vec<_>>() {
                let probs = retrieval_probs(&store, &key, now, &params, &mut s).unwrap();
                let total: f64 = probs.iter().map(|p| p.1).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
                let v = blended_value(&store, &key, now, &params, &mut s).unwrap();
                let outcomes = store.instances(&key).iter().map(|i| i.outcome);
                let lo = outcomes.clone().fold(f64::INFINITY, f64::min);
                let hi = outcomes.fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v >= lo && v <= hi);
            }
        }

        #[test]
        fn recency_raises_activation(decay in 0.01f64..3.0, older in 1u32..50, gap in 1u32..50, lag in 1u32..50) {
            let newer = older + gap;
            let now = newer + lag;
            let p = IblParams { decay, ..quiet(1.0) };
            let mut s = split_stream(0, 0);
            let a_old = activation(&inst(1.0, vec![older]), now, &p, &mut s).unwrap();
            let a_new = activation(&inst(1.0, vec![newer]), now, &p, &mut s).unwrap();
            prop_assert!(a_new > a_old);
        }
    }
}
