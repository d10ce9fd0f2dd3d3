//! Running a resolved configuration and writing its result files.
//!
//! Every data file is a pure function of the configuration: rows come out in
//! a fixed order, numbers use six fractional digits, and nothing depends on
//! the clock or on the worker count. The files written are
//!
//! | file          | when                     | content                                     |
//! |---------------|--------------------------|---------------------------------------------|
//! | `config.toml` | always                   | the resolved configuration                  |
//! | `summary.csv` | format `csv`             | per-trial (pairings, demo) or per-cell (ood) |
//! | `summary.json`| format `json`            | the same rows plus seed and configuration   |
//! | `plot.csv`    | format `plot`            | long-format series with 95% bounds          |
//! | `trace.csv`   | `trace = true`, or demo  | one line per trial of every episode         |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ConfigFile, ExperimentKind, OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::harness::{
    aggregate, episode_id, pairing_label, play_pair, run_ood, run_pairings, OodRow, SummaryRow, TrialRecord,
};

pub const SUMMARY_HEADER: &str = "pairing,trial,role,mean,sd,stderr,n";
pub const OOD_HEADER: &str = "trained,opponent,mean,sd,stderr,n";
pub const TRACE_HEADER: &str =
    "pairing,episode,trial,focal_role,defender_choice,attacker_choice,defender_reward,attacker_reward,v0,v1";

/// Results of one run, shaped by experiment kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Results {
    Pairings {
        rows: Vec<SummaryRow>,
        traces: Option<Vec<(String, TrialRecord)>>,
    },
    Ood {
        rows: Vec<OodRow>,
    },
    Demo {
        rows: Vec<SummaryRow>,
        traces: Vec<(String, TrialRecord)>,
    },
}

impl Results {
    pub fn summary_rows(&self) -> Option<&[SummaryRow]> {
        match self {
            Results::Pairings { rows, .. } | Results::Demo { rows, .. } => Some(rows),
            Results::Ood { .. } => None,
        }
    }

    pub fn ood_rows(&self) -> Option<&[OodRow]> {
        match self {
            Results::Ood { rows } => Some(rows),
            _ => None,
        }
    }

    pub fn traces(&self) -> Option<&[(String, TrialRecord)]> {
        match self {
            Results::Pairings { traces, .. } => traces.as_deref(),
            Results::Demo { traces, .. } => Some(traces),
            Results::Ood { .. } => None,
        }
    }
}

/// Runs the experiment described by `cfg`.
///
/// The demo plays one episode of the first listed model against the second
/// (or against itself when only one is listed).
pub fn run_experiment(cfg: &RunConfig) -> Result<Results> {
    let models = cfg.model_params();
    let episode = cfg.episode();
    match cfg.experiment {
        ExperimentKind::Pairings => {
            let out = run_pairings(&models, cfg.pairs, &episode, cfg.seed, &cfg.executor(), cfg.trace)?;
            Ok(Results::Pairings {
                rows: out.rows,
                traces: out.traces,
            })
        }
        ExperimentKind::Ood => {
            let rows = run_ood(
                &models,
                &cfg.opponent_params(),
                &cfg.ood(),
                &episode,
                cfg.seed,
                &cfg.executor(),
            )?;
            Ok(Results::Ood { rows })
        }
        ExperimentKind::Demo => {
            let focal = &models[0];
            let opponent = models.get(1).unwrap_or(focal);
            let label = pairing_label(focal, opponent);
            let records = play_pair(focal, opponent, &episode, cfg.seed, episode_id(0, 0))?;
            let rows = aggregate(&label, &records)?;
            let traces = records.into_iter().map(|r| (label.clone(), r)).collect();
            Ok(Results::Demo { rows, traces })
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Creates `dir` if needed and checks that files can be written in it.
pub fn preflight(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let probe = dir.join(".ibtom-write-probe");
    fs::write(&probe, b"").map_err(|e| io_err(dir, e))?;
    fs::remove_file(&probe).map_err(|e| io_err(&probe, e))
}

/// Fixed six-digit formatting with negative zero folded to zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.pairing,
            r.trial,
            r.role.as_str(),
            fmt6(r.mean),
            fmt6(r.sd),
            fmt6(r.stderr),
            r.n
        );
    }
    out
}

pub fn ood_csv(rows: &[OodRow]) -> String {
    let mut out = String::from(OOD_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.trained,
            r.opponent,
            fmt6(r.mean),
            fmt6(r.sd),
            fmt6(r.stderr),
            r.n
        );
    }
    out
}

pub fn trace_csv(traces: &[(String, TrialRecord)]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (pairing, r) in traces {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            pairing,
            r.episode,
            r.trial,
            r.focal_role.as_str(),
            r.defender_choice,
            r.attacker_choice,
            fmt6(r.defender_reward),
            fmt6(r.attacker_reward),
            fmt6(r.values[0]),
            fmt6(r.values[1])
        );
    }
    out
}

/// Long format: one series per pairing (or per trained model against each
/// opponent kind), `x` being the trial index or the opponent kind.
pub fn plot_csv(results: &Results) -> String {
    let mut out = String::from("series,x,mean,lower,upper\n");
    let band = |mean: f64, stderr: f64| (fmt6(mean - 1.96 * stderr), fmt6(mean + 1.96 * stderr));
    if let Some(rows) = results.summary_rows() {
        for r in rows {
            let (lo, hi) = band(r.mean, r.stderr);
            let _ = writeln!(out, "{},{},{},{},{}", r.pairing, r.trial, fmt6(r.mean), lo, hi);
        }
    }
    if let Some(rows) = results.ood_rows() {
        for r in rows {
            let (lo, hi) = band(r.mean, r.stderr);
            let _ = writeln!(out, "{},{},{},{},{}", r.trained, r.opponent, fmt6(r.mean), lo, hi);
        }
    }
    out
}

#[derive(Serialize)]
struct JsonSummary<'a> {
    experiment: ExperimentKind,
    seed: u64,
    config: ConfigFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<&'a [SummaryRow]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ood: Option<&'a [OodRow]>,
}

/// The embedded configuration leaves out `workers` and `output_dir`, which
/// never affect results, so the file is identical across machines.
pub fn summary_json(results: &Results, cfg: &RunConfig) -> String {
    let config = ConfigFile {
        workers: None,
        output_dir: None,
        ..cfg.to_file()
    };
    let doc = JsonSummary {
        experiment: cfg.experiment,
        seed: cfg.seed,
        config,
        rows: results.summary_rows(),
        ood: results.ood_rows(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("summary serializes");
    s.push('\n');
    s
}

/// Writes every requested file into `cfg.output_dir` and returns their
/// paths in writing order.
pub fn emit_results(results: &Results, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files: Vec<(&str, String)> = vec![("config.toml", cfg.to_toml())];
    if cfg.wants(OutputFormat::Csv) {
        let body = match results {
            Results::Ood { rows } => ood_csv(rows),
            _ => summary_csv(results.summary_rows().unwrap_or_default()),
        };
        files.push(("summary.csv", body));
    }
    if cfg.wants(OutputFormat::Json) {
        files.push(("summary.json", summary_json(results, cfg)));
    }
    if cfg.wants(OutputFormat::Plot) {
        files.push(("plot.csv", plot_csv(results)));
    }
    if let Some(traces) = results.traces() {
        files.push(("trace.csv", trace_csv(traces)));
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
