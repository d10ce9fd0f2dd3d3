use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use ibtom::config::{Cli, ExperimentKind, RunConfig};
use ibtom::report::{emit_results, preflight, run_experiment, Results};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    if let Err(e) = preflight(&cfg.output_dir) {
        eprintln!("error: output directory is not writable: {e}");
        return ExitCode::from(3);
    }
    let started = Instant::now();
    let results = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let files = match emit_results(&results, &cfg) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    print_report(&results, &cfg);
    eprintln!("finished in {:.1}s", started.elapsed().as_secs_f64());
    for f in files {
        println!("wrote {}", f.display());
    }
    ExitCode::SUCCESS
}

fn print_report(results: &Results, cfg: &RunConfig) {
    match results {
        Results::Ood { rows } => {
            println!(
                "{:<8} {:<8} {:>10} {:>9} {:>7}",
                "trained", "opponent", "mean", "ci95", "n"
            );
            for r in rows {
                println!(
                    "{:<8} {:<8} {:>10.3} {:>9.3} {:>7}",
                    r.trained,
                    r.opponent,
                    r.mean,
                    1.96 * r.stderr,
                    r.n
                );
            }
        }
        Results::Pairings { rows, .. } | Results::Demo { rows, .. } => {
            // Mean focal reward per pairing, before and after the role switch.
            let half = cfg.trials_per_role;
            let mut pairings: Vec<&str> = rows.iter().map(|r| r.pairing.as_str()).collect();
            pairings.dedup();
            println!("{:<16} {:>12} {:>12}", "pairing", "first half", "second half");
            for p in pairings {
                let phase = |second: bool| {
                    let v: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.pairing == p && (r.trial > half) == second)
                        .map(|r| r.mean)
                        .collect();
                    v.iter().sum::<f64>() / v.len().max(1) as f64
                };
                println!("{:<16} {:>12.3} {:>12.3}", p, phase(false), phase(true));
            }
            if cfg.experiment == ExperimentKind::Demo {
                println!("first role of the focal agent: {}", cfg.first_role.as_str());
            }
        }
    }
}
