use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use lqr_cbf_bench::run::RunReport;
use lqr_cbf_bench::{export_results, run_scenario, Baseline, ScenarioConfig};
use lqr_cbf_rrt::cbf::audit_states;
use lqr_cbf_rrt::dynamics::State;
use nalgebra::DVector;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "lqr-cbf-bench", about = "Benchmark harness for the LQR-CBF-RRT* planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario across its seeds under one baseline and export results.
    Run {
        /// Scenario TOML file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "ours")]
        baseline: Baseline,
        /// Comma-separated seed override.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Iteration-count override.
        #[arg(long)]
        iterations: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check an exported tree dump for barrier violations.
    Audit {
        /// Scenario TOML file (supplies obstacles and the model).
        #[arg(long)]
        config: PathBuf,
        /// A `tree_seed<N>.jsonl` or `segments_seed<N>.jsonl` file.
        #[arg(long)]
        dump: PathBuf,
    },
    /// Summarize several exported `report.json` files side by side.
    Compare {
        /// Report files, one per baseline.
        reports: Vec<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            baseline,
            seeds,
            iterations,
            out,
        } => {
            let mut scenario =
                ScenarioConfig::load(&config).context("loading scenario config")?;
            if let Some(seeds) = seeds {
                scenario.seeds = seeds;
            }
            if let Some(n) = iterations {
                scenario.planner.iterations = n;
            }
            scenario.validate().context("validating overrides")?;
            let (report, artifacts) = run_scenario(&scenario, baseline)?;
            export_results(&report, &artifacts, &out)?;
            print!("{}", lqr_cbf_bench::summary_text(&report));
            if report.total_violations > 0 {
                bail!("safety audit found {} violating states", report.total_violations);
            }
            Ok(())
        }
        Command::Audit { config, dump } => {
            let scenario = ScenarioConfig::load(&config).context("loading scenario config")?;
            let model = scenario.build_model()?;
            let text = std::fs::read_to_string(&dump).context("reading dump")?;
            let mut states: Vec<State> = Vec::new();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let record: serde_json::Value =
                    serde_json::from_str(line).context("parsing dump line")?;
                let push = |states: &mut Vec<State>, v: &serde_json::Value| {
                    let row: Vec<f64> = v
                        .as_array()
                        .into_iter()
                        .flatten()
                        .filter_map(|x| x.as_f64())
                        .collect();
                    states.push(DVector::from_vec(row));
                };
                if let Some(list) = record.get("states").and_then(|s| s.as_array()) {
                    for s in list {
                        push(&mut states, s);
                    }
                } else if let Some(s) = record.get("state") {
                    push(&mut states, s);
                } else {
                    bail!("dump line has neither `state` nor `states`");
                }
            }
            let violations = audit_states(states.iter(), &scenario.obstacles, model.as_ref());
            println!("states: {}", states.len());
            println!("violations: {violations}");
            if violations > 0 {
                bail!("audit failed");
            }
            Ok(())
        }
        Command::Compare { reports } => {
            if reports.is_empty() {
                bail!("no report files given");
            }
            println!("baseline model iterations mean_time_s std_time_s successes");
            for path in reports {
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let report: RunReport = serde_json::from_str(&text)?;
                println!(
                    "{} {} {} {} {} {}/{}",
                    report.baseline.label(),
                    report.model,
                    report.iterations,
                    report.wall_time.mean,
                    report
                        .wall_time
                        .std
                        .map_or("-".to_string(), |s| format!("{s}")),
                    report.successes,
                    report.rows.len()
                );
            }
            Ok(())
        }
    }
}
