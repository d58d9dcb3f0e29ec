//! Scenario execution: one planner instance per seed, timing around the
//! planning loop only, and post-hoc safety auditing.

use crate::config::ScenarioConfig;
use clap::ValueEnum;
use lqr_cbf_rrt::cbf::audit_states;
use lqr_cbf_rrt::dynamics::{Dynamics, State};
use lqr_cbf_rrt::planner::{PlanResult, Planner};
use lqr_cbf_rrt::sampler::{KdeDensity, SampleStats};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// The ablation baselines of the timing comparison, plus the fourth toggle
/// combination for factorial completeness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Gain cache on, adaptive sampling on.
    Ours,
    /// Gain cache off, adaptive sampling on.
    NoCache,
    /// Gain cache on, adaptive sampling off.
    NoAdaptive,
    /// Gain cache off, adaptive sampling off.
    NoCacheNoAdaptive,
}

impl Baseline {
    pub fn toggles(self) -> (bool, bool) {
        match self {
            Baseline::Ours => (true, true),
            Baseline::NoCache => (false, true),
            Baseline::NoAdaptive => (true, false),
            Baseline::NoCacheNoAdaptive => (false, false),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Baseline::Ours => "ours",
            Baseline::NoCache => "no-cache",
            Baseline::NoAdaptive => "no-adaptive",
            Baseline::NoCacheNoAdaptive => "no-cache-no-adaptive",
        }
    }
}

/// One seed's metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub wall_time_s: f64,
    pub iterations: usize,
    pub first_solution_iteration: Option<usize>,
    pub solutions_found: usize,
    pub best_cost: Option<f64>,
    pub path_length: Option<f64>,
    pub tree_size: usize,
    pub safety_violations: usize,
    /// Seeds whose planning failed carry the error text instead of metrics.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation; absent below two seeds.
    pub std: Option<f64>,
}

fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() >= 2 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Some(var.sqrt())
    } else {
        None
    };
    Aggregate { mean, std }
}

/// Metrics for one baseline across all seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub baseline: Baseline,
    pub model: String,
    pub iterations: usize,
    pub rows: Vec<SeedRow>,
    pub wall_time: Aggregate,
    pub best_cost: Option<Aggregate>,
    pub path_length: Option<Aggregate>,
    pub successes: usize,
    pub total_violations: usize,
}

/// Everything a run produced beyond the metric rows, kept for export.
pub struct SeedArtifacts {
    pub seed: u64,
    pub result: PlanResult,
    pub sdf_snapshots: Vec<KdeDensity>,
    pub sample_stats: SampleStats,
}

/// Workspace Euclidean length of a state sequence.
pub fn euclidean_path_length(states: &[State], model: &dyn Dynamics) -> f64 {
    states
        .windows(2)
        .map(|w| {
            let a = model.workspace_of(&w[0]);
            let b = model.workspace_of(&w[1]);
            (a[0] - b[0]).hypot(a[1] - b[1])
        })
        .sum()
}

/// Counts `h < 0` states over every tree segment and every stored solution.
pub fn audit_result(result: &PlanResult, config: &ScenarioConfig, model: &dyn Dynamics) -> usize {
    let tree_states = result
        .tree
        .nodes
        .iter()
        .flat_map(|n| match &n.segment {
            Some(seg) => seg.states.iter(),
            None => std::slice::from_ref(&n.state).iter(),
        });
    let solution_states = result.solutions.iter().flat_map(|s| s.states.iter());
    audit_states(tree_states.chain(solution_states), &config.obstacles, model)
}

/// Runs every seed of the scenario under one baseline's toggles. Seeds run
/// sequentially so wall-clock comparisons are not distorted by contention; a
/// failing seed is reported in its row without aborting the rest.
pub fn run_scenario(
    config: &ScenarioConfig,
    baseline: Baseline,
) -> Result<(RunReport, Vec<SeedArtifacts>), crate::config::ConfigError> {
    let (gain_cache, adaptive) = baseline.toggles();
    let model = config.build_model()?;
    let weights = config.build_weights(model.as_ref())?;
    let cbf = config.build_cbf();
    let x_init = config.init_state(model.as_ref());

    let mut rows = Vec::with_capacity(config.seeds.len());
    let mut artifacts = Vec::new();

    for &seed in &config.seeds {
        let mut planner = Planner::new(
            model.as_ref(),
            &weights,
            &config.obstacles,
            &cbf,
            &config.steer,
            config.sampler_config(),
            config.planner_config(seed, gain_cache, adaptive),
        );
        let start = Instant::now();
        let outcome = planner.plan(&x_init);
        let wall_time_s = start.elapsed().as_secs_f64();

        match outcome {
            Ok(result) => {
                let violations = audit_result(&result, config, model.as_ref());
                let best = result.best.as_ref();
                rows.push(SeedRow {
                    seed,
                    wall_time_s,
                    iterations: result.iterations_run,
                    first_solution_iteration: result.first_solution_iteration,
                    solutions_found: result.solutions.len(),
                    best_cost: best.map(|s| s.cost),
                    path_length: best
                        .map(|s| euclidean_path_length(&s.states, model.as_ref())),
                    tree_size: result.tree.len(),
                    safety_violations: violations,
                    error: None,
                });
                artifacts.push(SeedArtifacts {
                    seed,
                    result,
                    sdf_snapshots: planner.sampler.snapshots().to_vec(),
                    sample_stats: planner.sampler.stats,
                });
            }
            Err(e) => rows.push(SeedRow {
                seed,
                wall_time_s,
                iterations: 0,
                first_solution_iteration: None,
                solutions_found: 0,
                best_cost: None,
                path_length: None,
                tree_size: 0,
                safety_violations: 0,
                error: Some(e.to_string()),
            }),
        }
    }

    let times: Vec<f64> = rows
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| r.wall_time_s)
        .collect();
    let costs: Vec<f64> = rows.iter().filter_map(|r| r.best_cost).collect();
    let lengths: Vec<f64> = rows.iter().filter_map(|r| r.path_length).collect();

    let report = RunReport {
        baseline,
        model: config.model.clone(),
        iterations: config.planner.iterations,
        successes: rows.iter().filter(|r| r.best_cost.is_some()).count(),
        total_violations: rows.iter().map(|r| r.safety_violations).sum(),
        wall_time: aggregate(&times),
        best_cost: (!costs.is_empty()).then(|| aggregate(&costs)),
        path_length: (!lengths.is_empty()).then(|| aggregate(&lengths)),
        rows,
    };
    Ok((report, artifacts))
}
