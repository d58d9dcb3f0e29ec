//! Result export: a human-readable summary, a JSON report, and line-delimited
//! dumps of trees, paths, density snapshots, and cost series.
//!
//! File layout under the output directory:
//! - `summary.txt`: per-seed metric table plus aggregates.
//! - `report.json`: the full `RunReport`.
//! - `tree_seed<N>.jsonl`: one node per line: `{id, state, parent, cost}`.
//! - `segments_seed<N>.jsonl`: one edge per line: `{node, states}` where
//!   `states` is the steering trajectory from the parent.
//! - `best_path_seed<N>.txt`: one state per line, components space-separated.
//! - `cost_series_seed<N>.txt`: best solution cost after each iteration
//!   (`inf` before the first solution).
//! - `sdf_seed<N>.jsonl`: one density snapshot per line: a list of
//!   `{mean, weight, bandwidth}` kernels, in fit order.
//!
//! All numerals are written with Rust's shortest round-trip `f64` formatting,
//! so re-exporting the same run yields byte-identical files.

use crate::run::{RunReport, SeedArtifacts};
use lqr_cbf_rrt::planner::PlanResult;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Serialize)]
struct NodeRecord {
    id: usize,
    state: Vec<f64>,
    parent: Option<usize>,
    cost: f64,
}

#[derive(Serialize)]
struct SegmentRecord {
    node: usize,
    states: Vec<Vec<f64>>,
}

fn format_states(states: &[lqr_cbf_rrt::dynamics::State]) -> String {
    let mut out = String::new();
    for s in states {
        let row: Vec<String> = s.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out
}

fn tree_dump(result: &PlanResult) -> String {
    let mut out = String::new();
    for node in &result.tree.nodes {
        let rec = NodeRecord {
            id: node.id,
            state: node.state.iter().copied().collect(),
            parent: node.parent,
            cost: node.cost_to_come,
        };
        writeln!(out, "{}", serde_json::to_string(&rec).unwrap()).unwrap();
    }
    out
}

fn segments_dump(result: &PlanResult) -> String {
    let mut out = String::new();
    for node in &result.tree.nodes {
        if let Some(seg) = &node.segment {
            let rec = SegmentRecord {
                node: node.id,
                states: seg.states.iter().map(|s| s.iter().copied().collect()).collect(),
            };
            writeln!(out, "{}", serde_json::to_string(&rec).unwrap()).unwrap();
        }
    }
    out
}

fn cost_series_dump(result: &PlanResult) -> String {
    let mut out = String::new();
    for c in &result.cost_series {
        if c.is_finite() {
            writeln!(out, "{c}").unwrap();
        } else {
            writeln!(out, "inf").unwrap();
        }
    }
    out
}

pub fn summary_text(report: &RunReport) -> String {
    let mut out = String::new();
    writeln!(out, "baseline: {}", report.baseline.label()).unwrap();
    writeln!(out, "model: {}", report.model).unwrap();
    writeln!(out, "iterations: {}", report.iterations).unwrap();
    writeln!(
        out,
        "seed wall_time_s first_solution best_cost path_length tree_size violations"
    )
    .unwrap();
    for row in &report.rows {
        if let Some(err) = &row.error {
            writeln!(out, "{} error: {err}", row.seed).unwrap();
            continue;
        }
        let first = row
            .first_solution_iteration
            .map_or("-".to_string(), |i| i.to_string());
        let cost = row.best_cost.map_or("-".to_string(), |c| format!("{c}"));
        let len = row.path_length.map_or("-".to_string(), |l| format!("{l}"));
        writeln!(
            out,
            "{} {} {first} {cost} {len} {} {}",
            row.seed, row.wall_time_s, row.tree_size, row.safety_violations
        )
        .unwrap();
    }
    writeln!(out, "successes: {}/{}", report.successes, report.rows.len()).unwrap();
    writeln!(out, "total_violations: {}", report.total_violations).unwrap();
    writeln!(
        out,
        "wall_time mean: {} std: {}",
        report.wall_time.mean,
        report
            .wall_time
            .std
            .map_or("-".to_string(), |s| format!("{s}"))
    )
    .unwrap();
    if let Some(cost) = &report.best_cost {
        writeln!(
            out,
            "best_cost mean: {} std: {}",
            cost.mean,
            cost.std.map_or("-".to_string(), |s| format!("{s}"))
        )
        .unwrap();
    }
    if let Some(len) = &report.path_length {
        writeln!(
            out,
            "path_length mean: {} std: {}",
            len.mean,
            len.std.map_or("-".to_string(), |s| format!("{s}"))
        )
        .unwrap();
    }
    out
}

/// Writes every artifact of a completed run into `out_dir` (created if
/// missing). Wall times vary between runs; everything else is deterministic
/// and re-exports byte-identically.
pub fn export_results(
    report: &RunReport,
    artifacts: &[SeedArtifacts],
    out_dir: &Path,
) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("summary.txt"), summary_text(report))?;
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(report).unwrap(),
    )?;
    for art in artifacts {
        let seed = art.seed;
        std::fs::write(
            out_dir.join(format!("tree_seed{seed}.jsonl")),
            tree_dump(&art.result),
        )?;
        std::fs::write(
            out_dir.join(format!("segments_seed{seed}.jsonl")),
            segments_dump(&art.result),
        )?;
        std::fs::write(
            out_dir.join(format!("cost_series_seed{seed}.txt")),
            cost_series_dump(&art.result),
        )?;
        if let Some(best) = &art.result.best {
            std::fs::write(
                out_dir.join(format!("best_path_seed{seed}.txt")),
                format_states(&best.states),
            )?;
        }
        let mut sdf = String::new();
        for snapshot in &art.sdf_snapshots {
            writeln!(sdf, "{}", serde_json::to_string(&snapshot.kernels).unwrap()).unwrap();
        }
        std::fs::write(out_dir.join(format!("sdf_seed{seed}.jsonl")), sdf)?;
    }
    Ok(())
}
