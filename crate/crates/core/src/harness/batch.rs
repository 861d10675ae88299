//! Seeded batches over scenarios and variants, pooled metrics and the
//! comparison table.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{summarize, ErrorStats, SummaryMetrics};
use super::trial::{arm_setup, run_trial_with, TrialMeta, TrialRecord};
use crate::control::ControllerVariant;
use crate::error::{Error, Result};

/// Scenarios of the comparison table, in display order.
pub const TABLE_SCENARIOS: [&str; 3] = ["setpoint", "circle", "figure-eight"];

/// Table rows, baseline first.
pub const TABLE_ROWS: [ControllerVariant; 4] = [
    ControllerVariant::BaselinePid,
    ControllerVariant::NoEso,
    ControllerVariant::NoPresetTrajectory,
    ControllerVariant::Proposed,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub scenarios: Vec<String>,
    pub variants: Vec<ControllerVariant>,
    pub seeds: Vec<u64>,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
    /// Directory for per-trial traces, if wanted.
    pub traces: Option<(PathBuf, TraceFormat)>,
}

impl BatchPlan {
    /// Seeds `first, first + 1, …` for `trials` trials.
    pub fn new(scenarios: Vec<String>, variants: Vec<ControllerVariant>, trials: usize, first_seed: u64) -> Self {
        BatchPlan { scenarios, variants, seeds: (0..trials as u64).map(|i| first_seed + i).collect(), workers: 1, traces: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub meta: TrialMeta,
    pub metrics: SummaryMetrics,
    pub trace_sha256: String,
}

/// Statistics pooled over every sample of every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub variant: ControllerVariant,
    pub trials: usize,
    pub steady: ErrorStats,
    pub full: ErrorStats,
    pub trials_never_settled: usize,
    pub position_violations: usize,
    pub attitude_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub trials: Vec<TrialSummary>,
    pub aggregates: Vec<Aggregate>,
}

impl BatchReport {
    pub fn aggregate(&self, scenario: &str, variant: ControllerVariant) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.scenario == scenario && a.variant == variant)
    }
}

pub fn trace_file_name(scenario: &str, variant: ControllerVariant, seed: u64, format: TraceFormat) -> String {
    let ext = match format {
        TraceFormat::Csv => "csv",
        TraceFormat::Json => "json",
    };
    format!("{scenario}-{}-seed{seed}.{ext}", variant.name())
}

pub fn write_trace(record: &TrialRecord, path: &Path, format: TraceFormat) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    match format {
        TraceFormat::Csv => record.write_csv(out)?,
        TraceFormat::Json => record.write_json(out)?,
    }
    Ok(())
}

fn run_one(
    config: &ExperimentConfig,
    scenario: &str,
    variant: ControllerVariant,
    seed: u64,
    traces: &Option<(PathBuf, TraceFormat)>,
) -> Result<TrialSummary> {
    let sc = config.scenario(scenario)?;
    let arm = arm_setup(config, sc, seed)?;
    let record = run_trial_with(config, scenario, sc, &arm, variant, seed)?;
    if let Some((dir, fmt)) = traces {
        write_trace(&record, &dir.join(trace_file_name(scenario, variant, seed, *fmt)), *fmt)?;
    }
    Ok(TrialSummary { metrics: summarize(&record), trace_sha256: record.trace_sha256(), meta: record.meta })
}

/// Runs every (scenario, variant, seed) combination.
///
/// Trials run in parallel; results are ordered by scenario, variant and
/// seed as listed in the plan, and pooled serially in that order.
pub fn run_batch(config: &ExperimentConfig, plan: &BatchPlan) -> Result<BatchReport> {
    config.validate()?;
    if plan.seeds.is_empty() {
        return Err(Error::ConfigInvalid("a batch needs at least one trial".into()));
    }
    for s in &plan.scenarios {
        config.scenario(s)?;
    }
    if let Some((dir, _)) = &plan.traces {
        fs::create_dir_all(dir)?;
    }
    let tasks: Vec<(&str, ControllerVariant, u64)> = plan
        .scenarios
        .iter()
        .flat_map(|s| plan.variants.iter().flat_map(move |v| plan.seeds.iter().map(move |seed| (s.as_str(), *v, *seed))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .map_err(|e| Error::ConfigInvalid(format!("worker pool: {e}")))?;
    let trials: Vec<TrialSummary> = pool.install(|| {
        tasks.par_iter().map(|(s, v, seed)| run_one(config, s, *v, *seed, &plan.traces)).collect::<Result<Vec<_>>>()
    })?;

    let mut aggregates = Vec::new();
    for s in &plan.scenarios {
        for v in &plan.variants {
            let group: Vec<&TrialSummary> =
                trials.iter().filter(|t| &t.meta.scenario == s && t.meta.variant == *v).collect();
            let mut agg = Aggregate {
                scenario: s.clone(),
                variant: *v,
                trials: group.len(),
                steady: ErrorStats::default(),
                full: ErrorStats::default(),
                trials_never_settled: 0,
                position_violations: 0,
                attitude_violations: 0,
            };
            for t in group {
                agg.steady = agg.steady.merge(&t.metrics.steady);
                agg.full = agg.full.merge(&t.metrics.full);
                agg.trials_never_settled += t.metrics.steady_fallback_to_full as usize;
                agg.position_violations += t.metrics.position_violations;
                agg.attitude_violations += t.metrics.attitude_violations;
            }
            aggregates.push(agg);
        }
    }
    Ok(BatchReport { config_hash: config.hash(), seeds: plan.seeds.clone(), trials, aggregates })
}

/// Plain-text comparison table: one block per scenario, one row per variant.
///
/// Mean ± SD and maximum of the position error norm in cm, pooled over all
/// seeds from the first entry into the final band; `*` marks rows where at
/// least one trial never entered it.
pub fn render_table(report: &BatchReport) -> String {
    let mut scenarios: Vec<&str> = Vec::new();
    for a in &report.aggregates {
        if !scenarios.contains(&a.scenario.as_str()) {
            scenarios.push(&a.scenario);
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "Position tracking error (cm), {} trials per row", report.seeds.len());
    for s in scenarios {
        let _ = writeln!(out);
        let _ = writeln!(out, "{s}");
        let _ = writeln!(out, "  {:<28} {:>16} {:>10} {:>12}", "Method", "Mean ± SD", "Maximum", "Violations");
        for v in TABLE_ROWS {
            if let Some(a) = report.aggregate(s, v) {
                let flag = if a.trials_never_settled > 0 { "*" } else { "" };
                let ms = format!("{:.2} ± {:.2}{flag}", a.steady.norm.mean, a.steady.norm.sd());
                let _ = writeln!(
                    out,
                    "  {:<28} {:>16} {:>10.2} {:>12}",
                    v.label(),
                    ms,
                    a.steady.norm.max,
                    a.position_violations + a.attitude_violations
                );
            }
        }
    }
    out
}

pub fn render_table_csv(report: &BatchReport) -> String {
    let mut out = String::from("scenario,variant,trials,mean_cm,sd_cm,max_cm,full_mean_cm,never_settled,position_violations,attitude_violations\n");
    for a in &report.aggregates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            a.scenario,
            a.variant.name(),
            a.trials,
            a.steady.norm.mean,
            a.steady.norm.sd(),
            a.steady.norm.max,
            a.full.norm.mean,
            a.trials_never_settled,
            a.position_violations,
            a.attitude_violations
        );
    }
    out
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const TABLE_FILE: &str = "table.txt";

pub fn write_batch_outputs(report: &BatchReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join(SUMMARY_FILE), json + "\n")?;
    fs::write(dir.join(TABLE_FILE), render_table(report))?;
    Ok(())
}

pub fn read_batch_report(path: &Path) -> Result<BatchReport> {
    let path = if path.is_dir() { path.join(SUMMARY_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))
}
