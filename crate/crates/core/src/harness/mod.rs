//! Experiment harness: configuration, scenarios, trials, metrics and batches.

pub mod batch;
pub mod config;
pub mod metrics;
pub mod scenario;
pub mod trial;

pub use batch::{
    read_batch_report, render_table, render_table_csv, run_batch, write_batch_outputs, write_trace, Aggregate,
    BatchPlan, BatchReport, TraceFormat, TrialSummary, TABLE_ROWS, TABLE_SCENARIOS,
};
pub use config::{ExperimentConfig, DEFAULT_CONFIG_TOML, SCHEMA_VERSION};
pub use metrics::{check_envelope, sliding_audit, summarize, EnvelopeReport, Loop, RunningStats, SummaryMetrics};
pub use scenario::{initial_state, reference_at};
pub use trial::{arm_setup, column_names, read_csv_trace, run_trial, run_trial_with, ArmSetup, TrialMeta, TrialRecord};
