//! Command-line front end.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::control::{ControllerVariant, FlightController};
use crate::envelope::{containment_check, validate_c, TimeGrid};
use crate::error::{Error, Result};
use crate::harness::batch::{trace_file_name, TraceFormat};
use crate::harness::metrics::check_envelope_from;
use crate::harness::{
    initial_state, read_batch_report, read_csv_trace, reference_at, render_table, render_table_csv, run_batch,
    run_trial, summarize, write_batch_outputs, write_trace, BatchPlan, ExperimentConfig, TABLE_SCENARIOS,
};

#[derive(Debug, Parser)]
#[command(name = "aeroppc", version, about = "Prescribed-performance aerial manipulator control: simulate, benchmark, audit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl From<Format> for TraceFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => TraceFormat::Csv,
            Format::Json => TraceFormat::Json,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Experiment config (TOML); the shipped defaults when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<ExperimentConfig> {
        match &self.config {
            Some(p) => ExperimentConfig::load(p),
            None => Ok(ExperimentConfig::default()),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single trial and write its trace and summary.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = "setpoint")]
        scenario: String,
        #[arg(long, default_value = "proposed")]
        variant: ControllerVariant,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Trace format.
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run seeded trials over scenarios and variants; write summary.json and table.txt.
    Batch {
        #[command(flatten)]
        config: ConfigArg,
        /// Repeatable; defaults to the three tracking scenarios.
        #[arg(long)]
        scenario: Vec<String>,
        /// Repeatable; defaults to all four variants.
        #[arg(long)]
        variant: Vec<ControllerVariant>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// First seed; trial i uses seed + i.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Also write every trial's trace.
        #[arg(long)]
        traces: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Audit a CSV trace for envelope violations; exit 1 if any are found.
    Check {
        trace: PathBuf,
        /// Report format.
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Validate a config and audit the shaping constants for every scenario.
    Validate {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Render the comparison table from a batch directory or summary.json.
    Table {
        #[arg(long, default_value = "out")]
        input: PathBuf,
        /// Plain text when omitted.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

/// Exit code for runs that complete but find envelope violations.
pub const EXIT_VIOLATIONS: i32 = 1;
/// Exit code for errors; a JSON object is printed on stderr.
pub const EXIT_ERROR: i32 = 2;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            report_error("usage", &e.to_string());
            return EXIT_ERROR;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            EXIT_ERROR
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let body = json!({ "error": kind, "message": message.trim_end() });
    eprintln!("{body}");
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn write_json_file(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run { config, scenario, variant, seed, out, format } => {
            let cfg = config.load()?;
            let record = run_trial(&cfg, &scenario, variant, seed)?;
            fs::create_dir_all(&out)?;
            let trace = out.join(trace_file_name(&scenario, variant, seed, format.into()));
            write_trace(&record, &trace, format.into())?;
            let summary = json!({
                "meta": record.meta,
                "metrics": summarize(&record),
                "trace_sha256": record.trace_sha256(),
                "trace": trace.display().to_string(),
            });
            let name = format!("{scenario}-{}-seed{seed}.summary.json", variant.name());
            write_json_file(&out.join(name), &summary)?;
            print_json(&summary)?;
            Ok(0)
        }
        Command::Batch { config, scenario, variant, trials, seed, out, workers, traces, format } => {
            let cfg = config.load()?;
            let scenarios = if scenario.is_empty() { TABLE_SCENARIOS.iter().map(|s| s.to_string()).collect() } else { scenario };
            let variants = if variant.is_empty() { ControllerVariant::ALL.to_vec() } else { variant };
            let mut plan = BatchPlan::new(scenarios, variants, trials, seed);
            plan.workers = workers;
            if traces {
                plan.traces = Some((out.join("traces"), format.into()));
            }
            let report = run_batch(&cfg, &plan)?;
            write_batch_outputs(&report, &out)?;
            print!("{}", render_table(&report));
            Ok(0)
        }
        Command::Check { trace, format } => {
            let file = fs::File::open(&trace).map_err(|e| Error::Io(format!("opening {}: {e}", trace.display())))?;
            let data = read_csv_trace(BufReader::new(file))?;
            let report = check_envelope_from(&data, 0);
            match format {
                Format::Json => print_json(&serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?)?,
                Format::Csv => {
                    println!("row,t,loop,axis,error,bound");
                    for v in &report.violations {
                        let which = match v.which {
                            crate::harness::Loop::Position => "position",
                            crate::harness::Loop::Attitude => "attitude",
                        };
                        println!("{},{},{which},{},{},{}", v.row, v.t, v.axis, v.error, v.bound);
                    }
                }
            }
            Ok(if report.is_clean() { 0 } else { EXIT_VIOLATIONS })
        }
        Command::Validate { config } => {
            let cfg = config.load()?;
            print_json(&validate_report(&cfg)?)?;
            Ok(0)
        }
        Command::Table { input, format } => {
            let report = read_batch_report(&input)?;
            match format {
                None => print!("{}", render_table(&report)),
                Some(Format::Csv) => print!("{}", render_table_csv(&report)),
                Some(Format::Json) => {
                    print_json(&serde_json::to_value(&report.aggregates).map_err(|e| Error::Io(e.to_string()))?)?
                }
            }
            Ok(0)
        }
    }
}

/// Shaping-constant audit of each scenario's initial errors.
///
/// Runs the first control tick to obtain the measured initial errors, then
/// reports the sufficient lower bounds on `c` and a direct grid check of the
/// preset trajectory against the margin-shrunk envelope.
fn validate_report(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let quad = cfg.quad_params();
    let ppc = cfg.ppc_config()?;
    let dt = cfg.simulation.dt_s;
    let (dog_p, dog_q) = cfg.assumed_delta_over_gain();
    let mut scenarios = serde_json::Map::new();
    for (name, sc) in &cfg.scenarios {
        let state = initial_state(sc, &quad)?;
        let mut ctl = FlightController::new(ControllerVariant::Proposed, &ppc, &cfg.pid_config(), &quad, dt)?;
        ctl.step(0.0, &state, &reference_at(&sc.reference, 0.0))?;
        let FlightController::Ppc(inner) = &ctl else { unreachable!("proposed variant is prescribed-performance") };
        let mut loops = serde_json::Map::new();
        for (label, traj, lc, dog) in [
            ("position", inner.preset_position(), &ppc.position.envelope, &dog_p),
            ("attitude", inner.preset_attitude(), &ppc.attitude.envelope, &dog_q),
        ] {
            let traj = traj.expect("preset built on the first tick");
            let margin = if label == "position" { ppc.position.margin } else { ppc.attitude.margin };
            let check = validate_c(traj, lc, &margin, Some(dog))?;
            let grid = TimeGrid { dt, horizon: 5.0 / lc.decay };
            let contained = containment_check(traj, lc, &margin, &grid);
            loops.insert(
                label.into(),
                json!({
                    "initial_error": traj.beta0,
                    "c": traj.c,
                    "check": check,
                    "grid_containment": contained.holds,
                    "first_violation": contained.first_violation.map(|v| json!({"t": v.t, "axis": v.axis, "beta": v.beta, "bound": v.bound})),
                }),
            );
        }
        scenarios.insert(name.clone(), serde_json::Value::Object(loops));
    }
    Ok(json!({ "valid": true, "config_hash": cfg.hash(), "scenarios": scenarios }))
}
