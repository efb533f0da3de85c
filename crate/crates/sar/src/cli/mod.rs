//! Command-line front end over the library: `compute`, `replay`,
//! `simulate`, `validate`, and `alerts` subcommands.
//!
//! Exit codes: 0 clean, 1 at least one warning alert, 2 at least one
//! critical alert, 3 unusable input (bad arguments, malformed files,
//! unreadable paths).  Reports go to stdout; diagnostics and alert lines
//! emitted as side effects of `compute` go to stderr so stdout stays
//! machine-readable.

pub mod alerts;
pub mod config;
pub mod history;
pub mod ingest;
pub mod report;

use crate::metrics::{run_pipeline, MetricsError, SaRReport, TokenInput, TokenRiskRecord};
use crate::orderbook::{depth_at_bps, BookError, Side};
use crate::simulator::{
    build_shock_path, build_world, run_stress_scenario, ScenarioOptions, ShockConfig,
    SimulatorError, WorldConfig,
};
use crate::timeseries::{granger_f_test, lead_lag_correlation, MetricSeries, TimeseriesError};
use alerts::{alert_exit_code, evaluate_alerts, AlertContext, AlertThresholds};
use clap::{Args, Parser, Subcommand};
use config::EngineConfig;
use history::{
    append_history, depth_window, read_history, replay_history, trend_persist_hours, HistoryRow,
    ReplayOptions, DEPTH_BAND_BPS,
};
use ingest::{
    detect_format, parse_oi_file, parse_samples_file, parse_series_file, parse_snapshot_file,
    SnapshotFormat,
};
use report::{pipeline_from_doc, read_report, OutputFormat, ReportDoc};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_WARNING: i32 = 1;
pub const EXIT_CRITICAL: i32 = 2;
pub const EXIT_INPUT_ERROR: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("config {origin}: {message}")]
    Config { origin: String, message: String },
    #[error("{path}: expected header {expected:?}, found {found:?}")]
    MalformedHeader { path: String, expected: String, found: String },
    #[error("{path}: no snapshot files with trailing-digit timestamps")]
    EmptyDirectory { path: String },
    #[error("{path}: no usable records ({attempted} data line(s) inspected)")]
    NoValidRecords { path: String, attempted: usize },
    #[error("{0}")]
    BadArgs(String),
    #[error("{0}")]
    BadReport(String),
    #[error(transparent)]
    Book(#[from] BookError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Series(#[from] TimeseriesError),
    #[error(transparent)]
    Simulator(#[from] SimulatorError),
}

#[derive(Debug, Parser)]
#[command(
    name = "sar",
    version,
    about = "Forward-looking liquidity risk analytics for perpetual futures order books"
)]
struct Cli {
    /// Engine parameter file; defaults to $SAR_CONFIG, then built-ins.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Suppress diagnostics and alert echoes on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One-shot risk report from an order-book snapshot file.
    Compute(ComputeArgs),
    /// Replay archived snapshots into an append-only metric history.
    Replay(ReplayArgs),
    /// Seeded synthetic stress scenario; writes metric and outcome series.
    Simulate(SimulateArgs),
    /// Lead-lag and predictive-causality checks between two series.
    Validate(ValidateArgs),
    /// Evaluate alert rules; prints one line per firing rule.
    Alerts(AlertsArgs),
}

#[derive(Debug, Args)]
struct ComputeArgs {
    /// Order-book snapshot file (.csv or .jsonl).
    #[arg(long, value_name = "FILE")]
    snapshot: PathBuf,
    /// Open-interest table (timestamp,token,open_interest).
    #[arg(long, value_name = "FILE")]
    oi: PathBuf,
    /// Position-size samples (token,position_size_usd).
    #[arg(long, value_name = "FILE")]
    samples: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Insurance fund balance; enables the fund-coverage alert rule.
    #[arg(long, value_name = "USD")]
    insurance_fund: Option<f64>,
    /// Metric history supplying trend and depth context for alert rules.
    #[arg(long, value_name = "FILE")]
    history: Option<PathBuf>,
    /// Append this report's row to --history after evaluating alerts.
    #[arg(long, requires = "history")]
    append: bool,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Directory of snapshot files named with trailing unix timestamps.
    #[arg(long, value_name = "DIR")]
    snapshots: PathBuf,
    #[arg(long, value_name = "FILE")]
    oi: PathBuf,
    /// History file to create or extend.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Rewrite the history from scratch instead of appending.
    #[arg(long)]
    rebuild: bool,
    /// Resample onto this uniform step in seconds (requires --rebuild).
    #[arg(long, value_name = "SECS")]
    resample_step: Option<i64>,
    /// Flag resampled rows whose source observation is older than this.
    #[arg(long, value_name = "SECS")]
    max_gap: Option<i64>,
    /// Force one snapshot format instead of per-file detection.
    #[arg(long, value_enum)]
    format: Option<SnapshotFormat>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 48)]
    steps: usize,
    #[arg(long, default_value_t = 8)]
    tokens: usize,
    #[arg(long, default_value_t = 4)]
    positions: usize,
    #[arg(long, default_value_t = 4)]
    providers: usize,
    #[arg(long, default_value_t = 1_000_000.0, value_name = "USD")]
    insurance_fund: f64,
    /// Depth decay rate against the smoothed absolute return.
    #[arg(long, default_value_t = 30.0)]
    eta: f64,
    /// Smoothing weight on past absolute returns, in [0, 1).
    #[arg(long, default_value_t = 0.5)]
    vol_memory: f64,
    #[arg(long, default_value_t = 3600, value_name = "SECS")]
    step_secs: i64,
    #[arg(long, default_value_t = 1_700_000_000, value_name = "UNIX")]
    start: i64,
    /// Output directory for the series files.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Also write per-step snapshot and open-interest files for replay.
    #[arg(long)]
    record_snapshots: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Candidate leading series (timestamp,<columns>).
    #[arg(long, value_name = "FILE")]
    metric: PathBuf,
    /// Column of --metric to use (default: the second column).
    #[arg(long, value_name = "NAME")]
    metric_column: Option<String>,
    /// Realized-outcome series (timestamp,<columns>).
    #[arg(long, value_name = "FILE")]
    outcome: PathBuf,
    #[arg(long, value_name = "NAME")]
    outcome_column: Option<String>,
    /// Resample step in seconds (default: smallest gap in --metric).
    #[arg(long, value_name = "SECS")]
    step: Option<i64>,
    #[arg(long, default_value_t = 5)]
    max_lag: usize,
    #[arg(long, default_value_t = 4)]
    granger_lag: usize,
}

#[derive(Debug, Args)]
struct AlertsArgs {
    /// Saved JSON report from `compute --format json`.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Order-book snapshot file, as an alternative to --report.
    #[arg(long, value_name = "FILE")]
    snapshot: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    oi: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    samples: Option<PathBuf>,
    #[arg(long, value_name = "USD")]
    insurance_fund: Option<f64>,
    #[arg(long, value_name = "FILE")]
    history: Option<PathBuf>,
}

/// Entry point for the binary: parses `std::env` arguments and returns the
/// process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Same as [`run`] with explicit arguments (first one is the program name).
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let clean = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if clean { EXIT_CLEAN } else { EXIT_INPUT_ERROR };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let engine = config::load_config(cli.config.as_deref())?;
    let quiet = cli.quiet;
    match cli.command {
        Command::Compute(args) => cmd_compute(&args, &engine, quiet),
        Command::Replay(args) => cmd_replay(&args, &engine, quiet),
        Command::Simulate(args) => cmd_simulate(&args, &engine, quiet),
        Command::Validate(args) => cmd_validate(&args),
        Command::Alerts(args) => cmd_alerts(&args, &engine, quiet),
    }
}

fn note(quiet: bool, message: &str) {
    if !quiet {
        eprintln!("note: {message}");
    }
}

fn check_fund(fund: Option<f64>) -> Result<Option<f64>, CliError> {
    match fund {
        Some(f) if !(f.is_finite() && f > 0.0) => {
            Err(CliError::BadArgs(format!("--insurance-fund must be positive, got {f}")))
        }
        other => Ok(other),
    }
}

/// Parses snapshot + open interest (+ samples) into pipeline inputs,
/// returning the inputs, the summed bid-side depth, and diagnostics.
fn build_inputs(
    snapshot_path: &Path,
    oi_path: &Path,
    samples_path: Option<&Path>,
) -> Result<(Vec<TokenInput>, f64, Vec<String>), CliError> {
    let format = detect_format(snapshot_path)?;
    let set = parse_snapshot_file(snapshot_path, format)?;
    let oi = parse_oi_file(oi_path)?;
    let mut diagnostics = set.diagnostics;
    diagnostics.extend(oi.diagnostics.iter().cloned());
    let samples = match samples_path {
        Some(p) => {
            let (map, diags) = parse_samples_file(p)?;
            diagnostics.extend(diags);
            Some(map)
        }
        None => None,
    };
    let mut inputs = Vec::new();
    let mut depth = 0.0;
    for snapshot in set.snapshots {
        depth += depth_at_bps(&snapshot, Side::Bid, DEPTH_BAND_BPS);
        match oi.lookup(&snapshot.token, snapshot.timestamp) {
            None => diagnostics.push(format!(
                "no open interest for {} at {}; token skipped",
                snapshot.token, snapshot.timestamp
            )),
            Some(value) => {
                let mut input = TokenInput::new(snapshot, value);
                if let Some(map) = &samples {
                    if let Some(s) = map.get(&input.snapshot.token) {
                        input.position_samples = Some(s.clone());
                    }
                }
                inputs.push(input);
            }
        }
    }
    Ok((inputs, depth, diagnostics))
}

fn alert_context(
    insurance_fund: Option<f64>,
    history_path: Option<&Path>,
) -> Result<AlertContext, CliError> {
    let rows = match history_path {
        Some(p) => read_history(p)?,
        None => Vec::new(),
    };
    let (current_depth, prior_depth_12h) = depth_window(&rows, 12 * 3600);
    Ok(AlertContext {
        insurance_fund,
        trend_persist_hours: trend_persist_hours(&rows),
        current_depth,
        prior_depth_12h,
    })
}

fn emit_alerts(
    report: &SaRReport,
    records: &[TokenRiskRecord],
    context: &AlertContext,
    quiet: bool,
    to_stdout: bool,
) -> i32 {
    let alerts = evaluate_alerts(report, records, &AlertThresholds::default(), context);
    for alert in &alerts {
        if to_stdout {
            println!("{}", alert.render());
        } else if !quiet {
            eprintln!("{}", alert.render());
        }
    }
    alert_exit_code(&alerts)
}

fn cmd_compute(args: &ComputeArgs, engine: &EngineConfig, quiet: bool) -> Result<i32, CliError> {
    let fund = check_fund(args.insurance_fund)?;
    let (inputs, depth, diagnostics) =
        build_inputs(&args.snapshot, &args.oi, args.samples.as_deref())?;
    for d in &diagnostics {
        note(quiet, d);
    }
    let (report, records) = run_pipeline(&inputs, &engine.params)?;
    let doc = ReportDoc::from_pipeline(&report, &records, engine.params.alpha);
    let rendered = doc.render(args.format);
    match &args.out {
        Some(path) => std::fs::write(path, &rendered).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?,
        None => print!("{rendered}"),
    }
    // With --append the history file may not exist yet (first run of a new
    // feed); alert context then starts empty and the append below creates it.
    let history_for_context = match args.history.as_deref() {
        Some(p) if args.append && !p.exists() => None,
        other => other,
    };
    let context = alert_context(fund, history_for_context)?;
    let code = emit_alerts(&report, &records, &context, quiet, false);
    if args.append {
        let history = args.history.as_deref().expect("clap enforces --history with --append");
        let row = HistoryRow {
            timestamp: report.timestamp,
            sar: report.sar,
            esar: report.esar,
            tsar_dollars: report.tsar_dollars,
            depth,
        };
        let (appended, skipped) = append_history(history, &[row])?;
        if appended == 0 {
            note(quiet, &format!("history already covers timestamp {}", report.timestamp));
        }
        let _ = skipped;
    }
    Ok(code)
}

fn cmd_replay(args: &ReplayArgs, engine: &EngineConfig, quiet: bool) -> Result<i32, CliError> {
    let options = ReplayOptions {
        rebuild: args.rebuild,
        resample_step: args.resample_step,
        max_gap_secs: args.max_gap,
        format: args.format,
    };
    let summary = replay_history(&args.snapshots, &args.oi, engine, &args.out, &options)?;
    for d in &summary.diagnostics {
        note(quiet, d);
    }
    println!(
        "history {}: {} row(s) written, {} stale row(s) skipped, {} note(s)",
        args.out.display(),
        summary.appended,
        summary.skipped_stale,
        summary.diagnostics.len()
    );
    Ok(EXIT_CLEAN)
}

fn write_series_csv(path: &Path, header: &str, series: &MetricSeries) -> Result<(), CliError> {
    let mut out = String::with_capacity(32 * (series.len() + 1));
    out.push_str(header);
    out.push('\n');
    for (ts, value) in series.points() {
        let _ = writeln!(out, "{ts},{}", report::fmt_f(*value, 2));
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn cmd_simulate(args: &SimulateArgs, engine: &EngineConfig, quiet: bool) -> Result<i32, CliError> {
    if args.steps == 0 {
        return Err(CliError::BadArgs("--steps must be at least 1".to_string()));
    }
    let world = WorldConfig {
        n_tokens: args.tokens,
        positions_per_token: args.positions,
        providers_per_token: args.providers,
        insurance_fund: args.insurance_fund,
        seed: args.seed,
        ..WorldConfig::default()
    };
    let states = build_world(&world)?;
    let shocks = build_shock_path(&ShockConfig {
        steps: args.steps,
        calm_steps: args.steps / 3,
        calm_vol: 0.004,
        stress_vol: 0.025,
        stress_drift: -0.01,
        seed: args.seed + 1000,
    });
    let options = ScenarioOptions {
        eta_depth_decay: args.eta,
        vol_memory: args.vol_memory,
        step_secs: args.step_secs,
        start_timestamp: args.start,
        record_steps: args.record_snapshots,
        ..ScenarioOptions::default()
    };
    let result = run_stress_scenario(&states, &shocks, &options, &engine.params)?;

    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::Io {
        path: args.out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let tsar_path = args.out_dir.join(format!("tsar_{}.csv", args.seed));
    let deficit_path = args.out_dir.join(format!("deficit_{}.csv", args.seed));
    write_series_csv(&tsar_path, "timestamp,tsar_dollars", &result.tsar_series)?;
    write_series_csv(&deficit_path, "timestamp,deficit_usd", &result.deficit_series)?;
    let mut written = vec![tsar_path.display().to_string(), deficit_path.display().to_string()];

    if args.record_snapshots {
        let snap_dir = args.out_dir.join("snapshots");
        std::fs::create_dir_all(&snap_dir).map_err(|e| CliError::Io {
            path: snap_dir.display().to_string(),
            message: e.to_string(),
        })?;
        let mut oi_rows = String::from("timestamp,token,open_interest\n");
        for record in &result.step_records {
            let path = snap_dir.join(format!("book_{}.csv", record.timestamp));
            let mut text = String::from("timestamp,token,side,price,size,account_id\n");
            for snapshot in &record.snapshots {
                for (side, label) in [(Side::Bid, "bid"), (Side::Ask, "ask")] {
                    for level in snapshot.side(side).levels() {
                        let _ = writeln!(
                            text,
                            "{},{},{label},{},{},{}",
                            snapshot.timestamp,
                            snapshot.token,
                            level.price,
                            level.size,
                            level.account_id.as_deref().unwrap_or("")
                        );
                    }
                }
            }
            std::fs::write(&path, text).map_err(|e| CliError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            for (token, oi) in &record.open_interest {
                let _ = writeln!(oi_rows, "{},{token},{oi}", record.timestamp);
            }
        }
        let oi_path = args.out_dir.join(format!("oi_{}.csv", args.seed));
        std::fs::write(&oi_path, oi_rows).map_err(|e| CliError::Io {
            path: oi_path.display().to_string(),
            message: e.to_string(),
        })?;
        written.push(format!("{} + {} snapshot file(s)", oi_path.display(), result.step_records.len()));
    }

    for flag in &result.flags {
        note(quiet, flag);
    }
    let peak_tsar =
        result.tsar_series.points().iter().map(|(_, v)| *v).fold(0.0_f64, f64::max);
    println!("seed           : {}", args.seed);
    println!("steps          : {}", args.steps);
    println!("tokens         : {}", args.tokens);
    println!("total deficit  : {:.2}", result.total_deficit);
    println!("absorbed       : {:.2}", result.insurance_absorbed);
    println!("adl residual   : {:.2}", result.adl_residual_total);
    println!("final fund     : {:.2}", result.final_insurance_fund);
    println!("liquidations   : {}", result.liquidation_count);
    println!("peak tsar$     : {peak_tsar:.2}");
    println!(
        "flags          : {}",
        if result.flags.is_empty() { "-".to_string() } else { result.flags.join("; ") }
    );
    println!("wrote          : {}", written.join(", "));
    Ok(EXIT_CLEAN)
}

fn cmd_validate(args: &ValidateArgs) -> Result<i32, CliError> {
    let (metric, metric_diags) =
        parse_series_file(&args.metric, args.metric_column.as_deref())?;
    let (outcome, outcome_diags) =
        parse_series_file(&args.outcome, args.outcome_column.as_deref())?;
    for d in metric_diags.iter().chain(&outcome_diags) {
        eprintln!("note: {d}");
    }
    let step = match args.step {
        Some(s) if s > 0 => s,
        Some(s) => return Err(CliError::BadArgs(format!("--step must be positive, got {s}"))),
        None => metric
            .windows(2)
            .map(|w| w[1].0 - w[0].0)
            .filter(|d| *d > 0)
            .min()
            .ok_or_else(|| {
                CliError::BadArgs("metric series too short to infer a step; pass --step".into())
            })?,
    };
    let start = metric[0].0.max(outcome[0].0);
    let end = metric[metric.len() - 1].0.min(outcome[outcome.len() - 1].0);
    if start > end {
        return Err(CliError::BadArgs(
            "the two series do not overlap in time".to_string(),
        ));
    }
    let (metric_grid, _) = history::locf_grid(&metric, start, step, end, None);
    let (outcome_grid, _) = history::locf_grid(&outcome, start, step, end, None);
    let x = MetricSeries::new(metric_grid)?;
    let y = MetricSeries::new(outcome_grid)?;

    let max_lag = args.max_lag as i64;
    let lag_list: Vec<i64> = (-max_lag..=max_lag).collect();
    let lags = lead_lag_correlation(&x, &y, &lag_list)?;
    println!("lag,correlation");
    for (lag, corr) in lags.lags.iter().zip(&lags.correlations) {
        match corr {
            Some(c) => println!("{lag},{c:.6}"),
            None => println!("{lag},"),
        }
    }
    let forward = granger_f_test(&x, &y, args.granger_lag)?;
    let reverse = granger_f_test(&y, &x, args.granger_lag)?;
    println!(
        "granger metric->outcome: F={:.6} p={:.6e} lag={}",
        forward.f_statistic, forward.p_value, forward.lag_order
    );
    println!(
        "granger outcome->metric: F={:.6} p={:.6e} lag={}",
        reverse.f_statistic, reverse.p_value, reverse.lag_order
    );
    Ok(EXIT_CLEAN)
}

fn cmd_alerts(args: &AlertsArgs, engine: &EngineConfig, quiet: bool) -> Result<i32, CliError> {
    let fund = check_fund(args.insurance_fund)?;
    let (report, records) = match (&args.report, &args.snapshot) {
        (Some(_), Some(_)) => {
            return Err(CliError::BadArgs(
                "pass either --report or --snapshot, not both".to_string(),
            ))
        }
        (Some(path), None) => pipeline_from_doc(&read_report(path)?),
        (None, Some(snapshot)) => {
            let oi = args.oi.as_deref().ok_or_else(|| {
                CliError::BadArgs("--snapshot requires --oi".to_string())
            })?;
            let (inputs, _depth, diagnostics) =
                build_inputs(snapshot, oi, args.samples.as_deref())?;
            for d in &diagnostics {
                note(quiet, d);
            }
            run_pipeline(&inputs, &engine.params)?
        }
        (None, None) => {
            return Err(CliError::BadArgs(
                "pass --report FILE or --snapshot FILE with --oi FILE".to_string(),
            ))
        }
    };
    let context = alert_context(fund, args.history.as_deref())?;
    Ok(emit_alerts(&report, &records, &context, quiet, true))
}
