//! Metric history: an append-only CSV of per-timestamp portfolio metrics,
//! rebuilt or extended by replaying archived snapshot files.
//!
//! Snapshot archives are directories of per-timestamp files whose names
//! end in a run of digits holding the unix timestamp, e.g.
//! `book_1700000000.csv`.  Replay walks them in timestamp order, runs the
//! full pipeline on each, and records one history row per file.

use super::config::EngineConfig;
use super::ingest::{detect_format, parse_oi_file, parse_snapshot_file, SnapshotFormat};
use super::CliError;
use crate::metrics::{run_pipeline, MetricsError, TokenInput};
use crate::orderbook::{depth_at_bps, Side};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const HISTORY_HEADER: &str = "timestamp,sar,esar,tsar_dollars,depth";

/// Resting bid depth is summed within this band around mid, per token.
pub const DEPTH_BAND_BPS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub timestamp: i64,
    pub sar: f64,
    pub esar: f64,
    pub tsar_dollars: f64,
    /// Exchange-wide bid-side quote depth within [`DEPTH_BAND_BPS`] of mid.
    pub depth: f64,
}

impl HistoryRow {
    fn render(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.timestamp,
            super::report::fmt_f(self.sar, 6),
            super::report::fmt_f(self.esar, 6),
            super::report::fmt_f(self.tsar_dollars, 2),
            super::report::fmt_f(self.depth, 2)
        )
    }
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>, CliError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: name.clone(), message: e.to_string() })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_start_matches('\u{feff}').trim() == HISTORY_HEADER => {}
        other => {
            return Err(CliError::MalformedHeader {
                path: name,
                expected: HISTORY_HEADER.to_string(),
                found: other.map(|(_, h)| h.to_string()).unwrap_or_default(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |j: usize| fields[j].trim().parse::<f64>();
        if fields.len() != 5 {
            return Err(CliError::BadReport(format!("{name}:{}: expected 5 fields", i + 1)));
        }
        let row = HistoryRow {
            timestamp: fields[0]
                .trim()
                .parse::<i64>()
                .map_err(|_| CliError::BadReport(format!("{name}:{}: bad timestamp", i + 1)))?,
            sar: parse(1)
                .map_err(|_| CliError::BadReport(format!("{name}:{}: bad sar", i + 1)))?,
            esar: parse(2)
                .map_err(|_| CliError::BadReport(format!("{name}:{}: bad esar", i + 1)))?,
            tsar_dollars: parse(3)
                .map_err(|_| CliError::BadReport(format!("{name}:{}: bad tsar", i + 1)))?,
            depth: parse(4)
                .map_err(|_| CliError::BadReport(format!("{name}:{}: bad depth", i + 1)))?,
        };
        if let Some(prev) = rows.last() {
            let prev: &HistoryRow = prev;
            if row.timestamp <= prev.timestamp {
                return Err(CliError::BadReport(format!(
                    "{name}:{}: timestamps must strictly increase",
                    i + 1
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<(), CliError> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(HISTORY_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.render());
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Adds rows after the file's last timestamp; earlier or equal rows are
/// dropped so existing lines are never rewritten.  Returns
/// `(appended, skipped_stale)`.
pub fn append_history(path: &Path, rows: &[HistoryRow]) -> Result<(usize, usize), CliError> {
    if !path.exists() {
        write_history(path, rows)?;
        return Ok((rows.len(), 0));
    }
    let existing = read_history(path)?;
    let last = existing.last().map(|r| r.timestamp);
    let fresh: Vec<&HistoryRow> =
        rows.iter().filter(|r| last.is_none_or(|t| r.timestamp > t)).collect();
    let skipped = rows.len() - fresh.len();
    if fresh.is_empty() {
        return Ok((0, skipped));
    }
    let mut out = String::new();
    for row in &fresh {
        let _ = writeln!(out, "{}", row.render());
    }
    use std::io::Write as _;
    let mut file = std::fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
    file.write_all(out.as_bytes())
        .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
    Ok((fresh.len(), skipped))
}

/// Last observation carried forward onto a uniform grid.  Grid points
/// before the first observation are skipped.  Returns the resampled
/// points plus a flag per grid point whose source observation is older
/// than `max_gap` seconds.
pub fn locf_grid(
    points: &[(i64, f64)],
    start: i64,
    step: i64,
    end: i64,
    max_gap: Option<i64>,
) -> (Vec<(i64, f64)>, Vec<String>) {
    debug_assert!(step > 0);
    let mut out = Vec::new();
    let mut flags = Vec::new();
    let mut idx = 0usize;
    let mut ts = start;
    while ts <= end {
        while idx < points.len() && points[idx].0 <= ts {
            idx += 1;
        }
        if idx > 0 {
            let (obs_ts, value) = points[idx - 1];
            out.push((ts, value));
            if let Some(gap) = max_gap {
                if ts - obs_ts > gap {
                    flags.push(format!("stale:{ts}:last_obs:{obs_ts}"));
                }
            }
        }
        ts += step;
    }
    (out, flags)
}

/// Row-level LOCF across all four metric columns.
pub fn resample_history(
    rows: &[HistoryRow],
    step: i64,
    max_gap: Option<i64>,
) -> (Vec<HistoryRow>, Vec<String>) {
    if rows.is_empty() || step <= 0 {
        return (Vec::new(), Vec::new());
    }
    let start = rows[0].timestamp;
    let end = rows[rows.len() - 1].timestamp;
    let mut out = Vec::new();
    let mut flags = Vec::new();
    let mut idx = 0usize;
    let mut ts = start;
    while ts <= end {
        while idx < rows.len() && rows[idx].timestamp <= ts {
            idx += 1;
        }
        let source = rows[idx - 1];
        out.push(HistoryRow { timestamp: ts, ..source });
        if let Some(gap) = max_gap {
            if ts - source.timestamp > gap {
                flags.push(format!("stale:{ts}:last_obs:{}", source.timestamp));
            }
        }
        ts += step;
    }
    (out, flags)
}

/// Hours the slippage series has been strictly rising, walking back from
/// the latest row until the first non-increase.
pub fn trend_persist_hours(rows: &[HistoryRow]) -> Option<f64> {
    if rows.is_empty() {
        return None;
    }
    let mut hours = 0.0;
    for pair in rows.windows(2).rev() {
        if pair[1].sar > pair[0].sar {
            hours += (pair[1].timestamp - pair[0].timestamp) as f64 / 3600.0;
        } else {
            break;
        }
    }
    Some(hours)
}

/// Latest depth plus the last depth observed at or before
/// `lookback_secs` before the latest row.
pub fn depth_window(rows: &[HistoryRow], lookback_secs: i64) -> (Option<f64>, Option<f64>) {
    let Some(last) = rows.last() else {
        return (None, None);
    };
    let cutoff = last.timestamp - lookback_secs;
    let prior = rows.iter().rev().find(|r| r.timestamp <= cutoff).map(|r| r.depth);
    (Some(last.depth), prior)
}

/// Unix timestamp from the trailing digit run of a file stem, e.g.
/// `book_1700000060.csv` -> 1700000060.
pub fn timestamp_from_filename(path: &Path) -> Option<i64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String =
        stem.chars().rev().take_while(|c| c.is_ascii_digit()).collect::<Vec<_>>().iter().rev().collect();
    if digits.is_empty() {
        None
    } else {
        digits.parse().ok()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    /// Rewrite the history file from scratch instead of appending.
    pub rebuild: bool,
    /// Resample onto this uniform step before writing (requires rebuild).
    pub resample_step: Option<i64>,
    /// Flag resampled points whose source observation is older than this.
    pub max_gap_secs: Option<i64>,
    /// Force one snapshot format; `None` detects per file extension.
    pub format: Option<SnapshotFormat>,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions { rebuild: false, resample_step: None, max_gap_secs: None, format: None }
    }
}

#[derive(Debug)]
pub struct ReplaySummary {
    /// Rows computed from the archive, post-resample, in timestamp order.
    pub rows: Vec<HistoryRow>,
    pub appended: usize,
    pub skipped_stale: usize,
    pub diagnostics: Vec<String>,
}

/// Computes one [`HistoryRow`] from a parsed snapshot set.
pub fn history_row_from_snapshots(
    snapshots: Vec<crate::orderbook::OrderBookSnapshot>,
    timestamp: i64,
    oi_lookup: impl Fn(&str, i64) -> Option<f64>,
    engine: &EngineConfig,
    diagnostics: &mut Vec<String>,
) -> Result<HistoryRow, MetricsError> {
    let mut depth = 0.0;
    let mut inputs = Vec::with_capacity(snapshots.len());
    for snapshot in snapshots {
        depth += depth_at_bps(&snapshot, Side::Bid, DEPTH_BAND_BPS);
        match oi_lookup(&snapshot.token, timestamp) {
            Some(oi) => inputs.push(TokenInput::new(snapshot, oi)),
            None => diagnostics
                .push(format!("ts {timestamp}: no open interest for {}", snapshot.token)),
        }
    }
    let (report, _records) = run_pipeline(&inputs, &engine.params)?;
    Ok(HistoryRow {
        timestamp,
        sar: report.sar,
        esar: report.esar,
        tsar_dollars: report.tsar_dollars,
        depth,
    })
}

/// Replays an archive directory into the history file at `out`.
pub fn replay_history(
    snapshot_dir: &Path,
    oi_path: &Path,
    engine: &EngineConfig,
    out: &Path,
    options: &ReplayOptions,
) -> Result<ReplaySummary, CliError> {
    if options.resample_step.is_some() && !options.rebuild {
        return Err(CliError::BadArgs(
            "resampling rewrites history; pass --rebuild with --resample-step".to_string(),
        ));
    }
    let oi_table = parse_oi_file(oi_path)?;
    let mut diagnostics = oi_table.diagnostics.clone();

    let dir_name = snapshot_dir.display().to_string();
    let entries = std::fs::read_dir(snapshot_dir)
        .map_err(|e| CliError::Io { path: dir_name.clone(), message: e.to_string() })?;
    let mut files: Vec<(i64, PathBuf)> = Vec::new();
    for entry in entries {
        let path =
            entry.map_err(|e| CliError::Io { path: dir_name.clone(), message: e.to_string() })?.path();
        if !path.is_file() {
            continue;
        }
        let ext = path.extension().and_then(|e| e.to_str());
        if !matches!(ext, Some("csv") | Some("jsonl")) {
            continue;
        }
        match timestamp_from_filename(&path) {
            Some(ts) => files.push((ts, path)),
            None => diagnostics
                .push(format!("{}: no trailing timestamp in filename", path.display())),
        }
    }
    if files.is_empty() {
        return Err(CliError::EmptyDirectory { path: dir_name });
    }
    files.sort();

    let mut rows = Vec::with_capacity(files.len());
    for (ts, path) in files {
        let format = match options.format {
            Some(f) => f,
            None => detect_format(&path)?,
        };
        let set = match parse_snapshot_file(&path, format) {
            Ok(set) => set,
            Err(e) => {
                diagnostics.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        diagnostics.extend(set.diagnostics);
        let lookup = |token: &str, at: i64| oi_table.lookup(token, at);
        match history_row_from_snapshots(set.snapshots, ts, lookup, engine, &mut diagnostics) {
            Ok(row) => rows.push(row),
            Err(e) => diagnostics.push(format!("{}: {e}", path.display())),
        }
    }
    if rows.is_empty() {
        return Err(CliError::NoValidRecords { path: dir_name, attempted: diagnostics.len() });
    }

    if let Some(step) = options.resample_step {
        let (resampled, flags) = resample_history(&rows, step, options.max_gap_secs);
        diagnostics.extend(flags);
        rows = resampled;
    }

    let (appended, skipped_stale) = if options.rebuild {
        write_history(out, &rows)?;
        (rows.len(), 0)
    } else {
        append_history(out, &rows)?
    };
    Ok(ReplaySummary { rows, appended, skipped_stale, diagnostics })
}
