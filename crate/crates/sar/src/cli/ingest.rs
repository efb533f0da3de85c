//! File ingestion: order-book snapshots (CSV or JSONL), open-interest
//! tables, position-size samples, deficit series, and generic timestamped
//! series.
//!
//! Parsing is total: every input line is either consumed or turns into a
//! line-numbered diagnostic, and a file fails as a whole only when nothing
//! in it survives.

use super::CliError;
use crate::orderbook::{OrderBookSnapshot, PriceLevel};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

pub const SNAPSHOT_HEADER: &str = "timestamp,token,side,price,size,account_id";
pub const OI_HEADER: &str = "timestamp,token,open_interest";
pub const SAMPLES_HEADER: &str = "token,position_size_usd";
pub const DEFICIT_HEADER: &str = "timestamp,deficit_usd";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SnapshotFormat {
    Csv,
    Jsonl,
}

/// Picks the format from the file extension: `.csv` or `.jsonl`.
pub fn detect_format(path: &Path) -> Result<SnapshotFormat, CliError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(SnapshotFormat::Csv),
        Some("jsonl") => Ok(SnapshotFormat::Jsonl),
        other => Err(CliError::BadArgs(format!(
            "cannot infer snapshot format from extension {:?} of {}; use .csv or .jsonl",
            other.unwrap_or(""),
            path.display()
        ))),
    }
}

/// Parsed snapshots (one per token, sorted by token) plus everything that
/// went wrong on the way.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub snapshots: Vec<OrderBookSnapshot>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct JsonRecord {
    timestamp: i64,
    token: String,
    side: String,
    price: f64,
    size: f64,
    #[serde(default)]
    account_id: Option<String>,
}

struct RawRecord {
    timestamp: i64,
    token: String,
    is_bid: bool,
    price: f64,
    size: f64,
    account_id: Option<String>,
}

fn validate_record(
    timestamp: i64,
    token: &str,
    side: &str,
    price: f64,
    size: f64,
    account_id: Option<String>,
) -> Result<RawRecord, String> {
    if token.is_empty() {
        return Err("empty token".to_string());
    }
    let is_bid = match side.to_ascii_lowercase().as_str() {
        "bid" => true,
        "ask" => false,
        other => return Err(format!("side must be bid or ask, got {other:?}")),
    };
    if !(price.is_finite() && price > 0.0) {
        return Err(format!("non-positive price {price}"));
    }
    if !(size.is_finite() && size > 0.0) {
        return Err(format!("non-positive size {size}"));
    }
    let account_id = account_id.filter(|a| !a.is_empty());
    Ok(RawRecord { timestamp, token: token.to_string(), is_bid, price, size, account_id })
}

fn parse_csv_record(line: &str) -> Result<RawRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 fields, got {}", fields.len()));
    }
    let timestamp =
        fields[0].trim().parse::<i64>().map_err(|_| format!("bad timestamp {:?}", fields[0]))?;
    let price =
        fields[3].trim().parse::<f64>().map_err(|_| format!("bad price {:?}", fields[3]))?;
    let size = fields[4].trim().parse::<f64>().map_err(|_| format!("bad size {:?}", fields[4]))?;
    let account = fields[5].trim();
    validate_record(
        timestamp,
        fields[1].trim(),
        fields[2].trim(),
        price,
        size,
        (!account.is_empty()).then(|| account.to_string()),
    )
}

/// Reads one snapshot file into per-token books.
///
/// Records group by token; when a token carries several timestamps in one
/// file only the latest group is kept (earlier ones are reported).  Tokens
/// whose surviving records cannot form a valid book (crossed, or missing a
/// side so no mid can be derived) are dropped with a diagnostic.
pub fn parse_snapshot_file(
    path: &Path,
    format: SnapshotFormat,
) -> Result<SnapshotSet, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let name = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let mut diagnostics = Vec::new();
    if format == SnapshotFormat::Csv {
        match lines.next() {
            Some((_, header)) if normalize_header(header) == SNAPSHOT_HEADER => {}
            other => {
                return Err(CliError::MalformedHeader {
                    path: name,
                    expected: SNAPSHOT_HEADER.to_string(),
                    found: other.map(|(_, h)| h.to_string()).unwrap_or_default(),
                })
            }
        }
    }
    let mut records: Vec<RawRecord> = Vec::new();
    let mut attempted = 0usize;
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        attempted += 1;
        let parsed = match format {
            SnapshotFormat::Csv => parse_csv_record(line),
            SnapshotFormat::Jsonl => serde_json::from_str::<JsonRecord>(line)
                .map_err(|e| e.to_string())
                .and_then(|r| {
                    validate_record(r.timestamp, &r.token, &r.side, r.price, r.size, r.account_id)
                }),
        };
        match parsed {
            Ok(record) => records.push(record),
            Err(reason) => diagnostics.push(format!("{name}:{line_no}: {reason}")),
        }
    }
    // Group by token, keep only each token's latest timestamp.
    let mut latest: BTreeMap<String, i64> = BTreeMap::new();
    for r in &records {
        latest
            .entry(r.token.clone())
            .and_modify(|t| *t = (*t).max(r.timestamp))
            .or_insert(r.timestamp);
    }
    let mut grouped: BTreeMap<String, (i64, Vec<PriceLevel>, Vec<PriceLevel>)> = BTreeMap::new();
    let mut stale = 0usize;
    for r in records {
        let ts = latest[&r.token];
        if r.timestamp != ts {
            stale += 1;
            continue;
        }
        let entry = grouped.entry(r.token).or_insert_with(|| (ts, Vec::new(), Vec::new()));
        let level = match r.account_id {
            Some(acct) => PriceLevel::with_account(r.price, r.size, &acct),
            None => PriceLevel::new(r.price, r.size),
        };
        if r.is_bid {
            entry.1.push(level);
        } else {
            entry.2.push(level);
        }
    }
    if stale > 0 {
        diagnostics.push(format!(
            "{name}: {stale} record(s) superseded by a later timestamp for the same token"
        ));
    }
    let mut snapshots = Vec::with_capacity(grouped.len());
    for (token, (ts, mut bids, mut asks)) in grouped {
        bids.sort_by(|a, b| b.price.total_cmp(&a.price));
        asks.sort_by(|a, b| a.price.total_cmp(&b.price));
        match OrderBookSnapshot::new(&token, ts, None, bids, asks) {
            Ok(snapshot) => snapshots.push(snapshot),
            Err(e) => diagnostics.push(format!("{name}: token {token}: {e}")),
        }
    }
    if snapshots.is_empty() {
        return Err(CliError::NoValidRecords { path: name, attempted });
    }
    Ok(SnapshotSet { snapshots, diagnostics })
}

/// Open-interest observations, ordered by token then timestamp, queried
/// with last-observation-carried-forward semantics.
#[derive(Debug, Clone, Default)]
pub struct OiTable {
    rows: BTreeMap<String, Vec<(i64, f64)>>,
    pub diagnostics: Vec<String>,
}

impl OiTable {
    /// Latest open interest at or before `timestamp` for `token`.
    pub fn lookup(&self, token: &str, timestamp: i64) -> Option<f64> {
        let series = self.rows.get(token)?;
        let idx = series.partition_point(|(t, _)| *t <= timestamp);
        if idx == 0 {
            None
        } else {
            Some(series[idx - 1].1)
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(|s| s.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Parses `timestamp,token,open_interest` rows.
pub fn parse_oi_file(path: &Path) -> Result<OiTable, CliError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: name.clone(), message: e.to_string() })?;
    let mut table = OiTable::default();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if normalize_header(header) == OI_HEADER => {}
        other => {
            return Err(CliError::MalformedHeader {
                path: name,
                expected: OI_HEADER.to_string(),
                found: other.map(|(_, h)| h.to_string()).unwrap_or_default(),
            })
        }
    }
    for (i, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = (|| -> Result<(i64, String, f64), String> {
            if fields.len() != 3 {
                return Err(format!("expected 3 fields, got {}", fields.len()));
            }
            let ts = fields[0].trim().parse::<i64>().map_err(|_| "bad timestamp".to_string())?;
            // Zero is a real observation (all positions closed); the
            // pipeline decides what to do with it.
            let oi = fields[2]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| format!("open interest must be non-negative, got {:?}", fields[2]))?;
            let token = fields[1].trim();
            if token.is_empty() {
                return Err("empty token".to_string());
            }
            Ok((ts, token.to_string(), oi))
        })();
        match parsed {
            Ok((ts, token, oi)) => table.rows.entry(token).or_default().push((ts, oi)),
            Err(reason) => table.diagnostics.push(format!("{name}:{}: {reason}", i + 1)),
        }
    }
    for series in table.rows.values_mut() {
        series.sort_by_key(|(t, _)| *t);
    }
    Ok(table)
}

/// Parses `token,position_size_usd` sample rows into per-token vectors.
pub fn parse_samples_file(
    path: &Path,
) -> Result<(BTreeMap<String, Vec<f64>>, Vec<String>), CliError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: name.clone(), message: e.to_string() })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if normalize_header(header) == SAMPLES_HEADER => {}
        other => {
            return Err(CliError::MalformedHeader {
                path: name,
                expected: SAMPLES_HEADER.to_string(),
                found: other.map(|(_, h)| h.to_string()).unwrap_or_default(),
            })
        }
    }
    let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parsed = (|| -> Result<(String, f64), String> {
            let (token, value) =
                line.split_once(',').ok_or_else(|| "expected 2 fields".to_string())?;
            let size = value
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| format!("bad sample {value:?}"))?;
            let token = token.trim();
            if token.is_empty() {
                return Err("empty token".to_string());
            }
            Ok((token.to_string(), size))
        })();
        match parsed {
            Ok((token, size)) => samples.entry(token).or_default().push(size),
            Err(reason) => diagnostics.push(format!("{name}:{}: {reason}", i + 1)),
        }
    }
    Ok((samples, diagnostics))
}

/// Parses a timestamped series file.  The first column must be `timestamp`;
/// `column` picks another column by header name (default: the second
/// column).  Rows are sorted; a duplicated timestamp keeps the last value.
pub fn parse_series_file(
    path: &Path,
    column: Option<&str>,
) -> Result<(Vec<(i64, f64)>, Vec<String>), CliError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: name.clone(), message: e.to_string() })?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => normalize_header(h),
        None => {
            return Err(CliError::MalformedHeader {
                path: name,
                expected: "timestamp,<value columns>".to_string(),
                found: String::new(),
            })
        }
    };
    let columns: Vec<&str> = header.split(',').collect();
    if columns.first() != Some(&"timestamp") || columns.len() < 2 {
        return Err(CliError::MalformedHeader {
            path: name,
            expected: "timestamp,<value columns>".to_string(),
            found: header.clone(),
        });
    }
    let value_idx = match column {
        None => 1,
        Some(wanted) => columns.iter().position(|c| *c == wanted).ok_or_else(|| {
            CliError::BadArgs(format!(
                "column {wanted:?} not found in {name} (columns: {header})"
            ))
        })?,
    };
    let mut rows: Vec<(i64, f64)> = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = (|| -> Result<(i64, f64), String> {
            if fields.len() != columns.len() {
                return Err(format!(
                    "expected {} fields, got {}",
                    columns.len(),
                    fields.len()
                ));
            }
            let ts = fields[0].trim().parse::<i64>().map_err(|_| "bad timestamp".to_string())?;
            let value = fields[value_idx]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("bad value {:?}", fields[value_idx]))?;
            Ok((ts, value))
        })();
        match parsed {
            Ok(row) => rows.push(row),
            Err(reason) => diagnostics.push(format!("{name}:{}: {reason}", i + 1)),
        }
    }
    rows.sort_by_key(|(t, _)| *t);
    rows.dedup_by(|later, earlier| {
        if later.0 == earlier.0 {
            earlier.1 = later.1;
            true
        } else {
            false
        }
    });
    if rows.is_empty() {
        return Err(CliError::NoValidRecords { path: name, attempted: diagnostics.len() });
    }
    Ok((rows, diagnostics))
}

fn normalize_header(header: &str) -> String {
    header.trim_start_matches('\u{feff}').trim().to_ascii_lowercase()
}
