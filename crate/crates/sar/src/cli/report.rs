//! Report document assembly and rendering.
//!
//! The JSON renderer is hand-formatted rather than delegated to a generic
//! serializer so that key order, indentation, and number precision are
//! pinned: the same input must produce byte-identical output across runs
//! and platforms.  Fractions print with six decimals, quote-currency
//! amounts with two.

use super::CliError;
use crate::concentration::ConcentrationStats;
use crate::metrics::{SaRReport, TokenRiskRecord};
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

pub const CSV_HEADER: &str = "token,open_interest,stress_notional,raw_slippage,haircut_conc,\
spoof_score,haircut_total,adjusted_slippage,n_eff,cr_1,hhi,provider_count,avg_leverage,exhausted";

/// One token's row in the report.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TokenRow {
    pub token: String,
    pub open_interest: f64,
    pub stress_notional: f64,
    pub raw_slippage: f64,
    pub haircut_conc: f64,
    pub spoof_score: f64,
    pub haircut_total: f64,
    pub adjusted_slippage: f64,
    pub n_eff: Option<f64>,
    pub cr_1: Option<f64>,
    pub hhi: Option<f64>,
    pub provider_count: Option<usize>,
    pub avg_leverage: Option<f64>,
    pub exhausted: bool,
}

impl TokenRow {
    fn from_record(record: &TokenRiskRecord) -> Self {
        let stats: Option<&ConcentrationStats> = record.stats.as_ref();
        TokenRow {
            token: record.token.clone(),
            open_interest: record.open_interest,
            stress_notional: record.stress_notional_q,
            raw_slippage: record.raw_slippage,
            haircut_conc: record.haircut_conc,
            spoof_score: record.spoof_score,
            haircut_total: record.haircut_total,
            adjusted_slippage: record.adjusted_slippage,
            n_eff: stats.map(|s| s.n_eff),
            cr_1: stats.map(|s| s.cr_1),
            hhi: stats.map(|s| s.hhi),
            provider_count: stats.map(|s| s.provider_count),
            avg_leverage: record.avg_leverage,
            exhausted: record.exhausted,
        }
    }
}

/// The full `compute` output: portfolio metrics plus one row per token.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportDoc {
    pub timestamp: i64,
    pub alpha: f64,
    pub sar: f64,
    pub esar: f64,
    pub tsar_dollars: f64,
    pub weighted_sar: f64,
    pub n_tokens: usize,
    pub tail_oi_share: f64,
    pub tail_tokens: Vec<String>,
    pub flags: Vec<String>,
    pub tokens: Vec<TokenRow>,
}

impl ReportDoc {
    pub fn from_pipeline(
        report: &SaRReport,
        records: &[TokenRiskRecord],
        alpha: f64,
    ) -> Self {
        ReportDoc {
            timestamp: report.timestamp,
            alpha,
            sar: report.sar,
            esar: report.esar,
            tsar_dollars: report.tsar_dollars,
            weighted_sar: report.weighted_sar,
            n_tokens: report.n_tokens,
            tail_oi_share: report.tail_oi_share,
            tail_tokens: report.tail_tokens.clone(),
            flags: report.flags.clone(),
            tokens: records.iter().map(TokenRow::from_record).collect(),
        }
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Text => self.to_text(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = String::with_capacity(1024 + 256 * self.tokens.len());
        out.push_str("{\n");
        let _ = writeln!(out, "  \"timestamp\": {},", self.timestamp);
        let _ = writeln!(out, "  \"alpha\": {},", fmt_f(self.alpha, 6));
        let _ = writeln!(out, "  \"sar\": {},", fmt_f(self.sar, 6));
        let _ = writeln!(out, "  \"esar\": {},", fmt_f(self.esar, 6));
        let _ = writeln!(out, "  \"tsar_dollars\": {},", fmt_f(self.tsar_dollars, 2));
        let _ = writeln!(out, "  \"weighted_sar\": {},", fmt_f(self.weighted_sar, 6));
        let _ = writeln!(out, "  \"n_tokens\": {},", self.n_tokens);
        let _ = writeln!(out, "  \"tail_oi_share\": {},", fmt_f(self.tail_oi_share, 6));
        let _ = writeln!(out, "  \"tail_tokens\": {},", json_string_array(&self.tail_tokens));
        let _ = writeln!(out, "  \"flags\": {},", json_string_array(&self.flags));
        out.push_str("  \"tokens\": [");
        for (i, row) in self.tokens.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            render_token_row(&mut out, row);
        }
        out.push_str(if self.tokens.is_empty() { "]\n" } else { "\n  ]\n" });
        out.push_str("}\n");
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.tokens {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{}",
                row.token,
                fmt_f(row.open_interest, 2),
                fmt_f(row.stress_notional, 2),
                fmt_f(row.raw_slippage, 6),
                fmt_f(row.haircut_conc, 6),
                fmt_f(row.spoof_score, 6),
                fmt_f(row.haircut_total, 6),
                fmt_f(row.adjusted_slippage, 6),
            );
            push_opt(&mut out, row.n_eff, 6);
            push_opt(&mut out, row.cr_1, 6);
            push_opt(&mut out, row.hhi, 6);
            match row.provider_count {
                Some(n) => {
                    let _ = write!(out, ",{n}");
                }
                None => out.push(','),
            }
            push_opt(&mut out, row.avg_leverage, 2);
            let _ = writeln!(out, ",{}", row.exhausted);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "timestamp        : {}", self.timestamp);
        let _ = writeln!(out, "tokens           : {}", self.n_tokens);
        let _ = writeln!(out, "SaR({:.2})        : {}%", self.alpha, fmt_f(self.sar * 100.0, 4));
        let _ =
            writeln!(out, "ESaR({:.2})       : {}%", self.alpha, fmt_f(self.esar * 100.0, 4));
        let _ = writeln!(out, "TSaR$            : {}", fmt_f(self.tsar_dollars, 2));
        let _ =
            writeln!(out, "weighted SaR     : {}%", fmt_f(self.weighted_sar * 100.0, 4));
        let _ =
            writeln!(out, "tail OI share    : {}%", fmt_f(self.tail_oi_share * 100.0, 4));
        let _ = writeln!(
            out,
            "tail tokens      : {}",
            if self.tail_tokens.is_empty() { "-".to_string() } else { self.tail_tokens.join(",") }
        );
        let _ = writeln!(
            out,
            "flags            : {}",
            if self.flags.is_empty() { "-".to_string() } else { self.flags.join("; ") }
        );
        if !self.tokens.is_empty() {
            let _ = writeln!(out, "per-token adjusted slippage:");
            for row in &self.tokens {
                let _ = writeln!(
                    out,
                    "  {:<12} {:>9}%{}",
                    row.token,
                    fmt_f(row.adjusted_slippage * 100.0, 4),
                    if row.exhausted { "  (book exhausted)" } else { "" }
                );
            }
        }
        out
    }
}

/// Loads a saved JSON report.
pub fn read_report(path: &Path) -> Result<ReportDoc, CliError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: name.clone(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| CliError::BadReport(format!("{name}: {e}")))
}

/// Rebuilds pipeline outputs from a saved document so alert rules can run
/// on it.  Concentration stats survive only as their summary values.
pub fn pipeline_from_doc(doc: &ReportDoc) -> (SaRReport, Vec<TokenRiskRecord>) {
    let report = SaRReport {
        timestamp: doc.timestamp,
        sar: doc.sar,
        esar: doc.esar,
        tsar_dollars: doc.tsar_dollars,
        weighted_sar: doc.weighted_sar,
        tail_tokens: doc.tail_tokens.clone(),
        n_tokens: doc.n_tokens,
        tail_oi_share: doc.tail_oi_share,
        flags: doc.flags.clone(),
    };
    let records = doc
        .tokens
        .iter()
        .map(|row| TokenRiskRecord {
            token: row.token.clone(),
            open_interest: row.open_interest,
            stress_notional_q: row.stress_notional,
            raw_slippage: row.raw_slippage,
            stats: match (row.n_eff, row.cr_1) {
                (Some(n_eff), Some(cr_1)) => {
                    Some(ConcentrationStats::from_n_eff_cr1(n_eff, cr_1))
                }
                _ => None,
            },
            haircut_conc: row.haircut_conc,
            spoof_score: row.spoof_score,
            haircut_total: row.haircut_total,
            adjusted_slippage: row.adjusted_slippage,
            avg_leverage: row.avg_leverage,
            exhausted: row.exhausted,
        })
        .collect();
    (report, records)
}

fn render_token_row(out: &mut String, row: &TokenRow) {
    out.push_str("    {\n");
    let _ = writeln!(out, "      \"token\": {},", json_string(&row.token));
    let _ = writeln!(out, "      \"open_interest\": {},", fmt_f(row.open_interest, 2));
    let _ = writeln!(out, "      \"stress_notional\": {},", fmt_f(row.stress_notional, 2));
    let _ = writeln!(out, "      \"raw_slippage\": {},", fmt_f(row.raw_slippage, 6));
    let _ = writeln!(out, "      \"haircut_conc\": {},", fmt_f(row.haircut_conc, 6));
    let _ = writeln!(out, "      \"spoof_score\": {},", fmt_f(row.spoof_score, 6));
    let _ = writeln!(out, "      \"haircut_total\": {},", fmt_f(row.haircut_total, 6));
    let _ = writeln!(out, "      \"adjusted_slippage\": {},", fmt_f(row.adjusted_slippage, 6));
    let _ = writeln!(out, "      \"n_eff\": {},", json_opt(row.n_eff, 6));
    let _ = writeln!(out, "      \"cr_1\": {},", json_opt(row.cr_1, 6));
    let _ = writeln!(out, "      \"hhi\": {},", json_opt(row.hhi, 6));
    let _ = writeln!(
        out,
        "      \"provider_count\": {},",
        row.provider_count.map_or("null".to_string(), |n| n.to_string())
    );
    let _ = writeln!(out, "      \"avg_leverage\": {},", json_opt(row.avg_leverage, 2));
    let _ = writeln!(out, "      \"exhausted\": {}", row.exhausted);
    out.push_str("    }");
}

/// Fixed-decimal rendering that never prints "-0.00": a value whose
/// rounded digits are all zero loses its sign.
pub(crate) fn fmt_f(value: f64, decimals: usize) -> String {
    let s = format!("{value:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

fn json_string_array(items: &[String]) -> String {
    let rendered: Vec<String> = items.iter().map(|s| json_string(s)).collect();
    format!("[{}]", rendered.join(", "))
}

fn json_opt(value: Option<f64>, decimals: usize) -> String {
    match value {
        Some(v) => fmt_f(v, decimals),
        None => "null".to_string(),
    }
}

fn push_opt(out: &mut String, value: Option<f64>, decimals: usize) {
    match value {
        Some(v) => {
            let _ = write!(out, ",{}", fmt_f(v, decimals));
        }
        None => out.push(','),
    }
}
