//! Threshold rules over a computed report, rendered one alert per line.
//!
//! Seven rules run in a fixed order; per-token rules then iterate tokens
//! in lexicographic order, so output is deterministic for a given input.
//! Rules whose inputs are absent from the [`AlertContext`] are skipped
//! rather than guessed at.

use crate::metrics::{SaRReport, TokenRiskRecord};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AlertSeverity {
    Warning,
    Critical,
}

impl fmt::Display for AlertSeverity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlertSeverity::Warning => "WARNING",
            AlertSeverity::Critical => "CRITICAL",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alert {
    pub severity: AlertSeverity,
    pub rule_id: &'static str,
    /// `None` for exchange-wide rules; the line renders an empty field.
    pub token: Option<String>,
    pub observed: f64,
    pub threshold: f64,
    pub timestamp: i64,
}

impl Alert {
    /// `SEVERITY|rule_id|token|observed|threshold|timestamp`, numbers to
    /// six decimals, timestamp as a bare integer.
    pub fn render(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}",
            self.severity,
            self.rule_id,
            self.token.as_deref().unwrap_or(""),
            super::report::fmt_f(self.observed, 6),
            super::report::fmt_f(self.threshold, 6),
            self.timestamp
        )
    }
}

/// Trigger levels.  Every threshold is an upper bound the observation must
/// exceed, except `n_eff_floor` (fires below) and `trend_hours` (fires at
/// or above, since a streak that reaches the window satisfies it).
#[derive(Debug, Clone)]
pub struct AlertThresholds {
    /// Adjusted portfolio slippage fraction, warning level.
    pub sar_warn: f64,
    /// Adjusted portfolio slippage fraction, critical level.
    pub sar_crit: f64,
    /// Tail dollar slippage as a multiple of the insurance fund.
    pub tsar_if_ratio: f64,
    /// Minimum effective provider count per token.
    pub n_eff_floor: f64,
    /// Maximum single-provider share per token.
    pub cr1_ceiling: f64,
    /// Hours of uninterrupted upward drift in the slippage series.
    pub trend_hours: f64,
    /// Fractional decline in resting depth over the lookback window.
    pub depth_drop: f64,
}

impl Default for AlertThresholds {
    fn default() -> Self {
        AlertThresholds {
            sar_warn: 0.03,
            sar_crit: 0.05,
            tsar_if_ratio: 2.0,
            n_eff_floor: 3.0,
            cr1_ceiling: 0.5,
            trend_hours: 24.0,
            depth_drop: 0.30,
        }
    }
}

/// Observations the report alone cannot supply.  `None` disables the
/// rule that needs it.
#[derive(Debug, Clone, Default)]
pub struct AlertContext {
    pub insurance_fund: Option<f64>,
    /// Hours the portfolio slippage series has been strictly rising.
    pub trend_persist_hours: Option<f64>,
    /// Exchange-wide resting depth now, in quote currency.
    pub current_depth: Option<f64>,
    /// The same measure twelve hours earlier.
    pub prior_depth_12h: Option<f64>,
}

pub fn evaluate_alerts(
    report: &SaRReport,
    records: &[TokenRiskRecord],
    thresholds: &AlertThresholds,
    context: &AlertContext,
) -> Vec<Alert> {
    let ts = report.timestamp;
    let mut alerts = Vec::new();
    let mut push = |severity, rule_id, token: Option<&str>, observed, threshold| {
        alerts.push(Alert {
            severity,
            rule_id,
            token: token.map(str::to_string),
            observed,
            threshold,
            timestamp: ts,
        });
    };

    if report.sar > thresholds.sar_warn {
        push(AlertSeverity::Warning, "sar_level_warn", None, report.sar, thresholds.sar_warn);
    }
    if report.sar > thresholds.sar_crit {
        push(AlertSeverity::Critical, "sar_level_crit", None, report.sar, thresholds.sar_crit);
    }
    if let Some(fund) = context.insurance_fund.filter(|f| *f > 0.0) {
        let ratio = report.tsar_dollars / fund;
        if ratio > thresholds.tsar_if_ratio {
            push(AlertSeverity::Critical, "tsar_vs_if", None, ratio, thresholds.tsar_if_ratio);
        }
    }

    let mut by_token: Vec<&TokenRiskRecord> = records.iter().collect();
    by_token.sort_by(|a, b| a.token.cmp(&b.token));
    for record in &by_token {
        if let Some(stats) = &record.stats {
            if stats.n_eff < thresholds.n_eff_floor {
                push(
                    AlertSeverity::Warning,
                    "n_eff_floor",
                    Some(&record.token),
                    stats.n_eff,
                    thresholds.n_eff_floor,
                );
            }
        }
    }
    for record in &by_token {
        if let Some(stats) = &record.stats {
            if stats.cr_1 > thresholds.cr1_ceiling {
                push(
                    AlertSeverity::Critical,
                    "cr1_ceiling",
                    Some(&record.token),
                    stats.cr_1,
                    thresholds.cr1_ceiling,
                );
            }
        }
    }

    if let Some(hours) = context.trend_persist_hours {
        if hours >= thresholds.trend_hours {
            push(AlertSeverity::Warning, "trend_persist", None, hours, thresholds.trend_hours);
        }
    }
    if let (Some(now), Some(prior)) = (context.current_depth, context.prior_depth_12h) {
        if prior > 0.0 {
            let drop = 1.0 - now / prior;
            if drop > thresholds.depth_drop {
                push(AlertSeverity::Critical, "depth_drop", None, drop, thresholds.depth_drop);
            }
        }
    }
    alerts
}

/// Exit code for a batch of alerts: 2 if any critical, 1 if any warning,
/// 0 if clean.
pub fn alert_exit_code(alerts: &[Alert]) -> i32 {
    if alerts.iter().any(|a| a.severity == AlertSeverity::Critical) {
        2
    } else if alerts.is_empty() {
        0
    } else {
        1
    }
}
