//! Evaluates the alert rules against a computed report plus recent history.
//!
//! Library variant of `sar alerts`: run the pipeline on a deliberately
//! stressed universe, wrap recent history into an alert context (rising
//! trend, falling depth, fund size), and print the fired alerts in the same
//! pipe-delimited wire format the binary emits.
//!
//! Run with `cargo run --example alert_monitoring`.

use sar::cli::alerts::{alert_exit_code, evaluate_alerts, AlertContext, AlertThresholds};
use sar::cli::history::{depth_window, trend_persist_hours, HistoryRow};
use sar::{
    generate_synthetic_book, run_pipeline, ProviderShares, SaRParams, SyntheticBookConfig,
    TokenInput,
};

fn main() {
    // Two healthy books and one thin, dominated one.
    let universe: [(&str, f64, f64, &[(&str, f64)]); 3] = [
        ("BTC", 4_000.0, 900e6, &[("a", 0.25), ("b", 0.25), ("c", 0.25), ("d", 0.25)]),
        ("ETH", 2_000.0, 500e6, &[("a", 0.3), ("b", 0.3), ("c", 0.2), ("d", 0.2)]),
        ("PUMP", 220.0, 90e6, &[("whale", 0.8), ("e", 0.2)]),
    ];
    let mut inputs = Vec::new();
    for (i, (token, density, oi, weights)) in universe.into_iter().enumerate() {
        let mid = 1_000.0;
        let shares = ProviderShares::new(
            weights.iter().map(|(a, w)| (a.to_string(), *w)).collect(),
        )
        .expect("weights sum to one");
        let snapshot = generate_synthetic_book(&SyntheticBookConfig {
            token: token.to_string(),
            timestamp: 1_700_090_000,
            mid,
            density,
            depth_span: mid * 0.05,
            level_spacing: mid * 0.0005,
            provider_weights: shares,
            seed: i as u64,
        })
        .expect("valid book config");
        inputs.push(TokenInput::new(snapshot, oi));
    }
    let params = SaRParams { alpha: 0.5, ..SaRParams::default() };
    let (report, records) = run_pipeline(&inputs, &params).expect("non-empty universe");
    println!(
        "report: sar {:.3}%, tsar ${:.0}, {} tokens",
        report.sar * 100.0,
        report.tsar_dollars,
        report.n_tokens
    );

    // 30 hours of strictly rising slippage and a depth collapse at the end.
    let history: Vec<HistoryRow> = (0..31)
        .map(|i| HistoryRow {
            timestamp: 1_700_000_000 + 3600 * i,
            sar: 0.02 + 0.001 * i as f64,
            esar: 0.025 + 0.001 * i as f64,
            tsar_dollars: 1e6 + 1e5 * i as f64,
            depth: if i == 30 { 5_000.0 } else { 12_000.0 },
        })
        .collect();
    let (current_depth, prior_depth_12h) = depth_window(&history, 12 * 3600);
    let context = AlertContext {
        insurance_fund: Some(400_000.0),
        trend_persist_hours: trend_persist_hours(&history),
        current_depth,
        prior_depth_12h,
    };

    let alerts = evaluate_alerts(&report, &records, &AlertThresholds::default(), &context);
    println!();
    if alerts.is_empty() {
        println!("no alerts");
    } else {
        println!("severity|rule|token|observed|threshold|timestamp");
        for alert in &alerts {
            println!("{}", alert.render());
        }
    }
    println!();
    println!("process exit code would be {}", alert_exit_code(&alerts));
}
