//! Rebuilds a metric history from an archive of raw snapshot files.
//!
//! Writes a small snapshot archive (one CSV per timestamp, named
//! `book_<unix>.csv`) plus an open-interest table into a temp directory,
//! replays the archive through the pipeline into an append-only history
//! file, and reads the history back for trend and depth context.
//!
//! Run with `cargo run --example replay_history`.

use sar::cli::config::EngineConfig;
use sar::cli::history::{
    read_history, replay_history, trend_persist_hours, ReplayOptions,
};
use std::fmt::Write as _;

fn main() {
    let dir = std::env::temp_dir().join(format!("sar_replay_example_{}", std::process::id()));
    let snap_dir = dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir).expect("temp dir is writable");

    // Three hourly snapshots of one token; the book thins out over time.
    let mut oi = String::from("timestamp,token,open_interest\n");
    for (hour, depth_scale) in [(0i64, 1.0f64), (1, 0.8), (2, 0.5)] {
        let ts = 1_700_000_000 + 3600 * hour;
        let mut csv = String::from("timestamp,token,side,price,size,account_id\n");
        for k in 1..=40 {
            let size = 25.0 * depth_scale;
            let bid = 100.0 - 0.05 * k as f64;
            let ask = 100.0 + 0.05 * k as f64;
            let account = format!("mm{}", k % 4);
            writeln!(csv, "{ts},ALT,bid,{bid},{size},{account}").unwrap();
            writeln!(csv, "{ts},ALT,ask,{ask},{size},{account}").unwrap();
        }
        std::fs::write(snap_dir.join(format!("book_{ts}.csv")), csv).expect("writable");
        writeln!(oi, "{ts},ALT,{}", 150_000.0).unwrap();
    }
    let oi_path = dir.join("oi.csv");
    std::fs::write(&oi_path, oi).expect("writable");

    let engine = EngineConfig::default();
    let out = dir.join("history.csv");
    let summary = replay_history(
        &snap_dir,
        &oi_path,
        &engine,
        &out,
        &ReplayOptions { rebuild: true, ..ReplayOptions::default() },
    )
    .expect("archive replays");
    println!(
        "replayed {} snapshot file(s): {} row(s) written, {} stale skipped",
        summary.rows.len(),
        summary.appended,
        summary.skipped_stale
    );
    for d in &summary.diagnostics {
        println!("note: {d}");
    }
    println!();

    let rows = read_history(&out).expect("file just written");
    println!("{:>12} {:>9} {:>9} {:>12} {:>10}", "timestamp", "sar", "esar", "tsar $", "depth");
    for r in &rows {
        println!(
            "{:>12} {:>8.4}% {:>8.4}% {:>12.2} {:>10.2}",
            r.timestamp,
            r.sar * 100.0,
            r.esar * 100.0,
            r.tsar_dollars,
            r.depth
        );
    }
    println!();
    if let Some(h) = trend_persist_hours(&rows) {
        println!("slippage has been rising for {h:.1}h as the book thinned");
    }

    std::fs::remove_dir_all(&dir).ok();
}
