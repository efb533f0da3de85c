//! Black-box tests of the `sar` binary: subcommand contracts, exit codes,
//! output formats, config precedence, and the simulate -> replay loop.

use sar::cli::history::read_history;
use sar::cli::report::read_report;
use sar::cli::{EXIT_CLEAN, EXIT_CRITICAL, EXIT_INPUT_ERROR, EXIT_WARNING};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn sar_cmd(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sar"));
    cmd.args(args).env_remove("SAR_CONFIG");
    cmd
}

fn run(args: &[&str]) -> Run {
    run_cmd(sar_cmd(args))
}

fn run_cmd(mut cmd: Command) -> Run {
    let out = cmd.output().expect("binary spawns");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).expect("stdout is utf-8"),
        stderr: String::from_utf8(out.stderr).expect("stderr is utf-8"),
    }
}

/// Two tokens around mid 100 with four balanced providers each, deep and
/// tight enough that the default pipeline raises no alerts.
fn small_snapshot() -> &'static str {
    "timestamp,token,side,price,size,account_id\n\
     1700000000,AAA,bid,99.9,30,mm1\n\
     1700000000,AAA,bid,99.8,30,mm2\n\
     1700000000,AAA,bid,99.7,30,mm3\n\
     1700000000,AAA,bid,99.6,30,mm4\n\
     1700000000,AAA,ask,100.1,30,mm1\n\
     1700000000,AAA,ask,100.2,30,mm2\n\
     1700000000,AAA,ask,100.3,30,mm3\n\
     1700000000,AAA,ask,100.4,30,mm4\n\
     1700000000,BBB,bid,99.95,25,mm1\n\
     1700000000,BBB,bid,99.85,25,mm2\n\
     1700000000,BBB,bid,99.75,25,mm3\n\
     1700000000,BBB,bid,99.65,25,mm4\n\
     1700000000,BBB,ask,100.05,25,mm1\n\
     1700000000,BBB,ask,100.15,25,mm2\n\
     1700000000,BBB,ask,100.25,25,mm3\n\
     1700000000,BBB,ask,100.35,25,mm4\n"
}

fn small_oi() -> &'static str {
    "timestamp,token,open_interest\n\
     1699999000,AAA,40000\n\
     1699999000,BBB,30000\n"
}

fn write_small_inputs(dir: &Path) -> (String, String) {
    let snap = dir.join("snap.csv");
    let oi = dir.join("oi.csv");
    std::fs::write(&snap, small_snapshot()).unwrap();
    std::fs::write(&oi, small_oi()).unwrap();
    (snap.to_str().unwrap().to_string(), oi.to_str().unwrap().to_string())
}

#[test]
fn compute_renders_all_formats() {
    let dir = tempfile::tempdir().unwrap();
    let (snap, oi) = write_small_inputs(dir.path());

    let json = run(&["compute", "--snapshot", &snap, "--oi", &oi]);
    assert_eq!(json.code, EXIT_CLEAN, "stderr: {}", json.stderr);
    let json_path = dir.path().join("report.json");
    std::fs::write(&json_path, &json.stdout).unwrap();
    let doc = read_report(&json_path).expect("compute output parses back");
    assert_eq!(doc.n_tokens, 2);
    assert_eq!(doc.tokens.len(), 2);
    assert_eq!(doc.tokens[0].token, "AAA");
    assert_eq!(doc.tokens[1].token, "BBB");
    assert!((doc.alpha - 0.95).abs() < 1e-12, "default alpha, got {}", doc.alpha);
    assert!(doc.tokens.iter().all(|t| t.n_eff.is_some() && t.cr_1.is_some()));

    let csv = run(&["compute", "--snapshot", &snap, "--oi", &oi, "--format", "csv"]);
    assert_eq!(csv.code, EXIT_CLEAN);
    let lines: Vec<&str> = csv.stdout.lines().collect();
    assert_eq!(lines.len(), 3, "header plus one row per token:\n{}", csv.stdout);
    assert!(lines[0].starts_with("token,open_interest,"));

    let text = run(&["compute", "--snapshot", &snap, "--oi", &oi, "--format", "text"]);
    assert_eq!(text.code, EXIT_CLEAN);
    assert!(text.stdout.contains("SaR"), "text report:\n{}", text.stdout);

    // --out writes the same bytes the bare run printed.
    let out_path = dir.path().join("out.json");
    let with_out =
        run(&["compute", "--snapshot", &snap, "--oi", &oi, "--out", out_path.to_str().unwrap()]);
    assert_eq!(with_out.code, EXIT_CLEAN);
    assert!(with_out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), json.stdout);
}

#[test]
fn exit_codes_follow_severity() {
    let dir = tempfile::tempdir().unwrap();

    let fixture = |sar: f64| {
        format!(
            r#"{{"timestamp": 1700000000, "alpha": 0.95, "sar": {sar}, "esar": {sar},
               "tsar_dollars": 1000.0, "weighted_sar": {sar}, "n_tokens": 1,
               "tail_oi_share": 1.0, "tail_tokens": [], "flags": [], "tokens": []}}"#
        )
    };

    let clean = dir.path().join("clean.json");
    std::fs::write(&clean, fixture(0.01)).unwrap();
    let r = run(&["alerts", "--report", clean.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_CLEAN);
    assert!(r.stdout.is_empty(), "clean report printed: {}", r.stdout);

    let warn = dir.path().join("warn.json");
    std::fs::write(&warn, fixture(0.04)).unwrap();
    let r = run(&["alerts", "--report", warn.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_WARNING);
    assert_eq!(r.stdout.lines().count(), 1);
    assert!(r.stdout.starts_with("WARNING|sar_level_warn|"), "got: {}", r.stdout);

    let crit = dir.path().join("crit.json");
    std::fs::write(&crit, fixture(0.09)).unwrap();
    let r = run(&["alerts", "--report", crit.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_CRITICAL);
    assert_eq!(r.stdout.lines().count(), 2, "warn and crit: {}", r.stdout);

    // Input failures: missing file, malformed header, bad flag value.
    let r = run(&["compute", "--snapshot", "/nonexistent.csv", "--oi", "/nonexistent.csv"]);
    assert_eq!(r.code, EXIT_INPUT_ERROR);
    assert!(r.stderr.starts_with("error:"), "stderr: {}", r.stderr);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time,tok\n1,AAA\n").unwrap();
    let oi = dir.path().join("oi.csv");
    std::fs::write(&oi, small_oi()).unwrap();
    let r = run(&["compute", "--snapshot", bad.to_str().unwrap(), "--oi", oi.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_INPUT_ERROR);
    assert!(r.stderr.contains("header"), "stderr: {}", r.stderr);

    let r = run(&["alerts", "--report", clean.to_str().unwrap(), "--insurance-fund", "-5"]);
    assert_eq!(r.code, EXIT_INPUT_ERROR);

    let r = run(&["no-such-subcommand"]);
    assert_eq!(r.code, EXIT_INPUT_ERROR);

    // Help and version are clean exits.
    assert_eq!(run(&["--help"]).code, EXIT_CLEAN);
    assert_eq!(run(&["--version"]).code, EXIT_CLEAN);
}

#[test]
fn config_precedence_flag_env_default() {
    let dir = tempfile::tempdir().unwrap();
    let (snap, oi) = write_small_inputs(dir.path());
    let flag_cfg = dir.path().join("flag.cfg");
    std::fs::write(&flag_cfg, "alpha = 0.9\n").unwrap();
    let env_cfg = dir.path().join("env.cfg");
    std::fs::write(&env_cfg, "alpha = 0.8\n").unwrap();

    let alpha_of = |r: &Run| {
        let path = dir.path().join("probe.json");
        std::fs::write(&path, &r.stdout).unwrap();
        read_report(&path).unwrap().alpha
    };

    let mut cmd = sar_cmd(&["compute", "--snapshot", &snap, "--oi", &oi]);
    cmd.arg("--config").arg(&flag_cfg).env("SAR_CONFIG", &env_cfg);
    let r = run_cmd(cmd);
    assert_eq!(r.code, EXIT_CLEAN, "stderr: {}", r.stderr);
    assert!((alpha_of(&r) - 0.9).abs() < 1e-12, "flag config must win");

    let mut cmd = sar_cmd(&["compute", "--snapshot", &snap, "--oi", &oi]);
    cmd.env("SAR_CONFIG", &env_cfg);
    let r = run_cmd(cmd);
    assert_eq!(r.code, EXIT_CLEAN, "stderr: {}", r.stderr);
    assert!((alpha_of(&r) - 0.8).abs() < 1e-12, "env config must beat defaults");

    let r = run(&["compute", "--snapshot", &snap, "--oi", &oi]);
    assert!((alpha_of(&r) - 0.95).abs() < 1e-12, "defaults apply with no config");

    let broken = dir.path().join("broken.cfg");
    std::fs::write(&broken, "no_such_knob = 1\n").unwrap();
    let r = run(&[
        "compute",
        "--snapshot",
        &snap,
        "--oi",
        &oi,
        "--config",
        broken.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_INPUT_ERROR);
    assert!(r.stderr.contains("no_such_knob"), "stderr: {}", r.stderr);
}

#[test]
fn compute_append_bootstraps_and_skips_stale() {
    let dir = tempfile::tempdir().unwrap();
    let (snap, oi) = write_small_inputs(dir.path());
    let hist = dir.path().join("hist.csv");
    let hist_str = hist.to_str().unwrap();

    let r = run(&[
        "compute", "--snapshot", &snap, "--oi", &oi, "--history", hist_str, "--append",
    ]);
    assert_eq!(r.code, EXIT_CLEAN, "stderr: {}", r.stderr);
    let rows = read_history(&hist).unwrap();
    assert_eq!(rows.len(), 1, "first append creates the file with one row");
    assert_eq!(rows[0].timestamp, 1_700_000_000);
    assert!(rows[0].depth > 0.0);

    // Same snapshot again: the timestamp is not newer, so nothing lands.
    let r = run(&[
        "compute", "--snapshot", &snap, "--oi", &oi, "--history", hist_str, "--append",
    ]);
    assert_eq!(r.code, EXIT_CLEAN);
    assert!(r.stderr.contains("already covers"), "stderr: {}", r.stderr);
    assert_eq!(read_history(&hist).unwrap().len(), 1);
}

#[test]
fn compute_reports_trend_alert_from_history() {
    let dir = tempfile::tempdir().unwrap();
    let (snap, oi) = write_small_inputs(dir.path());
    let mut hist = String::from("timestamp,sar,esar,tsar_dollars,depth\n");
    for i in 0..26 {
        let ts = 1_600_000_000i64 + 3600 * i;
        let sar = 0.001 + 0.0001 * i as f64;
        writeln!(hist, "{ts},{sar},{sar},1000.00,5000.00").unwrap();
    }
    let hist_path = dir.path().join("rising.csv");
    std::fs::write(&hist_path, hist).unwrap();

    let r = run(&[
        "compute",
        "--snapshot",
        &snap,
        "--oi",
        &oi,
        "--history",
        hist_path.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_WARNING, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("WARNING|trend_persist|"), "stderr: {}", r.stderr);
    assert!(!r.stdout.contains("WARNING"), "alerts belong on stderr for compute");
}

#[test]
fn simulate_then_replay_reproduces_the_series() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let cfg = dir.path().join("engine.cfg");
    std::fs::write(&cfg, "alpha = 0.7\n").unwrap();
    let cfg_str = cfg.to_str().unwrap();

    let r = run(&[
        "simulate",
        "--seed",
        "5",
        "--steps",
        "12",
        "--tokens",
        "3",
        "--positions",
        "3",
        "--providers",
        "3",
        "--insurance-fund",
        "1000000",
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--record-snapshots",
        "--config",
        cfg_str,
    ]);
    assert_eq!(r.code, EXIT_CLEAN, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("wrote"), "summary missing: {}", r.stdout);

    let tsar_csv = std::fs::read_to_string(out_dir.join("tsar_5.csv")).unwrap();
    let mut sim_tsar: BTreeMap<i64, f64> = BTreeMap::new();
    for line in tsar_csv.lines().skip(1) {
        let (ts, v) = line.split_once(',').unwrap();
        sim_tsar.insert(ts.parse().unwrap(), v.parse().unwrap());
    }
    assert_eq!(sim_tsar.len(), 12, "one tsar row per step");

    // Zero rows come from steps whose books produced an empty universe
    // (every position liquidated); replay skips those snapshots entirely.
    let oi_csv = std::fs::read_to_string(out_dir.join("oi_5.csv")).unwrap();
    let mut oi_by_ts: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for line in oi_csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        oi_by_ts.entry(fields[0].parse().unwrap()).or_default().push(fields[2].parse().unwrap());
    }

    let hist = dir.path().join("replayed.csv");
    let r = run(&[
        "replay",
        "--snapshots",
        out_dir.join("snapshots").to_str().unwrap(),
        "--oi",
        out_dir.join("oi_5.csv").to_str().unwrap(),
        "--out",
        hist.to_str().unwrap(),
        "--rebuild",
        "--config",
        cfg_str,
    ]);
    assert_eq!(r.code, EXIT_CLEAN, "stderr: {}", r.stderr);
    assert!(r.stdout.starts_with("history "), "summary: {}", r.stdout);

    let rows = read_history(&hist).unwrap();
    assert!(!rows.is_empty(), "replay produced no rows");
    for row in &rows {
        let sim = sim_tsar.get(&row.timestamp).expect("replayed timestamp came from the run");
        assert!(
            (row.tsar_dollars - sim).abs() < 5e-3,
            "ts {}: replay {} vs scenario {}",
            row.timestamp,
            row.tsar_dollars,
            sim
        );
    }
    let replayed: Vec<i64> = rows.iter().map(|r| r.timestamp).collect();
    for ts in sim_tsar.keys() {
        if !replayed.contains(ts) {
            let oi = oi_by_ts.get(ts).expect("recorded OI for every step");
            assert!(
                oi.iter().all(|v| *v == 0.0),
                "ts {ts} missing from replay but open interest is not all zero: {oi:?}"
            );
        }
    }

    // A second replay without --rebuild appends nothing new.
    let before = std::fs::read_to_string(&hist).unwrap();
    let r = run(&[
        "replay",
        "--snapshots",
        out_dir.join("snapshots").to_str().unwrap(),
        "--oi",
        out_dir.join("oi_5.csv").to_str().unwrap(),
        "--out",
        hist.to_str().unwrap(),
        "--config",
        cfg_str,
    ]);
    assert_eq!(r.code, EXIT_CLEAN);
    assert!(r.stdout.contains("0 row(s) written"), "summary: {}", r.stdout);
    assert_eq!(std::fs::read_to_string(&hist).unwrap(), before);
}

#[test]
fn validate_prints_lags_and_both_granger_directions() {
    let dir = tempfile::tempdir().unwrap();
    let t = 200usize;
    // Deterministic driver and a lag-1 follower with a small wobble so the
    // regressions are well conditioned without pulling in an RNG.
    let x: Vec<f64> = (0..t).map(|i| (i as f64 * 0.7).sin() + 0.3 * (i as f64 * 0.13).cos()).collect();
    let mut y = vec![0.0f64; t];
    for i in 1..t {
        y[i] = 0.8 * x[i - 1] + 0.05 * (i as f64 * 0.41).sin();
    }
    let mut metric = String::from("timestamp,tsar\n");
    let mut outcome = String::from("timestamp,deficit\n");
    for i in 0..t {
        let ts = 1_700_000_000i64 + 60 * i as i64;
        writeln!(metric, "{ts},{}", x[i]).unwrap();
        writeln!(outcome, "{ts},{}", y[i]).unwrap();
    }
    let m_path = dir.path().join("metric.csv");
    let o_path = dir.path().join("outcome.csv");
    std::fs::write(&m_path, metric).unwrap();
    std::fs::write(&o_path, outcome).unwrap();

    let r = run(&[
        "validate",
        "--metric",
        m_path.to_str().unwrap(),
        "--outcome",
        o_path.to_str().unwrap(),
        "--max-lag",
        "3",
        "--granger-lag",
        "2",
    ]);
    assert_eq!(r.code, EXIT_CLEAN, "stderr: {}", r.stderr);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "lag,correlation");
    let lag_lines = &lines[1..8];
    let lags: Vec<i64> =
        lag_lines.iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(lags, vec![-3, -2, -1, 0, 1, 2, 3]);
    let corr_at = |lag: i64| -> f64 {
        lag_lines[(lag + 3) as usize].split(',').nth(1).unwrap().parse().unwrap()
    };
    assert!(corr_at(-1) > 0.9, "lag -1 correlation {} should be near 1", corr_at(-1));
    assert!(corr_at(-1) > corr_at(1));
    assert!(lines[8].starts_with("granger metric->outcome: F="));
    assert!(lines[9].starts_with("granger outcome->metric: F="));
    let forward_p: f64 = lines[8].split("p=").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!(forward_p < 0.01, "forward p {forward_p} should be small");
}

#[test]
fn alerts_from_raw_snapshot_matches_report_path() {
    let dir = tempfile::tempdir().unwrap();
    let (snap, oi) = write_small_inputs(dir.path());

    // Compute a report, then feed it back; both alert paths must agree.
    let computed = run(&["compute", "--snapshot", &snap, "--oi", &oi]);
    assert_eq!(computed.code, EXIT_CLEAN);
    let report_path = dir.path().join("report.json");
    std::fs::write(&report_path, &computed.stdout).unwrap();

    let from_report = run(&["alerts", "--report", report_path.to_str().unwrap()]);
    let from_snapshot = run(&["alerts", "--snapshot", &snap, "--oi", &oi]);
    assert_eq!(from_report.code, from_snapshot.code);
    assert_eq!(from_report.stdout, from_snapshot.stdout);

    let both = run(&[
        "alerts",
        "--report",
        report_path.to_str().unwrap(),
        "--snapshot",
        &snap,
    ]);
    assert_eq!(both.code, EXIT_INPUT_ERROR, "--report and --snapshot are exclusive");
}
