//! Runs one seeded liquidation-cascade scenario and prints its ledger.
//!
//! A calm regime hands over to a stressed one; every step realizes the
//! shared shock on each token's mark, regenerates books at volatility-decayed
//! depth, measures tail slippage dollars on the fresh books, liquidates
//! under-margined positions into them, and settles the resulting deficits
//! against a pooled insurance fund.
//!
//! Run with `cargo run --example stress_scenario`.

use sar::{
    build_shock_path, build_world, run_stress_scenario, SaRParams, ScenarioOptions,
    ShockConfig, WorldConfig,
};

fn main() {
    let world = build_world(&WorldConfig {
        n_tokens: 8,
        positions_per_token: 4,
        providers_per_token: 4,
        insurance_fund: 8_000.0,
        seed: 7,
        ..WorldConfig::default()
    })
    .expect("valid world");
    let shocks = build_shock_path(&ShockConfig {
        steps: 48,
        calm_steps: 16,
        calm_vol: 0.004,
        stress_vol: 0.025,
        stress_drift: -0.01,
        seed: 1007,
    });
    let options = ScenarioOptions {
        eta_depth_decay: 30.0,
        vol_memory: 0.5,
        step_secs: 3600,
        start_timestamp: 1_700_000_000,
        ..ScenarioOptions::default()
    };
    let params = SaRParams { alpha: 0.7, ..SaRParams::default() };
    let result = run_stress_scenario(&world, &shocks, &options, &params).expect("valid scenario");

    println!(
        "{:>4} {:>11} {:>12} {:>12} {:>12} {:>12}",
        "step", "timestamp", "tsar $", "deficit $", "absorbed $", "residual $"
    );
    for (i, ((ts, tsar), settlement)) in result
        .tsar_series
        .points()
        .iter()
        .zip(&result.settlements)
        .enumerate()
    {
        let (_, deficit) = result.deficit_series.points()[i];
        // Print the calm/stress boundary and any step that settled losses.
        if i == 0 || i == 15 || i == 16 || deficit > 0.0 {
            println!(
                "{i:>4} {ts:>11} {tsar:>12.0} {deficit:>12.0} {:>12.0} {:>12.0}",
                settlement.absorbed, settlement.adl_residual
            );
        }
    }
    println!();
    println!("liquidations     : {}", result.liquidation_count);
    println!("total deficit    : ${:.0}", result.total_deficit);
    println!("fund absorbed    : ${:.0}", result.insurance_absorbed);
    println!("adl residual     : ${:.0}", result.adl_residual_total);
    println!("final fund       : ${:.0}", result.final_insurance_fund);
    if !result.flags.is_empty() {
        println!("flags            : {}", result.flags.join("; "));
    }
}
