//! Sizes an insurance fund two ways and compares the answers.
//!
//! The backward-looking route takes realized per-step deficits from seeded
//! stress scenarios and picks the quantile optimum implied by the cost of
//! reserved capital versus the social cost of unbacked losses.  The
//! forward-looking route is a multiple of today's tail slippage dollars.
//!
//! Run with `cargo run --example insurance_sizing`.

use sar::{
    build_shock_path, build_world, optimal_if_from_deficits, run_stress_scenario,
    sar_implied_if, CapitalParams, SaRParams, ScenarioOptions, ShockConfig, WorldConfig,
};

fn main() {
    // Harvest a deficit sample across independent seeded scenarios.
    let mut deficits = Vec::new();
    let mut peak_tsar = 0.0_f64;
    for seed in 0..10u64 {
        let world = build_world(&WorldConfig { insurance_fund: 0.0, seed, ..WorldConfig::default() })
            .expect("valid world");
        let shocks = build_shock_path(&ShockConfig {
            steps: 48,
            calm_steps: 16,
            calm_vol: 0.004,
            stress_vol: 0.025,
            stress_drift: -0.01,
            seed: seed + 1000,
        });
        let options = ScenarioOptions {
            eta_depth_decay: 30.0,
            vol_memory: 0.5,
            ..ScenarioOptions::default()
        };
        let params = SaRParams { alpha: 0.7, ..SaRParams::default() };
        let result =
            run_stress_scenario(&world, &shocks, &options, &params).expect("valid scenario");
        deficits.extend(result.deficit_series.values());
        peak_tsar = result
            .tsar_series
            .values()
            .into_iter()
            .fold(peak_tsar, f64::max);
    }
    let steps = deficits.len();
    let worst = deficits.iter().fold(0.0_f64, |a, d| a.max(*d));
    let zero_steps = deficits.iter().filter(|d| **d == 0.0).count();
    println!("sample: {steps} scenario steps, worst step deficit ${worst:.0}");
    println!(
        "        {zero_steps} steps ({:.0}%) settled no deficit at all",
        100.0 * zero_steps as f64 / steps as f64
    );
    println!();

    // Cheaper capital or costlier defaults push the optimum up the tail.
    println!("{:>12} {:>10} {:>14}", "capital cost", "quantile", "optimal fund");
    for r in [0.05, 0.02, 0.005] {
        let params = CapitalParams {
            opportunity_cost_r: r,
            social_cost_kappa: 1.0,
            c_deficit: 2.0,
        };
        let sizing = optimal_if_from_deficits(&deficits, &params).expect("non-empty sample");
        println!(
            "{:>11.1}% {:>9.3} {:>13.0}",
            r * 100.0,
            1.0 - r / params.social_cost_kappa,
            sizing.amount
        );
    }
    println!();

    // The forward-looking floor needs no loss history, only today's tail.
    println!("peak tail slippage dollars across scenarios: ${peak_tsar:.0}");
    for c in [1.5, 2.0, 3.0] {
        println!("  {c:.1}x multiple -> ${:.0}", sar_implied_if(peak_tsar, c));
    }
}
