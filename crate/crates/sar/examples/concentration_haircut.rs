//! Measures how concentrated a book's liquidity is and prices the risk in.
//!
//! Builds a synthetic constant-density book whose resting size is split
//! across a few provider accounts, extracts notional-weighted shares, and
//! shows the chain: shares -> HHI / effective provider count / top-k ratios
//! -> withdrawal stress per provider -> multiplicative haircut on slippage.
//!
//! Run with `cargo run --example concentration_haircut`.

use sar::{
    adjusted_slippage, concentration_haircut, concentration_stats, generate_synthetic_book,
    provider_shares, walk_book_slippage, withdrawal_slippage, Direction, HaircutParams,
    ProviderShares, Side, SyntheticBookConfig,
};

fn main() {
    // One dominant desk, one mid-size, three small.
    let weights = ProviderShares::new(vec![
        ("alpha-desk".to_string(), 0.45),
        ("beta-cap".to_string(), 0.25),
        ("gamma".to_string(), 0.12),
        ("delta".to_string(), 0.10),
        ("epsilon".to_string(), 0.08),
    ])
    .expect("weights sum to one");

    let snapshot = generate_synthetic_book(&SyntheticBookConfig {
        token: "ALT".to_string(),
        timestamp: 1_700_000_000,
        mid: 100.0,
        density: 2_500.0,
        depth_span: 4.0,
        level_spacing: 0.01,
        provider_weights: weights,
        seed: 11,
    })
    .expect("valid book config");

    let shares = provider_shares(snapshot.side(Side::Bid), snapshot.mid_price, None)
        .expect("every level is attributed");
    let stats = concentration_stats(&shares, 3);
    println!("provider shares (bid side):");
    for (account, w) in shares.shares() {
        println!("  {account:<12} {:>6.2}%", w * 100.0);
    }
    println!("hhi          : {:.4}", stats.hhi);
    println!("n_eff        : {:.2} effective providers", stats.n_eff);
    println!("cr_1 / cr_3  : {:.2}% / {:.2}%", stats.cr_1 * 100.0, stats.cr_k[2] * 100.0);
    println!();

    // Withdrawal stress: re-walk the same liquidation with each provider's
    // levels stripped.  The dominant desk leaving nearly doubles the cost.
    let quantity = 4_000.0;
    let base = walk_book_slippage(snapshot.side(Side::Bid), quantity, snapshot.mid_price)
        .expect("valid walk")
        .filled()
        .expect("book covers the base walk");
    println!("base slippage for {quantity:.0} units: {:.4}%", base * 100.0);
    println!("{:<12}  {:>10}  {:>8}", "withdrawn", "slippage", "ratio");
    for (account, _) in shares.shares() {
        let stressed =
            withdrawal_slippage(&snapshot, account, Direction::LongLiquidation, quantity)
                .expect("known provider")
                .value_or(1.0);
        println!("{account:<12}  {:>9.4}%  {:>7.3}x", stressed * 100.0, stressed / base);
    }
    println!();

    // The haircut folds both effects into one multiplier on raw slippage.
    let params = HaircutParams::default();
    let haircut = concentration_haircut(&stats, &params);
    println!(
        "haircut with targets (n_target {:.0}, cr1 threshold {:.0}%): {:.1}%",
        params.n_target,
        params.cr1_thresh * 100.0,
        haircut * 100.0
    );
    println!(
        "raw {:.4}% -> adjusted {:.4}%",
        base * 100.0,
        adjusted_slippage(base, haircut) * 100.0
    );
}
