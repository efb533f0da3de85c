//! Walks a hand-built order book to price liquidations of growing size.
//!
//! Shows the three core depth questions: what a forced sale of Q base units
//! costs relative to mid, how much size rests within a basis-point band, and
//! what happens when an order outgrows the ladder.
//!
//! Run with `cargo run --example book_slippage`.

use sar::{
    cumulative_depth, depth_at_bps, directional_slippage, walk_book_slippage, Direction,
    OrderBookSnapshot, PriceLevel, Side, SlippageOutcome,
};

fn main() {
    // A thin alt book around mid 250: bids fade fast below, asks are deeper.
    let bids = vec![
        PriceLevel::new(249.5, 120.0),
        PriceLevel::new(248.0, 300.0),
        PriceLevel::new(245.0, 500.0),
        PriceLevel::new(240.0, 900.0),
    ];
    let asks = vec![
        PriceLevel::new(250.5, 200.0),
        PriceLevel::new(252.0, 450.0),
        PriceLevel::new(255.0, 800.0),
        PriceLevel::new(260.0, 1500.0),
    ];
    let snapshot = OrderBookSnapshot::new("ALT", 1_700_000_000, None, bids, asks)
        .expect("levels are sorted and positive");
    let mid = snapshot.mid_price;
    println!("token ALT, mid {mid:.2}");
    println!(
        "resting size: {:.0} base units of bids, {:.0} of asks",
        snapshot.side(Side::Bid).total_size(),
        snapshot.side(Side::Ask).total_size()
    );
    println!(
        "quote notional within 100bp of mid: ${:.0} (bid) / ${:.0} (ask)",
        depth_at_bps(&snapshot, Side::Bid, 100.0),
        depth_at_bps(&snapshot, Side::Ask, 100.0),
    );
    println!(
        "bid size down to 245.00: {:.0}",
        cumulative_depth(snapshot.side(Side::Bid), 245.0)
    );
    println!();

    // Liquidating a long consumes bids; watch the cost grow with size.
    println!("{:>10}  {:>12}  outcome", "quantity", "slippage");
    for quantity in [50.0, 400.0, 1500.0, 5000.0] {
        let outcome = walk_book_slippage(snapshot.side(Side::Bid), quantity, mid)
            .expect("positive quantity");
        match outcome {
            SlippageOutcome::Filled(s) => {
                println!("{quantity:>10.0}  {:>11.4}%  filled", s * 100.0)
            }
            SlippageOutcome::Exhausted => {
                println!("{quantity:>10.0}  {:>12}  book exhausted", "-")
            }
        }
    }
    println!();

    // The same walk, direction-first: a long liquidation hits bids, a short
    // liquidation lifts asks.  The deeper ask side absorbs the order better.
    let q = 1200.0;
    for (direction, label) in [
        (Direction::LongLiquidation, "long  -> sell into bids"),
        (Direction::ShortLiquidation, "short -> buy from asks"),
    ] {
        let outcome = directional_slippage(&snapshot, direction, q).expect("valid walk");
        println!(
            "{label}: {q:.0} units cost {:.4}% of notional",
            outcome.value_or(1.0) * 100.0
        );
    }
}
