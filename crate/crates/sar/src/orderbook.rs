//! Order-book snapshots and the liquidation book walk.
//!
//! A snapshot is one token's resting liquidity at an instant: bid and ask
//! ladders ordered best-to-worst, an optional per-level provider account, and
//! a mid price.  The central operation is [`walk_book_slippage`]: fill a
//! liquidation of a given base-asset size against successive levels and
//! report the volume-weighted shortfall versus mid as a fraction of the
//! trade's mid-price notional.

use thiserror::Error;

/// Which ladder a level rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bid,
    Ask,
}

/// Which way a forced close trades: liquidating a long sells into bids,
/// liquidating a short buys from asks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LongLiquidation,
    ShortLiquidation,
}

impl Direction {
    /// The ladder this direction consumes.
    pub fn walked_side(self) -> Side {
        match self {
            Direction::LongLiquidation => Side::Bid,
            Direction::ShortLiquidation => Side::Ask,
        }
    }
}

/// One resting level: a price, the base-asset size at it, and optionally the
/// provider account that posted it.  Duplicate prices are allowed so one
/// price point can be split across providers.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceLevel {
    pub price: f64,
    pub size: f64,
    pub account_id: Option<String>,
}

impl PriceLevel {
    pub fn new(price: f64, size: f64) -> Self {
        PriceLevel { price, size, account_id: None }
    }

    pub fn with_account(price: f64, size: f64, account_id: &str) -> Self {
        PriceLevel { price, size, account_id: Some(account_id.to_string()) }
    }
}

/// One ladder, validated best-to-worst: bids non-increasing in price, asks
/// non-decreasing.  Equal prices keep their input order.
#[derive(Debug, Clone, PartialEq)]
pub struct BookSide {
    side: Side,
    levels: Vec<PriceLevel>,
}

#[derive(Debug, Error, PartialEq)]
pub enum BookError {
    #[error("level {index} has non-positive or non-finite price/size ({price}, {size})")]
    BadLevel { index: usize, price: f64, size: f64 },
    #[error("{side:?} levels not ordered best-to-worst at index {index}")]
    UnsortedLevels { side: Side, index: usize },
    #[error("crossed book: best bid {best_bid} above best ask {best_ask}")]
    CrossedBook { best_bid: f64, best_ask: f64 },
    #[error("mid price {mid} outside [best bid {best_bid}, best ask {best_ask}]")]
    MidOutsideSpread { mid: f64, best_bid: f64, best_ask: f64 },
    #[error("mid price unavailable: needs both sides or an explicit positive mid")]
    MidUnavailable,
    #[error("non-positive walk quantity {0}")]
    BadQuantity(f64),
    #[error("non-positive mid price {0}")]
    BadMid(f64),
}

impl BookSide {
    /// Validates ordering and level positivity.
    pub fn new(side: Side, levels: Vec<PriceLevel>) -> Result<Self, BookError> {
        for (i, lvl) in levels.iter().enumerate() {
            if !(lvl.price > 0.0) || !(lvl.size > 0.0) || !lvl.price.is_finite() || !lvl.size.is_finite() {
                return Err(BookError::BadLevel { index: i, price: lvl.price, size: lvl.size });
            }
        }
        for i in 1..levels.len() {
            let ok = match side {
                Side::Bid => levels[i].price <= levels[i - 1].price,
                Side::Ask => levels[i].price >= levels[i - 1].price,
            };
            if !ok {
                return Err(BookError::UnsortedLevels { side, index: i });
            }
        }
        Ok(BookSide { side, levels })
    }

    pub fn empty(side: Side) -> Self {
        BookSide { side, levels: Vec::new() }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn levels(&self) -> &[PriceLevel] {
        &self.levels
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Price of the best (first) level, if any.
    pub fn best_price(&self) -> Option<f64> {
        self.levels.first().map(|l| l.price)
    }

    /// Total resting size in base units.
    pub fn total_size(&self) -> f64 {
        // fold, not sum: an empty f64 sum is -0.0.
        self.levels.iter().map(|l| l.size).fold(0.0, |a, s| a + s)
    }

    /// This ladder with every level of `account_id` removed.
    pub fn without_account(&self, account_id: &str) -> BookSide {
        BookSide {
            side: self.side,
            levels: self
                .levels
                .iter()
                .filter(|l| l.account_id.as_deref() != Some(account_id))
                .cloned()
                .collect(),
        }
    }
}

/// One token's book at an instant.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderBookSnapshot {
    pub token: String,
    pub timestamp: i64,
    pub mid_price: f64,
    pub bids: BookSide,
    pub asks: BookSide,
    /// True iff every level on both sides carries a provider account.
    pub attributed: bool,
}

impl OrderBookSnapshot {
    /// Builds and validates a snapshot.  With `mid` absent it is derived as
    /// (best_bid + best_ask) / 2, which requires both sides to be non-empty.
    /// Crossed books and mids outside the spread are rejected.
    pub fn new(
        token: &str,
        timestamp: i64,
        mid: Option<f64>,
        bids: Vec<PriceLevel>,
        asks: Vec<PriceLevel>,
    ) -> Result<Self, BookError> {
        let bids = BookSide::new(Side::Bid, bids)?;
        let asks = BookSide::new(Side::Ask, asks)?;
        if let (Some(bb), Some(ba)) = (bids.best_price(), asks.best_price()) {
            if bb > ba {
                return Err(BookError::CrossedBook { best_bid: bb, best_ask: ba });
            }
        }
        let mid_price = match mid {
            Some(m) if m > 0.0 && m.is_finite() => m,
            Some(_) => return Err(BookError::MidUnavailable),
            None => match (bids.best_price(), asks.best_price()) {
                (Some(bb), Some(ba)) => (bb + ba) / 2.0,
                _ => return Err(BookError::MidUnavailable),
            },
        };
        if let (Some(bb), Some(ba)) = (bids.best_price(), asks.best_price()) {
            if mid_price < bb || mid_price > ba {
                return Err(BookError::MidOutsideSpread { mid: mid_price, best_bid: bb, best_ask: ba });
            }
        }
        let attributed = bids.levels().iter().chain(asks.levels()).all(|l| l.account_id.is_some())
            && !(bids.is_empty() && asks.is_empty());
        Ok(OrderBookSnapshot { token: token.to_string(), timestamp, mid_price, bids, asks, attributed })
    }

    pub fn side(&self, side: Side) -> &BookSide {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }
}

/// Result of a book walk: either the slippage fraction, or a marker that the
/// ladder ran out of size.  Exhaustion is a distinct state, not an infinity;
/// callers decide what ceiling to substitute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlippageOutcome {
    Filled(f64),
    Exhausted,
}

impl SlippageOutcome {
    pub fn is_exhausted(&self) -> bool {
        matches!(self, SlippageOutcome::Exhausted)
    }

    /// The slippage fraction, substituting `ceiling` when exhausted.
    pub fn value_or(&self, ceiling: f64) -> f64 {
        match *self {
            SlippageOutcome::Filled(v) => v,
            SlippageOutcome::Exhausted => ceiling,
        }
    }

    /// The slippage fraction, if the walk filled.
    pub fn filled(&self) -> Option<f64> {
        match *self {
            SlippageOutcome::Filled(v) => Some(v),
            SlippageOutcome::Exhausted => None,
        }
    }
}

/// Fills `quantity` base units against the ladder and returns the
/// volume-weighted shortfall versus `mid_price`, as a fraction of the
/// mid-price notional `quantity * mid_price`.
///
/// Each filled unit at level price `p` contributes `mid - p` on bids and
/// `p - mid` on asks, so fills at-or-worse than mid contribute positively and
/// fills strictly better than mid (crossed input data) contribute negatively.
/// If the ladder holds less than `quantity` in total the walk reports
/// [`SlippageOutcome::Exhausted`].
pub fn walk_book_slippage(
    side: &BookSide,
    quantity: f64,
    mid_price: f64,
) -> Result<SlippageOutcome, BookError> {
    if !(quantity > 0.0) || !quantity.is_finite() {
        return Err(BookError::BadQuantity(quantity));
    }
    if !(mid_price > 0.0) || !mid_price.is_finite() {
        return Err(BookError::BadMid(mid_price));
    }
    let mut remaining = quantity;
    let mut total_cost = 0.0;
    for level in side.levels() {
        if remaining <= 0.0 {
            break;
        }
        let fill = level.size.min(remaining);
        let per_unit = match side.side() {
            Side::Bid => mid_price - level.price,
            Side::Ask => level.price - mid_price,
        };
        total_cost += fill * per_unit;
        remaining -= fill;
    }
    if remaining > 0.0 {
        return Ok(SlippageOutcome::Exhausted);
    }
    Ok(SlippageOutcome::Filled(total_cost / (quantity * mid_price)))
}

/// [`walk_book_slippage`] on the ladder a forced close in `direction` consumes.
pub fn directional_slippage(
    snapshot: &OrderBookSnapshot,
    direction: Direction,
    quantity: f64,
) -> Result<SlippageOutcome, BookError> {
    walk_book_slippage(snapshot.side(direction.walked_side()), quantity, snapshot.mid_price)
}

/// Total base-asset size resting at-or-better than `price_bound`:
/// bids at-or-above it, asks at-or-below it.
pub fn cumulative_depth(side: &BookSide, price_bound: f64) -> f64 {
    side.levels()
        .iter()
        .filter(|l| match side.side() {
            Side::Bid => l.price >= price_bound,
            Side::Ask => l.price <= price_bound,
        })
        .map(|l| l.size)
        .fold(0.0, |a, s| a + s)
}

/// Quote-currency notional (price times size) resting within `bps` basis
/// points of the snapshot mid on one side.
pub fn depth_at_bps(snapshot: &OrderBookSnapshot, side: Side, bps: f64) -> f64 {
    let mid = snapshot.mid_price;
    let band = mid * bps / 10_000.0;
    snapshot
        .side(side)
        .levels()
        .iter()
        .filter(|l| match side {
            Side::Bid => l.price >= mid - band,
            Side::Ask => l.price <= mid + band,
        })
        .map(|l| l.price * l.size)
        .fold(0.0, |a, v| a + v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bids(levels: &[(f64, f64)]) -> BookSide {
        BookSide::new(Side::Bid, levels.iter().map(|&(p, s)| PriceLevel::new(p, s)).collect())
            .unwrap()
    }

    fn asks(levels: &[(f64, f64)]) -> BookSide {
        BookSide::new(Side::Ask, levels.iter().map(|&(p, s)| PriceLevel::new(p, s)).collect())
            .unwrap()
    }

    #[test]
    fn walk_single_level_fill() {
        // 100 base units into one bid level 3% below mid: cost 100 * 1800 =
        // 180_000 over notional 6_000_000 = 0.03.
        let side = bids(&[(58_200.0, 100.0)]);
        let got = walk_book_slippage(&side, 100.0, 60_000.0).unwrap();
        match got {
            SlippageOutcome::Filled(v) => assert!((v - 0.03).abs() < 1e-12, "got {v}"),
            SlippageOutcome::Exhausted => panic!("unexpected exhaustion"),
        }
    }

    #[test]
    fn walk_two_levels_partial_second() {
        // 5 units at 99 (1 below mid) + 5 of the 10 at 98 (2 below mid):
        // cost 5*1 + 5*2 = 15 over 10*100 -> 0.015.
        let side = bids(&[(99.0, 5.0), (98.0, 10.0)]);
        let got = walk_book_slippage(&side, 10.0, 100.0).unwrap();
        assert_eq!(got, SlippageOutcome::Filled(0.015));
    }

    #[test]
    fn walk_reports_exhaustion() {
        let side = bids(&[(99.0, 5.0)]);
        let got = walk_book_slippage(&side, 6.0, 100.0).unwrap();
        assert!(got.is_exhausted());
        assert_eq!(got.value_or(1.0), 1.0);
        // Exactly consuming the ladder still fills: cost 5*1 over 5*100.
        let got = walk_book_slippage(&side, 5.0, 100.0).unwrap();
        assert_eq!(got.filled(), Some(0.01));
    }

    #[test]
    fn walk_empty_side_exhausts() {
        let side = BookSide::empty(Side::Bid);
        assert!(walk_book_slippage(&side, 1.0, 100.0).unwrap().is_exhausted());
    }

    #[test]
    fn ask_walk_mirrors_bid_walk() {
        let b = bids(&[(99.0, 5.0), (98.0, 10.0)]);
        let a = asks(&[(101.0, 5.0), (102.0, 10.0)]);
        let sb = walk_book_slippage(&b, 10.0, 100.0).unwrap().filled().unwrap();
        let sa = walk_book_slippage(&a, 10.0, 100.0).unwrap().filled().unwrap();
        assert!((sb - sa).abs() < 1e-15);
    }

    #[test]
    fn fills_better_than_mid_contribute_negatively() {
        // Crossed input data walked directly: a bid above mid offsets one
        // equally far below it.
        let side = bids(&[(101.0, 5.0), (99.0, 5.0)]);
        let got = walk_book_slippage(&side, 10.0, 100.0).unwrap().filled().unwrap();
        assert!(got.abs() < 1e-15);
    }

    #[test]
    fn walk_rejects_bad_inputs() {
        let side = bids(&[(99.0, 5.0)]);
        assert!(matches!(walk_book_slippage(&side, 0.0, 100.0), Err(BookError::BadQuantity(_))));
        assert!(matches!(walk_book_slippage(&side, -1.0, 100.0), Err(BookError::BadQuantity(_))));
        assert!(matches!(walk_book_slippage(&side, 1.0, 0.0), Err(BookError::BadMid(_))));
    }

    #[test]
    fn directional_walk_picks_the_right_ladder() {
        let snap = OrderBookSnapshot::new(
            "TOK",
            0,
            None,
            vec![PriceLevel::new(99.0, 10.0)],
            vec![PriceLevel::new(101.0, 10.0)],
        )
        .unwrap();
        assert_eq!(snap.mid_price, 100.0);
        let long = directional_slippage(&snap, Direction::LongLiquidation, 10.0).unwrap();
        let short = directional_slippage(&snap, Direction::ShortLiquidation, 10.0).unwrap();
        assert_eq!(long, SlippageOutcome::Filled(0.01));
        assert_eq!(short, SlippageOutcome::Filled(0.01));
        assert!(directional_slippage(&snap, Direction::LongLiquidation, 11.0).unwrap().is_exhausted());
    }

    #[test]
    fn cumulative_depth_at_or_better() {
        let a = asks(&[(101.0, 2.0), (102.0, 4.0)]);
        assert_eq!(cumulative_depth(&a, 101.5), 2.0);
        assert_eq!(cumulative_depth(&a, 102.0), 6.0);
        assert_eq!(cumulative_depth(&a, 100.0), 0.0);
        let b = bids(&[(99.0, 3.0), (98.0, 7.0)]);
        assert_eq!(cumulative_depth(&b, 98.5), 3.0);
        assert_eq!(cumulative_depth(&b, 0.0), 10.0);
    }

    #[test]
    fn depth_within_band() {
        let snap = OrderBookSnapshot::new(
            "TOK",
            0,
            Some(100.0),
            vec![PriceLevel::new(99.5, 10.0), PriceLevel::new(99.0, 10.0), PriceLevel::new(98.5, 10.0)],
            vec![PriceLevel::new(100.5, 1.0)],
        )
        .unwrap();
        // 100 bps band reaches down to 99.0: notional 99.5*10 + 99.0*10.
        let d = depth_at_bps(&snap, Side::Bid, 100.0);
        assert!((d - 1985.0).abs() < 1e-9);
        // A wide-open band covers the whole side.
        let all = depth_at_bps(&snap, Side::Bid, 1_000_000.0);
        assert!((all - (995.0 + 990.0 + 985.0)).abs() < 1e-9);
    }

    #[test]
    fn side_ordering_is_validated() {
        let err = BookSide::new(
            Side::Bid,
            vec![PriceLevel::new(98.0, 1.0), PriceLevel::new(99.0, 1.0)],
        )
        .unwrap_err();
        assert_eq!(err, BookError::UnsortedLevels { side: Side::Bid, index: 1 });
        let err = BookSide::new(
            Side::Ask,
            vec![PriceLevel::new(102.0, 1.0), PriceLevel::new(101.0, 1.0)],
        )
        .unwrap_err();
        assert_eq!(err, BookError::UnsortedLevels { side: Side::Ask, index: 1 });
        // Ties are allowed: one price split across two providers.
        let ok = BookSide::new(
            Side::Bid,
            vec![
                PriceLevel::with_account(99.0, 1.0, "a"),
                PriceLevel::with_account(99.0, 2.0, "b"),
            ],
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn levels_must_be_positive_and_finite() {
        for (p, s) in [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0), (f64::NAN, 1.0), (1.0, f64::INFINITY)] {
            let err = BookSide::new(Side::Bid, vec![PriceLevel::new(p, s)]).unwrap_err();
            assert!(matches!(err, BookError::BadLevel { .. }), "({p},{s}) -> {err:?}");
        }
    }

    #[test]
    fn snapshot_rejects_crossed_and_out_of_spread() {
        let err = OrderBookSnapshot::new(
            "TOK",
            0,
            None,
            vec![PriceLevel::new(101.0, 1.0)],
            vec![PriceLevel::new(100.0, 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, BookError::CrossedBook { .. }));
        let err = OrderBookSnapshot::new(
            "TOK",
            0,
            Some(105.0),
            vec![PriceLevel::new(99.0, 1.0)],
            vec![PriceLevel::new(101.0, 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, BookError::MidOutsideSpread { .. }));
    }

    #[test]
    fn snapshot_mid_derivation_needs_both_sides() {
        let err =
            OrderBookSnapshot::new("TOK", 0, None, vec![PriceLevel::new(99.0, 1.0)], vec![]).unwrap_err();
        assert_eq!(err, BookError::MidUnavailable);
        // An explicit mid makes a one-sided snapshot valid.
        let snap =
            OrderBookSnapshot::new("TOK", 0, Some(100.0), vec![PriceLevel::new(99.0, 1.0)], vec![])
                .unwrap();
        assert_eq!(snap.mid_price, 100.0);
    }

    #[test]
    fn attribution_flag_requires_every_level() {
        let full = OrderBookSnapshot::new(
            "TOK",
            0,
            None,
            vec![PriceLevel::with_account(99.0, 1.0, "a")],
            vec![PriceLevel::with_account(101.0, 1.0, "b")],
        )
        .unwrap();
        assert!(full.attributed);
        let partial = OrderBookSnapshot::new(
            "TOK",
            0,
            None,
            vec![PriceLevel::with_account(99.0, 1.0, "a")],
            vec![PriceLevel::new(101.0, 1.0)],
        )
        .unwrap();
        assert!(!partial.attributed);
    }

    #[test]
    fn without_account_drops_only_that_provider() {
        let side = BookSide::new(
            Side::Bid,
            vec![
                PriceLevel::with_account(99.0, 1.0, "a"),
                PriceLevel::with_account(99.0, 2.0, "b"),
                PriceLevel::with_account(98.0, 3.0, "a"),
            ],
        )
        .unwrap();
        let rest = side.without_account("a");
        assert_eq!(rest.levels().len(), 1);
        assert_eq!(rest.levels()[0].size, 2.0);
        assert_eq!(rest.total_size(), 2.0);
    }
}
