//! Provider concentration: who actually supplies the liquidity a forced
//! close would consume, and how much to penalize books that depend on a few
//! accounts.
//!
//! Shares are measured in quote notional (price times size) on the side a
//! liquidation would walk, optionally restricted to a basis-point band around
//! mid.  From the share vector come HHI, the effective provider count
//! `N_eff = 1/HHI`, and top-k ratios; from those comes a multiplicative
//! haircut on raw slippage.  [`withdrawal_slippage`] stress-tests the book
//! with one provider's levels removed outright.

use crate::orderbook::{
    walk_book_slippage, BookError, BookSide, Direction, OrderBookSnapshot, Side, SlippageOutcome,
};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConcentrationError {
    #[error("side has unattributed levels in scope; provider shares need account ids")]
    Unattributed,
    #[error("no attributed liquidity in scope")]
    NoProviders,
    #[error("provider {0:?} not present in the snapshot")]
    UnknownProvider(String),
    #[error("share weight {weight} for {account:?} outside (0, 1]")]
    BadWeight { account: String, weight: f64 },
    #[error("share weights sum to {0}, expected 1")]
    WeightSumMismatch(f64),
    #[error("duplicate account {0:?} in share vector")]
    DuplicateAccount(String),
    #[error(transparent)]
    Book(#[from] BookError),
}

/// Normalized liquidity shares per provider account, sorted largest-first
/// (ties broken by account id so ordering is reproducible).
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderShares {
    shares: Vec<(String, f64)>,
}

impl ProviderShares {
    /// Validates weights: each in (0, 1], unique accounts, summing to 1
    /// within 1e-9.
    pub fn new(mut shares: Vec<(String, f64)>) -> Result<Self, ConcentrationError> {
        let mut sum = 0.0;
        for (account, w) in &shares {
            if !(*w > 0.0 && *w <= 1.0) || !w.is_finite() {
                return Err(ConcentrationError::BadWeight { account: account.clone(), weight: *w });
            }
            sum += w;
        }
        if shares.is_empty() {
            return Err(ConcentrationError::NoProviders);
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConcentrationError::WeightSumMismatch(sum));
        }
        shares.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        let mut ids: Vec<&str> = shares.iter().map(|(a, _)| a.as_str()).collect();
        ids.sort_unstable();
        for pair in ids.windows(2) {
            if pair[0] == pair[1] {
                return Err(ConcentrationError::DuplicateAccount(pair[0].to_string()));
            }
        }
        Ok(ProviderShares { shares })
    }

    /// Share pairs, largest weight first.
    pub fn shares(&self) -> &[(String, f64)] {
        &self.shares
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn weight_of(&self, account: &str) -> Option<f64> {
        self.shares.iter().find(|(a, _)| a == account).map(|(_, w)| *w)
    }
}

/// Concentration summary of a share vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationStats {
    /// Herfindahl-Hirschman index, sum of squared shares, in [1/count, 1].
    pub hhi: f64,
    /// Effective provider count `1/HHI`.
    pub n_eff: f64,
    /// Largest single share.
    pub cr_1: f64,
    /// Cumulative top-m shares for m = 1..=k (k capped at provider count).
    pub cr_k: Vec<f64>,
    pub provider_count: usize,
}

impl ConcentrationStats {
    /// Stats reconstructed from summary values alone (`hhi = 1/n_eff`,
    /// provider count the smallest consistent integer).  Lets externally
    /// reported summaries flow through the haircut without a share vector.
    pub fn from_n_eff_cr1(n_eff: f64, cr_1: f64) -> Self {
        ConcentrationStats {
            hhi: 1.0 / n_eff,
            n_eff,
            cr_1,
            cr_k: vec![cr_1],
            provider_count: n_eff.ceil().max(1.0) as usize,
        }
    }
}

/// Haircut parameters: scarcity is penalized below `n_target` effective
/// providers, dominance above the `cr1_thresh` top-share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaircutParams {
    pub n_target: f64,
    pub cr1_thresh: f64,
    pub lambda_conc: f64,
    pub mu_dom: f64,
}

impl Default for HaircutParams {
    fn default() -> Self {
        HaircutParams { n_target: 15.0, cr1_thresh: 0.25, lambda_conc: 0.5, mu_dom: 0.3 }
    }
}

/// Notional-weighted provider shares on one ladder, optionally restricted to
/// levels within `within_bps` of `mid`.  Every in-scope level must carry an
/// account id.
pub fn provider_shares(
    side: &BookSide,
    mid: f64,
    within_bps: Option<f64>,
) -> Result<ProviderShares, ConcentrationError> {
    let in_scope = |price: f64| match within_bps {
        None => true,
        Some(bps) => {
            let band = mid * bps / 10_000.0;
            match side.side() {
                Side::Bid => price >= mid - band,
                Side::Ask => price <= mid + band,
            }
        }
    };
    let mut totals: Vec<(String, f64)> = Vec::new();
    let mut grand_total = 0.0;
    for level in side.levels() {
        if !in_scope(level.price) {
            continue;
        }
        let account = level.account_id.as_ref().ok_or(ConcentrationError::Unattributed)?;
        let notional = level.price * level.size;
        grand_total += notional;
        match totals.iter_mut().find(|(a, _)| a == account) {
            Some((_, t)) => *t += notional,
            None => totals.push((account.clone(), notional)),
        }
    }
    if totals.is_empty() || grand_total <= 0.0 {
        return Err(ConcentrationError::NoProviders);
    }
    for (_, t) in &mut totals {
        *t /= grand_total;
    }
    ProviderShares::new(totals)
}

/// HHI, effective provider count, and cumulative top-m ratios up to `k`.
pub fn concentration_stats(shares: &ProviderShares, k: usize) -> ConcentrationStats {
    let ws: Vec<f64> = shares.shares().iter().map(|(_, w)| *w).collect();
    let hhi: f64 = ws.iter().map(|w| w * w).sum();
    let capped = k.min(ws.len()).max(1);
    let mut cr_k = Vec::with_capacity(capped);
    let mut cum = 0.0;
    for w in ws.iter().take(capped) {
        cum += w;
        cr_k.push(cum);
    }
    ConcentrationStats { hhi, n_eff: 1.0 / hhi, cr_1: ws[0], cr_k, provider_count: ws.len() }
}

/// Slippage of the same walk with every level of `account_id` stripped from
/// the walked ladder.  The provider must appear somewhere in the snapshot;
/// holding no levels on the walked side makes the removal a no-op.  The
/// walked ladder must be fully attributed.
pub fn withdrawal_slippage(
    snapshot: &OrderBookSnapshot,
    account_id: &str,
    direction: Direction,
    quantity: f64,
) -> Result<SlippageOutcome, ConcentrationError> {
    let holds = |side: &BookSide| {
        side.levels().iter().any(|l| l.account_id.as_deref() == Some(account_id))
    };
    if !holds(&snapshot.bids) && !holds(&snapshot.asks) {
        return Err(ConcentrationError::UnknownProvider(account_id.to_string()));
    }
    let walked = snapshot.side(direction.walked_side());
    if walked.levels().iter().any(|l| l.account_id.is_none()) {
        return Err(ConcentrationError::Unattributed);
    }
    let residual = walked.without_account(account_id);
    Ok(walk_book_slippage(&residual, quantity, snapshot.mid_price)?)
}

/// Multiplicative haircut
/// `lambda * max(0, n_target/n_eff - 1) + mu * max(0, cr_1 - cr1_thresh)`.
pub fn concentration_haircut(stats: &ConcentrationStats, params: &HaircutParams) -> f64 {
    params.lambda_conc * (params.n_target / stats.n_eff - 1.0).max(0.0)
        + params.mu_dom * (stats.cr_1 - params.cr1_thresh).max(0.0)
}

/// Raw slippage scaled up by a haircut: `raw * (1 + haircut)`.
pub fn adjusted_slippage(raw: f64, haircut: f64) -> f64 {
    raw * (1.0 + haircut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orderbook::PriceLevel;

    fn attributed_snapshot() -> OrderBookSnapshot {
        OrderBookSnapshot::new(
            "TOK",
            0,
            None,
            vec![
                PriceLevel::with_account(99.0, 5.0, "a"),
                PriceLevel::with_account(98.0, 10.0, "b"),
            ],
            vec![PriceLevel::with_account(101.0, 5.0, "c")],
        )
        .unwrap()
    }

    #[test]
    fn shares_are_notional_weighted_and_sorted() {
        let snap = attributed_snapshot();
        let shares = provider_shares(&snap.bids, snap.mid_price, None).unwrap();
        // a: 99*5 = 495, b: 98*10 = 980, total 1475.
        assert_eq!(shares.shares()[0].0, "b");
        assert!((shares.weight_of("b").unwrap() - 980.0 / 1475.0).abs() < 1e-12);
        assert!((shares.weight_of("a").unwrap() - 495.0 / 1475.0).abs() < 1e-12);
        let total: f64 = shares.shares().iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shares_respect_the_band() {
        let side = BookSide::new(
            Side::Bid,
            vec![
                PriceLevel::with_account(99.5, 10.0, "a"),
                PriceLevel::with_account(99.0, 10.0, "b"),
                PriceLevel::with_account(98.5, 10.0, "c"),
            ],
        )
        .unwrap();
        let shares = provider_shares(&side, 100.0, Some(100.0)).unwrap();
        assert_eq!(shares.len(), 2);
        assert!((shares.weight_of("a").unwrap() - 995.0 / 1985.0).abs() < 1e-12);
        assert_eq!(shares.weight_of("c"), None);
        // A band that excludes everything is an error, as is an empty side.
        assert_eq!(
            provider_shares(&side, 100.0, Some(1.0)).unwrap_err(),
            ConcentrationError::NoProviders
        );
        assert_eq!(
            provider_shares(&BookSide::empty(Side::Bid), 100.0, None).unwrap_err(),
            ConcentrationError::NoProviders
        );
    }

    #[test]
    fn shares_require_attribution() {
        let side = BookSide::new(
            Side::Bid,
            vec![PriceLevel::with_account(99.0, 5.0, "a"), PriceLevel::new(98.0, 10.0)],
        )
        .unwrap();
        assert_eq!(
            provider_shares(&side, 100.0, None).unwrap_err(),
            ConcentrationError::Unattributed
        );
        // The unattributed level out of band no longer blocks.
        let shares = provider_shares(&side, 100.0, Some(100.0)).unwrap();
        assert_eq!(shares.len(), 1);
    }

    #[test]
    fn stats_on_a_known_vector() {
        let shares = ProviderShares::new(vec![
            ("p1".into(), 0.4),
            ("p2".into(), 0.3),
            ("p3".into(), 0.2),
            ("p4".into(), 0.1),
        ])
        .unwrap();
        let stats = concentration_stats(&shares, 2);
        assert!((stats.hhi - 0.30).abs() < 1e-12);
        assert!((stats.n_eff - 1.0 / 0.30).abs() < 1e-12);
        assert_eq!(stats.cr_1, 0.4);
        assert_eq!(stats.cr_k.len(), 2);
        assert!((stats.cr_k[1] - 0.7).abs() < 1e-12);
        assert_eq!(stats.provider_count, 4);
        // k beyond the provider count is capped.
        let stats = concentration_stats(&shares, 10);
        assert_eq!(stats.cr_k.len(), 4);
        assert!((stats.cr_k[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_shares_give_full_n_eff() {
        let shares = ProviderShares::new(
            (0..4).map(|i| (format!("p{i}"), 0.25)).collect(),
        )
        .unwrap();
        let stats = concentration_stats(&shares, 1);
        assert!((stats.hhi - 0.25).abs() < 1e-15);
        assert!((stats.n_eff - 4.0).abs() < 1e-12);
        assert_eq!(stats.cr_1, 0.25);
    }

    #[test]
    fn share_vector_validation() {
        assert!(matches!(
            ProviderShares::new(vec![("a".into(), 0.5), ("b".into(), 0.6)]).unwrap_err(),
            ConcentrationError::WeightSumMismatch(_)
        ));
        assert!(matches!(
            ProviderShares::new(vec![("a".into(), 1.5), ("b".into(), -0.5)]).unwrap_err(),
            ConcentrationError::BadWeight { .. }
        ));
        assert!(matches!(
            ProviderShares::new(vec![("a".into(), 0.5), ("a".into(), 0.5)]).unwrap_err(),
            ConcentrationError::DuplicateAccount(_)
        ));
        assert_eq!(ProviderShares::new(vec![]).unwrap_err(), ConcentrationError::NoProviders);
    }

    #[test]
    fn haircut_scarcity_term_only() {
        // n_eff 11.4 under a target of 15: 0.5 * (15/11.4 - 1).
        let stats = ConcentrationStats::from_n_eff_cr1(11.4, 0.18);
        let h = concentration_haircut(&stats, &HaircutParams::default());
        assert!((h - 0.157894736842105).abs() < 1e-12, "got {h}");
    }

    #[test]
    fn haircut_both_terms_at_loose_threshold() {
        // n_eff 2.2, cr1 0.54 with the 0.5 dominance threshold:
        // 0.5*(15/2.2 - 1) + 0.3*0.04 = 2.909090909... + 0.012.
        let stats = ConcentrationStats::from_n_eff_cr1(2.2, 0.54);
        let params = HaircutParams { cr1_thresh: 0.5, ..Default::default() };
        let h = concentration_haircut(&stats, &params);
        assert!((h - 2.921090909090909).abs() < 1e-12, "got {h}");
    }

    #[test]
    fn haircut_zero_when_deep_and_dispersed() {
        let stats = ConcentrationStats::from_n_eff_cr1(47.3, 0.05);
        assert_eq!(concentration_haircut(&stats, &HaircutParams::default()), 0.0);
    }

    #[test]
    fn adjusted_slippage_multiplies() {
        let adj = adjusted_slippage(0.0624, 2.909);
        assert!((adj - 0.2439216).abs() < 1e-12, "got {adj}");
        assert_eq!(adjusted_slippage(0.01, 0.0), 0.01);
    }

    #[test]
    fn withdrawal_removes_one_provider() {
        let snap = attributed_snapshot();
        // Baseline: 5 units fill at 99 -> 0.01.
        // Without "a": 5 units fill at 98 -> 0.02.
        let out = withdrawal_slippage(&snap, "a", Direction::LongLiquidation, 5.0).unwrap();
        assert_eq!(out.filled(), Some(0.02));
        // Without "b" the ladder only holds 5; asking for 10 exhausts.
        let out = withdrawal_slippage(&snap, "b", Direction::LongLiquidation, 10.0).unwrap();
        assert!(out.is_exhausted());
    }

    #[test]
    fn withdrawal_of_absent_side_provider_is_noop() {
        let snap = attributed_snapshot();
        // "c" only rests on asks; removing it does not change a bid walk.
        let base = walk_book_slippage(&snap.bids, 5.0, snap.mid_price).unwrap();
        let out = withdrawal_slippage(&snap, "c", Direction::LongLiquidation, 5.0).unwrap();
        assert_eq!(out, base);
    }

    #[test]
    fn withdrawal_error_paths() {
        let snap = attributed_snapshot();
        assert_eq!(
            withdrawal_slippage(&snap, "nobody", Direction::LongLiquidation, 5.0).unwrap_err(),
            ConcentrationError::UnknownProvider("nobody".into())
        );
        let partial = OrderBookSnapshot::new(
            "TOK",
            0,
            None,
            vec![PriceLevel::with_account(99.0, 5.0, "a"), PriceLevel::new(98.0, 10.0)],
            vec![PriceLevel::with_account(101.0, 5.0, "c")],
        )
        .unwrap();
        assert_eq!(
            withdrawal_slippage(&partial, "a", Direction::LongLiquidation, 5.0).unwrap_err(),
            ConcentrationError::Unattributed
        );
    }
}
