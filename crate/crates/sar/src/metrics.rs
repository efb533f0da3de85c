//! Cross-sectional tail metrics over per-token liquidation slippage.
//!
//! Per token: a stress notional is calibrated from open interest (and
//! optionally a position-size sample and a hard cap), the book is walked on
//! the liquidation-relevant side, and the raw slippage picks up cascade,
//! concentration, and spoofing adjustments.  Across tokens: SaR is a
//! nearest-rank upper quantile of adjusted slippage, ESaR the mean beyond it,
//! TSaR the dollar sum of tail slippage, and the OI-weighted variant scans
//! cumulative open interest instead of token counts.

use crate::concentration::{
    adjusted_slippage, concentration_haircut, concentration_stats, provider_shares,
    ConcentrationStats, HaircutParams,
};
use crate::orderbook::{directional_slippage, BookError, Direction, OrderBookSnapshot};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no tokens produced a usable risk record")]
    EmptyUniverse,
    #[error("alpha {0} outside (0, 1]")]
    BadAlpha(f64),
    #[error("value lists have mismatched lengths {0} and {1}")]
    MismatchedLengths(usize, usize),
    #[error("non-finite value in input")]
    NonFiniteValue,
    #[error("position sample list is empty")]
    EmptySamples,
    #[error("negative position sample {0}")]
    NegativeSample(f64),
    #[error("non-positive open interest {0}")]
    NonPositiveOpenInterest(f64),
    #[error("bad correlation matrix: {0}")]
    BadCorrelationMatrix(String),
    #[error("correlation quadratic form is negative ({0})")]
    NegativeQuadraticForm(f64),
    #[error("bad spoof feature weights: {0}")]
    BadWeights(String),
    #[error("spoof feature {0} outside [0, 1]")]
    BadFeature(f64),
    #[error("side policy dominant_oi_skew needs a signed open-interest skew")]
    SkewRequired,
    #[error("bad parameter: {0}")]
    BadParams(String),
    #[error(transparent)]
    Book(#[from] BookError),
}

/// Which ladder per-token walks consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SidePolicy {
    /// Walk bids everywhere (long liquidations dominate stress).
    Bid,
    /// Walk asks everywhere.
    Ask,
    /// Walk the side the net open-interest skew would hit: net-long tokens
    /// walk bids, net-short tokens walk asks.  Needs `oi_skew` per token.
    DominantOiSkew,
}

/// Observable spoofing indicators for one token, each already scaled to
/// [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpoofFeatures {
    /// Share of posted depth cancelled within the measurement window.
    pub cancel_rate: f64,
    /// How quickly quotes step away ahead of marketable flow.
    pub retreat_rate: f64,
    /// Imbalance between displayed and consumed liquidity.
    pub asymmetry: f64,
}

/// Everything the cross-sectional pipeline needs about one token.
#[derive(Debug, Clone)]
pub struct TokenInput {
    pub snapshot: OrderBookSnapshot,
    /// Total open interest in quote currency.
    pub open_interest: f64,
    /// Mean account leverage, if tracked; enables the cascade uplift.
    pub avg_leverage: Option<f64>,
    /// Signed net open interest (positive = net long); required by
    /// [`SidePolicy::DominantOiSkew`].
    pub oi_skew: Option<f64>,
    pub spoof_features: Option<SpoofFeatures>,
    /// Absolute position-size sample in quote currency, for the stress
    /// notional's 95th-percentile clamp.
    pub position_samples: Option<Vec<f64>>,
}

impl TokenInput {
    pub fn new(snapshot: OrderBookSnapshot, open_interest: f64) -> Self {
        TokenInput {
            snapshot,
            open_interest,
            avg_leverage: None,
            oi_skew: None,
            spoof_features: None,
            position_samples: None,
        }
    }
}

/// Pipeline parameters with survey-calibrated defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SaRParams {
    /// Tail level for SaR/ESaR/TSaR.
    pub alpha: f64,
    /// Stress notional as a fraction of open interest.
    pub beta: f64,
    /// Hard quote-currency cap on the stress notional.
    pub liquidation_cap: Option<f64>,
    pub haircut: HaircutParams,
    /// Insurance-fund sizing multiple carried alongside the metrics.
    pub c_deficit: f64,
    /// Cascade-amplification slope on average leverage; 0 disables.
    pub gamma_cascade: f64,
    /// Weight of the spoofing score in the total haircut; 0 disables.
    pub delta_spoof: f64,
    pub spoof_weights: [f64; 3],
    /// Slippage assigned when the walk exhausts the ladder.
    pub max_slippage: f64,
    pub side_policy: SidePolicy,
    /// Basis-point band for provider-share extraction; `None` = whole side.
    pub share_band_bps: Option<f64>,
    /// Haircut applied when a token's walked side is not attributable.
    pub unattributed_haircut: f64,
}

impl Default for SaRParams {
    fn default() -> Self {
        SaRParams {
            alpha: 0.95,
            beta: 0.10,
            liquidation_cap: None,
            haircut: HaircutParams::default(),
            c_deficit: 2.0,
            gamma_cascade: 0.0,
            delta_spoof: 0.0,
            spoof_weights: [1.0 / 3.0; 3],
            max_slippage: 1.0,
            side_policy: SidePolicy::Bid,
            share_band_bps: None,
            unattributed_haircut: 0.0,
        }
    }
}

impl SaRParams {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(MetricsError::BadAlpha(self.alpha));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(MetricsError::BadParams(format!("beta {} must be positive", self.beta)));
        }
        if !(self.max_slippage > 0.0) {
            return Err(MetricsError::BadParams(format!(
                "max_slippage {} must be positive",
                self.max_slippage
            )));
        }
        for (name, v) in [
            ("gamma_cascade", self.gamma_cascade),
            ("delta_spoof", self.delta_spoof),
            ("unattributed_haircut", self.unattributed_haircut),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(MetricsError::BadParams(format!("{name} {v} must be >= 0")));
            }
        }
        check_spoof_weights(&self.spoof_weights)?;
        Ok(())
    }
}

/// One token's fully adjusted risk state.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenRiskRecord {
    pub token: String,
    pub open_interest: f64,
    /// Calibrated stress notional in quote currency.
    pub stress_notional_q: f64,
    /// Book-walk slippage after the optional cascade uplift; replaced by the
    /// configured `max_slippage` when the walk exhausts the ladder.
    pub raw_slippage: f64,
    /// Walked-side concentration stats; `None` when unattributable.
    pub stats: Option<ConcentrationStats>,
    pub haircut_conc: f64,
    pub spoof_score: f64,
    pub haircut_total: f64,
    /// `raw_slippage * (1 + haircut_total)`.
    pub adjusted_slippage: f64,
    pub avg_leverage: Option<f64>,
    pub exhausted: bool,
}

/// Cross-sectional summary for one timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct SaRReport {
    pub timestamp: i64,
    pub sar: f64,
    pub esar: f64,
    pub tsar_dollars: f64,
    pub weighted_sar: f64,
    /// Tokens strictly beyond the SaR quantile, in record order.
    pub tail_tokens: Vec<String>,
    pub n_tokens: usize,
    /// Open-interest share of the tail tokens.
    pub tail_oi_share: f64,
    /// Diagnostics: `degenerate_tail`, `exhausted:<token>`,
    /// `unattributed:<token>`, `skipped:<token>:<reason>`.
    pub flags: Vec<String>,
}

/// Smallest ascending-order statistic whose rank fraction reaches `q`:
/// index of "smallest k with k/n >= q", on a pre-sorted slice.
pub(crate) fn nearest_rank(sorted_ascending: &[f64], q: f64) -> f64 {
    let n = sorted_ascending.len();
    debug_assert!(n > 0);
    for k in 1..=n {
        if k as f64 / n as f64 >= q {
            return sorted_ascending[k - 1];
        }
    }
    sorted_ascending[n - 1]
}

/// Stress notional for one token: `beta * open_interest`, clamped by the
/// 95th-percentile absolute position size when a sample is supplied and by
/// `liquidation_cap` when set.  Quote currency in, quote currency out.
pub fn calibrate_notional(
    open_interest: f64,
    beta: f64,
    position_samples: Option<&[f64]>,
    liquidation_cap: Option<f64>,
) -> Result<f64, MetricsError> {
    if !(open_interest > 0.0) || !open_interest.is_finite() {
        return Err(MetricsError::NonPositiveOpenInterest(open_interest));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(MetricsError::BadParams(format!("beta {beta} must be positive")));
    }
    let mut q = beta * open_interest;
    if let Some(samples) = position_samples {
        if samples.is_empty() {
            return Err(MetricsError::EmptySamples);
        }
        let mut sorted = Vec::with_capacity(samples.len());
        for &s in samples {
            if !s.is_finite() {
                return Err(MetricsError::NonFiniteValue);
            }
            if s < 0.0 {
                return Err(MetricsError::NegativeSample(s));
            }
            sorted.push(s);
        }
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        q = q.min(nearest_rank(&sorted, 0.95));
    }
    if let Some(cap) = liquidation_cap {
        q = q.min(cap);
    }
    Ok(q)
}

fn checked_sorted(values: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyUniverse);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFiniteValue);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted)
}

fn check_alpha(alpha: f64) -> Result<(), MetricsError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(MetricsError::BadAlpha(alpha));
    }
    Ok(())
}

/// Nearest-rank upper quantile of the values at level `alpha`: the smallest
/// value whose empirical rank fraction reaches `alpha`.
pub fn sar_quantile(values: &[f64], alpha: f64) -> Result<f64, MetricsError> {
    check_alpha(alpha)?;
    Ok(nearest_rank(&checked_sorted(values)?, alpha))
}

/// Mean of values strictly beyond the `alpha` quantile, with a flag marking
/// the degenerate empty-tail case (where the quantile itself is returned).
pub fn esar(values: &[f64], alpha: f64) -> Result<(f64, bool), MetricsError> {
    let sar = sar_quantile(values, alpha)?;
    let tail: Vec<f64> = values.iter().copied().filter(|v| *v > sar).collect();
    if tail.is_empty() {
        return Ok((sar, true));
    }
    Ok((tail.iter().sum::<f64>() / tail.len() as f64, false))
}

/// Dollar slippage carried by the strict tail: sum of `slippage * notional`
/// over entries with slippage beyond the `alpha` quantile.  Empty tail sums
/// to zero.
pub fn tsar_dollars(slippages: &[f64], notionals: &[f64], alpha: f64) -> Result<f64, MetricsError> {
    if slippages.len() != notionals.len() {
        return Err(MetricsError::MismatchedLengths(slippages.len(), notionals.len()));
    }
    let sar = sar_quantile(slippages, alpha)?;
    if notionals.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFiniteValue);
    }
    // fold, not sum: an empty f64 sum is -0.0, which would print as "-0".
    Ok(slippages
        .iter()
        .zip(notionals)
        .filter(|(s, _)| **s > sar)
        .map(|(s, q)| s * q)
        .fold(0.0, |a, v| a + v))
}

/// Open-interest-weighted SaR: the smallest slippage value at which the
/// cumulative OI of tokens at-or-below it reaches `alpha` of total OI.
pub fn weighted_sar(slippages: &[f64], open_interest: &[f64], alpha: f64) -> Result<f64, MetricsError> {
    check_alpha(alpha)?;
    if slippages.len() != open_interest.len() {
        return Err(MetricsError::MismatchedLengths(slippages.len(), open_interest.len()));
    }
    if slippages.is_empty() {
        return Err(MetricsError::EmptyUniverse);
    }
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(slippages.len());
    let mut total = 0.0;
    for (&s, &oi) in slippages.iter().zip(open_interest) {
        if !s.is_finite() || !oi.is_finite() {
            return Err(MetricsError::NonFiniteValue);
        }
        if oi < 0.0 {
            return Err(MetricsError::NonPositiveOpenInterest(oi));
        }
        total += oi;
        pairs.push((s, oi));
    }
    if total <= 0.0 {
        return Err(MetricsError::NonPositiveOpenInterest(total));
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut cum = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        // Consume the whole tie group before testing the threshold.
        let value = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == value {
            cum += pairs[i].1;
            i += 1;
        }
        if cum / total >= alpha {
            return Ok(value);
        }
    }
    Ok(pairs[pairs.len() - 1].0)
}

/// Cascade-aware slippage `s * (1 + gamma * avg_leverage)`.
pub fn cascade_adjust(slippage: f64, gamma: f64, avg_leverage: f64) -> f64 {
    slippage * (1.0 + gamma * avg_leverage)
}

/// Portfolio tail slippage under cross-token correlation:
/// `sqrt(sum_ij rho[i][j] * s[i] * s[j])` over dollar slippages.
pub fn correlated_tsar(dollar_slippages: &[f64], rho: &[Vec<f64>]) -> Result<f64, MetricsError> {
    let n = dollar_slippages.len();
    if rho.len() != n || rho.iter().any(|row| row.len() != n) {
        return Err(MetricsError::BadCorrelationMatrix(format!(
            "matrix must be {n}x{n} to match {n} slippage entries"
        )));
    }
    if dollar_slippages.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFiniteValue);
    }
    for i in 0..n {
        if (rho[i][i] - 1.0).abs() > 1e-12 {
            return Err(MetricsError::BadCorrelationMatrix(format!(
                "diagonal entry [{i}][{i}] = {} is not 1",
                rho[i][i]
            )));
        }
        for j in 0..n {
            let v = rho[i][j];
            if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                return Err(MetricsError::BadCorrelationMatrix(format!(
                    "entry [{i}][{j}] = {v} outside [-1, 1]"
                )));
            }
            if (v - rho[j][i]).abs() > 1e-12 {
                return Err(MetricsError::BadCorrelationMatrix(format!(
                    "asymmetric at [{i}][{j}]"
                )));
            }
        }
    }
    let mut form = 0.0;
    for i in 0..n {
        for j in 0..n {
            form += rho[i][j] * dollar_slippages[i] * dollar_slippages[j];
        }
    }
    if form < 0.0 {
        if form > -1e-9 {
            form = 0.0;
        } else {
            return Err(MetricsError::NegativeQuadraticForm(form));
        }
    }
    Ok(form.sqrt())
}

fn check_spoof_weights(weights: &[f64; 3]) -> Result<(), MetricsError> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(MetricsError::BadWeights(format!("negative or non-finite weight in {weights:?}")));
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(MetricsError::BadWeights(format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

fn check_feature(v: f64) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
        return Err(MetricsError::BadFeature(v));
    }
    Ok(v)
}

/// Spoofing score (weighted feature sum, clipped to [0, 1]) and the total
/// haircut `haircut_conc + delta * score`.
pub fn spoof_total_haircut(
    haircut_conc: f64,
    delta: f64,
    features: &SpoofFeatures,
    weights: &[f64; 3],
) -> Result<(f64, f64), MetricsError> {
    check_spoof_weights(weights)?;
    let f = [
        check_feature(features.cancel_rate)?,
        check_feature(features.retreat_rate)?,
        check_feature(features.asymmetry)?,
    ];
    let score = (weights[0] * f[0] + weights[1] * f[1] + weights[2] * f[2]).clamp(0.0, 1.0);
    Ok((score, haircut_conc + delta * score))
}

fn process_token(
    input: &TokenInput,
    params: &SaRParams,
    flags: &mut Vec<String>,
) -> Result<TokenRiskRecord, MetricsError> {
    let token = &input.snapshot.token;
    let q_quote = calibrate_notional(
        input.open_interest,
        params.beta,
        input.position_samples.as_deref(),
        params.liquidation_cap,
    )?;
    let direction = match params.side_policy {
        SidePolicy::Bid => Direction::LongLiquidation,
        SidePolicy::Ask => Direction::ShortLiquidation,
        SidePolicy::DominantOiSkew => match input.oi_skew {
            Some(skew) if skew >= 0.0 => Direction::LongLiquidation,
            Some(_) => Direction::ShortLiquidation,
            None => return Err(MetricsError::SkewRequired),
        },
    };
    let base_qty = q_quote / input.snapshot.mid_price;
    let outcome = directional_slippage(&input.snapshot, direction, base_qty)?;
    let exhausted = outcome.is_exhausted();
    let raw_slippage = match outcome.filled() {
        // Fills strictly better than mid can push the walk negative on
        // crossed input data; risk use clamps at zero.
        Some(v) => {
            let clamped = v.max(0.0);
            match input.avg_leverage {
                Some(lev) if params.gamma_cascade > 0.0 => {
                    cascade_adjust(clamped, params.gamma_cascade, lev)
                }
                _ => clamped,
            }
        }
        None => {
            flags.push(format!("exhausted:{token}"));
            params.max_slippage
        }
    };
    let walked = input.snapshot.side(direction.walked_side());
    let (stats, haircut_conc) =
        match provider_shares(walked, input.snapshot.mid_price, params.share_band_bps) {
            Ok(shares) => {
                let stats = concentration_stats(&shares, 1);
                let h = concentration_haircut(&stats, &params.haircut);
                (Some(stats), h)
            }
            Err(_) => {
                flags.push(format!("unattributed:{token}"));
                (None, params.unattributed_haircut)
            }
        };
    let (spoof_score, haircut_total) = match input.spoof_features {
        Some(features) => {
            spoof_total_haircut(haircut_conc, params.delta_spoof, &features, &params.spoof_weights)?
        }
        None => (0.0, haircut_conc),
    };
    let adjusted = adjusted_slippage(raw_slippage, haircut_total);
    Ok(TokenRiskRecord {
        token: token.clone(),
        open_interest: input.open_interest,
        stress_notional_q: q_quote,
        raw_slippage,
        stats,
        haircut_conc,
        spoof_score,
        haircut_total,
        adjusted_slippage: adjusted,
        avg_leverage: input.avg_leverage,
        exhausted,
    })
}

/// Runs the full per-token and cross-sectional computation.
///
/// Tokens that fail calibration or walking are skipped with a
/// `skipped:<token>:<reason>` flag rather than aborting the run; an empty
/// surviving universe is an error.  Records keep input order.
pub fn run_pipeline(
    inputs: &[TokenInput],
    params: &SaRParams,
) -> Result<(SaRReport, Vec<TokenRiskRecord>), MetricsError> {
    params.validate()?;
    let mut flags = Vec::new();
    let mut records = Vec::with_capacity(inputs.len());
    for input in inputs {
        match process_token(input, params, &mut flags) {
            Ok(record) => records.push(record),
            Err(err) => flags.push(format!("skipped:{}:{err}", input.snapshot.token)),
        }
    }
    if records.is_empty() {
        return Err(MetricsError::EmptyUniverse);
    }
    let adjusted: Vec<f64> = records.iter().map(|r| r.adjusted_slippage).collect();
    let notionals: Vec<f64> = records.iter().map(|r| r.stress_notional_q).collect();
    let oi: Vec<f64> = records.iter().map(|r| r.open_interest).collect();
    let sar = sar_quantile(&adjusted, params.alpha)?;
    let (esar_value, degenerate) = esar(&adjusted, params.alpha)?;
    if degenerate {
        flags.push("degenerate_tail".to_string());
    }
    let tsar = tsar_dollars(&adjusted, &notionals, params.alpha)?;
    let wsar = weighted_sar(&adjusted, &oi, params.alpha)?;
    let tail_tokens: Vec<String> = records
        .iter()
        .filter(|r| r.adjusted_slippage > sar)
        .map(|r| r.token.clone())
        .collect();
    let total_oi: f64 = oi.iter().sum();
    let tail_oi: f64 = records
        .iter()
        .filter(|r| r.adjusted_slippage > sar)
        .map(|r| r.open_interest)
        .fold(0.0, |a, v| a + v);
    let timestamp = inputs.iter().map(|i| i.snapshot.timestamp).max().unwrap_or(0);
    let report = SaRReport {
        timestamp,
        sar,
        esar: esar_value,
        tsar_dollars: tsar,
        weighted_sar: wsar,
        tail_tokens,
        n_tokens: records.len(),
        tail_oi_share: if total_oi > 0.0 { tail_oi / total_oi } else { 0.0 },
        flags,
    };
    Ok((report, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orderbook::PriceLevel;

    #[test]
    fn quantile_is_nearest_rank() {
        let values = [0.01, 0.02, 0.03, 0.04, 0.05];
        assert_eq!(sar_quantile(&values, 0.8).unwrap(), 0.04);
        assert_eq!(sar_quantile(&values, 1.0).unwrap(), 0.05);
        assert_eq!(sar_quantile(&values, 0.2).unwrap(), 0.01);
        assert_eq!(sar_quantile(&values, 0.21).unwrap(), 0.02);
        // Order must not matter.
        let shuffled = [0.05, 0.01, 0.04, 0.02, 0.03];
        assert_eq!(sar_quantile(&shuffled, 0.8).unwrap(), 0.04);
    }

    #[test]
    fn quantile_exact_boundary_with_thirds() {
        // 2/3 lands exactly on rank 2 of 3; naive ceil(alpha*n) arithmetic
        // would overshoot to rank 3.
        let values = [0.01, 0.02, 0.10];
        assert_eq!(sar_quantile(&values, 2.0 / 3.0).unwrap(), 0.02);
    }

    #[test]
    fn quantile_error_paths() {
        assert_eq!(sar_quantile(&[], 0.95).unwrap_err(), MetricsError::EmptyUniverse);
        assert_eq!(sar_quantile(&[0.01], 0.0).unwrap_err(), MetricsError::BadAlpha(0.0));
        assert_eq!(sar_quantile(&[0.01], 1.5).unwrap_err(), MetricsError::BadAlpha(1.5));
        assert_eq!(sar_quantile(&[f64::NAN], 0.5).unwrap_err(), MetricsError::NonFiniteValue);
    }

    #[test]
    fn esar_means_the_strict_tail() {
        let values = [0.01, 0.01, 0.01, 0.09, 0.11];
        let (e, degenerate) = esar(&values, 0.6).unwrap();
        assert!(!degenerate);
        assert!((e - 0.10).abs() < 1e-12);
        let values = [0.01, 0.02, 0.03, 0.04, 0.05];
        let (e, degenerate) = esar(&values, 0.8).unwrap();
        assert!(!degenerate);
        assert_eq!(e, 0.05);
    }

    #[test]
    fn esar_degenerates_to_sar_on_empty_tail() {
        let values = [0.02, 0.02, 0.02];
        let (e, degenerate) = esar(&values, 0.5).unwrap();
        assert!(degenerate);
        assert_eq!(e, 0.02);
    }

    #[test]
    fn tsar_sums_tail_dollars() {
        let slippages = [0.01, 0.02, 0.10];
        let notionals = [10_000_000.0, 10_000_000.0, 5_000_000.0];
        let t = tsar_dollars(&slippages, &notionals, 2.0 / 3.0).unwrap();
        assert!((t - 500_000.0).abs() < 1e-6);
        // Empty tail sums to zero.
        let t = tsar_dollars(&slippages, &notionals, 1.0).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(
            tsar_dollars(&[0.01], &[1.0, 2.0], 0.5).unwrap_err(),
            MetricsError::MismatchedLengths(1, 2)
        );
    }

    #[test]
    fn weighted_sar_scans_cumulative_oi() {
        // 99% of OI sits at 1% slippage, so the OI-weighted quantile stays
        // at 1% even though the unweighted one jumps to 9%.
        let slippages = [0.01, 0.09];
        let oi = [99.0, 1.0];
        assert_eq!(weighted_sar(&slippages, &oi, 0.95).unwrap(), 0.01);
        assert_eq!(sar_quantile(&slippages, 0.95).unwrap(), 0.09);
        // Flat OI reduces to the unweighted rank.
        let flat = [1.0, 1.0];
        assert_eq!(weighted_sar(&slippages, &flat, 0.95).unwrap(), 0.09);
    }

    #[test]
    fn weighted_sar_handles_ties_as_one_group() {
        let slippages = [0.02, 0.02, 0.05];
        let oi = [50.0, 45.0, 5.0];
        // The whole 0.02 group accumulates 95% before the threshold test.
        assert_eq!(weighted_sar(&slippages, &oi, 0.95).unwrap(), 0.02);
    }

    #[test]
    fn calibrate_notional_takes_the_binding_constraint() {
        // Fraction of OI binds.
        let q = calibrate_notional(2_180_000_000.0, 0.10, None, None).unwrap();
        assert!((q - 218_000_000.0).abs() < 1e-3);
        // The 95th-percentile position binds.
        let samples: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let q = calibrate_notional(100.0, 1.0, Some(&samples), None).unwrap();
        assert_eq!(q, 95.0);
        // The hard cap binds.
        let q = calibrate_notional(100.0, 1.0, Some(&samples), Some(50.0)).unwrap();
        assert_eq!(q, 50.0);
    }

    #[test]
    fn calibrate_notional_error_paths() {
        assert!(matches!(
            calibrate_notional(0.0, 0.1, None, None).unwrap_err(),
            MetricsError::NonPositiveOpenInterest(_)
        ));
        assert_eq!(
            calibrate_notional(100.0, 0.1, Some(&[]), None).unwrap_err(),
            MetricsError::EmptySamples
        );
        assert!(matches!(
            calibrate_notional(100.0, 0.1, Some(&[-5.0]), None).unwrap_err(),
            MetricsError::NegativeSample(_)
        ));
    }

    #[test]
    fn cascade_adjust_scales_linearly() {
        let s = cascade_adjust(0.02, 0.5, 10.0);
        assert!((s - 0.12).abs() < 1e-15);
        assert_eq!(cascade_adjust(0.02, 0.0, 10.0), 0.02);
    }

    #[test]
    fn correlated_tsar_known_value() {
        let rho = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        let t = correlated_tsar(&[3.0, 4.0], &rho).unwrap();
        assert!((t - 37.0_f64.sqrt()).abs() < 1e-12);
        // Identity correlation reduces to the Euclidean norm.
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((correlated_tsar(&[3.0, 4.0], &id).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn correlated_tsar_validates_the_matrix() {
        let bad_dim = vec![vec![1.0]];
        assert!(matches!(
            correlated_tsar(&[1.0, 2.0], &bad_dim).unwrap_err(),
            MetricsError::BadCorrelationMatrix(_)
        ));
        let bad_diag = vec![vec![0.9, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            correlated_tsar(&[1.0, 2.0], &bad_diag).unwrap_err(),
            MetricsError::BadCorrelationMatrix(_)
        ));
        let asym = vec![vec![1.0, 0.5], vec![0.4, 1.0]];
        assert!(matches!(
            correlated_tsar(&[1.0, 2.0], &asym).unwrap_err(),
            MetricsError::BadCorrelationMatrix(_)
        ));
        let out_of_range = vec![vec![1.0, 1.5], vec![1.5, 1.0]];
        assert!(matches!(
            correlated_tsar(&[1.0, 2.0], &out_of_range).unwrap_err(),
            MetricsError::BadCorrelationMatrix(_)
        ));
    }

    #[test]
    fn spoof_score_weighted_and_clipped() {
        let features = SpoofFeatures { cancel_rate: 0.9, retreat_rate: 0.6, asymmetry: 0.3 };
        let (score, total) = spoof_total_haircut(0.1, 0.5, &features, &[0.5, 0.3, 0.2]).unwrap();
        assert!((score - 0.69).abs() < 1e-12);
        assert!((total - 0.445).abs() < 1e-12);
        // Delta zero leaves the concentration haircut untouched.
        let (_, total) = spoof_total_haircut(0.1, 0.0, &features, &[0.5, 0.3, 0.2]).unwrap();
        assert_eq!(total, 0.1);
    }

    #[test]
    fn spoof_validation() {
        let features = SpoofFeatures { cancel_rate: 0.9, retreat_rate: 0.6, asymmetry: 0.3 };
        assert!(matches!(
            spoof_total_haircut(0.1, 0.5, &features, &[0.5, 0.3, 0.3]).unwrap_err(),
            MetricsError::BadWeights(_)
        ));
        let bad = SpoofFeatures { cancel_rate: 1.2, retreat_rate: 0.0, asymmetry: 0.0 };
        assert!(matches!(
            spoof_total_haircut(0.1, 0.5, &bad, &[0.5, 0.3, 0.2]).unwrap_err(),
            MetricsError::BadFeature(_)
        ));
    }

    fn small_universe() -> Vec<TokenInput> {
        // Token A walks 10 base units: 5 at 99 + 5 at 98 -> raw 0.015.
        let a = OrderBookSnapshot::new(
            "AAA",
            100,
            None,
            vec![
                PriceLevel::with_account(99.0, 5.0, "p1"),
                PriceLevel::with_account(98.0, 10.0, "p2"),
            ],
            vec![PriceLevel::with_account(101.0, 10.0, "p1")],
        )
        .unwrap();
        // Token B walks 5 base units into one level at 1% below mid.
        let b = OrderBookSnapshot::new(
            "BBB",
            100,
            None,
            vec![PriceLevel::with_account(198.0, 50.0, "p1")],
            vec![PriceLevel::with_account(202.0, 50.0, "p2")],
        )
        .unwrap();
        vec![
            TokenInput::new(a, 10_000.0), // beta 0.1 -> 1000 quote -> 10 base
            TokenInput::new(b, 10_000.0), // beta 0.1 -> 1000 quote -> 5 base
        ]
    }

    #[test]
    fn pipeline_small_universe_hand_check() {
        let inputs = small_universe();
        let params = SaRParams::default();
        let (report, records) = run_pipeline(&inputs, &params).unwrap();
        assert_eq!(records.len(), 2);
        let a = &records[0];
        assert!((a.raw_slippage - 0.015).abs() < 1e-12);
        assert!((a.stress_notional_q - 1000.0).abs() < 1e-12);
        // Walked-side shares for AAA: p1 495, p2 980 of 1475.
        let stats = a.stats.as_ref().unwrap();
        assert_eq!(stats.provider_count, 2);
        assert!((stats.cr_1 - 980.0 / 1475.0).abs() < 1e-12);
        // Identity: adjusted = raw * (1 + total haircut).
        for r in &records {
            assert!((r.adjusted_slippage - r.raw_slippage * (1.0 + r.haircut_total)).abs() < 1e-9);
        }
        // Two tokens at alpha 0.95: quantile is the max, tail empty.
        assert_eq!(report.n_tokens, 2);
        assert_eq!(report.sar, report.esar);
        assert_eq!(report.tsar_dollars, 0.0);
        assert!(report.tail_tokens.is_empty());
        assert!(report.flags.iter().any(|f| f == "degenerate_tail"));
        assert_eq!(report.timestamp, 100);
    }

    #[test]
    fn pipeline_single_token_degenerates() {
        let inputs = small_universe()[..1].to_vec();
        let (report, records) = run_pipeline(&inputs, &SaRParams::default()).unwrap();
        assert_eq!(report.sar, records[0].adjusted_slippage);
        assert_eq!(report.esar, report.sar);
        assert_eq!(report.tsar_dollars, 0.0);
        assert!(report.flags.iter().any(|f| f == "degenerate_tail"));
    }

    #[test]
    fn pipeline_maps_exhaustion_to_max_slippage() {
        let mut inputs = small_universe();
        inputs[0].open_interest = 10_000_000.0; // walk far beyond the ladder
        // Alpha 0.5 on two tokens puts the quantile at the smaller value, so
        // the exhausted token sits in the strict tail.
        let params = SaRParams { alpha: 0.5, ..Default::default() };
        let (report, records) = run_pipeline(&inputs, &params).unwrap();
        assert!(records[0].exhausted);
        assert_eq!(records[0].raw_slippage, 1.0);
        assert!(report.flags.iter().any(|f| f == "exhausted:AAA"));
        assert!(report.tail_oi_share > 0.9);
        assert_eq!(report.tail_tokens, vec!["AAA".to_string()]);
        // The exhausted token's tail dollars are max_slippage-scaled.
        let expected = records[0].adjusted_slippage * records[0].stress_notional_q;
        assert!((report.tsar_dollars - expected).abs() < 1e-9);
    }

    #[test]
    fn pipeline_skips_bad_tokens_and_flags_them() {
        let mut inputs = small_universe();
        inputs[0].open_interest = -1.0;
        let (report, records) = run_pipeline(&inputs, &SaRParams::default()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].token, "BBB");
        assert!(report.flags.iter().any(|f| f.starts_with("skipped:AAA:")));
    }

    #[test]
    fn pipeline_unattributed_falls_back() {
        let snap = OrderBookSnapshot::new(
            "CCC",
            0,
            None,
            vec![PriceLevel::new(99.0, 100.0)],
            vec![PriceLevel::new(101.0, 100.0)],
        )
        .unwrap();
        let params =
            SaRParams { unattributed_haircut: 0.25, ..Default::default() };
        let (report, records) =
            run_pipeline(&[TokenInput::new(snap, 10_000.0)], &params).unwrap();
        assert!(records[0].stats.is_none());
        assert_eq!(records[0].haircut_conc, 0.25);
        assert!(report.flags.iter().any(|f| f == "unattributed:CCC"));
    }

    #[test]
    fn pipeline_dominant_skew_policy() {
        let inputs = small_universe();
        let params = SaRParams { side_policy: SidePolicy::DominantOiSkew, ..Default::default() };
        // Without a skew every token is skipped, which empties the universe.
        assert_eq!(run_pipeline(&inputs, &params).unwrap_err(), MetricsError::EmptyUniverse);
        let mut inputs = inputs;
        inputs[0].oi_skew = Some(-1000.0); // net short -> walk asks
        inputs[1].oi_skew = Some(1000.0); // net long -> walk bids
        let (_, records) = run_pipeline(&inputs, &params).unwrap();
        // AAA walks asks now: 10 units at 101 -> 0.01.
        assert!((records[0].raw_slippage - 0.01).abs() < 1e-12);
        assert!((records[1].raw_slippage - 0.01).abs() < 1e-12);
    }

    #[test]
    fn pipeline_cascade_needs_leverage_and_gamma() {
        let mut inputs = small_universe();
        inputs[0].avg_leverage = Some(10.0);
        let params = SaRParams { gamma_cascade: 0.5, ..Default::default() };
        let (_, records) = run_pipeline(&inputs, &params).unwrap();
        // 0.015 * (1 + 0.5*10) = 0.09.
        assert!((records[0].raw_slippage - 0.09).abs() < 1e-12);
        // No leverage supplied: untouched.
        assert!((records[1].raw_slippage - 0.01).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        let bad = SaRParams { alpha: 0.0, ..Default::default() };
        assert!(matches!(bad.validate().unwrap_err(), MetricsError::BadAlpha(_)));
        let bad = SaRParams { beta: -0.1, ..Default::default() };
        assert!(matches!(bad.validate().unwrap_err(), MetricsError::BadParams(_)));
        let bad = SaRParams { spoof_weights: [0.5, 0.5, 0.5], ..Default::default() };
        assert!(matches!(bad.validate().unwrap_err(), MetricsError::BadWeights(_)));
        assert!(SaRParams::default().validate().is_ok());
    }
}
