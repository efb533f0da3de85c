//! Perpetuals-exchange mechanics at desk scale: margined positions,
//! linear-impact liquidations, insurance-fund accounting, synthetic
//! constant-density order books, and seeded stress scenarios that couple
//! volatility, depth decay, and liquidation cascades.

use crate::concentration::{ConcentrationError, ProviderShares};
use crate::metrics::{run_pipeline, MetricsError, SaRParams, TokenInput};
use crate::orderbook::{BookError, OrderBookSnapshot, PriceLevel};
use crate::timeseries::{MetricSeries, TimeseriesError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimulatorError {
    #[error("bad position: {0}")]
    BadPosition(String),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("position is not below its maintenance margin")]
    NotLiquidatable,
    #[error("shock at step {step} is not a valid return: {value}")]
    BadShock { step: usize, value: f64 },
    #[error("mark price collapsed to zero or below at step {step}")]
    MarkCollapsed { step: usize },
    #[error("scenario needs at least one exchange state and one shock step")]
    EmptyScenario,
    #[error(transparent)]
    Book(#[from] BookError),
    #[error(transparent)]
    Shares(#[from] ConcentrationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Series(#[from] TimeseriesError),
}

/// Position direction; redundant with the sign of `quantity` and validated
/// against it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionSide {
    Long,
    Short,
}

/// A perpetual position with static collateral (no funding accrual).
#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    /// Signed base-asset quantity, positive for longs.
    pub quantity: f64,
    /// Collateral in quote units, positive.
    pub collateral: f64,
    pub entry_price: f64,
    pub entry_time: i64,
    pub side: PositionSide,
}

impl Position {
    pub fn new(
        quantity: f64,
        collateral: f64,
        entry_price: f64,
        entry_time: i64,
        side: PositionSide,
    ) -> Result<Self, SimulatorError> {
        if !quantity.is_finite() || quantity == 0.0 {
            return Err(SimulatorError::BadPosition(format!(
                "quantity {quantity} must be finite and nonzero"
            )));
        }
        let sign_ok = match side {
            PositionSide::Long => quantity > 0.0,
            PositionSide::Short => quantity < 0.0,
        };
        if !sign_ok {
            return Err(SimulatorError::BadPosition(format!(
                "quantity {quantity} contradicts declared {side:?} side"
            )));
        }
        if !(collateral.is_finite() && collateral > 0.0) {
            return Err(SimulatorError::BadPosition(format!(
                "collateral {collateral} must be positive"
            )));
        }
        if !(entry_price.is_finite() && entry_price > 0.0) {
            return Err(SimulatorError::BadPosition(format!(
                "entry price {entry_price} must be positive"
            )));
        }
        Ok(Position { quantity, collateral, entry_price, entry_time, side })
    }

    pub fn long(
        quantity: f64,
        collateral: f64,
        entry_price: f64,
        entry_time: i64,
    ) -> Result<Self, SimulatorError> {
        Self::new(quantity, collateral, entry_price, entry_time, PositionSide::Long)
    }

    pub fn short(
        quantity: f64,
        collateral: f64,
        entry_price: f64,
        entry_time: i64,
    ) -> Result<Self, SimulatorError> {
        Self::new(-quantity.abs(), collateral, entry_price, entry_time, PositionSide::Short)
    }

    /// Position notional in quote units at the given mark.
    pub fn notional(&self, mark_price: f64) -> f64 {
        self.quantity.abs() * mark_price
    }
}

/// Exchange-wide margin rules: initial margin is `notional / max_leverage`,
/// maintenance margin is `maintenance_fraction` of initial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginConfig {
    pub max_leverage: f64,
    pub maintenance_fraction: f64,
}

impl MarginConfig {
    pub fn new(max_leverage: f64, maintenance_fraction: f64) -> Result<Self, SimulatorError> {
        if !(max_leverage.is_finite() && max_leverage > 0.0) {
            return Err(SimulatorError::BadConfig(format!(
                "max leverage {max_leverage} must be positive"
            )));
        }
        if !(maintenance_fraction > 0.0 && maintenance_fraction < 1.0) {
            return Err(SimulatorError::BadConfig(format!(
                "maintenance fraction {maintenance_fraction} must be in (0, 1)"
            )));
        }
        Ok(MarginConfig { max_leverage, maintenance_fraction })
    }
}

/// Mark-to-market state of one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionMetrics {
    /// `mark * |q| / collateral`.
    pub leverage: f64,
    /// `collateral + q * (mark - entry)`.
    pub equity: f64,
    /// Mark at which equity is exactly zero: `entry - collateral / q`.
    pub bankruptcy_price: f64,
    /// `maintenance_fraction * mark * |q| / max_leverage`.
    pub maintenance_margin: f64,
    /// True when equity has fallen below maintenance margin.
    pub liquidation_flag: bool,
}

pub fn position_metrics(
    position: &Position,
    mark_price: f64,
    margin: &MarginConfig,
) -> PositionMetrics {
    let q = position.quantity;
    let equity = position.collateral + q * (mark_price - position.entry_price);
    let maintenance_margin =
        margin.maintenance_fraction * mark_price * q.abs() / margin.max_leverage;
    PositionMetrics {
        leverage: mark_price * q.abs() / position.collateral,
        equity,
        bankruptcy_price: position.entry_price - position.collateral / q,
        maintenance_margin,
        liquidation_flag: equity < maintenance_margin,
    }
}

/// Constant-density synthetic book: each side covers `depth_span` of price
/// with `density` base units per unit price, partitioned across providers by
/// weight at every price point, so removing provider `m` scales depth by
/// exactly `1 - w_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBookConfig {
    pub token: String,
    pub timestamp: i64,
    pub mid: f64,
    /// Base units per unit of price, uniform over the span.
    pub density: f64,
    /// Price range covered on each side.
    pub depth_span: f64,
    /// Price distance between adjacent book levels.
    pub level_spacing: f64,
    pub provider_weights: ProviderShares,
    /// Rotates provider order within each price point; the set of levels per
    /// point is seed-independent.
    pub seed: u64,
}

impl SyntheticBookConfig {
    fn validate(&self) -> Result<(), SimulatorError> {
        if !(self.mid.is_finite() && self.mid > 0.0) {
            return Err(SimulatorError::BadConfig(format!("mid {} must be positive", self.mid)));
        }
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(SimulatorError::BadConfig("density must be positive".to_string()));
        }
        if !(self.depth_span.is_finite() && self.depth_span > 0.0) {
            return Err(SimulatorError::BadConfig("depth span must be positive".to_string()));
        }
        if !(self.level_spacing.is_finite()
            && self.level_spacing > 0.0
            && self.level_spacing <= self.depth_span)
        {
            return Err(SimulatorError::BadConfig(
                "level spacing must be positive and no wider than the span".to_string(),
            ));
        }
        if self.depth_span >= self.mid {
            return Err(SimulatorError::BadConfig(format!(
                "depth span {} reaches zero price from mid {}",
                self.depth_span, self.mid
            )));
        }
        Ok(())
    }

    fn levels_per_side(&self) -> usize {
        ((self.depth_span / self.level_spacing) + 1e-9).floor().max(1.0) as usize
    }
}

/// Builds the ladder described by `config`: price points at
/// `mid -/+ (k + 1/2) * spacing`, each holding `density * spacing` base units
/// split across providers by weight.  Identical configs yield identical
/// snapshots.
pub fn generate_synthetic_book(
    config: &SyntheticBookConfig,
) -> Result<OrderBookSnapshot, SimulatorError> {
    config.validate()?;
    let points = config.levels_per_side();
    let providers = config.provider_weights.shares();
    let m = providers.len();
    let point_size = config.density * config.level_spacing;
    let mut bids = Vec::with_capacity(points * m);
    let mut asks = Vec::with_capacity(points * m);
    for k in 0..points {
        let offset = (k as f64 + 0.5) * config.level_spacing;
        let rotation = (config.seed as usize + k) % m;
        for j in 0..m {
            let (account, weight) = &providers[(rotation + j) % m];
            let size = weight * point_size;
            bids.push(PriceLevel::with_account(config.mid - offset, size, account));
            asks.push(PriceLevel::with_account(config.mid + offset, size, account));
        }
    }
    let snapshot = OrderBookSnapshot::new(
        &config.token,
        config.timestamp,
        Some(config.mid),
        bids,
        asks,
    )?;
    Ok(snapshot)
}

/// One token's exchange world: open positions, mark, margin rules, book
/// shape, linear impact coefficient, and that market's insurance-fund
/// contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeState {
    pub positions: Vec<Position>,
    pub mark_price: f64,
    pub insurance_fund: f64,
    pub book_config: SyntheticBookConfig,
    /// Price displacement per base unit executed.
    pub impact_lambda: f64,
    pub margin: MarginConfig,
}

impl ExchangeState {
    pub fn new(
        positions: Vec<Position>,
        mark_price: f64,
        insurance_fund: f64,
        book_config: SyntheticBookConfig,
        impact_lambda: f64,
        margin: MarginConfig,
    ) -> Result<Self, SimulatorError> {
        if !(mark_price.is_finite() && mark_price > 0.0) {
            return Err(SimulatorError::BadConfig("mark price must be positive".to_string()));
        }
        if !(insurance_fund.is_finite() && insurance_fund >= 0.0) {
            return Err(SimulatorError::BadConfig(
                "insurance fund must be non-negative".to_string(),
            ));
        }
        if !(impact_lambda.is_finite() && impact_lambda >= 0.0) {
            return Err(SimulatorError::BadConfig(
                "impact lambda must be non-negative".to_string(),
            ));
        }
        book_config.validate()?;
        Ok(ExchangeState {
            positions,
            mark_price,
            insurance_fund,
            book_config,
            impact_lambda,
            margin,
        })
    }

    pub fn token(&self) -> &str {
        &self.book_config.token
    }

    /// Total outstanding notional across open positions at the current mark.
    pub fn open_interest(&self) -> f64 {
        // fold, not sum: an empty f64 sum is -0.0, which leaks a minus
        // sign into serialized open-interest tables.
        self.positions.iter().map(|p| p.notional(self.mark_price)).fold(0.0, |a, n| a + n)
    }

    /// Mean position leverage at the current mark, if any positions are open.
    pub fn avg_leverage(&self) -> Option<f64> {
        if self.positions.is_empty() {
            return None;
        }
        let total: f64 = self
            .positions
            .iter()
            .map(|p| position_metrics(p, self.mark_price, &self.margin).leverage)
            .sum();
        Some(total / self.positions.len() as f64)
    }
}

/// Result of force-closing one position under linear impact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiquidationOutcome {
    /// Average fill price: `mark - (lambda/2) * |q|` for longs, mirrored for
    /// shorts.
    pub exec_price: f64,
    /// Bad debt realized: `max(0, q * (bankruptcy - exec))`.
    pub deficit: f64,
}

/// Closes a position that is below maintenance margin at the state's mark,
/// using the state's impact coefficient.
pub fn execute_liquidation(
    position: &Position,
    state: &ExchangeState,
) -> Result<LiquidationOutcome, SimulatorError> {
    let metrics = position_metrics(position, state.mark_price, &state.margin);
    if !metrics.liquidation_flag {
        return Err(SimulatorError::NotLiquidatable);
    }
    Ok(liquidation_fill(position, state.mark_price, state.impact_lambda, &metrics))
}

fn liquidation_fill(
    position: &Position,
    mark_price: f64,
    impact_lambda: f64,
    metrics: &PositionMetrics,
) -> LiquidationOutcome {
    let dq = position.quantity.abs();
    let half_impact = impact_lambda / 2.0 * dq;
    let exec_price = if position.quantity > 0.0 {
        mark_price - half_impact
    } else {
        mark_price + half_impact
    };
    let deficit = (position.quantity * (metrics.bankruptcy_price - exec_price)).max(0.0);
    LiquidationOutcome { exec_price, deficit }
}

/// One step's insurance accounting: `absorbed + adl_residual == deficit`
/// holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settlement {
    pub absorbed: f64,
    pub fund_after: f64,
    /// Deficit beyond the fund, to be socialized through autodeleveraging.
    pub adl_residual: f64,
}

/// Applies a deficit to an insurance fund: the fund absorbs
/// `min(fund, deficit)` and the remainder becomes the ADL residual.
pub fn settle_insurance(insurance_fund: f64, deficit: f64) -> Result<Settlement, SimulatorError> {
    if !(insurance_fund.is_finite() && insurance_fund >= 0.0) {
        return Err(SimulatorError::BadConfig(
            "insurance fund must be non-negative".to_string(),
        ));
    }
    if !(deficit.is_finite() && deficit >= 0.0) {
        return Err(SimulatorError::BadConfig("deficit must be non-negative".to_string()));
    }
    let absorbed = insurance_fund.min(deficit);
    Ok(Settlement {
        absorbed,
        fund_after: insurance_fund - absorbed,
        adl_residual: deficit - absorbed,
    })
}

/// Knobs for a stress run.  `eta_depth_decay` scales book density by
/// `exp(-eta * w_t)` where `w_t` smooths `|return|` with memory
/// `vol_memory` (0 means the current step's `|return|` alone).  The impact
/// coefficient is divided by the same factor, so thin books also execute
/// worse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioOptions {
    pub eta_depth_decay: f64,
    /// Weight on the previous smoothed `|return|`, in `[0, 1)`.
    pub vol_memory: f64,
    /// Added to the pooled insurance fund at the start of each step.
    pub fee_inflow: f64,
    /// Inner cascade iterations per step before flagging and moving on.
    pub cascade_cap: usize,
    pub step_secs: i64,
    pub start_timestamp: i64,
    /// Keep per-step snapshots and open-interest tables in the result.
    pub record_steps: bool,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            eta_depth_decay: 0.0,
            vol_memory: 0.0,
            fee_inflow: 0.0,
            cascade_cap: 10,
            step_secs: 60,
            start_timestamp: 0,
            record_steps: false,
        }
    }
}

impl ScenarioOptions {
    fn validate(&self) -> Result<(), SimulatorError> {
        if !(self.eta_depth_decay.is_finite() && self.eta_depth_decay >= 0.0) {
            return Err(SimulatorError::BadConfig("eta must be non-negative".to_string()));
        }
        if !(0.0..1.0).contains(&self.vol_memory) {
            return Err(SimulatorError::BadConfig("vol memory must be in [0, 1)".to_string()));
        }
        if !(self.fee_inflow.is_finite() && self.fee_inflow >= 0.0) {
            return Err(SimulatorError::BadConfig("fee inflow must be non-negative".to_string()));
        }
        if self.cascade_cap == 0 {
            return Err(SimulatorError::BadConfig("cascade cap must be >= 1".to_string()));
        }
        if self.step_secs <= 0 {
            return Err(SimulatorError::BadConfig("step seconds must be positive".to_string()));
        }
        Ok(())
    }
}

/// Snapshot of one scenario step, kept when `record_steps` is on.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub timestamp: i64,
    /// Post-shock books, one per token, as the metrics pipeline saw them.
    pub snapshots: Vec<OrderBookSnapshot>,
    /// `(token, open interest)` at measurement time.
    pub open_interest: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    /// Dollar tail-slippage metric measured on each step's post-shock books.
    pub tsar_series: MetricSeries,
    /// Total liquidation deficit realized in each step.
    pub deficit_series: MetricSeries,
    /// Per-step insurance accounting, aligned with the series.
    pub settlements: Vec<Settlement>,
    pub total_deficit: f64,
    pub insurance_absorbed: f64,
    pub adl_residual_total: f64,
    pub final_insurance_fund: f64,
    pub liquidation_count: usize,
    pub final_states: Vec<ExchangeState>,
    pub flags: Vec<String>,
    pub step_records: Vec<StepRecord>,
}

/// Runs a shared shock path over a cross-section of single-token exchange
/// states with one pooled insurance fund.
///
/// Each step: realize the return on every mark, regenerate books at decayed
/// density, measure the tail metric on the fresh books, then run the cascade
/// loop (flag positions below maintenance, close all flagged at the
/// iteration's mark, push the mark by the executed quantity times the
/// effective impact, re-scan) until quiet or capped, and settle the step's
/// deficits against the pool.
pub fn run_stress_scenario(
    states: &[ExchangeState],
    shock_path: &[f64],
    options: &ScenarioOptions,
    params: &SaRParams,
) -> Result<ScenarioResult, SimulatorError> {
    options.validate()?;
    params.validate()?;
    if states.is_empty() || shock_path.is_empty() {
        return Err(SimulatorError::EmptyScenario);
    }
    let mut worlds: Vec<ExchangeState> = states.to_vec();
    for w in &worlds {
        ExchangeState::new(
            w.positions.clone(),
            w.mark_price,
            w.insurance_fund,
            w.book_config.clone(),
            w.impact_lambda,
            w.margin,
        )?;
        for p in &w.positions {
            Position::new(p.quantity, p.collateral, p.entry_price, p.entry_time, p.side)?;
        }
    }
    let mut pool: f64 = worlds.iter().map(|w| w.insurance_fund).sum();
    let mut smoothed_abs_return = 0.0;
    let mut tsar_points = Vec::with_capacity(shock_path.len());
    let mut deficit_points = Vec::with_capacity(shock_path.len());
    let mut settlements = Vec::with_capacity(shock_path.len());
    let mut step_records = Vec::new();
    let mut flags: Vec<String> = Vec::new();
    let mut total_deficit = 0.0;
    let mut insurance_absorbed = 0.0;
    let mut adl_residual_total = 0.0;
    let mut liquidation_count = 0usize;
    let mut span_clamped = false;
    let mut universe_empty_flagged = false;

    for (step, &shock) in shock_path.iter().enumerate() {
        if !shock.is_finite() || shock <= -1.0 {
            return Err(SimulatorError::BadShock { step, value: shock });
        }
        let timestamp = options.start_timestamp + options.step_secs * (step as i64 + 1);
        smoothed_abs_return = options.vol_memory * smoothed_abs_return
            + (1.0 - options.vol_memory) * shock.abs();
        let depth_factor = (-options.eta_depth_decay * smoothed_abs_return).exp();

        // 1. Realize the shock and rebuild each token's book at decayed depth.
        let mut snapshots = Vec::with_capacity(worlds.len());
        for world in worlds.iter_mut() {
            world.mark_price *= 1.0 + shock;
            if world.mark_price <= 0.0 || !world.mark_price.is_finite() {
                return Err(SimulatorError::MarkCollapsed { step });
            }
            let mut cfg = world.book_config.clone();
            cfg.mid = world.mark_price;
            cfg.timestamp = timestamp;
            cfg.density = world.book_config.density * depth_factor;
            if cfg.depth_span >= world.mark_price {
                let shrink = 0.9 * world.mark_price / cfg.depth_span;
                cfg.depth_span *= shrink;
                cfg.level_spacing *= shrink;
                if !span_clamped {
                    flags.push(format!("depth_span_clamped:step_{step}"));
                    span_clamped = true;
                }
            }
            snapshots.push(generate_synthetic_book(&cfg)?);
        }

        // 2. Measure the cross-sectional tail metric on the fresh books.
        let mut inputs = Vec::with_capacity(worlds.len());
        let mut oi_table = Vec::with_capacity(worlds.len());
        for (world, snapshot) in worlds.iter().zip(&snapshots) {
            let oi = world.open_interest();
            oi_table.push((world.token().to_string(), oi));
            let mut input = TokenInput::new(snapshot.clone(), oi);
            input.avg_leverage = world.avg_leverage();
            inputs.push(input);
        }
        let tsar = match run_pipeline(&inputs, params) {
            Ok((report, _)) => report.tsar_dollars,
            Err(MetricsError::EmptyUniverse) => {
                if !universe_empty_flagged {
                    flags.push(format!("universe_empty:step_{step}"));
                    universe_empty_flagged = true;
                }
                0.0
            }
            Err(other) => return Err(SimulatorError::Metrics(other)),
        };

        // 3. Cascade loop: close everything below maintenance, let the
        // executed quantity move the mark, and re-scan.
        let mut step_deficit = 0.0;
        let mut iterations = 0usize;
        loop {
            let mut any_flagged = false;
            for world in worlds.iter_mut() {
                let lambda_eff = world.impact_lambda / depth_factor;
                let flagged: Vec<usize> = world
                    .positions
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| {
                        position_metrics(p, world.mark_price, &world.margin).liquidation_flag
                    })
                    .map(|(i, _)| i)
                    .collect();
                if flagged.is_empty() {
                    continue;
                }
                any_flagged = true;
                if iterations >= options.cascade_cap {
                    continue;
                }
                let mut net_quantity = 0.0;
                for &i in &flagged {
                    let position = &world.positions[i];
                    let metrics =
                        position_metrics(position, world.mark_price, &world.margin);
                    let fill =
                        liquidation_fill(position, world.mark_price, lambda_eff, &metrics);
                    step_deficit += fill.deficit;
                    net_quantity += position.quantity;
                    liquidation_count += 1;
                }
                let mut keep = 0usize;
                world.positions.retain(|_| {
                    let stay = !flagged.contains(&keep);
                    keep += 1;
                    stay
                });
                world.mark_price -= lambda_eff * net_quantity;
                if world.mark_price <= 0.0 || !world.mark_price.is_finite() {
                    return Err(SimulatorError::MarkCollapsed { step });
                }
            }
            if !any_flagged {
                break;
            }
            if iterations >= options.cascade_cap {
                flags.push(format!("cascade_cap:step_{step}"));
                break;
            }
            iterations += 1;
        }

        // 4. Settle against the pooled fund.
        pool += options.fee_inflow;
        let settlement = settle_insurance(pool, step_deficit)?;
        pool = settlement.fund_after;
        total_deficit += step_deficit;
        insurance_absorbed += settlement.absorbed;
        adl_residual_total += settlement.adl_residual;
        settlements.push(settlement);
        tsar_points.push((timestamp, tsar));
        deficit_points.push((timestamp, step_deficit));
        if options.record_steps {
            step_records.push(StepRecord { timestamp, snapshots, open_interest: oi_table });
        }
    }

    Ok(ScenarioResult {
        tsar_series: MetricSeries::new(tsar_points)?,
        deficit_series: MetricSeries::new(deficit_points)?,
        settlements,
        total_deficit,
        insurance_absorbed,
        adl_residual_total,
        final_insurance_fund: pool,
        liquidation_count,
        final_states: worlds,
        flags,
        step_records,
    })
}

/// Shape of a seeded synthetic exchange cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub n_tokens: usize,
    pub positions_per_token: usize,
    pub providers_per_token: usize,
    /// Largest token's mid price; others are log-spread below it.
    pub base_mid: f64,
    /// Pooled insurance fund, assigned to the first state.
    pub insurance_fund: f64,
    pub margin: MarginConfig,
    /// Book density scale in base units per unit price.
    pub density: f64,
    /// Book span per side as a fraction of mid.
    pub depth_span_fraction: f64,
    /// Open interest as a multiple of one side's book notional.
    pub oi_to_depth: (f64, f64),
    /// Per-position leverage draw range; the top is clipped below
    /// `margin.max_leverage`.
    pub leverage_range: (f64, f64),
    /// Liquidating one typical position moves the mark by about this
    /// fraction.
    pub impact_fraction: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n_tokens: 8,
            positions_per_token: 4,
            providers_per_token: 4,
            base_mid: 100.0,
            insurance_fund: 0.0,
            margin: MarginConfig { max_leverage: 20.0, maintenance_fraction: 0.5 },
            density: 50.0,
            depth_span_fraction: 0.08,
            oi_to_depth: (0.5, 3.0),
            leverage_range: (4.0, 18.0),
            impact_fraction: 0.02,
            seed: 0,
        }
    }
}

/// Builds a seeded heterogeneous cross-section of all-long single-token
/// exchange states sharing margin rules.  Deterministic per seed.
pub fn build_world(config: &WorldConfig) -> Result<Vec<ExchangeState>, SimulatorError> {
    if config.n_tokens == 0 || config.positions_per_token == 0 || config.providers_per_token == 0
    {
        return Err(SimulatorError::BadConfig(
            "world needs at least one token, position, and provider".to_string(),
        ));
    }
    if !(config.base_mid.is_finite() && config.base_mid > 0.0)
        || !(config.density > 0.0)
        || !(config.depth_span_fraction > 0.0 && config.depth_span_fraction < 0.5)
        || !(config.impact_fraction >= 0.0)
    {
        return Err(SimulatorError::BadConfig("bad world geometry".to_string()));
    }
    let (lev_lo, lev_hi) = config.leverage_range;
    if !(lev_lo > 0.0 && lev_hi >= lev_lo) {
        return Err(SimulatorError::BadConfig("bad leverage range".to_string()));
    }
    let lev_hi = lev_hi.min(config.margin.max_leverage * 0.95);
    if lev_hi < lev_lo {
        return Err(SimulatorError::BadConfig(
            "leverage range sits above the exchange maximum".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut states = Vec::with_capacity(config.n_tokens);
    for t in 0..config.n_tokens {
        let token = format!("TOK{t:02}");
        let mid = config.base_mid * 10f64.powf(-rng.gen::<f64>());
        let density = config.density * rng.gen_range(0.5..1.5);
        let span = config.depth_span_fraction * mid;
        let levels = 40.0;
        let spacing = span / levels;
        let mut weights = Vec::with_capacity(config.providers_per_token);
        let mut total = 0u32;
        for _ in 0..config.providers_per_token {
            let w: u32 = rng.gen_range(1..=5);
            total += w;
            weights.push(w);
        }
        let shares = ProviderShares::new(
            weights
                .iter()
                .enumerate()
                .map(|(j, &w)| (format!("{token}-lp{j}"), w as f64 / total as f64))
                .collect(),
        )?;
        let book_config = SyntheticBookConfig {
            token: token.clone(),
            timestamp: 0,
            mid,
            density,
            depth_span: span,
            level_spacing: spacing,
            provider_weights: shares,
            seed: config.seed.wrapping_add(t as u64),
        };
        let book_notional = density * span * mid;
        let oi = rng.gen_range(config.oi_to_depth.0..config.oi_to_depth.1) * book_notional;
        let mut weights_pos = Vec::with_capacity(config.positions_per_token);
        let mut pos_total = 0.0;
        for _ in 0..config.positions_per_token {
            let w = rng.gen_range(0.5..1.5);
            pos_total += w;
            weights_pos.push(w);
        }
        let mut positions = Vec::with_capacity(config.positions_per_token);
        for w in &weights_pos {
            let notional = oi * w / pos_total;
            let quantity = notional / mid;
            let leverage = rng.gen_range(lev_lo..=lev_hi);
            positions.push(Position::long(quantity, notional / leverage, mid, 0)?);
        }
        let typical_quantity = oi / (config.positions_per_token as f64 * mid);
        let impact_lambda = if typical_quantity > 0.0 {
            2.0 * config.impact_fraction * mid / typical_quantity * rng.gen_range(0.7..1.3)
        } else {
            0.0
        };
        let insurance = if t == 0 { config.insurance_fund } else { 0.0 };
        states.push(ExchangeState::new(
            positions,
            mid,
            insurance,
            book_config,
            impact_lambda,
            config.margin,
        )?);
    }
    Ok(states)
}

/// Shape of a seeded two-regime shock path: a calm stretch followed by a
/// high-volatility stretch with drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockConfig {
    pub steps: usize,
    pub calm_steps: usize,
    pub calm_vol: f64,
    pub stress_vol: f64,
    /// Per-step drift applied during the stress regime (negative for a
    /// drawdown).
    pub stress_drift: f64,
    pub seed: u64,
}

/// Draws the return path described by `config`; clamped to (-0.5, 0.5).
/// Deterministic per seed.
pub fn build_shock_path(config: &ShockConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.steps)
        .map(|i| {
            let (vol, drift) = if i < config.calm_steps {
                (config.calm_vol, 0.0)
            } else {
                (config.stress_vol, config.stress_drift)
            };
            (drift + vol * standard_normal(&mut rng)).clamp(-0.5, 0.5)
        })
        .collect()
}

/// One standard normal draw (Box-Muller).
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
