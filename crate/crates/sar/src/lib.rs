//! Slippage-at-Risk (SaR): forward-looking liquidity risk analytics for
//! perpetual futures exchanges.
//!
//! Market risk answers "what if the price moves against the trader".  This
//! crate answers the complementary question: *what if the book is too thin to
//! close the trader out*.  It walks live order-book snapshots to price
//! forced liquidations, penalizes liquidity that is concentrated in a few
//! provider accounts, aggregates per-token slippage into exchange-wide tail
//! metrics, sizes the insurance fund against them, and ships a small
//! stress-scenario simulator for validating that the metrics actually lead
//! realized losses.
//!
//! # Modules
//!
//! - [`orderbook`]: snapshot types, depth measures, and the book walk that
//!   prices a liquidation of a given size against resting levels.
//! - [`concentration`]: provider share extraction, HHI / effective provider
//!   count / top-k ratios, withdrawal stress, and the concentration haircut.
//! - [`metrics`]: per-token stress notionals, the cross-sectional SaR / ESaR /
//!   TSaR / OI-weighted quantiles, cascade and spoofing adjustments, and the
//!   end-to-end [`metrics::run_pipeline`].
//! - [`timeseries`]: rolling level/dispersion/vol/trend stats, lead-lag
//!   correlation, and a self-contained Granger causality F-test.
//! - [`capital`]: insurance-fund sizing, both from a deficit-quantile optimum
//!   and as a multiple of tail slippage dollars.
//! - [`simulator`]: margin mechanics, forced-liquidation execution, synthetic
//!   constant-density books with provider attribution, and seeded stress
//!   scenarios producing paired risk/deficit series.
//! - [`cli`]: file formats (snapshot CSV/JSONL, config, history), alert rules
//!   and evaluation, report emission, and the subcommand entry points used by
//!   the thin `sar` binary.
//!
//! # Examples
//!
//! Each major capability has a runnable example; `cargo run --example <name>`:
//!
//! - `book_slippage` — walk a hand-built book, depth within a band, exhaustion.
//! - `concentration_haircut` — provider shares, HHI, withdrawal ratios, haircut.
//! - `compute_report` — full pipeline over a small token cross-section.
//! - `insurance_sizing` — deficit-quantile optimum vs. tail-slippage sizing.
//! - `stress_scenario` — seeded multi-token liquidation cascade with depth decay.
//! - `leading_indicator` — lead-lag and Granger validation on scenario output.
//! - `alert_monitoring` — threshold rules over a computed report.
//! - `replay_history` — snapshot-directory replay into an append-only history.
//!
//! The `sar` binary wraps the same entry points as subcommands
//! (`compute`, `replay`, `simulate`, `validate`, `alerts`); see `cli`.

pub mod capital;
pub mod cli;
pub mod concentration;
pub mod metrics;
pub mod orderbook;
pub mod simulator;
pub mod timeseries;

pub use capital::{sar_implied_if, optimal_if_from_deficits, CapitalParams, IfSizing};
pub use concentration::{
    adjusted_slippage, concentration_haircut, concentration_stats, provider_shares,
    withdrawal_slippage, ConcentrationStats, HaircutParams, ProviderShares,
};
pub use metrics::{
    calibrate_notional, run_pipeline, sar_quantile, weighted_sar, SaRParams, SaRReport,
    SidePolicy, TokenInput, TokenRiskRecord,
};
pub use orderbook::{
    cumulative_depth, depth_at_bps, directional_slippage, walk_book_slippage, BookSide,
    Direction, OrderBookSnapshot, PriceLevel, Side, SlippageOutcome,
};
pub use simulator::{
    build_shock_path, build_world, execute_liquidation, generate_synthetic_book,
    position_metrics, run_stress_scenario, settle_insurance, ExchangeState, MarginConfig,
    Position, PositionMetrics, PositionSide, ScenarioOptions, ScenarioResult, Settlement,
    ShockConfig, SyntheticBookConfig, WorldConfig,
};
pub use timeseries::{
    granger_bidirectional, granger_f_test, lead_lag_correlation, rolling_stats,
    CausalDirection, GrangerResult, LeadLagResult, MetricSeries, RollingStats,
};
