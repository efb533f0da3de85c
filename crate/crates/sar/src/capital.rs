//! Insurance-fund sizing.
//!
//! Two complementary answers to "how big should the backstop be": the
//! quantile optimum from the capital trade-off (holding a dollar costs `r`,
//! an uncovered deficit dollar costs `kappa`, so cover up to the `1 - r/kappa`
//! quantile of the deficit distribution), and a forward-looking floor as a
//! multiple of tail slippage dollars.

use crate::metrics::nearest_rank;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CapitalError {
    #[error("deficit sample list is empty")]
    EmptySamples,
    #[error("negative deficit sample {0}")]
    NegativeDeficit(f64),
    #[error("non-finite deficit sample")]
    NonFiniteSample,
    #[error("bad capital parameter: {0}")]
    BadParams(String),
}

/// Cost trade-off and sizing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapitalParams {
    /// Annualized opportunity cost of a reserved dollar.
    pub opportunity_cost_r: f64,
    /// Social/solvency cost per uncovered deficit dollar.
    pub social_cost_kappa: f64,
    /// Multiple of tail slippage dollars for the forward-looking floor,
    /// conventionally within [1, 10].
    pub c_deficit: f64,
}

impl CapitalParams {
    pub fn new(
        opportunity_cost_r: f64,
        social_cost_kappa: f64,
        c_deficit: f64,
    ) -> Result<Self, CapitalError> {
        if !(opportunity_cost_r >= 0.0) || !opportunity_cost_r.is_finite() {
            return Err(CapitalError::BadParams(format!(
                "opportunity cost {opportunity_cost_r} must be >= 0"
            )));
        }
        if !(social_cost_kappa > 0.0) || !social_cost_kappa.is_finite() {
            return Err(CapitalError::BadParams(format!(
                "social cost {social_cost_kappa} must be > 0"
            )));
        }
        if !(1.0..=10.0).contains(&c_deficit) {
            return Err(CapitalError::BadParams(format!(
                "c_deficit {c_deficit} outside [1, 10]"
            )));
        }
        Ok(CapitalParams { opportunity_cost_r, social_cost_kappa, c_deficit })
    }
}

impl Default for CapitalParams {
    fn default() -> Self {
        CapitalParams { opportunity_cost_r: 0.05, social_cost_kappa: 1.0, c_deficit: 2.0 }
    }
}

/// A sizing result; `degenerate` marks the boundary case where reserving
/// capital never pays (`r >= kappa`) and the optimum collapses to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IfSizing {
    pub amount: f64,
    pub degenerate: bool,
}

/// Quantile-optimal insurance fund from a sample of per-period deficits:
/// the nearest-rank upper quantile at level `1 - r/kappa`.
pub fn optimal_if_from_deficits(
    deficit_samples: &[f64],
    params: &CapitalParams,
) -> Result<IfSizing, CapitalError> {
    if deficit_samples.is_empty() {
        return Err(CapitalError::EmptySamples);
    }
    let mut sorted = Vec::with_capacity(deficit_samples.len());
    for &d in deficit_samples {
        if !d.is_finite() {
            return Err(CapitalError::NonFiniteSample);
        }
        if d < 0.0 {
            return Err(CapitalError::NegativeDeficit(d));
        }
        sorted.push(d);
    }
    let q = 1.0 - params.opportunity_cost_r / params.social_cost_kappa;
    if q <= 0.0 {
        return Ok(IfSizing { amount: 0.0, degenerate: true });
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(IfSizing { amount: nearest_rank(&sorted, q), degenerate: false })
}

/// Forward-looking floor: `c_deficit` times tail slippage dollars.
pub fn sar_implied_if(tsar_dollars: f64, c_deficit: f64) -> f64 {
    c_deficit * tsar_dollars
}
