//! Flat `key = value` engine configuration.
//!
//! Exactly twelve keys are recognized; anything else is an error so that a
//! misspelled risk parameter fails loudly instead of silently running with a
//! default.  Keys may appear in any order, blank lines and `#` comments are
//! ignored, and every key is optional (defaults apply).

use super::CliError;
use crate::concentration::HaircutParams;
use crate::metrics::{SaRParams, SidePolicy};
use std::path::Path;

/// Engine parameters plus the one scenario knob that travels with them.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub params: SaRParams,
    /// Depth-decay exponent consumed by the stress scenario runner.
    pub eta_depth_decay: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { params: SaRParams::default(), eta_depth_decay: 0.0 }
    }
}

/// Environment variable consulted for the config path when no `--config`
/// flag is given.
pub const CONFIG_ENV_VAR: &str = "SAR_CONFIG";

pub const CONFIG_KEYS: [&str; 12] = [
    "alpha",
    "beta",
    "n_target",
    "cr1_thresh",
    "lambda_conc",
    "mu_dom",
    "c_deficit",
    "gamma_cascade",
    "delta_spoof",
    "max_slippage",
    "side_policy",
    "eta_depth_decay",
];

/// Loads configuration from, in priority order: the explicit path, the
/// `SAR_CONFIG` environment variable, or built-in defaults.
pub fn load_config(explicit: Option<&Path>) -> Result<EngineConfig, CliError> {
    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(CONFIG_ENV_VAR).map(std::path::PathBuf::from),
    };
    match path {
        None => Ok(EngineConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| CliError::Config {
                origin: p.display().to_string(),
                message: format!("cannot read: {e}"),
            })?;
            parse_config(&text, &p.display().to_string())
        }
    }
}

/// Parses config text; `source` names the origin in diagnostics.
pub fn parse_config(text: &str, source: &str) -> Result<EngineConfig, CliError> {
    let mut config = EngineConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    let err = |line_no: usize, message: String| CliError::Config {
        origin: format!("{source}:{line_no}"),
        message,
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_start_matches('\u{feff}').trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected key = value, got {line:?}")))?;
        let key = key.trim();
        let value = value.trim();
        let canonical = CONFIG_KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| err(line_no, format!("unknown key {key:?}")))?;
        if seen.contains(canonical) {
            return Err(err(line_no, format!("duplicate key {key:?}")));
        }
        seen.push(canonical);
        let numeric = || -> Result<f64, CliError> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line_no, format!("{key}: not a finite number: {value:?}")))
        };
        match *canonical {
            "alpha" => config.params.alpha = numeric()?,
            "beta" => config.params.beta = numeric()?,
            "n_target" => config.params.haircut.n_target = numeric()?,
            "cr1_thresh" => config.params.haircut.cr1_thresh = numeric()?,
            "lambda_conc" => config.params.haircut.lambda_conc = numeric()?,
            "mu_dom" => config.params.haircut.mu_dom = numeric()?,
            "c_deficit" => config.params.c_deficit = numeric()?,
            "gamma_cascade" => config.params.gamma_cascade = numeric()?,
            "delta_spoof" => config.params.delta_spoof = numeric()?,
            "max_slippage" => config.params.max_slippage = numeric()?,
            "side_policy" => {
                config.params.side_policy = match value {
                    "bid" => SidePolicy::Bid,
                    "ask" => SidePolicy::Ask,
                    "dominant_oi_skew" => SidePolicy::DominantOiSkew,
                    other => {
                        return Err(err(
                            line_no,
                            format!(
                                "side_policy must be bid, ask, or dominant_oi_skew, got {other:?}"
                            ),
                        ))
                    }
                }
            }
            "eta_depth_decay" => {
                let eta = numeric()?;
                if eta < 0.0 {
                    return Err(err(line_no, "eta_depth_decay must be >= 0".to_string()));
                }
                config.eta_depth_decay = eta;
            }
            _ => unreachable!("key list is exhaustive"),
        }
    }
    config.params.validate().map_err(|e| CliError::Config {
        origin: source.to_string(),
        message: e.to_string(),
    })?;
    Ok(config)
}

/// Renders a config back to the flat text format with every key explicit.
pub fn render_config(config: &EngineConfig) -> String {
    let policy = match config.params.side_policy {
        SidePolicy::Bid => "bid",
        SidePolicy::Ask => "ask",
        SidePolicy::DominantOiSkew => "dominant_oi_skew",
    };
    let HaircutParams { n_target, cr1_thresh, lambda_conc, mu_dom } = config.params.haircut;
    format!(
        "alpha = {}\nbeta = {}\nn_target = {}\ncr1_thresh = {}\nlambda_conc = {}\n\
         mu_dom = {}\nc_deficit = {}\ngamma_cascade = {}\ndelta_spoof = {}\n\
         max_slippage = {}\nside_policy = {}\neta_depth_decay = {}\n",
        config.params.alpha,
        config.params.beta,
        n_target,
        cr1_thresh,
        lambda_conc,
        mu_dom,
        config.params.c_deficit,
        config.params.gamma_cascade,
        config.params.delta_spoof,
        config.params.max_slippage,
        policy,
        config.eta_depth_decay,
    )
}
