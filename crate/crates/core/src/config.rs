//! `key = value` run configuration.
//!
//! Recognized keys: `risk_free_rate`, `t_threshold`, `vol_drop_ratio`,
//! `range_window`, `range_touch_count`, `range_tolerance`. Blank lines
//! and lines starting with `#` are ignored.

use std::path::Path;

use crate::market_data::DataError;
use crate::range_detect::RangeConfig;
use crate::strategy::{Side, StrategyConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub risk_free_rate: Option<f64>,
    pub t_threshold: f64,
    pub vol_drop_ratio: f64,
    pub range_window: usize,
    pub range_touch_count: usize,
    pub range_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let range = RangeConfig::default();
        let strat = StrategyConfig::default();
        Self {
            risk_free_rate: None,
            t_threshold: strat.t_threshold(),
            vol_drop_ratio: strat.vol_drop_ratio(),
            range_window: range.window(),
            range_touch_count: range.touch_count(),
            range_tolerance: range.tolerance(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx as u64 + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(DataError::Parse {
                    line,
                    column: 1,
                    message: format!("expected `key = value`, found `{trimmed}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let column = raw.find('=').map_or(1, |i| i + 2);
            let bad = |what: &str| DataError::Parse {
                line,
                column,
                message: format!("`{key}` expects {what}, found `{value}`"),
            };
            let float = || value.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad("a number"));
            let count = || value.parse::<usize>().map_err(|_| bad("a non-negative integer"));
            match key {
                "risk_free_rate" => cfg.risk_free_rate = Some(float()?),
                "t_threshold" => cfg.t_threshold = float()?,
                "vol_drop_ratio" => cfg.vol_drop_ratio = float()?,
                "range_window" => cfg.range_window = count()?,
                "range_touch_count" => cfg.range_touch_count = count()?,
                "range_tolerance" => cfg.range_tolerance = float()?,
                _ => {
                    return Err(DataError::Parse {
                        line,
                        column: 1,
                        message: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn range_config(&self) -> Result<RangeConfig, String> {
        RangeConfig::new(self.range_window, self.range_touch_count, self.range_tolerance)
            .map_err(|e| e.to_string())
    }

    pub fn strategy_config(&self, side: Side, vol_lookback: usize) -> Result<StrategyConfig, String> {
        StrategyConfig::new(self.t_threshold, self.vol_drop_ratio, vol_lookback, side).map_err(|e| e.to_string())
    }
}
