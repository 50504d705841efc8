//! Flat-range detection over a trailing window of daily bars.
//!
//! Resistance is the highest high in the window and support the lowest
//! low. The window counts as range-bound when both levels were touched
//! (within a relative tolerance) by at least `touch_count` bars each.

use serde::Serialize;
use thiserror::Error;

use crate::market_data::OhlcBar;
use crate::tunneling::RangeBound;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RangeError {
    #[error("invalid range config: {0}")]
    InvalidConfig(String),
    #[error("need at least {window} bars, got {len}")]
    TooShort { window: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeConfig {
    window: usize,
    touch_count: usize,
    tolerance: f64,
}

impl RangeConfig {
    pub fn new(window: usize, touch_count: usize, tolerance: f64) -> Result<Self, RangeError> {
        if touch_count < 2 {
            return Err(RangeError::InvalidConfig(format!("touch_count {touch_count} < 2")));
        }
        if window < 2 * touch_count {
            return Err(RangeError::InvalidConfig(format!(
                "window {window} < 2 * touch_count {touch_count}"
            )));
        }
        if !(tolerance > 0.0 && tolerance < 0.05) {
            return Err(RangeError::InvalidConfig(format!("tolerance {tolerance} outside (0, 0.05)")));
        }
        Ok(Self {
            window,
            touch_count,
            tolerance,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }
    pub fn touch_count(&self) -> usize {
        self.touch_count
    }
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

impl Default for RangeConfig {
    fn default() -> Self {
        Self {
            window: 20,
            touch_count: 2,
            tolerance: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NoRangeReason {
    /// Closes drift across the window instead of returning to the levels.
    Trending,
    InsufficientTouches,
    /// A close sits outside the extremes.
    BreachedWindow,
    /// Highest high equals lowest low; there is no width.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangeOutcome {
    Range(RangeBound),
    NoRange(NoRangeReason),
}

impl RangeOutcome {
    pub fn range(&self) -> Option<&RangeBound> {
        match self {
            RangeOutcome::Range(r) => Some(r),
            RangeOutcome::NoRange(_) => None,
        }
    }
}

/// Looks only at the last `cfg.window` bars.
pub fn detect_range(bars: &[OhlcBar], cfg: &RangeConfig) -> Result<RangeOutcome, RangeError> {
    if bars.len() < cfg.window {
        return Err(RangeError::TooShort {
            window: cfg.window,
            len: bars.len(),
        });
    }
    let window = &bars[bars.len() - cfg.window..];
    let resistance = window.iter().map(OhlcBar::high).fold(f64::NEG_INFINITY, f64::max);
    let support = window.iter().map(OhlcBar::low).fold(f64::INFINITY, f64::min);

    let Ok(range) = RangeBound::new(support, resistance) else {
        return Ok(RangeOutcome::NoRange(NoRangeReason::Degenerate));
    };
    if window.iter().any(|b| b.close() < support || b.close() > resistance) {
        return Ok(RangeOutcome::NoRange(NoRangeReason::BreachedWindow));
    }

    let top_band = resistance * (1.0 - cfg.tolerance);
    let bottom_band = support * (1.0 + cfg.tolerance);
    let top_touches = window.iter().filter(|b| b.high() >= top_band).count();
    let bottom_touches = window.iter().filter(|b| b.low() <= bottom_band).count();
    if top_touches >= cfg.touch_count && bottom_touches >= cfg.touch_count {
        return Ok(RangeOutcome::Range(range));
    }

    let drift = (window[window.len() - 1].close() - window[0].close()).abs();
    if drift >= 0.5 * range.width() {
        Ok(RangeOutcome::NoRange(NoRangeReason::Trending))
    } else {
        Ok(RangeOutcome::NoRange(NoRangeReason::InsufficientTouches))
    }
}

/// `K = resistance − support`.
pub fn range_width(range: &RangeBound) -> f64 {
    range.width()
}
