//! Synthetic range-then-breakout price histories.
//!
//! Each scenario holds a flat range between fixed support and resistance
//! levels, walks implied vol down over the last few range days, then
//! breaks through resistance on the day after the final mark of the walk.

use crate::market_data::{Date, OhlcBar, VolPoint};
use crate::table1::{ReferenceRow, REFERENCE_ROWS};
use crate::tunneling::{penetration_distance, MarketParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub symbol: String,
    pub support: f64,
    pub resistance: f64,
    /// Last range day; the breakout bar follows it.
    pub signal_date: Date,
    /// Range days including the signal day.
    pub range_bars: usize,
    /// Bars after the breakout bar.
    pub tail_bars: usize,
    /// Implied vol before the walk.
    pub vol_start: f64,
    /// Marks on the final range days, ending on the signal day.
    pub vol_walk: Vec<f64>,
    /// Rate used to size the breakout past `resistance + d`.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub symbol: String,
    pub bars: Vec<OhlcBar>,
    pub vols: Vec<VolPoint>,
    pub signal_date: Date,
}

// (open, high, low, close) as fractions of the width above support.
const CYCLE: [(f64, f64, f64, f64); 5] = [
    (0.70, 1.00, 0.57, 0.90),
    (0.90, 0.95, 0.44, 0.54),
    (0.54, 0.59, 0.00, 0.15),
    (0.15, 0.49, 0.08, 0.38),
    (0.38, 0.77, 0.31, 0.69),
];

fn bar(date: Date, o: f64, h: f64, l: f64, c: f64) -> OhlcBar {
    OhlcBar::new(date, o, h, l, c).expect("scenario bar is consistent")
}

pub fn build(spec: &ScenarioSpec) -> Scenario {
    let (s, r) = (spec.support, spec.resistance);
    let k = r - s;
    let at = |f: f64| {
        if f == 1.0 {
            r
        } else if f == 0.0 {
            s
        } else {
            s + f * k
        }
    };
    let first = spec.signal_date - chrono::Duration::days(spec.range_bars as i64 - 1);
    let mut bars = Vec::new();
    // Phase the cycle so the signal day closes mid-range (cycle entry 3).
    let offset = (3 + 5 - (spec.range_bars - 1) % 5) % 5;
    for i in 0..spec.range_bars {
        let date = first + chrono::Duration::days(i as i64);
        let (o, h, l, c) = CYCLE[(i + offset) % 5];
        bars.push(bar(date, at(o), at(h), at(l), at(c)));
    }

    let sigma_end = *spec.vol_walk.last().unwrap_or(&spec.vol_start);
    let d = MarketParams::new(spec.r, sigma_end)
        .ok()
        .and_then(|p| penetration_distance(&p, k).ok())
        .unwrap_or(0.0);
    let mut level = r + d + 0.5 * k;
    let breakout = spec.signal_date + chrono::Duration::days(1);
    bars.push(bar(breakout, s + 0.9 * k, level, s + 0.85 * k, r + d + 0.3 * k));
    for j in 0..spec.tail_bars {
        let date = breakout + chrono::Duration::days(1 + j as i64);
        let open = level - 0.2 * k;
        level += 0.2 * k;
        bars.push(bar(date, open, level, open - 0.1 * k, level - 0.1 * k));
    }

    let walk_start = spec.range_bars - spec.vol_walk.len().min(spec.range_bars);
    let vols = bars
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let iv = if i < walk_start {
                spec.vol_start
            } else if i < spec.range_bars {
                spec.vol_walk[i - walk_start]
            } else {
                sigma_end
            };
            VolPoint::new(b.date(), iv).expect("scenario vol is positive")
        })
        .collect();

    Scenario {
        symbol: spec.symbol.clone(),
        bars,
        vols,
        signal_date: spec.signal_date,
    }
}

fn parse_signal_date(row: &ReferenceRow) -> Date {
    // Dates read "DD-DD.MM.YYYY" or "DD.MM-DD.MM.YYYY"; the first day is the signal day.
    let (head, tail) = row.dates.split_once('-').expect("date range");
    let parts: Vec<&str> = tail.split('.').collect();
    let year: i32 = parts[parts.len() - 1].parse().expect("year");
    let (day, month): (u32, u32) = match head.split_once('.') {
        Some((d, m)) => (d.parse().expect("day"), m.parse().expect("month")),
        None => (head.parse().expect("day"), parts[1].parse().expect("month")),
    };
    Date::from_ymd_opt(year, month, day).expect("valid date")
}

/// A scenario per reference row: range at the printed levels, vol walking
/// from the pre-fall level down to the row's `σ` over three marks.
pub fn reference_scenario(row: &ReferenceRow) -> Scenario {
    let mid = (row.vol_from + row.sigma) / 2.0;
    build(&ScenarioSpec {
        symbol: row.symbol.to_string(),
        support: row.support,
        resistance: row.resistance,
        signal_date: parse_signal_date(row),
        range_bars: 25,
        tail_bars: 4,
        vol_start: row.vol_from,
        vol_walk: vec![row.vol_from, mid, row.sigma],
        r: row.r,
    })
}

pub fn reference_scenarios() -> Vec<Scenario> {
    REFERENCE_ROWS.iter().map(reference_scenario).collect()
}
