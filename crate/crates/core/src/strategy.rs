//! Signal procedure and a desk-scale backtest.
//!
//! On every change in implied volatility the transmission coefficient is
//! recomputed for the current range. A signal fires when `T` clears the
//! threshold and the vol has just fallen sharply. Calls strike at the
//! resistance and target `resistance + d`; puts mirror this at support.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{carry_forward, Date, EvalOutcome, EvaluationRecord, OhlcBar, VolPoint};
use crate::range_detect::{detect_range, RangeConfig};
use crate::tunneling::{transmission_coefficient, MarketParams, RangeBound, Regime, TunnelError, TunnelEvaluation};

/// Bars after the signal bar within which the exit target must be reached.
pub const OUTCOME_HORIZON: usize = 10;

pub const DEFAULT_TICK: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("invalid strategy config: {0}")]
    InvalidConfig(String),
    #[error("invalid backtest input: {0}")]
    Input(String),
    #[error(transparent)]
    Params(#[from] TunnelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Call,
    Put,
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "call" => Ok(Side::Call),
            "put" => Ok(Side::Put),
            _ => Err(format!("unknown side `{s}` (expected call or put)")),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Call => "Call",
            Side::Put => "Put",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    t_threshold: f64,
    vol_drop_ratio: f64,
    vol_lookback: usize,
    side: Side,
}

impl StrategyConfig {
    /// `vol_drop_ratio = 0` disables the vol-fall condition.
    pub fn new(t_threshold: f64, vol_drop_ratio: f64, vol_lookback: usize, side: Side) -> Result<Self, StrategyError> {
        if !(t_threshold > 0.0 && t_threshold < 1.0) {
            return Err(StrategyError::InvalidConfig(format!("t_threshold {t_threshold} outside (0, 1)")));
        }
        if !(0.0..1.0).contains(&vol_drop_ratio) {
            return Err(StrategyError::InvalidConfig(format!(
                "vol_drop_ratio {vol_drop_ratio} outside [0, 1)"
            )));
        }
        if vol_lookback < 2 {
            return Err(StrategyError::InvalidConfig(format!("vol_lookback {vol_lookback} < 2")));
        }
        Ok(Self {
            t_threshold,
            vol_drop_ratio,
            vol_lookback,
            side,
        })
    }

    pub fn t_threshold(&self) -> f64 {
        self.t_threshold
    }
    pub fn vol_drop_ratio(&self) -> f64 {
        self.vol_drop_ratio
    }
    pub fn vol_lookback(&self) -> usize {
        self.vol_lookback
    }
    pub fn side(&self) -> Side {
        self.side
    }
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            t_threshold: 0.95,
            vol_drop_ratio: 0.30,
            vol_lookback: 5,
            side: Side::Call,
        }
    }
}

/// A sharp drop from the recent peak to the current mark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolFall {
    pub vol_from: f64,
    pub vol_to: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalRecord {
    pub date: Date,
    pub symbol: String,
    pub side: Side,
    pub strike: f64,
    pub entry_ref: f64,
    pub exit_target: f64,
    #[serde(flatten)]
    pub eval: TunnelEvaluation,
    pub vol_from: f64,
    pub vol_to: f64,
}

/// Where and when a candidate signal is being considered.
#[derive(Debug, Clone, Copy)]
pub struct SignalContext<'a> {
    pub date: Date,
    pub symbol: &'a str,
    /// Close of the bar the signal would fire on.
    pub close: f64,
}

fn evaluation_record(date: Date, symbol: &str, range: &RangeBound, params: MarketParams) -> EvaluationRecord {
    let outcome = match transmission_coefficient(&params, range.width()) {
        Ok(ev) => EvalOutcome::Evaluated(ev),
        Err(_) => EvalOutcome::NoBarrier,
    };
    EvaluationRecord {
        date,
        symbol: symbol.to_string(),
        range: *range,
        params,
        outcome,
    }
}

/// One record for the first mark and for each mark whose iv differs from
/// the one before it. `NoBarrier` outcomes are kept.
pub fn evaluate_on_vol_change(
    symbol: &str,
    range: &RangeBound,
    r: f64,
    vols: &[VolPoint],
) -> Result<Vec<EvaluationRecord>, StrategyError> {
    if vols.is_empty() {
        return Err(StrategyError::Input("empty vol series".into()));
    }
    let mut out = Vec::new();
    let mut previous: Option<f64> = None;
    for point in vols {
        if previous == Some(point.iv()) {
            continue;
        }
        previous = Some(point.iv());
        let params = MarketParams::new(r, point.iv())?;
        out.push(evaluation_record(point.date(), symbol, range, params));
    }
    Ok(out)
}

/// Compares the latest mark against the peak of the last `vol_lookback` marks.
pub fn detect_vol_fall(vols: &[VolPoint], cfg: &StrategyConfig) -> Option<VolFall> {
    if vols.len() < cfg.vol_lookback {
        return None;
    }
    let window = &vols[vols.len() - cfg.vol_lookback..];
    let peak = window.iter().map(VolPoint::iv).fold(f64::NEG_INFINITY, f64::max);
    let current = window[window.len() - 1].iv();
    let ratio = (peak - current) / peak;
    (ratio >= cfg.vol_drop_ratio).then_some(VolFall {
        vol_from: peak,
        vol_to: current,
        ratio,
    })
}

/// Snaps `level` onto the tick grid without crossing it: downward for
/// calls, upward for puts. Levels already on the grid are kept as is.
fn snap_inside(level: f64, tick: f64, side: Side) -> f64 {
    let steps = level / tick;
    if (steps - steps.round()).abs() < 1e-9 {
        return level;
    }
    match side {
        Side::Call => steps.floor() / tick.recip(),
        Side::Put => steps.ceil() / tick.recip(),
    }
}

/// `None` unless `T` clears the threshold and a vol fall is present.
pub fn generate_signal(
    ctx: &SignalContext<'_>,
    range: &RangeBound,
    eval: &TunnelEvaluation,
    fall: Option<&VolFall>,
    cfg: &StrategyConfig,
    tick: f64,
) -> Option<SignalRecord> {
    if eval.transmission < cfg.t_threshold {
        return None;
    }
    let fall = fall?;
    let (strike, exit_target) = match cfg.side {
        Side::Call => (
            snap_inside(range.resistance(), tick, Side::Call),
            range.resistance() + eval.penetration,
        ),
        Side::Put => (
            snap_inside(range.support(), tick, Side::Put),
            range.support() - eval.penetration,
        ),
    };
    Some(SignalRecord {
        date: ctx.date,
        symbol: ctx.symbol.to_string(),
        side: cfg.side,
        strike,
        entry_ref: ctx.close,
        exit_target,
        eval: *eval,
        vol_from: fall.vol_from,
        vol_to: fall.vol_to,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Hit,
    Expired,
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalOutcome {
    #[serde(flatten)]
    pub signal: SignalRecord,
    pub outcome: Outcome,
    pub resolved_on: Option<Date>,
    /// Underlying move captured: `|exit_target − strike|` on a hit, else 0.
    pub pnl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub symbol: String,
    pub bars: usize,
    pub evaluations: Vec<EvaluationRecord>,
    pub signals: Vec<SignalOutcome>,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    symbol: &'a str,
    bars: usize,
    evaluations: usize,
    signals: usize,
    hits: usize,
    expired: usize,
    open: usize,
    total_pnl: f64,
}

impl BacktestReport {
    fn count(&self, outcome: Outcome) -> usize {
        self.signals.iter().filter(|s| s.outcome == outcome).count()
    }

    pub fn hits(&self) -> usize {
        self.count(Outcome::Hit)
    }
    pub fn expired(&self) -> usize {
        self.count(Outcome::Expired)
    }
    pub fn open(&self) -> usize {
        self.count(Outcome::Open)
    }

    pub fn total_pnl(&self) -> f64 {
        self.signals.iter().map(|s| s.pnl).sum()
    }

    fn summary(&self) -> SummaryLine<'_> {
        SummaryLine {
            symbol: &self.symbol,
            bars: self.bars,
            evaluations: self.evaluations.len(),
            signals: self.signals.len(),
            hits: self.hits(),
            expired: self.expired(),
            open: self.open(),
            total_pnl: self.total_pnl(),
        }
    }

    /// One `{"type":"signal",...}` line per signal, then one `{"type":"summary",...}` line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Tagged<'a, T: Serialize> {
            #[serde(rename = "type")]
            kind: &'static str,
            #[serde(flatten)]
            body: &'a T,
        }
        for s in &self.signals {
            let line = serde_json::to_string(&Tagged { kind: "signal", body: s })?;
            writeln!(out, "{line}")?;
        }
        let line = serde_json::to_string(&Tagged {
            kind: "summary",
            body: &self.summary(),
        })?;
        writeln!(out, "{line}")
    }
}

pub const SUMMARY_CSV_HEADER: &str = "symbol,bars,evaluations,signals,hits,expired,open,total_pnl";

pub fn write_summary_csv<W: Write>(mut out: W, reports: &[BacktestReport]) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_CSV_HEADER}")?;
    for rep in reports {
        let s = rep.summary();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.symbol, s.bars, s.evaluations, s.signals, s.hits, s.expired, s.open, s.total_pnl
        )?;
    }
    Ok(())
}

pub struct BacktestInput<'a> {
    pub symbol: &'a str,
    pub bars: &'a [OhlcBar],
    pub vols: &'a [VolPoint],
    pub r: f64,
    pub range_cfg: RangeConfig,
    pub strat_cfg: StrategyConfig,
    pub tick: f64,
    /// Fixed levels used instead of detection on every bar.
    pub range_override: Option<RangeBound>,
}

fn resolve(bars: &[OhlcBar], at: usize, signal: &SignalRecord) -> (Outcome, Option<Date>) {
    let last = (at + OUTCOME_HORIZON).min(bars.len() - 1);
    for bar in &bars[at + 1..=last] {
        let reached = match signal.side {
            Side::Call => bar.high() >= signal.exit_target,
            Side::Put => bar.low() <= signal.exit_target,
        };
        if reached {
            return (Outcome::Hit, Some(bar.date()));
        }
    }
    if at + OUTCOME_HORIZON < bars.len() {
        (Outcome::Expired, None)
    } else {
        (Outcome::Open, None)
    }
}

/// Walks the bars in order. Everything decided at bar `i` uses only bars
/// `..=i` and vol marks dated on or before it; only outcome resolution
/// looks forward.
pub fn backtest(input: &BacktestInput<'_>) -> Result<BacktestReport, StrategyError> {
    let BacktestInput {
        symbol,
        bars,
        vols,
        r,
        range_cfg,
        strat_cfg,
        tick,
        range_override,
    } = *input;
    if bars.is_empty() {
        return Err(StrategyError::Input("no bars".into()));
    }
    if vols.is_empty() {
        return Err(StrategyError::Input("no vol marks".into()));
    }
    let last_date = bars[bars.len() - 1].date();
    if vols[0].date() > last_date {
        return Err(StrategyError::Input(format!(
            "vol marks start {} after the last bar {last_date}",
            vols[0].date()
        )));
    }
    if !(tick.is_finite() && tick > 0.0) {
        return Err(StrategyError::Input(format!("tick {tick} must be > 0")));
    }
    MarketParams::new(r, 1.0)?;

    let ivs = carry_forward(vols, bars.iter().map(OhlcBar::date));
    let mut evaluations = Vec::new();
    let mut signals = Vec::new();
    let mut seen_marks = 0;
    let mut last_iv: Option<f64> = None;
    let mut last_evaluated: Option<(f64, RangeBound)> = None;

    for (i, bar) in bars.iter().enumerate() {
        while seen_marks < vols.len() && vols[seen_marks].date() <= bar.date() {
            seen_marks += 1;
        }
        let Some(iv) = ivs[i] else { continue };
        let iv_changed = last_iv != Some(iv);
        last_iv = Some(iv);
        let range = match range_override {
            Some(fixed) => fixed,
            None if i + 1 < range_cfg.window() => continue,
            None => match detect_range(&bars[..=i], &range_cfg).ok().and_then(|o| o.range().copied()) {
                Some(found) => found,
                None => continue,
            },
        };
        // A new range is evaluated too, but only a vol change can trigger.
        if last_evaluated == Some((iv, range)) {
            continue;
        }
        last_evaluated = Some((iv, range));
        let record = evaluation_record(bar.date(), symbol, &range, MarketParams::new(r, iv)?);
        if let EvalOutcome::Evaluated(ev) = record.outcome {
            if iv_changed && ev.regime == Regime::Tunneling {
                let fall = detect_vol_fall(&vols[..seen_marks], &strat_cfg);
                let ctx = SignalContext {
                    date: bar.date(),
                    symbol,
                    close: bar.close(),
                };
                if let Some(signal) = generate_signal(&ctx, &range, &ev, fall.as_ref(), &strat_cfg, tick) {
                    let (outcome, resolved_on) = resolve(bars, i, &signal);
                    let pnl = if outcome == Outcome::Hit {
                        (signal.exit_target - signal.strike).abs()
                    } else {
                        0.0
                    };
                    signals.push(SignalOutcome {
                        signal,
                        outcome,
                        resolved_on,
                        pnl,
                    });
                }
            }
        }
        evaluations.push(record);
    }

    Ok(BacktestReport {
        symbol: symbol.to_string(),
        bars: bars.len(),
        evaluations,
        signals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(m: u32, d: u32) -> Date {
        Date::from_ymd_opt(2013, m, d).unwrap()
    }

    fn marks(ivs: &[f64]) -> Vec<VolPoint> {
        ivs.iter()
            .enumerate()
            .map(|(i, &iv)| VolPoint::new(day(1, 1 + i as u32), iv).unwrap())
            .collect()
    }

    fn eval(sigma: f64, k: f64) -> TunnelEvaluation {
        transmission_coefficient(&MarketParams::new(0.03, sigma).unwrap(), k).unwrap()
    }

    #[test]
    fn lnkd_second_record_matches_reference_row() {
        let range = RangeBound::new(123.3, 127.2).unwrap();
        let vols = vec![
            VolPoint::new(day(2, 6), 0.63).unwrap(),
            VolPoint::new(day(2, 7), 0.47).unwrap(),
        ];
        let recs = evaluate_on_vol_change("LNKD", &range, 0.03, &vols).unwrap();
        assert_eq!(recs.len(), 2);
        let t = recs[1].outcome.evaluation().unwrap().transmission;
        assert!((t - 0.998675).abs() < 1e-3, "{t}");
    }

    #[test]
    fn constant_vol_gives_one_record() {
        let range = RangeBound::new(123.3, 127.2).unwrap();
        let recs = evaluate_on_vol_change("X", &range, 0.03, &marks(&[0.5; 5])).unwrap();
        assert_eq!(recs.len(), 1);
    }

    #[test]
    fn no_barrier_is_recorded() {
        let range = RangeBound::new(123.3, 127.2).unwrap();
        let recs = evaluate_on_vol_change("LNKD", &range, 0.03, &marks(&[0.39])).unwrap();
        assert_eq!(recs[0].outcome, EvalOutcome::NoBarrier);
    }

    #[test]
    fn empty_vols_rejected() {
        let range = RangeBound::new(1.0, 2.0).unwrap();
        assert!(evaluate_on_vol_change("X", &range, 0.03, &[]).is_err());
    }

    #[test]
    fn vol_fall_examples() {
        let cfg = StrategyConfig::default();
        let nflx = detect_vol_fall(&marks(&[0.95, 0.9, 0.8, 0.7, 0.55]), &cfg).unwrap();
        assert_eq!((nflx.vol_from, nflx.vol_to), (0.95, 0.55));
        assert!((nflx.ratio - 0.4 / 0.95).abs() < 1e-15);
        assert!((nflx.ratio - 0.421).abs() < 1e-3);

        let goog = detect_vol_fall(&marks(&[0.40, 0.38, 0.30, 0.2, 0.15]), &cfg).unwrap();
        assert!((goog.ratio - 0.625).abs() < 1e-12);

        assert!(detect_vol_fall(&marks(&[0.3; 5]), &cfg).is_none());
        assert!(detect_vol_fall(&marks(&[0.9, 0.3]), &cfg).is_none(), "shorter than lookback");
    }

    #[test]
    fn peak_outside_lookback_is_ignored() {
        let cfg = StrategyConfig::default();
        assert!(detect_vol_fall(&marks(&[0.95, 0.6, 0.6, 0.6, 0.6, 0.55]), &cfg).is_none());
    }

    #[test]
    fn hum_call_signal() {
        let range = RangeBound::new(66.95, 70.08).unwrap();
        let ev = eval(0.31, range.width());
        let fall = VolFall {
            vol_from: 0.43,
            vol_to: 0.25,
            ratio: 0.18 / 0.43,
        };
        let ctx = SignalContext {
            date: day(3, 28),
            symbol: "HUM",
            close: 69.5,
        };
        let sig = generate_signal(&ctx, &range, &ev, Some(&fall), &StrategyConfig::default(), DEFAULT_TICK).unwrap();
        assert_eq!(sig.side, Side::Call);
        assert_eq!(sig.strike, 70.08);
        assert!((sig.exit_target - 70.16455).abs() < 1e-4);
        assert_eq!(sig.exit_target, range.resistance() + ev.penetration);
        assert_eq!((sig.vol_from, sig.vol_to), (0.43, 0.25));
    }

    #[test]
    fn below_threshold_or_missing_fall_gives_nothing() {
        let range = RangeBound::new(97.81, 101.17).unwrap();
        let nflx = eval(0.55, range.width());
        assert!(nflx.transmission < 0.95);
        let fall = VolFall {
            vol_from: 0.95,
            vol_to: 0.55,
            ratio: 0.4 / 0.95,
        };
        let ctx = SignalContext {
            date: day(1, 23),
            symbol: "NFLX",
            close: 100.0,
        };
        let cfg = StrategyConfig::default();
        assert!(generate_signal(&ctx, &range, &nflx, Some(&fall), &cfg, DEFAULT_TICK).is_none());

        let strong = TunnelEvaluation {
            transmission: 0.999,
            ..nflx
        };
        assert!(generate_signal(&ctx, &range, &strong, None, &cfg, DEFAULT_TICK).is_none());
    }

    #[test]
    fn put_strike_snaps_up_to_support() {
        assert_eq!(snap_inside(66.953, 0.01, Side::Put), 66.96);
        assert_eq!(snap_inside(70.087, 0.01, Side::Call), 70.08);
        assert_eq!(snap_inside(97.81, 0.01, Side::Put), 97.81);
        assert!(snap_inside(70.087, 0.05, Side::Call) <= 70.087);
    }

    #[test]
    fn config_validation() {
        assert!(StrategyConfig::new(1.0, 0.3, 5, Side::Call).is_err());
        assert!(StrategyConfig::new(0.95, 1.0, 5, Side::Call).is_err());
        assert!(StrategyConfig::new(0.95, 0.0, 5, Side::Call).is_ok());
        assert!(StrategyConfig::new(0.95, 0.3, 1, Side::Put).is_err());
        assert_eq!("PUT".parse::<Side>().unwrap(), Side::Put);
    }
}
