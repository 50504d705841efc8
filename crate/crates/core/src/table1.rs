//! The four published worked examples: LNKD, GOOG, HUM and NFLX range
//! breakouts in early 2013, each with `r`, implied vol, the range levels,
//! and the printed `T` and `d`.

use crate::tunneling::{transmission_coefficient, MarketParams, TunnelError, TunnelEvaluation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub symbol: &'static str,
    pub dates: &'static str,
    pub r: f64,
    pub sigma: f64,
    pub resistance: f64,
    pub support: f64,
    pub k: f64,
    pub d: f64,
    pub t: f64,
    pub vol_from: f64,
    pub vol_to: f64,
}

// Values as printed, including their rounding.
pub const REFERENCE_ROWS: [ReferenceRow; 4] = [
    ReferenceRow {
        symbol: "LNKD",
        dates: "07-08.02.2013",
        r: 0.03,
        sigma: 0.47,
        resistance: 127.2,
        support: 123.3,
        k: 3.9,
        d: 0.058114,
        t: 0.998675,
        vol_from: 0.63,
        vol_to: 0.39,
    },
    ReferenceRow {
        symbol: "GOOG",
        dates: "22-23.01.2013",
        r: 0.03,
        sigma: 0.15,
        resistance: 704.7,
        support: 702.6,
        k: 2.1,
        d: 0.136068,
        t: 0.95,
        vol_from: 0.40,
        vol_to: 0.15,
    },
    ReferenceRow {
        symbol: "HUM",
        dates: "28.03-02.04.2013",
        r: 0.03,
        sigma: 0.31,
        resistance: 70.08,
        support: 66.95,
        k: 3.13,
        d: 0.08455,
        t: 0.9948,
        vol_from: 0.43,
        vol_to: 0.25,
    },
    ReferenceRow {
        symbol: "NFLX",
        dates: "23-24.01.2013",
        r: 0.03,
        sigma: 0.55,
        resistance: 101.17,
        support: 97.81,
        k: 3.36,
        d: 0.921744,
        t: 0.933,
        vol_from: 0.95,
        vol_to: 0.55,
    },
];

pub const T_TOLERANCE: f64 = 1e-3;
pub const D_TOLERANCE: f64 = 1e-4;

pub fn row(symbol: &str) -> Option<&'static ReferenceRow> {
    REFERENCE_ROWS.iter().find(|r| r.symbol.eq_ignore_ascii_case(symbol))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowCheck {
    pub row: &'static ReferenceRow,
    pub eval: TunnelEvaluation,
}

impl RowCheck {
    pub fn t_delta(&self) -> f64 {
        (self.eval.transmission - self.row.t).abs()
    }

    pub fn d_delta(&self) -> f64 {
        (self.eval.penetration - self.row.d).abs()
    }

    pub fn passes(&self, t_tol: f64, d_tol: f64) -> bool {
        self.t_delta() <= t_tol && self.d_delta() <= d_tol
    }
}

pub fn check_row(row: &'static ReferenceRow) -> Result<RowCheck, TunnelError> {
    let params = MarketParams::new(row.r, row.sigma)?;
    Ok(RowCheck {
        row,
        eval: transmission_coefficient(&params, row.k)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_k_matches_levels() {
        for r in &REFERENCE_ROWS {
            assert!((r.resistance - r.support - r.k).abs() < 1e-9, "{}", r.symbol);
        }
    }

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(row("goog").unwrap().sigma, 0.15);
        assert!(row("AAPL").is_none());
    }
}
