//! Append-only journal of evaluations, one JSON object per line.
//!
//! Each line has exactly these keys:
//!
//! | key          | type                | notes                                   |
//! |--------------|---------------------|-----------------------------------------|
//! | `date`       | string `YYYY-MM-DD` |                                         |
//! | `symbol`     | string              |                                         |
//! | `support`    | number              |                                         |
//! | `resistance` | number              |                                         |
//! | `k`          | number              | `resistance - support`                  |
//! | `r`          | number              | risk-free rate                          |
//! | `sigma`      | number              | implied volatility                      |
//! | `regime`     | string              | `Tunneling`, `AtTurningPoint`, `NoBarrier` |
//! | `lambda`     | number              | `r / sigma`                             |
//! | `u`          | number or null      | null when `regime` is `NoBarrier`       |
//! | `exponent`   | number or null      | idem                                    |
//! | `t`          | number or null      | idem                                    |
//! | `d`          | number or null      | idem                                    |
//!
//! A journal has a single writer at a time, enforced with an advisory
//! file lock. Readers never lock.

use std::fs::{File, OpenOptions, TryLockError};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DataError, Date};
use crate::tunneling::{lambda, MarketParams, RangeBound, Regime, TunnelEvaluation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalOutcome {
    Evaluated(TunnelEvaluation),
    NoBarrier,
}

impl EvalOutcome {
    pub fn evaluation(&self) -> Option<&TunnelEvaluation> {
        match self {
            EvalOutcome::Evaluated(ev) => Some(ev),
            EvalOutcome::NoBarrier => None,
        }
    }
}

/// One closed-form evaluation for a symbol on a date.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub date: Date,
    pub symbol: String,
    pub range: RangeBound,
    pub params: MarketParams,
    pub outcome: EvalOutcome,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    date: Date,
    symbol: String,
    support: f64,
    resistance: f64,
    k: f64,
    r: f64,
    sigma: f64,
    regime: Regime,
    lambda: f64,
    u: Option<f64>,
    exponent: Option<f64>,
    t: Option<f64>,
    d: Option<f64>,
}

impl From<&EvaluationRecord> for RecordLine {
    fn from(rec: &EvaluationRecord) -> Self {
        let ev = rec.outcome.evaluation();
        RecordLine {
            date: rec.date,
            symbol: rec.symbol.clone(),
            support: rec.range.support(),
            resistance: rec.range.resistance(),
            k: rec.range.width(),
            r: rec.params.r(),
            sigma: rec.params.sigma(),
            regime: ev.map_or(Regime::NoBarrier, |e| e.regime),
            lambda: ev.map_or_else(|| lambda(&rec.params), |e| e.lambda),
            u: ev.map(|e| e.u),
            exponent: ev.map(|e| e.exponent),
            t: ev.map(|e| e.transmission),
            d: ev.map(|e| e.penetration),
        }
    }
}

impl TryFrom<RecordLine> for EvaluationRecord {
    type Error = String;

    fn try_from(line: RecordLine) -> Result<Self, String> {
        let range = RangeBound::new(line.support, line.resistance).map_err(|e| e.to_string())?;
        if range.width().to_bits() != line.k.to_bits() {
            return Err(format!("k {} disagrees with resistance - support {}", line.k, range.width()));
        }
        let params = MarketParams::new(line.r, line.sigma).map_err(|e| e.to_string())?;
        let outcome = match (line.regime, line.u, line.exponent, line.t, line.d) {
            (Regime::NoBarrier, None, None, None, None) => EvalOutcome::NoBarrier,
            (Regime::NoBarrier, ..) => return Err("NoBarrier record carries evaluation fields".into()),
            (regime, Some(u), Some(exponent), Some(t), Some(d)) => EvalOutcome::Evaluated(TunnelEvaluation {
                lambda: line.lambda,
                u,
                exponent,
                transmission: t,
                penetration: d,
                regime,
            }),
            _ => return Err("evaluation fields missing".into()),
        };
        Ok(EvaluationRecord {
            date: line.date,
            symbol: line.symbol,
            range,
            params,
            outcome,
        })
    }
}

impl EvaluationRecord {
    /// The record as one journal line, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&RecordLine::from(self)).expect("record serializes")
    }

    pub fn from_json_line(text: &str) -> Result<Self, String> {
        let line: RecordLine = serde_json::from_str(text).map_err(|e| e.to_string())?;
        EvaluationRecord::try_from(line)
    }
}

/// Exclusive append handle. The lock is released on drop.
#[derive(Debug)]
pub struct Journal {
    file: File,
    path: PathBuf,
}

impl Journal {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| DataError::io(&path, e))?;
        match file.try_lock() {
            Ok(()) => Ok(Journal { file, path }),
            Err(TryLockError::WouldBlock) => Err(DataError::Locked(path)),
            Err(TryLockError::Error(e)) => Err(DataError::io(&path, e)),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &EvaluationRecord) -> Result<(), DataError> {
        let mut line = record.to_json_line();
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|()| self.file.sync_data())
            .map_err(|e| DataError::io(&self.path, e))
    }
}

/// Reads every record in append order. A missing file is an empty journal.
pub fn read_journal(path: impl AsRef<Path>) -> Result<Vec<EvaluationRecord>, DataError> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(DataError::io(path, e)),
    };
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DataError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = EvaluationRecord::from_json_line(&line).map_err(|message| DataError::Parse {
            line: idx as u64 + 1,
            column: 1,
            message,
        })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tunneling::transmission_coefficient;

    fn record(day: u32, sigma: f64) -> EvaluationRecord {
        let range = RangeBound::new(123.3, 127.2).unwrap();
        let params = MarketParams::new(0.03, sigma).unwrap();
        let outcome = match transmission_coefficient(&params, range.width()) {
            Ok(ev) => EvalOutcome::Evaluated(ev),
            Err(_) => EvalOutcome::NoBarrier,
        };
        EvaluationRecord {
            date: Date::from_ymd_opt(2013, 2, day).unwrap(),
            symbol: "LNKD".into(),
            range,
            params,
            outcome,
        }
    }

    #[test]
    fn append_then_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.jsonl");
        let rec = record(7, 0.47);
        Journal::open(&path).unwrap().append(&rec).unwrap();
        assert_eq!(read_journal(&path).unwrap(), vec![rec]);
    }

    #[test]
    fn no_barrier_round_trips_with_nulls() {
        let rec = record(8, 0.39);
        assert_eq!(rec.outcome, EvalOutcome::NoBarrier);
        let line = rec.to_json_line();
        assert!(line.contains("\"regime\":\"NoBarrier\""));
        assert!(line.contains("\"t\":null"));
        assert_eq!(EvaluationRecord::from_json_line(&line).unwrap(), rec);
    }

    #[test]
    fn thousand_appends_keep_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let mut journal = Journal::open(&path).unwrap();
        let recs: Vec<_> = (0..1000)
            .map(|i| record(1 + (i % 28) as u32, 0.2 + i as f64 * 1e-4))
            .collect();
        for r in &recs {
            journal.append(r).unwrap();
        }
        drop(journal);
        assert_eq!(read_journal(&path).unwrap(), recs);
    }

    #[test]
    fn reopening_appends_without_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        Journal::open(&path).unwrap().append(&record(6, 0.55)).unwrap();
        Journal::open(&path).unwrap().append(&record(7, 0.47)).unwrap();
        let back = read_journal(&path).unwrap();
        assert_eq!(back, vec![record(6, 0.55), record(7, 0.47)]);
    }

    #[test]
    fn second_writer_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let first = Journal::open(&path).unwrap();
        assert!(matches!(Journal::open(&path), Err(DataError::Locked(_))));
        // readers are unaffected
        assert!(read_journal(&path).unwrap().is_empty());
        drop(first);
        assert!(Journal::open(&path).is_ok());
    }

    #[test]
    fn corrupt_line_is_reported_with_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        std::fs::write(&path, format!("{}\n{{\"date\":1}}\n", record(7, 0.47).to_json_line())).unwrap();
        let err = read_journal(&path).unwrap_err();
        assert_eq!(err.line(), Some(2));
    }
}
