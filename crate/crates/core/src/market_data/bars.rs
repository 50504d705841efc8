use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use super::{DataError, Date};

const DATE_FORMAT: &str = "%Y-%m-%d";
const OHLC_HEADER: [&str; 5] = ["date", "open", "high", "low", "close"];
const VOL_HEADER: [&str; 2] = ["date", "iv"];

/// One daily price bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OhlcBar {
    date: Date,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
}

impl OhlcBar {
    pub fn new(date: Date, open: f64, high: f64, low: f64, close: f64) -> Result<Self, String> {
        if ![open, high, low, close].iter().all(|x| x.is_finite()) {
            return Err("prices must be finite".into());
        }
        if !(low > 0.0) {
            return Err(format!("low {low} must be > 0"));
        }
        if low > open.min(close) {
            return Err(format!("low {low} above min(open, close) {}", open.min(close)));
        }
        if high < open.max(close) {
            return Err(format!("high {high} below max(open, close) {}", open.max(close)));
        }
        Ok(Self {
            date,
            open,
            high,
            low,
            close,
        })
    }

    pub fn date(&self) -> Date {
        self.date
    }
    pub fn open(&self) -> f64 {
        self.open
    }
    pub fn high(&self) -> f64 {
        self.high
    }
    pub fn low(&self) -> f64 {
        self.low
    }
    pub fn close(&self) -> f64 {
        self.close
    }
}

/// Implied volatility mark for one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolPoint {
    date: Date,
    iv: f64,
}

impl VolPoint {
    pub fn new(date: Date, iv: f64) -> Result<Self, String> {
        if !(iv.is_finite() && iv > 0.0) {
            return Err(format!("iv {iv} must be finite and > 0"));
        }
        Ok(Self { date, iv })
    }

    pub fn date(&self) -> Date {
        self.date
    }
    pub fn iv(&self) -> f64 {
        self.iv
    }
}

struct Row {
    line: u64,
    fields: Vec<String>,
}

fn read_rows<R: Read>(reader: R, header: &[&str]) -> Result<Vec<Row>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut saw_header = false;
    let mut record = csv::ByteRecord::new();
    loop {
        match rdr.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(DataError::Parse {
                    line,
                    column: 1,
                    message: e.to_string(),
                });
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut fields = Vec::with_capacity(record.len());
        for (i, raw) in record.iter().enumerate() {
            let text = std::str::from_utf8(raw).map_err(|_| DataError::Parse {
                line,
                column: i + 1,
                message: "invalid UTF-8".into(),
            })?;
            fields.push(text.trim().to_string());
        }
        if !saw_header {
            if let Some(first) = fields.first_mut() {
                if let Some(stripped) = first.strip_prefix('\u{feff}') {
                    *first = stripped.to_string();
                }
            }
            if fields != header {
                return Err(DataError::Parse {
                    line,
                    column: 1,
                    message: format!("expected header `{}`, found `{}`", header.join(","), fields.join(",")),
                });
            }
            saw_header = true;
            continue;
        }
        if fields.len() != header.len() {
            return Err(DataError::Parse {
                line,
                column: fields.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        rows.push(Row { line, fields });
    }
    if !saw_header {
        return Err(DataError::Parse {
            line: 1,
            column: 1,
            message: format!("missing header `{}`", header.join(",")),
        });
    }
    Ok(rows)
}

fn parse_date(row: &Row, column: usize) -> Result<Date, DataError> {
    Date::parse_from_str(&row.fields[column], DATE_FORMAT).map_err(|e| DataError::Parse {
        line: row.line,
        column: column + 1,
        message: format!("bad date `{}`: {e}", row.fields[column]),
    })
}

fn parse_number(row: &Row, column: usize) -> Result<f64, DataError> {
    let text = &row.fields[column];
    match text.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(DataError::Parse {
            line: row.line,
            column: column + 1,
            message: format!("bad number `{text}`"),
        }),
    }
}

/// Sorts by date and rejects repeated dates, reporting the later line.
fn into_series<T>(mut items: Vec<(u64, T)>, date: impl Fn(&T) -> Date) -> Result<Vec<T>, DataError> {
    items.sort_by_key(|(line, item)| (date(item), *line));
    for pair in items.windows(2) {
        if date(&pair[0].1) == date(&pair[1].1) {
            return Err(DataError::Validation {
                line: pair[1].0,
                message: format!("duplicate date {}", date(&pair[1].1)),
            });
        }
    }
    Ok(items.into_iter().map(|(_, item)| item).collect())
}

pub fn parse_ohlc<R: Read>(reader: R) -> Result<Vec<OhlcBar>, DataError> {
    let rows = read_rows(reader, &OHLC_HEADER)?;
    let mut bars = Vec::with_capacity(rows.len());
    for row in &rows {
        let date = parse_date(row, 0)?;
        let open = parse_number(row, 1)?;
        let high = parse_number(row, 2)?;
        let low = parse_number(row, 3)?;
        let close = parse_number(row, 4)?;
        let bar = OhlcBar::new(date, open, high, low, close).map_err(|message| DataError::Validation {
            line: row.line,
            message,
        })?;
        bars.push((row.line, bar));
    }
    into_series(bars, |b| b.date)
}

pub fn parse_vols<R: Read>(reader: R) -> Result<Vec<VolPoint>, DataError> {
    let rows = read_rows(reader, &VOL_HEADER)?;
    let mut points = Vec::with_capacity(rows.len());
    for row in &rows {
        let date = parse_date(row, 0)?;
        let iv = parse_number(row, 1)?;
        let point = VolPoint::new(date, iv).map_err(|message| DataError::Validation {
            line: row.line,
            message,
        })?;
        points.push((row.line, point));
    }
    into_series(points, |p| p.date)
}

pub fn load_ohlc(path: impl AsRef<Path>) -> Result<Vec<OhlcBar>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    parse_ohlc(file)
}

pub fn load_vols(path: impl AsRef<Path>) -> Result<Vec<VolPoint>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    parse_vols(file)
}

pub fn write_ohlc<W: Write>(mut out: W, bars: &[OhlcBar]) -> std::io::Result<()> {
    writeln!(out, "{}", OHLC_HEADER.join(","))?;
    for b in bars {
        writeln!(
            out,
            "{},{},{},{},{}",
            b.date.format(DATE_FORMAT),
            b.open,
            b.high,
            b.low,
            b.close
        )?;
    }
    Ok(())
}

pub fn write_vols<W: Write>(mut out: W, points: &[VolPoint]) -> std::io::Result<()> {
    writeln!(out, "{}", VOL_HEADER.join(","))?;
    for p in points {
        writeln!(out, "{},{}", p.date.format(DATE_FORMAT), p.iv)?;
    }
    Ok(())
}

/// Implied vol in force on each date: the latest mark on or before it.
/// Dates before the first mark get `None`.
pub fn carry_forward(vols: &[VolPoint], dates: impl IntoIterator<Item = Date>) -> Vec<Option<f64>> {
    let mut idx = 0;
    let mut current = None;
    dates
        .into_iter()
        .map(|date| {
            while idx < vols.len() && vols[idx].date <= date {
                current = Some(vols[idx].iv);
                idx += 1;
            }
            current
        })
        .collect()
}
