//! Univariate time series: CSV ingestion, calendar conversion, trailing
//! moving average and window slicing.
//!
//! Time is always carried as decimal years (`year + (day_of_year - 1) / days_in_year`).

use std::io::Read;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seven model parameters plus one degree of freedom.
pub const MIN_WINDOW_OBSERVATIONS: usize = 8;

/// Default deseasonalization length: one quarter of weekly observations.
pub const DEFAULT_MA_LEN: usize = 13;

/// Tolerance on window edges, in years (about 30 ms).
const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    label: String,
}

impl TimeSeries {
    /// Builds a series, checking that times are strictly increasing, lengths
    /// match and all values are finite.
    pub fn new(times: Vec<f64>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyInput);
        }
        if times.len() != values.len() {
            return Err(Error::Validation(format!(
                "times ({}) and values ({}) differ in length",
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::Validation(format!("non-finite time at index {i}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite value at index {i}")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "times not strictly increasing at index {} ({} then {})",
                i + 1,
                times[i],
                times[i + 1]
            )));
        }
        Ok(Self {
            times,
            values,
            label: label.into(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Median spacing between consecutive observations, in years.
    pub fn median_spacing(&self) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        let mut d: Vec<f64> = self.times.windows(2).map(|w| w[1] - w[0]).collect();
        d.sort_by(f64::total_cmp);
        Some(d[d.len() / 2])
    }

    /// Returns a copy with every value mapped through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.times.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
            self.label.clone(),
        )
    }

    /// Re-emits the series as `date,decimal_year,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,decimal_year,value\n");
        for (t, v) in self.iter() {
            out.push_str(&format!("{},{},{}\n", from_decimal_years(t), t, v));
        }
        out
    }
}

/// Closed interval `[t1, t2]` in decimal years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t1: f64,
    pub t2: f64,
}

impl Window {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1.is_finite() && t2.is_finite()) || t1 >= t2 {
            return Err(Error::Validation(format!(
                "window requires t1 < t2, got [{t1}, {t2}]"
            )));
        }
        Ok(Self { t1, t2 })
    }

    pub fn span(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t1 - EDGE_EPS && t <= self.t2 + EDGE_EPS
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvConfig {
    pub date_column: String,
    pub value_column: String,
    pub delimiter: u8,
}

impl Default for CsvConfig {
    fn default() -> Self {
        Self {
            date_column: "date".into(),
            value_column: "value".into(),
            delimiter: b',',
        }
    }
}

pub fn is_leap_year(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_year(year: i32) -> u32 {
    if is_leap_year(year) {
        366
    } else {
        365
    }
}

pub fn to_decimal_years(date: NaiveDate) -> f64 {
    let year = date.year();
    year as f64 + (date.ordinal0() as f64) / days_in_year(year) as f64
}

/// Converts a calendar triple, rejecting dates that do not exist.
pub fn ymd_to_decimal_years(year: i32, month: u32, day: u32) -> Result<f64> {
    NaiveDate::from_ymd_opt(year, month, day)
        .map(to_decimal_years)
        .ok_or_else(|| Error::Validation(format!("invalid date {year:04}-{month:02}-{day:02}")))
}

/// Nearest calendar date to a decimal-year timestamp.
pub fn from_decimal_years(t: f64) -> NaiveDate {
    let year = t.floor() as i32;
    let days = days_in_year(year) as f64;
    let ordinal0 = ((t - year as f64) * days).round() as i64;
    let start = NaiveDate::from_ymd_opt(year, 1, 1).expect("january first exists");
    start + chrono::Duration::days(ordinal0)
}

pub fn parse_iso_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::Validation(format!("invalid ISO-8601 date '{}': {e}", s.trim())))
}

/// Reads a delimited file with a header row, one ISO date column and one
/// numeric value column. Rows may arrive in any order; duplicates are rejected.
pub fn parse_csv<R: Read>(reader: R, config: &CsvConfig) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(config.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Validation(format!(
                "column '{name}' not found in header [{}]",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
    };
    let date_idx = find(&config.date_column)?;
    let value_idx = find(&config.value_column)?;

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let fallback_line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line: e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(fallback_line),
            message: e.to_string(),
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(fallback_line);
        let field = |idx: usize, what: &str| {
            record.get(idx).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing {what} field"),
            })
        };
        let raw_date = field(date_idx, "date")?;
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            message: format!("bad date '{raw_date}': {e}"),
        })?;
        let raw_value = field(value_idx, "value")?;
        let value: f64 = raw_value.parse().map_err(|_| Error::Parse {
            line,
            message: format!("non-numeric value '{raw_value}'"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite value '{raw_value}'"),
            });
        }
        rows.push((date, value));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }

    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Validation(format!("duplicate date {}", w[0].0)));
    }
    let (times, values) = rows
        .into_iter()
        .map(|(d, v)| (to_decimal_years(d), v))
        .unzip();
    TimeSeries::new(times, values, config.value_column.clone())
}

/// Trailing mean over `window_len` observations, stamped with the most recent
/// timestamp of each window.
pub fn moving_average(series: &TimeSeries, window_len: usize) -> Result<TimeSeries> {
    if window_len == 0 {
        return Err(Error::Validation("moving-average length must be positive".into()));
    }
    if series.len() < window_len {
        return Err(Error::InsufficientData {
            needed: window_len,
            got: series.len(),
        });
    }
    let n = window_len as f64;
    let values: Vec<f64> = series
        .values
        .windows(window_len)
        .map(|w| w.iter().sum::<f64>() / n)
        .collect();
    let times = series.times[window_len - 1..].to_vec();
    TimeSeries::new(times, values, series.label.clone())
}

/// Observations with `t1 <= t <= t2`; at least eight are required.
pub fn slice(series: &TimeSeries, window: &Window) -> Result<TimeSeries> {
    let lo = series.times.partition_point(|&t| t < window.t1 - EDGE_EPS);
    let hi = series.times.partition_point(|&t| t <= window.t2 + EDGE_EPS);
    let got = hi.saturating_sub(lo);
    if got < MIN_WINDOW_OBSERVATIONS {
        return Err(Error::InsufficientData {
            needed: MIN_WINDOW_OBSERVATIONS,
            got,
        });
    }
    TimeSeries::new(
        series.times[lo..hi].to_vec(),
        series.values[lo..hi].to_vec(),
        series.label.clone(),
    )
}
