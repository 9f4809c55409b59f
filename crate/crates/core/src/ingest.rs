//! Daily OHLCV candles: CSV parsing, canonical serialization and gap validation.

use std::fmt::Write as _;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "date,open,high,low,close,volume";
const COLUMNS: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];
const DATE_FORMAT: &str = "%Y-%m-%d";

/// One day of market data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Candle {
    /// Checks positivity and `low ≤ open, close ≤ high`.
    pub fn check(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::InvalidCandle {
                date: self.date,
                reason,
            })
        };
        for (name, v) in [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be a positive price, got {v}"));
            }
        }
        if !(self.volume.is_finite() && self.volume >= 0.0) {
            return bad(format!("volume must be non-negative, got {}", self.volume));
        }
        if self.low > self.high {
            return bad(format!("low {} above high {}", self.low, self.high));
        }
        for (name, v) in [("open", self.open), ("close", self.close)] {
            if v < self.low || v > self.high {
                return bad(format!(
                    "{name} {v} outside [{}, {}]",
                    self.low, self.high
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandleSeries {
    pub candles: Vec<Candle>,
}

impl CandleSeries {
    pub fn new(candles: Vec<Candle>) -> Self {
        Self { candles }
    }

    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.close).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.candles.iter().map(|c| c.date).collect()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.candles.last().map(|c| c.date)
    }

    /// Candles up to and including `date`.
    pub fn truncate_at(&self, date: NaiveDate) -> CandleSeries {
        CandleSeries::new(
            self.candles
                .iter()
                .take_while(|c| c.date <= date)
                .copied()
                .collect(),
        )
    }

    /// Canonical CSV form: the fixed header, one row per candle, shortest
    /// round-tripping decimal representation of each number.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.candles.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for c in &self.candles {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.date.format(DATE_FORMAT),
                c.open,
                c.high,
                c.low,
                c.close,
                c.volume
            );
        }
        out
    }
}

/// How `validate_series` treats a missing calendar day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GapPolicy {
    #[default]
    Reject,
    #[serde(alias = "forwardfill", alias = "forward-fill")]
    Fill,
}

impl std::str::FromStr for GapPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reject" => Ok(GapPolicy::Reject),
            "fill" | "forward-fill" => Ok(GapPolicy::Fill),
            other => Err(Error::InvalidConfig(format!("unknown gap policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub series: CandleSeries,
    /// Number of synthetic candles inserted by forward fill.
    pub fills: usize,
}

/// Parses the six-column candle CSV. Rows may come in any order; the result
/// is sorted ascending by date. Line numbers in errors are 1-based and count
/// the header.
pub fn parse_candles(csv_text: &str) -> Result<CandleSeries> {
    let mut lines = csv_text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l.trim_end_matches('\r'),
            None => return Err(Error::MissingColumn(COLUMNS[0].into())),
        }
    };
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    for col in COLUMNS {
        if !names.contains(&col) {
            return Err(Error::MissingColumn(col.into()));
        }
    }
    if header != CSV_HEADER {
        return Err(Error::BadHeader {
            found: header.into(),
            expected: CSV_HEADER.into(),
        });
    }

    let mut candles = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != COLUMNS.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", COLUMNS.len(), fields.len()),
            });
        }
        let date = NaiveDate::parse_from_str(fields[0].trim(), DATE_FORMAT).map_err(|_| {
            Error::MalformedRow {
                line,
                reason: format!("bad date `{}`", fields[0]),
            }
        })?;
        let num = |i: usize| -> Result<f64> {
            let s = fields[i].trim();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::BadNumber {
                    line,
                    field: COLUMNS[i].into(),
                    value: s.into(),
                }),
            }
        };
        candles.push(Candle {
            date,
            open: num(1)?,
            high: num(2)?,
            low: num(3)?,
            close: num(4)?,
            volume: num(5)?,
        });
    }

    candles.sort_by_key(|c| c.date);
    if let Some(w) = candles.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(Error::DuplicateDate(w[0].date));
    }
    Ok(CandleSeries::new(candles))
}

/// Checks every candle and enforces one-day spacing under `policy`.
///
/// `Fill` inserts a synthetic candle per missing day with
/// open = high = low = close = previous close and zero volume.
pub fn validate_series(series: &CandleSeries, policy: GapPolicy) -> Result<Validated> {
    let mut out: Vec<Candle> = Vec::with_capacity(series.len());
    let mut fills = 0;
    for c in &series.candles {
        c.check()?;
        if let Some(prev) = out.last().copied() {
            if c.date <= prev.date {
                return Err(if c.date == prev.date {
                    Error::DuplicateDate(c.date)
                } else {
                    Error::Unsorted(c.date)
                });
            }
            let mut next = prev.date + Days::new(1);
            while next < c.date {
                if policy == GapPolicy::Reject {
                    return Err(Error::Gap { missing: next });
                }
                out.push(Candle {
                    date: next,
                    open: prev.close,
                    high: prev.close,
                    low: prev.close,
                    close: prev.close,
                    volume: 0.0,
                });
                fills += 1;
                next = next + Days::new(1);
            }
        }
        out.push(*c);
    }
    Ok(Validated {
        series: CandleSeries::new(out),
        fills,
    })
}
