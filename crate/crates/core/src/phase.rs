//! Bull/bear phase projection: splice forecast closes onto history, run the
//! short and long SMAs over the whole splice, and find where they cross.
//!
//! A golden cross is the short SMA moving above the long one, a death cross
//! the reverse. Days where the two are exactly equal keep the previous side,
//! so touching without crossing never produces an event.

use std::fmt::Write as _;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ForecastRow;
use crate::indicators::{sma, IndicatorSeries};
use crate::ingest::CandleSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Actual,
    Predicted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplicedSeries {
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
    pub provenance: Vec<Provenance>,
}

impl SplicedSeries {
    /// History alone, every day `Actual`.
    pub fn from_history(history: &CandleSeries) -> Self {
        Self {
            dates: history.dates(),
            closes: history.closes(),
            provenance: vec![Provenance::Actual; history.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn predicted_days(&self) -> usize {
        self.provenance
            .iter()
            .filter(|p| **p == Provenance::Predicted)
            .count()
    }
}

/// Appends horizons `1..` of `forecast` to `history` on consecutive days.
/// Horizon 0 restates the anchor day's known close and is dropped.
pub fn splice(history: &CandleSeries, forecast: &ForecastRow) -> Result<SplicedSeries> {
    let last = history.last_date().ok_or(Error::EmptyHistory)?;
    if forecast.anchor != last {
        return Err(Error::AnchorMismatch {
            anchor: forecast.anchor,
            last,
        });
    }
    let mut s = SplicedSeries::from_history(history);
    for (h, close) in forecast.closes.iter().enumerate().skip(1) {
        s.dates.push(last + Days::new(h as u64));
        s.closes.push(*close);
        s.provenance.push(Provenance::Predicted);
    }
    Ok(s)
}

/// Short and long SMAs over the full spliced close sequence.
pub fn project_mas(s: &SplicedSeries, short: usize, long: usize) -> Result<(IndicatorSeries, IndicatorSeries)> {
    if s.len() < long {
        return Err(Error::TooShort {
            len: s.len(),
            needed: long,
        });
    }
    Ok((sma(&s.closes, short)?, sma(&s.closes, long)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossKind {
    Golden,
    Death,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEvent {
    pub index: usize,
    pub date: NaiveDate,
    pub kind: CrossKind,
    pub short_ma: f64,
    pub long_ma: f64,
}

/// Side of the short SMA relative to the long one on each day both are
/// defined. Ties inherit the previous side; leading ties have none.
fn sides(short: &IndicatorSeries, long: &IndicatorSeries) -> Vec<Option<bool>> {
    let mut prev = None;
    (0..short.len().min(long.len()))
        .map(|i| match (short.get(i), long.get(i)) {
            (Some(s), Some(l)) => {
                if s > l {
                    prev = Some(true);
                } else if s < l {
                    prev = Some(false);
                }
                prev
            }
            _ => None,
        })
        .collect()
}

/// Events where the short SMA changes side relative to the long SMA.
pub fn detect_crosses(dates: &[NaiveDate], short: &IndicatorSeries, long: &IndicatorSeries) -> Vec<CrossEvent> {
    let mut events = Vec::new();
    let mut last: Option<bool> = None;
    for (i, side) in sides(short, long).into_iter().enumerate() {
        let Some(above) = side else { continue };
        if last.is_some_and(|l| l != above) {
            events.push(CrossEvent {
                index: i,
                date: dates[i],
                kind: if above { CrossKind::Golden } else { CrossKind::Death },
                short_ma: short.get(i).unwrap_or(f64::NAN),
                long_ma: long.get(i).unwrap_or(f64::NAN),
            });
        }
        last = Some(above);
    }
    events
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Bull,
    Bear,
}

/// Per-day regime. `None` where an SMA is undefined or before the first day
/// on which the two differ.
pub fn label_days(short: &IndicatorSeries, long: &IndicatorSeries) -> Vec<Option<Label>> {
    sides(short, long)
        .into_iter()
        .map(|s| s.map(|above| if above { Label::Bull } else { Label::Bear }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub short: usize,
    pub long: usize,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self { short: 50, long: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEvent {
    pub date: NaiveDate,
    pub kind: CrossKind,
    pub short: f64,
    pub long: f64,
    /// The event falls in the predicted part of the splice.
    pub advance: bool,
}

/// Spliced closes, both SMAs, cross events and per-day labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub dates: Vec<NaiveDate>,
    pub close: Vec<f64>,
    pub provenance: Vec<Provenance>,
    pub sma50: IndicatorSeries,
    pub sma200: IndicatorSeries,
    pub labels: Vec<Option<Label>>,
    pub events: Vec<ReportEvent>,
}

impl PhaseReport {
    /// Plot-ready CSV: one row per day, empty cells where undefined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,close,provenance,sma_short,sma_long,label,event\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for (i, d) in self.dates.iter().enumerate() {
            let event = self
                .events
                .iter()
                .find(|e| e.date == *d)
                .map(|e| format!("{:?}", e.kind))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{:?},{},{},{},{}",
                d.format("%Y-%m-%d"),
                self.close[i],
                self.provenance[i],
                opt(self.sma50.get(i)),
                opt(self.sma200.get(i)),
                self.labels[i].map(|l| format!("{l:?}")).unwrap_or_default(),
                event
            );
        }
        out
    }

    /// Days `from..=to` of the report; events outside are dropped.
    pub fn slice(&self, from: NaiveDate, to: NaiveDate) -> PhaseReport {
        let idx: Vec<usize> = (0..self.dates.len())
            .filter(|&i| self.dates[i] >= from && self.dates[i] <= to)
            .collect();
        let pick = |s: &IndicatorSeries| IndicatorSeries(idx.iter().map(|&i| s.get(i)).collect());
        PhaseReport {
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            close: idx.iter().map(|&i| self.close[i]).collect(),
            provenance: idx.iter().map(|&i| self.provenance[i]).collect(),
            sma50: pick(&self.sma50),
            sma200: pick(&self.sma200),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            events: self
                .events
                .iter()
                .filter(|e| e.date >= from && e.date <= to)
                .cloned()
                .collect(),
        }
    }
}

/// Builds the full report from an already spliced series.
pub fn report_for(s: &SplicedSeries, cfg: &PhaseConfig) -> Result<PhaseReport> {
    let (short, long) = project_mas(s, cfg.short, cfg.long)?;
    let events = detect_crosses(&s.dates, &short, &long)
        .into_iter()
        .map(|e| ReportEvent {
            date: e.date,
            kind: e.kind,
            short: e.short_ma,
            long: e.long_ma,
            advance: s.provenance[e.index] == Provenance::Predicted,
        })
        .collect();
    let labels = label_days(&short, &long);
    Ok(PhaseReport {
        dates: s.dates.clone(),
        close: s.closes.clone(),
        provenance: s.provenance.clone(),
        sma50: short,
        sma200: long,
        labels,
        events,
    })
}

/// Splices `forecast` onto `history` and builds the phase report.
pub fn build_report(history: &CandleSeries, forecast: &ForecastRow, cfg: &PhaseConfig) -> Result<PhaseReport> {
    report_for(&splice(history, forecast)?, cfg)
}
