//! Supervised table assembly: indicator frame, dense feature table,
//! multi-horizon close targets, chronological split and scaling.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{self, IndicatorConfig, IndicatorSeries};
use crate::ingest::CandleSeries;
use crate::matrix::Matrix;

pub const DEFAULT_HORIZON: usize = 21;
const DATE_FORMAT: &str = "%Y-%m-%d";

/// Columns selectable as model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureName {
    Open,
    High,
    Low,
    Close,
    Volume,
    Rsi,
    MacdLine,
    MacdSignal,
    Momentum,
    BbUpper,
    BbLower,
    Roc,
}

impl FeatureName {
    pub const ALL: [FeatureName; 12] = [
        FeatureName::Open,
        FeatureName::High,
        FeatureName::Low,
        FeatureName::Close,
        FeatureName::Volume,
        FeatureName::Rsi,
        FeatureName::MacdLine,
        FeatureName::MacdSignal,
        FeatureName::Momentum,
        FeatureName::BbUpper,
        FeatureName::BbLower,
        FeatureName::Roc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureName::Open => "open",
            FeatureName::High => "high",
            FeatureName::Low => "low",
            FeatureName::Close => "close",
            FeatureName::Volume => "volume",
            FeatureName::Rsi => "rsi",
            FeatureName::MacdLine => "macd_line",
            FeatureName::MacdSignal => "macd_signal",
            FeatureName::Momentum => "momentum",
            FeatureName::BbUpper => "bb_upper",
            FeatureName::BbLower => "bb_lower",
            FeatureName::Roc => "roc",
        }
    }

    /// Parses a comma-separated list such as `close,rsi,roc`.
    pub fn parse_list(s: &str) -> Result<Vec<FeatureName>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownFeature(s.into()))
    }
}

/// Every raw and indicator column for every day, warmup cells undefined.
/// This is the table the `features` command writes.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorFrame {
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    pub columns: Vec<IndicatorSeries>,
}

fn dense(v: impl Iterator<Item = f64>) -> IndicatorSeries {
    IndicatorSeries(v.map(Some).collect())
}

impl IndicatorFrame {
    pub fn compute(series: &CandleSeries, cfg: &IndicatorConfig) -> Result<IndicatorFrame> {
        cfg.validate()?;
        let c = &series.candles;
        let closes = series.closes();
        let m = indicators::macd(&closes, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal)?;
        let bb = indicators::bollinger(&closes, cfg.bb_period, cfg.bb_k)?;
        let columns: Vec<(&str, IndicatorSeries)> = vec![
            ("open", dense(c.iter().map(|c| c.open))),
            ("high", dense(c.iter().map(|c| c.high))),
            ("low", dense(c.iter().map(|c| c.low))),
            ("close", dense(closes.iter().copied())),
            ("volume", dense(c.iter().map(|c| c.volume))),
            ("sma_short", indicators::sma(&closes, cfg.sma_short)?),
            ("sma_long", indicators::sma(&closes, cfg.sma_long)?),
            ("rsi", indicators::rsi(&closes, cfg.rsi_period)?),
            ("macd_line", m.line),
            ("macd_signal", m.signal),
            ("macd_hist", m.histogram),
            ("momentum", indicators::momentum(&closes, cfg.momentum_period)?),
            ("bb_middle", bb.middle),
            ("bb_upper", bb.upper),
            ("bb_lower", bb.lower),
            ("roc", indicators::roc(&closes, cfg.roc_period)?),
        ];
        let (names, columns) = columns.into_iter().map(|(n, s)| (n.to_string(), s)).unzip();
        Ok(IndicatorFrame {
            dates: series.dates(),
            names,
            columns,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&IndicatorSeries> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
    }

    /// Keeps the selected features and drops every leading row where any of
    /// them is undefined.
    pub fn select(&self, selected: &[FeatureName]) -> Result<FeatureTable> {
        if selected.is_empty() {
            return Err(Error::InvalidConfig("no features selected".into()));
        }
        let lookup = |name: &str| {
            self.column(name)
                .ok_or_else(|| Error::UnknownFeature(name.into()))
        };
        let close = lookup("close")?;
        let cols: Vec<&IndicatorSeries> = selected
            .iter()
            .map(|f| lookup(f.as_str()))
            .collect::<Result<_>>()?;
        let defined = |i: usize| close.get(i).is_some() && cols.iter().all(|c| c.get(i).is_some());
        let Some(start) = (0..self.len()).find(|&i| defined(i)) else {
            return Err(Error::TooShort {
                len: self.len(),
                needed: self.len() + 1,
            });
        };
        if let Some(i) = (start..self.len()).find(|&i| !defined(i)) {
            return Err(Error::InvalidConfig(format!(
                "undefined feature value after warmup on {}",
                self.dates[i]
            )));
        }
        let mut x = Matrix::zeros(self.len() - start, cols.len());
        for (r, i) in (start..self.len()).enumerate() {
            for (j, c) in cols.iter().enumerate() {
                x.set(r, j, c.get(i).unwrap_or(f64::NAN));
            }
        }
        Ok(FeatureTable {
            dates: self.dates[start..].to_vec(),
            feature_names: selected.to_vec(),
            x,
            closes: (start..self.len()).map(|i| close.get(i).unwrap_or(f64::NAN)).collect(),
        })
    }

    /// CSV with a `date` column followed by every frame column; warmup cells
    /// are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, d) in self.dates.iter().enumerate() {
            out.push_str(&d.format(DATE_FORMAT).to_string());
            for c in &self.columns {
                out.push(',');
                if let Some(v) = c.get(i) {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<IndicatorFrame> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("date") {
            return Err(Error::MissingColumn("date".into()));
        }
        let names: Vec<String> = headers.iter().skip(1).map(String::from).collect();
        let mut dates = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let date = NaiveDate::parse_from_str(&rec[0], DATE_FORMAT).map_err(|_| {
                Error::MalformedRow {
                    line,
                    reason: format!("bad date `{}`", &rec[0]),
                }
            })?;
            dates.push(date);
            for (j, col) in columns.iter_mut().enumerate() {
                let cell = rec.get(j + 1).unwrap_or("");
                col.push(if cell.is_empty() {
                    None
                } else {
                    Some(cell.parse::<f64>().map_err(|_| Error::BadNumber {
                        line,
                        field: names[j].clone(),
                        value: cell.into(),
                    })?)
                });
            }
        }
        Ok(IndicatorFrame {
            dates,
            names,
            columns: columns.into_iter().map(IndicatorSeries).collect(),
        })
    }
}

/// Dense per-day feature rows (warmup removed) plus the raw close per row,
/// which targets are built from whether or not `close` is a selected input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dates: Vec<NaiveDate>,
    pub feature_names: Vec<FeatureName>,
    pub x: Matrix,
    pub closes: Vec<f64>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Computes indicators and keeps the selected, fully defined feature rows.
pub fn build_features(
    series: &CandleSeries,
    cfg: &IndicatorConfig,
    selected: &[FeatureName],
) -> Result<FeatureTable> {
    IndicatorFrame::compute(series, cfg)?.select(selected)
}

/// First frame row that survives warmup trimming for `selected`.
pub fn warmup_rows(cfg: &IndicatorConfig, selected: &[FeatureName]) -> usize {
    selected
        .iter()
        .map(|f| match f {
            FeatureName::Open
            | FeatureName::High
            | FeatureName::Low
            | FeatureName::Close
            | FeatureName::Volume => 0,
            FeatureName::Rsi => indicators::rsi_first_index(cfg.rsi_period),
            FeatureName::MacdLine => indicators::macd_line_first_index(cfg.macd_slow),
            FeatureName::MacdSignal => {
                indicators::macd_signal_first_index(cfg.macd_slow, cfg.macd_signal)
            }
            FeatureName::Momentum => indicators::momentum_first_index(cfg.momentum_period),
            FeatureName::BbUpper | FeatureName::BbLower => {
                indicators::bollinger_first_index(cfg.bb_period)
            }
            FeatureName::Roc => indicators::roc_first_index(cfg.roc_period),
        })
        .max()
        .unwrap_or(0)
}

/// Feature matrix `x` with targets `y[i][h] = close[i + h]`, `h = 0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dates: Vec<NaiveDate>,
    pub feature_names: Vec<FeatureName>,
    pub x: Matrix,
    pub y: Matrix,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.y.cols().saturating_sub(1)
    }

    fn slice(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            dates: self.dates[start..end].to_vec(),
            feature_names: self.feature_names.clone(),
            x: self.x.slice_rows(start, end),
            y: self.y.slice_rows(start, end),
        }
    }

    /// CSV with `date`, the feature columns, then `target_h0..target_hH`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["date".to_string()];
        header.extend(self.feature_names.iter().map(|f| f.to_string()));
        header.extend((0..self.y.cols()).map(|h| format!("target_h{h}")));
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format(DATE_FORMAT).to_string()];
            rec.extend(self.x.row(i).iter().map(f64::to_string));
            rec.extend(self.y.row(i).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("dataset.csv", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("date") {
            return Err(Error::MissingColumn("date".into()));
        }
        let mut feature_names = Vec::new();
        let mut targets = 0;
        for h in headers.iter().skip(1) {
            if let Some(k) = h.strip_prefix("target_h") {
                if k.parse::<usize>().ok() != Some(targets) {
                    return Err(Error::MissingColumn(format!("target_h{targets}")));
                }
                targets += 1;
            } else if targets > 0 {
                return Err(Error::InvalidConfig(format!("feature column `{h}` after targets")));
            } else {
                feature_names.push(h.parse::<FeatureName>()?);
            }
        }
        let p = feature_names.len();
        let (mut dates, mut xs, mut ys) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            dates.push(NaiveDate::parse_from_str(&rec[0], DATE_FORMAT).map_err(|_| {
                Error::MalformedRow {
                    line,
                    reason: format!("bad date `{}`", &rec[0]),
                }
            })?);
            for j in 1..=p + targets {
                let v: f64 = rec[j].parse().map_err(|_| Error::BadNumber {
                    line,
                    field: headers[j].to_string(),
                    value: rec[j].to_string(),
                })?;
                if j <= p { xs.push(v) } else { ys.push(v) }
            }
        }
        let n = dates.len();
        Ok(Dataset {
            dates,
            feature_names,
            x: Matrix::from_vec(n, p, xs),
            y: Matrix::from_vec(n, targets, ys),
        })
    }
}

/// Attaches close targets for horizons `0..=horizon`. The last `horizon`
/// rows lack a full future window and are dropped.
pub fn attach_targets(table: &FeatureTable, horizon: usize) -> Result<Dataset> {
    let n = table.len();
    if n <= horizon {
        return Err(Error::TooShort {
            len: n,
            needed: horizon + 1,
        });
    }
    let rows = n - horizon;
    let mut y = Matrix::zeros(rows, horizon + 1);
    for i in 0..rows {
        y.row_mut(i).copy_from_slice(&table.closes[i..=i + horizon]);
    }
    Ok(Dataset {
        dates: table.dates[..rows].to_vec(),
        feature_names: table.feature_names.clone(),
        x: table.x.slice_rows(0, rows),
        y,
    })
}

/// Splits into the first `floor(fraction · rows)` rows and the latest block.
pub fn chrono_split(ds: &Dataset, train_fraction: f64) -> Result<(Dataset, Dataset)> {
    let rows = ds.len();
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let cut = (train_fraction * rows as f64).floor() as usize;
    if cut == 0 || cut >= rows {
        return Err(Error::EmptySplit {
            rows,
            fraction: train_fraction,
        });
    }
    Ok((ds.slice(0, cut), ds.slice(cut, rows)))
}

/// Feature standardization and target scaling, fit on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub target_scale: f64,
}

/// Fits per-feature mean and population standard deviation, and takes the
/// maximum same-day close as the target scale.
pub fn fit_scaler(train: &Dataset) -> Result<Scaler> {
    let n = train.len();
    if n == 0 {
        return Err(Error::TooShort { len: 0, needed: 1 });
    }
    let p = train.x.cols();
    let mut means = vec![0.0; p];
    let mut stds = vec![0.0; p];
    for j in 0..p {
        let col = train.x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if !(std.is_finite() && std > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::ConstantFeature(train.feature_names[j].to_string()));
        }
        means[j] = mean;
        stds[j] = std;
    }
    let target_scale = train.y.column(0).into_iter().fold(f64::MIN, f64::max);
    if !(target_scale.is_finite() && target_scale > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "target scale must be positive, got {target_scale}"
        )));
    }
    Ok(Scaler {
        means,
        stds,
        target_scale,
    })
}

impl Scaler {
    pub fn feature_count(&self) -> usize {
        self.means.len()
    }

    fn check_cols(&self, m: &Matrix) -> Result<()> {
        if m.cols() != self.means.len() {
            return Err(Error::Dimension(format!(
                "scaler expects {} features, got {}",
                self.means.len(),
                m.cols()
            )));
        }
        Ok(())
    }

    pub fn transform_features(&self, x: &Matrix) -> Result<Matrix> {
        self.check_cols(x)?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn inverse_features(&self, x: &Matrix) -> Result<Matrix> {
        self.check_cols(x)?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }

    pub fn scale_target(&self, price: f64) -> f64 {
        price / self.target_scale
    }

    pub fn unscale_target(&self, scaled: f64) -> f64 {
        scaled * self.target_scale
    }

    /// Scales a dataset: standardized features, targets divided by the
    /// target scale. No clipping is applied.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let x = self.transform_features(&ds.x)?;
        let mut y = ds.y.clone();
        y.as_mut_slice().iter_mut().for_each(|v| *v = self.scale_target(*v));
        Ok(Dataset {
            dates: ds.dates.clone(),
            feature_names: ds.feature_names.clone(),
            x,
            y,
        })
    }

    /// Undoes target scaling on a target matrix.
    pub fn inverse_targets(&self, y: &Matrix) -> Matrix {
        let mut out = y.clone();
        out.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = self.unscale_target(*v));
        out
    }
}

pub fn apply_scaler(ds: &Dataset, scaler: &Scaler) -> Result<Dataset> {
    scaler.apply(ds)
}
