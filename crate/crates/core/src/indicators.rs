//! Batch technical indicators over a close-price series.
//!
//! Every function returns an [`IndicatorSeries`] aligned 1:1 with its input.
//! Cells inside the warmup prefix are `None`; the first defined index of each
//! indicator is given by the matching `*_first_index` helper.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rolling sums are recomputed from scratch this often to bound drift.
const RESYNC_EVERY: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorConfig {
    pub sma_short: usize,
    pub sma_long: usize,
    pub rsi_period: usize,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
    pub momentum_period: usize,
    pub bb_period: usize,
    pub bb_k: f64,
    pub roc_period: usize,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            sma_short: 50,
            sma_long: 200,
            rsi_period: 14,
            macd_fast: 12,
            macd_slow: 26,
            macd_signal: 9,
            momentum_period: 10,
            bb_period: 20,
            bb_k: 2.0,
            roc_period: 10,
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<()> {
        let periods = [
            ("sma_short", self.sma_short),
            ("sma_long", self.sma_long),
            ("rsi_period", self.rsi_period),
            ("macd_fast", self.macd_fast),
            ("macd_slow", self.macd_slow),
            ("macd_signal", self.macd_signal),
            ("momentum_period", self.momentum_period),
            ("roc_period", self.roc_period),
        ];
        if let Some((name, _)) = periods.iter().find(|(_, p)| *p == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
        }
        if self.bb_period < 2 {
            return Err(Error::InvalidConfig("bb_period must be at least 2".into()));
        }
        if self.macd_fast >= self.macd_slow {
            return Err(Error::InvalidConfig("macd_fast must be below macd_slow".into()));
        }
        if self.sma_short >= self.sma_long {
            return Err(Error::InvalidConfig("sma_short must be below sma_long".into()));
        }
        if !(self.bb_k.is_finite() && self.bb_k > 0.0) {
            return Err(Error::InvalidConfig("bb_k must be positive".into()));
        }
        Ok(())
    }
}

/// Indicator values aligned with the input series; `None` inside the warmup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndicatorSeries(pub Vec<Option<f64>>);

impl IndicatorSeries {
    fn undefined(len: usize) -> Self {
        Self(vec![None; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.0.get(i).copied().flatten()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.0
    }

    /// First index holding a value.
    pub fn first_defined(&self) -> Option<usize> {
        self.0.iter().position(Option::is_some)
    }

    /// Elementwise `self - other` where both are defined.
    pub fn minus(&self, other: &IndicatorSeries) -> IndicatorSeries {
        IndicatorSeries(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| Some((*a)? - (*b)?))
                .collect(),
        )
    }
}

impl From<Vec<Option<f64>>> for IndicatorSeries {
    fn from(v: Vec<Option<f64>>) -> Self {
        Self(v)
    }
}

fn check_window(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidWindow(n))
    } else {
        Ok(())
    }
}

/// Simple moving average. Defined from index `n - 1`.
pub fn sma(closes: &[f64], n: usize) -> Result<IndicatorSeries> {
    check_window(n)?;
    let mut out = IndicatorSeries::undefined(closes.len());
    if n > closes.len() {
        return Ok(out);
    }
    let mut sum: f64 = closes[..n].iter().sum();
    out.0[n - 1] = Some(sum / n as f64);
    for i in n..closes.len() {
        if (i - n + 1).is_multiple_of(RESYNC_EVERY) {
            sum = closes[i + 1 - n..=i].iter().sum();
        } else {
            sum += closes[i] - closes[i - n];
        }
        out.0[i] = Some(sum / n as f64);
    }
    Ok(out)
}

/// EMA over a dense slice, seeded with the mean of the first `n` values.
fn ema_dense(values: &[f64], n: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; values.len()];
    if n > values.len() {
        return out;
    }
    let alpha = 2.0 / (n as f64 + 1.0);
    let mut prev = values[..n].iter().sum::<f64>() / n as f64;
    out[n - 1] = Some(prev);
    for i in n..values.len() {
        prev = alpha * values[i] + (1.0 - alpha) * prev;
        out[i] = Some(prev);
    }
    out
}

/// Exponential moving average, `α = 2/(n+1)`, seeded at index `n - 1` with
/// the SMA of the first `n` closes.
pub fn ema(closes: &[f64], n: usize) -> Result<IndicatorSeries> {
    check_window(n)?;
    Ok(IndicatorSeries(ema_dense(closes, n)))
}

/// EMA of a series with an undefined prefix, seeded on its first `n`
/// defined values.
fn ema_of_series(series: &IndicatorSeries, n: usize) -> IndicatorSeries {
    let Some(start) = series.first_defined() else {
        return IndicatorSeries::undefined(series.len());
    };
    let dense: Vec<f64> = series.0[start..].iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let mut out = vec![None; start];
    out.extend(ema_dense(&dense, n));
    IndicatorSeries(out)
}

/// Wilder's RSI. Defined from index `period`.
pub fn rsi(closes: &[f64], period: usize) -> Result<IndicatorSeries> {
    check_window(period)?;
    let mut out = IndicatorSeries::undefined(closes.len());
    if closes.len() < period + 1 {
        return Ok(out);
    }
    let (mut gain, mut loss) = (0.0, 0.0);
    for i in 1..=period {
        let d = closes[i] - closes[i - 1];
        gain += d.max(0.0);
        loss += (-d).max(0.0);
    }
    let p = period as f64;
    gain /= p;
    loss /= p;
    out.0[period] = Some(rsi_value(gain, loss));
    for i in period + 1..closes.len() {
        let d = closes[i] - closes[i - 1];
        gain = (gain * (p - 1.0) + d.max(0.0)) / p;
        loss = (loss * (p - 1.0) + (-d).max(0.0)) / p;
        out.0[i] = Some(rsi_value(gain, loss));
    }
    Ok(out)
}

fn rsi_value(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 {
        100.0
    } else if avg_gain == 0.0 {
        0.0
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Macd {
    pub line: IndicatorSeries,
    pub signal: IndicatorSeries,
    pub histogram: IndicatorSeries,
}

/// MACD line `ema(fast) - ema(slow)`, its signal EMA and the histogram.
/// The line is defined from `slow - 1`, signal and histogram from
/// `slow + signal - 2`.
pub fn macd(closes: &[f64], fast: usize, slow: usize, signal: usize) -> Result<Macd> {
    check_window(fast)?;
    check_window(slow)?;
    check_window(signal)?;
    if fast >= slow {
        return Err(Error::InvalidConfig(format!(
            "macd fast window {fast} must be below slow window {slow}"
        )));
    }
    let line = ema(closes, fast)?.minus(&ema(closes, slow)?);
    let signal_line = ema_of_series(&line, signal);
    let histogram = line.minus(&signal_line);
    Ok(Macd {
        line,
        signal: signal_line,
        histogram,
    })
}

/// `closes[i] - closes[i-n]`, defined from index `n`.
pub fn momentum(closes: &[f64], n: usize) -> Result<IndicatorSeries> {
    check_window(n)?;
    Ok(lagged(closes, n, |now, then| now - then))
}

/// Percentage rate of change over `n` days, defined from index `n`.
pub fn roc(closes: &[f64], n: usize) -> Result<IndicatorSeries> {
    check_window(n)?;
    Ok(lagged(closes, n, |now, then| 100.0 * (now - then) / then))
}

fn lagged(closes: &[f64], n: usize, f: impl Fn(f64, f64) -> f64) -> IndicatorSeries {
    IndicatorSeries(
        (0..closes.len())
            .map(|i| (i >= n).then(|| f(closes[i], closes[i - n])))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bollinger {
    pub middle: IndicatorSeries,
    pub upper: IndicatorSeries,
    pub lower: IndicatorSeries,
}

/// SMA(n) ± k·σ, σ the population standard deviation over the window.
pub fn bollinger(closes: &[f64], n: usize, k: f64) -> Result<Bollinger> {
    if n < 2 {
        return Err(Error::InvalidWindow(n));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidConfig(format!("bollinger k must be positive, got {k}")));
    }
    let middle = sma(closes, n)?;
    let mut upper = IndicatorSeries::undefined(closes.len());
    let mut lower = IndicatorSeries::undefined(closes.len());
    for (i, m) in middle.0.iter().enumerate() {
        let Some(m) = *m else { continue };
        let var = closes[i + 1 - n..=i]
            .iter()
            .map(|c| (c - m) * (c - m))
            .sum::<f64>()
            / n as f64;
        let band = k * var.sqrt();
        upper.0[i] = Some(m + band);
        lower.0[i] = Some(m - band);
    }
    Ok(Bollinger {
        middle,
        upper,
        lower,
    })
}

pub fn sma_first_index(n: usize) -> usize {
    n - 1
}

pub fn ema_first_index(n: usize) -> usize {
    n - 1
}

pub fn rsi_first_index(period: usize) -> usize {
    period
}

pub fn macd_line_first_index(slow: usize) -> usize {
    slow - 1
}

pub fn macd_signal_first_index(slow: usize, signal: usize) -> usize {
    slow + signal - 2
}

pub fn momentum_first_index(n: usize) -> usize {
    n
}

pub fn roc_first_index(n: usize) -> usize {
    n
}

pub fn bollinger_first_index(n: usize) -> usize {
    n - 1
}
