//! Curve-level comparison of predicted against actual moving averages.
//!
//! "Following the same curve" is measured four ways: RMSE in price units,
//! Pearson correlation, the fraction of days on which both curves move in the
//! same direction, and the signed timing error of matched cross events.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use std::collections::HashMap;

use chrono::Days;

use crate::error::{Error, Result};
use crate::forecast::Forecast;
use crate::indicators::IndicatorSeries;
use crate::ingest::CandleSeries;
use crate::phase::{CrossKind, PhaseReport, Provenance, ReportEvent, SplicedSeries};

/// Cross events further apart than this are not paired.
pub const MAX_CROSS_OFFSET_DAYS: i64 = 30;

/// Backtest series: actual closes before `from`, then for every later day `d`
/// the close that was forecast for `d` from anchor `d - horizon`.
pub fn horizon_splice(
    history: &CandleSeries,
    forecast: &Forecast,
    horizon: usize,
    from: chrono::NaiveDate,
) -> Result<SplicedSeries> {
    let by_anchor: HashMap<_, _> = forecast.rows.iter().map(|r| (r.anchor, r)).collect();
    let mut s = SplicedSeries::from_history(history);
    for i in 0..s.len() {
        let d = s.dates[i];
        if d < from {
            continue;
        }
        let anchor = d - Days::new(horizon as u64);
        let row = by_anchor
            .get(&anchor)
            .ok_or_else(|| Error::Dimension(format!("no forecast anchored at {anchor}")))?;
        s.closes[i] = *row
            .closes
            .get(horizon)
            .ok_or_else(|| Error::Dimension(format!("forecast has no horizon {horizon}")))?;
        s.provenance[i] = Provenance::Predicted;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMetrics {
    /// Number of indices where both curves are defined.
    pub points: usize,
    pub rmse: f64,
    /// Absent when either curve is constant over the shared points.
    pub pearson_r: Option<f64>,
    /// Absent when no two consecutive shared points exist.
    pub slope_agreement: Option<f64>,
    /// Signed `predicted - actual` days per matched cross pair.
    pub cross_timing_error: Option<Vec<i64>>,
}

pub fn curve_metrics(actual: &IndicatorSeries, predicted: &IndicatorSeries) -> Result<CurveMetrics> {
    let n = actual.len().min(predicted.len());
    let shared: Vec<(usize, f64, f64)> = (0..n)
        .filter_map(|i| Some((i, actual.get(i)?, predicted.get(i)?)))
        .collect();
    if shared.is_empty() {
        return Err(Error::NoOverlap);
    }
    let m = shared.len() as f64;
    let rmse = (shared.iter().map(|(_, a, p)| (a - p).powi(2)).sum::<f64>() / m).sqrt();

    let mean_a = shared.iter().map(|s| s.1).sum::<f64>() / m;
    let mean_p = shared.iter().map(|s| s.2).sum::<f64>() / m;
    let (mut sap, mut saa, mut spp) = (0.0, 0.0, 0.0);
    for (_, a, p) in &shared {
        let (da, dp) = (a - mean_a, p - mean_p);
        sap += da * dp;
        saa += da * da;
        spp += dp * dp;
    }
    let pearson_r = (saa > 0.0 && spp > 0.0).then(|| (sap / (saa * spp).sqrt()).clamp(-1.0, 1.0));

    let (mut pairs, mut agree) = (0usize, 0usize);
    for w in shared.windows(2) {
        let ((i0, a0, p0), (i1, a1, p1)) = (w[0], w[1]);
        if i1 != i0 + 1 {
            continue;
        }
        pairs += 1;
        if sign(a1 - a0) == sign(p1 - p0) {
            agree += 1;
        }
    }
    let slope_agreement = (pairs > 0).then(|| agree as f64 / pairs as f64);

    Ok(CurveMetrics {
        points: shared.len(),
        rmse,
        pearson_r,
        slope_agreement,
        cross_timing_error: None,
    })
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedCross {
    pub kind: CrossKind,
    pub actual: chrono::NaiveDate,
    pub predicted: chrono::NaiveDate,
    pub error_days: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossMatching {
    pub matched: Vec<MatchedCross>,
    /// Actual events with no predicted partner.
    pub missed: Vec<ReportEvent>,
    /// Predicted events left unpaired.
    pub spurious: Vec<ReportEvent>,
}

impl CrossMatching {
    pub fn errors(&self) -> Vec<i64> {
        self.matched.iter().map(|m| m.error_days).collect()
    }

    pub fn mean_abs_error(&self) -> Option<f64> {
        (!self.matched.is_empty()).then(|| {
            self.matched.iter().map(|m| m.error_days.abs() as f64).sum::<f64>() / self.matched.len() as f64
        })
    }
}

/// Pairs each actual event, in order, with the nearest unused predicted event
/// of the same kind within `max_days`. Equal distances go to the earlier one.
pub fn match_crosses(actual: &[ReportEvent], predicted: &[ReportEvent], max_days: i64) -> CrossMatching {
    let mut used = vec![false; predicted.len()];
    let mut out = CrossMatching::default();
    for a in actual {
        let best = predicted
            .iter()
            .enumerate()
            .filter(|(k, p)| !used[*k] && p.kind == a.kind)
            .map(|(k, p)| (k, (p.date - a.date).num_days()))
            .filter(|(_, d)| d.abs() <= max_days)
            .min_by_key(|&(k, d)| (d.abs(), k));
        match best {
            Some((k, d)) => {
                used[k] = true;
                out.matched.push(MatchedCross {
                    kind: a.kind,
                    actual: a.date,
                    predicted: predicted[k].date,
                    error_days: d,
                });
            }
            None => out.missed.push(a.clone()),
        }
    }
    out.spurious = predicted
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(p, _)| p.clone())
        .collect();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Mlr,
    Lstm,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub sma_short: CurveMetrics,
    pub sma_long: CurveMetrics,
    pub crosses: CrossMatching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub curve: String,
    pub metric: String,
    pub mlr: Option<f64>,
    pub lstm: Option<f64>,
    /// Absent when either model lacks the metric.
    pub winner: Option<Winner>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub mlr: ModelMetrics,
    pub lstm: ModelMetrics,
    pub verdicts: Vec<Verdict>,
    /// Set only when one model is never beaten (or every metric ties);
    /// mixed outcomes leave it empty.
    pub overall: Option<Winner>,
}

fn model_metrics(model: &PhaseReport, actual: &PhaseReport) -> Result<ModelMetrics> {
    let crosses = match_crosses(&actual.events, &model.events, MAX_CROSS_OFFSET_DAYS);
    let timing = (!crosses.matched.is_empty()).then(|| crosses.errors());
    let mut sma_short = curve_metrics(&actual.sma50, &model.sma50)?;
    let mut sma_long = curve_metrics(&actual.sma200, &model.sma200)?;
    sma_short.cross_timing_error = timing.clone();
    sma_long.cross_timing_error = timing;
    Ok(ModelMetrics {
        sma_short,
        sma_long,
        crosses,
    })
}

fn decide(mlr: Option<f64>, lstm: Option<f64>, higher_is_better: bool) -> Option<Winner> {
    let (m, l) = (mlr?, lstm?);
    let tol = 1e-12 * m.abs().max(l.abs()).max(1.0);
    Some(if (m - l).abs() <= tol {
        Winner::Tie
    } else if (l > m) == higher_is_better {
        Winner::Lstm
    } else {
        Winner::Mlr
    })
}

/// Scores both models' MA curves against the actual ones and declares a
/// winner per metric.
pub fn compare_models(mlr: &PhaseReport, lstm: &PhaseReport, actual: &PhaseReport) -> Result<Comparison> {
    if mlr.dates != actual.dates || lstm.dates != actual.dates {
        return Err(Error::DateRangeMismatch);
    }
    let m = model_metrics(mlr, actual)?;
    let l = model_metrics(lstm, actual)?;

    let mut verdicts = Vec::new();
    for (curve, mc, lc) in [
        ("sma_short", &m.sma_short, &l.sma_short),
        ("sma_long", &m.sma_long, &l.sma_long),
    ] {
        for (metric, mv, lv, higher) in [
            ("rmse", Some(mc.rmse), Some(lc.rmse), false),
            ("pearson_r", mc.pearson_r, lc.pearson_r, true),
            ("slope_agreement", mc.slope_agreement, lc.slope_agreement, true),
        ] {
            verdicts.push(Verdict {
                curve: curve.into(),
                metric: metric.into(),
                mlr: mv,
                lstm: lv,
                winner: decide(mv, lv, higher),
            });
        }
    }
    let (mt, lt) = (m.crosses.mean_abs_error(), l.crosses.mean_abs_error());
    verdicts.push(Verdict {
        curve: "crosses".into(),
        metric: "mean_abs_timing_days".into(),
        mlr: mt,
        lstm: lt,
        winner: decide(mt, lt, false),
    });

    let decided: Vec<Winner> = verdicts.iter().filter_map(|v| v.winner).collect();
    let wins = |w: Winner| decided.contains(&w);
    let overall = match (wins(Winner::Mlr), wins(Winner::Lstm)) {
        (false, false) if !decided.is_empty() => Some(Winner::Tie),
        (true, false) => Some(Winner::Mlr),
        (false, true) => Some(Winner::Lstm),
        _ => None,
    };
    Ok(Comparison {
        mlr: m,
        lstm: l,
        verdicts,
        overall,
    })
}

impl Comparison {
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:<22} {:>16} {:>16}  winner", "curve", "metric", "mlr", "lstm");
        for v in &self.verdicts {
            let w = v.winner.map_or("-".to_string(), |w| format!("{w:?}").to_lowercase());
            let _ = writeln!(
                out,
                "{:<10} {:<22} {:>16} {:>16}  {}",
                v.curve,
                v.metric,
                fmt(v.mlr),
                fmt(v.lstm),
                w
            );
        }
        let overall = self
            .overall
            .map_or("none (mixed)".to_string(), |w| format!("{w:?}").to_lowercase());
        let _ = writeln!(out, "overall: {overall}");
        out
    }
}
