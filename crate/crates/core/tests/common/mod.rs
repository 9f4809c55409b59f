#![allow(dead_code)]

use chrono::{Days, NaiveDate};
use crosscast::ingest::{Candle, CandleSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 1, 1).unwrap()
}

/// Candles whose close follows `closes`; open is the previous close and the
/// high/low envelope is widened by a deterministic wiggle.
pub fn candles_from_closes(closes: &[f64]) -> CandleSeries {
    CandleSeries::new(
        closes
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let open = if i == 0 { c } else { closes[i - 1] };
                let wiggle = 1.0 + 0.005 * (1.0 + (i as f64 * 1.7).sin());
                Candle {
                    date: day0() + Days::new(i as u64),
                    open,
                    high: open.max(c) * wiggle,
                    low: open.min(c) / wiggle,
                    close: c,
                    volume: 1000.0 + 250.0 * (i as f64 * 0.37).cos(),
                }
            })
            .collect(),
    )
}

/// `100 + 20·sin(2πt/50)`.
pub fn sine_closes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|t| 100.0 + 20.0 * (2.0 * std::f64::consts::PI * t as f64 / 50.0).sin())
        .collect()
}

/// Geometric random walk with drift, seeded.
pub fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = 1000.0;
    (0..n)
        .map(|_| {
            p *= 1.0 + rng.random_range(-0.03..0.032);
            p
        })
        .collect()
}

pub fn random_series(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(50.0..150.0)).collect()
}
