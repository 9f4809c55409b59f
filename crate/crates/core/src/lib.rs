//! Forecast the next 21 daily closes of an asset from OHLCV-derived
//! technical features, then project 50/200-day moving averages over the
//! history plus forecast to spot golden and death crosses before they happen.
//!
//! Pipeline: [`ingest`] → [`indicators`] → [`dataset`] → [`mlr`] / [`lstm`]
//! → [`phase`] → [`eval`]. The `crosscast` binary wires these together with
//! file artifacts (see [`cli`]).

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod indicators;
pub mod ingest;
pub mod lstm;
pub mod matrix;
pub mod mlr;
pub mod phase;

pub use error::{Error, Result};
pub use forecast::{Forecast, ForecastRow};
pub use matrix::Matrix;
