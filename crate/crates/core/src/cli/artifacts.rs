//! Files exchanged between subcommands. JSON artifacts carry a
//! `schema_version` that is checked on load.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureName, IndicatorFrame, Scaler};
use crate::error::{Error, Result};
use crate::forecast::{Forecast, ForecastRow};
use crate::lstm::{self, LstmParams, TrainConfig};
use crate::mlr::{self, MlrBank};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlr,
    Lstm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlr => "mlr",
            ModelKind::Lstm => "lstm",
        }
    }
}

/// Layout of the artifact directory.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn candles(&self) -> PathBuf {
        self.root.join("candles.csv")
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features.csv")
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.csv")
    }

    pub fn model(&self, kind: ModelKind) -> PathBuf {
        self.root.join(format!("model_{}.json", kind.as_str()))
    }

    pub fn history(&self) -> PathBuf {
        self.root.join("history_lstm.csv")
    }

    pub fn forecast(&self) -> PathBuf {
        self.root.join("forecast.json")
    }

    pub fn report_json(&self, kind: ModelKind) -> PathBuf {
        self.root.join(format!("report_{}.json", kind.as_str()))
    }

    pub fn report_csv(&self, kind: ModelKind) -> PathBuf {
        self.root.join(format!("report_{}.csv", kind.as_str()))
    }

    pub fn comparison(&self) -> PathBuf {
        self.root.join("comparison.json")
    }

    /// Reads an artifact; a missing file maps to `ArtifactNotFound(what)`.
    pub fn read(&self, path: &Path, what: &str) -> Result<String> {
        match std::fs::read_to_string(path) {
            Ok(t) => Ok(t),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(Error::ArtifactNotFound(what.into()))
            }
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn write(&self, path: &Path, text: &str) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(path, &text)
    }

    /// Loads a versioned JSON artifact.
    pub fn read_json<T: DeserializeOwned>(&self, path: &Path, what: &str) -> Result<T> {
        let text = self.read(path, what)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .unwrap_or(0) as u32;
        if found != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub config: TrainConfig,
    pub params: LstmParams,
}

/// A trained model plus everything needed to turn feature rows into prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub model: ModelKind,
    pub feature_names: Vec<FeatureName>,
    pub horizon: usize,
    pub train_fraction: f64,
    pub train_rows: usize,
    /// First date of the held-out block.
    pub test_start: NaiveDate,
    pub scaler: Scaler,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bank: Option<MlrBank>,
    /// Per-horizon R² on the held-out block; informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_r2: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lstm: Option<LstmModel>,
}

impl ModelArtifact {
    /// Price forecasts anchored on every feature row the model can use.
    pub fn forecast_all(&self, frame: &IndicatorFrame) -> Result<Forecast> {
        let table = frame.select(&self.feature_names)?;
        let x = self.scaler.transform_features(&table.x)?;
        let scaled: Vec<Option<Vec<f64>>> = match (self.model, &self.bank, &self.lstm) {
            (ModelKind::Mlr, Some(bank), _) => {
                let y = mlr::predict_bank(bank, &x)?;
                y.iter_rows().map(|r| Some(r.to_vec())).collect()
            }
            (ModelKind::Lstm, _, Some(m)) => lstm::predict_scaled(&m.params, &x, m.config.window_length)?,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "{} artifact has no model payload",
                    self.model.as_str()
                )))
            }
        };
        Ok(Forecast {
            rows: table
                .dates
                .iter()
                .zip(scaled)
                .filter_map(|(d, o)| {
                    o.map(|o| ForecastRow {
                        anchor: *d,
                        closes: o.into_iter().map(|v| self.scaler.unscale_target(v)).collect(),
                    })
                })
                .collect(),
        })
    }
}

/// `forecast.json`: the forecast of each model for one anchor day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastFile {
    pub schema_version: u32,
    pub anchor: NaiveDate,
    pub horizon: usize,
    pub forecasts: BTreeMap<ModelKind, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFile {
    pub schema_version: u32,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub eval_horizon: usize,
    pub comparison: crate::eval::Comparison,
}
