//! Run configuration: defaults, an optional TOML file, then command-line
//! flags, in increasing precedence. `CROSSCAST_SEED` is consulted only when
//! neither the file nor a flag sets the seed.
//!
//! Recognised file keys (all optional):
//!
//! ```toml
//! store = "crosscast-out"      # artifact directory
//! gap_policy = "reject"        # or "fill"
//! model = "both"               # mlr | lstm | both
//! features = "open,high,low,close,volume,rsi,macd_line,macd_signal,momentum,bb_upper,bb_lower,roc"
//! train_fraction = 0.75
//! ridge = 0.0                  # extension; 0 means plain OLS
//! eval_horizon = 21
//!
//! epochs = 2000
//! seed = 0
//! hidden = 7
//! window = 30
//! learning_rate = 0.001
//! batch_size = 32
//! gradient_clip = 5.0
//!
//! sma_short = 50
//! sma_long = 200
//! rsi_period = 14
//! macd_fast = 12
//! macd_slow = 26
//! macd_signal = 9
//! momentum_period = 10
//! bb_period = 20
//! bb_k = 2.0
//! roc_period = 10
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureName, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::indicators::IndicatorConfig;
use crate::ingest::GapPolicy;
use crate::lstm::TrainConfig;
use crate::phase::PhaseConfig;

pub const SEED_ENV: &str = "CROSSCAST_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Mlr,
    Lstm,
    Both,
}

impl ModelChoice {
    pub fn includes_mlr(self) -> bool {
        matches!(self, ModelChoice::Mlr | ModelChoice::Both)
    }

    pub fn includes_lstm(self) -> bool {
        matches!(self, ModelChoice::Lstm | ModelChoice::Both)
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    pub gap_policy: Option<GapPolicy>,
    pub model: Option<ModelChoice>,
    pub features: Option<String>,
    pub train_fraction: Option<f64>,
    pub ridge: Option<f64>,
    pub eval_horizon: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub hidden: Option<usize>,
    pub window: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub gradient_clip: Option<f64>,
    pub sma_short: Option<usize>,
    pub sma_long: Option<usize>,
    pub rsi_period: Option<usize>,
    pub macd_fast: Option<usize>,
    pub macd_slow: Option<usize>,
    pub macd_signal: Option<usize>,
    pub momentum_period: Option<usize>,
    pub bb_period: Option<usize>,
    pub bb_k: Option<f64>,
    pub roc_period: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {}", path.display(), e.message())))
    }

    /// Copies every key set in `other` over `self`.
    pub fn overlay(&mut self, other: FileConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            store, gap_policy, model, features, train_fraction, ridge, eval_horizon, epochs, seed,
            hidden, window, learning_rate, batch_size, gradient_clip, sma_short, sma_long,
            rsi_period, macd_fast, macd_slow, macd_signal, momentum_period, bb_period, bb_k,
            roc_period
        );
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub store: PathBuf,
    pub gap_policy: GapPolicy,
    pub model: ModelChoice,
    pub features: Vec<FeatureName>,
    pub train_fraction: f64,
    pub horizon: usize,
    pub ridge: Option<f64>,
    pub eval_horizon: usize,
    pub indicators: IndicatorConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn resolve(cfg: FileConfig, env_seed: Option<String>) -> Result<RunConfig> {
        let ind_default = IndicatorConfig::default();
        let indicators = IndicatorConfig {
            sma_short: cfg.sma_short.unwrap_or(ind_default.sma_short),
            sma_long: cfg.sma_long.unwrap_or(ind_default.sma_long),
            rsi_period: cfg.rsi_period.unwrap_or(ind_default.rsi_period),
            macd_fast: cfg.macd_fast.unwrap_or(ind_default.macd_fast),
            macd_slow: cfg.macd_slow.unwrap_or(ind_default.macd_slow),
            macd_signal: cfg.macd_signal.unwrap_or(ind_default.macd_signal),
            momentum_period: cfg.momentum_period.unwrap_or(ind_default.momentum_period),
            bb_period: cfg.bb_period.unwrap_or(ind_default.bb_period),
            bb_k: cfg.bb_k.unwrap_or(ind_default.bb_k),
            roc_period: cfg.roc_period.unwrap_or(ind_default.roc_period),
        };
        indicators.validate()?;

        let seed = match (cfg.seed, env_seed) {
            (Some(s), _) => s,
            (None, Some(e)) => e
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}=`{e}` is not an integer")))?,
            (None, None) => 0,
        };
        let td = TrainConfig::default();
        let train = TrainConfig {
            window_length: cfg.window.unwrap_or(td.window_length),
            hidden_size: cfg.hidden.unwrap_or(td.hidden_size),
            epochs: cfg.epochs.unwrap_or(td.epochs),
            learning_rate: cfg.learning_rate.unwrap_or(td.learning_rate),
            batch_size: cfg.batch_size.unwrap_or(td.batch_size),
            seed,
            gradient_clip: cfg.gradient_clip.unwrap_or(td.gradient_clip),
        };
        train.validate()?;

        let features = match &cfg.features {
            Some(list) => FeatureName::parse_list(list)?,
            None => FeatureName::ALL.to_vec(),
        };
        if features.is_empty() {
            return Err(Error::InvalidConfig("feature list is empty".into()));
        }
        let train_fraction = cfg.train_fraction.unwrap_or(0.75);
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let eval_horizon = cfg.eval_horizon.unwrap_or(DEFAULT_HORIZON);
        if eval_horizon == 0 || eval_horizon > DEFAULT_HORIZON {
            return Err(Error::InvalidConfig(format!(
                "eval_horizon must lie in 1..={DEFAULT_HORIZON}"
            )));
        }
        Ok(RunConfig {
            store: cfg.store.unwrap_or_else(|| PathBuf::from("crosscast-out")),
            gap_policy: cfg.gap_policy.unwrap_or_default(),
            model: cfg.model.unwrap_or(ModelChoice::Both),
            features,
            train_fraction,
            horizon: DEFAULT_HORIZON,
            ridge: cfg.ridge.filter(|r| *r > 0.0),
            eval_horizon,
            indicators,
            train,
        })
    }

    pub fn phase(&self) -> PhaseConfig {
        PhaseConfig {
            short: self.indicators.sma_short,
            long: self.indicators.sma_long,
        }
    }
}
