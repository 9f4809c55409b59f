use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Scaler};
use crate::error::{Error, Result};
use crate::forecast::{Forecast, ForecastRow};
use crate::matrix::Matrix;

use super::adam::{clip_by_norm, Adam};
use super::network::{forward, loss_and_gradients, Sample};
use super::params::{init_params, LstmParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Days of feature rows fed to the network per sample.
    pub window_length: usize,
    pub hidden_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Maximum global L2 norm of a gradient step.
    pub gradient_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window_length: 30,
            hidden_size: 7,
            epochs: 2000,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 0,
            gradient_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 || self.hidden_size == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "window_length, hidden_size and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.gradient_clip > 0.0) {
            return Err(Error::InvalidConfig("gradient_clip must be positive".into()));
        }
        Ok(())
    }
}

/// Windows ending at every row from `window - 1` onward, paired with that
/// row's targets.
pub fn samples<'a>(x: &'a Matrix, y: &'a Matrix, window: usize) -> Vec<Sample<'a>> {
    (window.saturating_sub(1)..x.rows())
        .map(|end| Sample {
            window: (end + 1 - window..=end).map(|r| x.row(r)).collect(),
            target: y.row(end),
        })
        .collect()
}

/// Trains on an already scaled dataset. Returns the final parameters and the
/// mean minibatch loss of each epoch.
///
/// The shuffle order is drawn from a stream derived from `cfg.seed`, so a
/// fixed (seed, data, config) always yields identical output.
pub fn train(train_ds: &Dataset, cfg: &TrainConfig) -> Result<(LstmParams, Vec<f64>)> {
    cfg.validate()?;
    let data = samples(&train_ds.x, &train_ds.y, cfg.window_length);
    if data.is_empty() {
        return Err(Error::TooShort {
            len: train_ds.len(),
            needed: cfg.window_length,
        });
    }
    let mut params = init_params(cfg.seed, train_ds.x.cols(), cfg.hidden_size, train_ds.y.cols());
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok((params, history));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut opt = Adam::new(cfg.learning_rate, &params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Sample<'_>> = chunk.iter().map(|&k| data[k].clone()).collect();
            let (loss, mut grads) = match loss_and_gradients(&params, &batch) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch }),
                Err(e) => return Err(e),
            };
            clip_by_norm(&mut grads, cfg.gradient_clip);
            opt.update(&mut params, &grads);
            total += loss * chunk.len() as f64;
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() || !params.all_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(mean);
    }
    Ok((params, history))
}

/// Scaled network outputs for every window ending in `x_scaled`; rows
/// before `window - 1` have no prediction.
pub fn predict_scaled(p: &LstmParams, x_scaled: &Matrix, window: usize) -> Result<Vec<Option<Vec<f64>>>> {
    if window == 0 {
        return Err(Error::InvalidWindow(0));
    }
    if x_scaled.cols() != p.input_size {
        return Err(Error::Dimension(format!(
            "network expects {} features, got {}",
            p.input_size,
            x_scaled.cols()
        )));
    }
    (0..x_scaled.rows())
        .map(|end| {
            if end + 1 < window {
                return Ok(None);
            }
            let rows: Vec<&[f64]> = (end + 1 - window..=end).map(|r| x_scaled.row(r)).collect();
            forward(p, &rows).map(|(out, _)| Some(out))
        })
        .collect()
}

/// Price forecasts for a scaled dataset: one row per usable window anchor,
/// targets mapped back through the scaler.
pub fn predict(p: &LstmParams, ds: &Dataset, scaler: &Scaler, window: usize) -> Result<Forecast> {
    if scaler.feature_count() != p.input_size {
        return Err(Error::Dimension(format!(
            "scaler has {} features, network {}",
            scaler.feature_count(),
            p.input_size
        )));
    }
    let outs = predict_scaled(p, &ds.x, window)?;
    Ok(Forecast {
        rows: ds
            .dates
            .iter()
            .zip(outs)
            .filter_map(|(d, o)| {
                o.map(|o| ForecastRow {
                    anchor: *d,
                    closes: o.into_iter().map(|v| scaler.unscale_target(v)).collect(),
                })
            })
            .collect(),
    })
}
