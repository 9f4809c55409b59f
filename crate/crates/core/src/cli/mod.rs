//! The `crosscast` command line: each subcommand reads the previous step's
//! artifact from the store directory and writes its own.
//!
//! ```text
//! ingest --in <csv> [--gap-policy reject|fill]   -> candles.csv
//! features                                       -> features.csv
//! train --model mlr|lstm|both [...]              -> model_<m>.json, dataset.csv, history_lstm.csv
//! predict [--date <ISO>]                         -> forecast.json
//! detect                                         -> report_<m>.json, report_<m>.csv
//! evaluate                                       -> comparison.json (+ table on stdout)
//! ```

pub mod artifacts;
pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::dataset::{self, IndicatorFrame};
use crate::error::{Error, Result};
use crate::eval;
use crate::ingest::{self, CandleSeries, GapPolicy};
use crate::lstm;
use crate::mlr;
use crate::phase::{self, SplicedSeries};
use crate::ForecastRow;

use artifacts::{ComparisonFile, ForecastFile, LstmModel, ModelArtifact, ModelKind, Store, SCHEMA_VERSION};
use config::{FileConfig, ModelChoice, RunConfig, SEED_ENV};

#[derive(Debug, Parser)]
#[command(name = "crosscast", version, about = "Forecast closes and project golden/death crosses")]
pub struct Cli {
    /// Artifact directory.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// TOML file of run settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a daily OHLCV CSV into the store.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        gap_policy: Option<GapPolicy>,
    },
    /// Compute technical indicators for the ingested candles.
    Features,
    /// Fit the regression bank and/or the LSTM.
    Train(TrainArgs),
    /// Forecast the next closes from one anchor day (default: the last).
    Predict {
        #[arg(long, value_parser = parse_date)]
        date: Option<NaiveDate>,
    },
    /// Splice the forecast onto history and report moving-average crosses.
    Detect,
    /// Compare both models' projected moving averages on the held-out block.
    Evaluate,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelChoice>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Comma-separated feature names.
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Ridge penalty for the regression bank (extension; off by default).
    #[arg(long)]
    pub ridge: Option<f64>,
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("expected YYYY-MM-DD: {e}"))
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut flags = FileConfig {
        store: cli.store.clone(),
        ..Default::default()
    };
    match &cli.command {
        Command::Ingest { gap_policy, .. } => flags.gap_policy = *gap_policy,
        Command::Train(a) => {
            flags.model = a.model;
            flags.epochs = a.epochs;
            flags.seed = a.seed;
            flags.hidden = a.hidden;
            flags.window = a.window;
            flags.features = a.features.clone();
            flags.learning_rate = a.learning_rate;
            flags.batch_size = a.batch_size;
            flags.train_fraction = a.train_fraction;
            flags.ridge = a.ridge;
        }
        _ => {}
    }
    file.overlay(flags);
    RunConfig::resolve(file, std::env::var(SEED_ENV).ok())
}

/// Runs a parsed command and returns its stdout summary.
pub fn run(cli: Cli) -> Result<String> {
    let cfg = resolve(&cli)?;
    let store = Store::new(&cfg.store);
    match &cli.command {
        Command::Ingest { input, .. } => cmd_ingest(&store, &cfg, input),
        Command::Features => cmd_features(&store, &cfg),
        Command::Train(_) => cmd_train(&store, &cfg),
        Command::Predict { date } => cmd_predict(&store, &cfg, *date),
        Command::Detect => cmd_detect(&store, &cfg),
        Command::Evaluate => cmd_evaluate(&store, &cfg),
    }
}

fn load_candles(store: &Store) -> Result<CandleSeries> {
    let text = store.read(&store.candles(), "candles")?;
    Ok(ingest::validate_series(&ingest::parse_candles(&text)?, GapPolicy::Reject)?.series)
}

fn load_frame(store: &Store) -> Result<IndicatorFrame> {
    IndicatorFrame::from_csv(&store.read(&store.features(), "features")?)
}

pub fn cmd_ingest(store: &Store, cfg: &RunConfig, input: &std::path::Path) -> Result<String> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let parsed = ingest::parse_candles(&text)?;
    let v = ingest::validate_series(&parsed, cfg.gap_policy)?;
    store.write(&store.candles(), &v.series.to_csv())?;
    Ok(format!(
        "ingested {} candles ({} forward-filled) -> {}\n",
        v.series.len(),
        v.fills,
        store.candles().display()
    ))
}

pub fn cmd_features(store: &Store, cfg: &RunConfig) -> Result<String> {
    let candles = load_candles(store)?;
    let frame = IndicatorFrame::compute(&candles, &cfg.indicators)?;
    store.write(&store.features(), &frame.to_csv())?;
    Ok(format!(
        "{} rows x {} columns -> {}\n",
        frame.len(),
        frame.names.len(),
        store.features().display()
    ))
}

pub fn cmd_train(store: &Store, cfg: &RunConfig) -> Result<String> {
    let frame = load_frame(store)?;
    let table = frame.select(&cfg.features)?;
    let ds = dataset::attach_targets(&table, cfg.horizon)?;
    store.write(&store.dataset(), &ds.to_csv()?)?;
    let (train, test) = dataset::chrono_split(&ds, cfg.train_fraction)?;
    let scaler = dataset::fit_scaler(&train)?;
    let train_s = scaler.apply(&train)?;
    let base = ModelArtifact {
        schema_version: SCHEMA_VERSION,
        model: ModelKind::Mlr,
        feature_names: cfg.features.clone(),
        horizon: cfg.horizon,
        train_fraction: cfg.train_fraction,
        train_rows: train.len(),
        test_start: test.dates[0],
        scaler: scaler.clone(),
        bank: None,
        test_r2: None,
        lstm: None,
    };
    let mut out = format!(
        "dataset: {} rows ({} train, {} test from {}), {} features\n",
        ds.len(),
        train.len(),
        test.len(),
        test.dates[0],
        cfg.features.len()
    );

    if cfg.model.includes_mlr() {
        let bank = mlr::fit_bank_with(&train_s, cfg.ridge)?;
        let pred = scaler.inverse_targets(&mlr::predict_bank(&bank, &scaler.transform_features(&test.x)?)?);
        let r2: Vec<Option<f64>> = (0..test.y.cols())
            .map(|h| mlr::r2_score(&test.y.column(h), &pred.column(h)).ok())
            .collect();
        let artifact = ModelArtifact {
            bank: Some(bank),
            test_r2: Some(r2.clone()),
            ..base.clone()
        };
        store.write_json(&store.model(ModelKind::Mlr), &artifact)?;
        let r2_last = r2.last().copied().flatten().map_or("-".into(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "mlr: {} models -> {} (test R^2 at h={}: {r2_last})",
            artifact.bank.as_ref().map_or(0, |b| b.horizon_count()),
            store.model(ModelKind::Mlr).display(),
            cfg.horizon
        );
    }

    if cfg.model.includes_lstm() {
        let (params, history) = lstm::train(&train_s, &cfg.train)?;
        let mut csv = String::from("epoch,loss\n");
        for (e, l) in history.iter().enumerate() {
            let _ = writeln!(csv, "{},{}", e + 1, l);
        }
        store.write(&store.history(), &csv)?;
        let artifact = ModelArtifact {
            model: ModelKind::Lstm,
            lstm: Some(LstmModel {
                config: cfg.train.clone(),
                params,
            }),
            ..base
        };
        store.write_json(&store.model(ModelKind::Lstm), &artifact)?;
        let last = history.last().map_or("-".into(), |l| format!("{l:.6}"));
        let _ = writeln!(
            out,
            "lstm: {} epochs, final loss {last} -> {}",
            history.len(),
            store.model(ModelKind::Lstm).display()
        );
    }
    Ok(out)
}

/// Model artifacts selected by `choice`. With `Both`, whichever exist are
/// used; a single requested model must exist.
fn load_models(store: &Store, choice: ModelChoice) -> Result<Vec<ModelArtifact>> {
    let mut models = Vec::new();
    for (kind, wanted) in [(ModelKind::Mlr, choice.includes_mlr()), (ModelKind::Lstm, choice.includes_lstm())] {
        if !wanted {
            continue;
        }
        match store.read_json::<ModelArtifact>(&store.model(kind), "model") {
            Ok(m) => models.push(m),
            Err(Error::ArtifactNotFound(_)) if choice == ModelChoice::Both => {}
            Err(e) => return Err(e),
        }
    }
    if models.is_empty() {
        return Err(Error::ArtifactNotFound("model".into()));
    }
    Ok(models)
}

pub fn cmd_predict(store: &Store, cfg: &RunConfig, date: Option<NaiveDate>) -> Result<String> {
    let models = load_models(store, cfg.model)?;
    let frame = load_frame(store)?;
    let anchor = match date {
        Some(d) => d,
        None => *frame.dates.last().ok_or(Error::EmptyHistory)?,
    };
    let mut forecasts = BTreeMap::new();
    let mut out = String::new();
    for m in &models {
        let fc = m.forecast_all(&frame)?;
        let row = fc.at(anchor).ok_or_else(|| {
            Error::InvalidConfig(format!("{} cannot forecast from {anchor}", m.model.as_str()))
        })?;
        let _ = writeln!(
            out,
            "{}: close h0 {:.4} -> h{} {:.4}",
            m.model.as_str(),
            row.closes[0],
            m.horizon,
            row.closes[m.horizon]
        );
        forecasts.insert(m.model, row.closes.clone());
    }
    let file = ForecastFile {
        schema_version: SCHEMA_VERSION,
        anchor,
        horizon: models[0].horizon,
        forecasts,
    };
    store.write_json(&store.forecast(), &file)?;
    let _ = writeln!(out, "forecast from {anchor} -> {}", store.forecast().display());
    Ok(out)
}

pub fn cmd_detect(store: &Store, cfg: &RunConfig) -> Result<String> {
    let file: ForecastFile = store.read_json(&store.forecast(), "forecast")?;
    let history = load_candles(store)?.truncate_at(file.anchor);
    let mut out = String::new();
    for (kind, closes) in &file.forecasts {
        let row = ForecastRow {
            anchor: file.anchor,
            closes: closes.clone(),
        };
        let report = phase::build_report(&history, &row, &cfg.phase())?;
        store.write_json(&store.report_json(*kind), &report)?;
        store.write(&store.report_csv(*kind), &report.to_csv())?;
        let advance = report.events.iter().filter(|e| e.advance).count();
        let regime = report
            .labels
            .last()
            .copied()
            .flatten()
            .map_or("undetermined".into(), |l| format!("{l:?}"));
        let _ = writeln!(
            out,
            "{}: {} crosses ({} in forecast window), regime at horizon end: {regime} -> {}",
            kind.as_str(),
            report.events.len(),
            advance,
            store.report_json(*kind).display()
        );
        for e in report.events.iter().filter(|e| e.advance) {
            let _ = writeln!(out, "  advance {:?} cross on {}", e.kind, e.date);
        }
    }
    Ok(out)
}

pub fn cmd_evaluate(store: &Store, cfg: &RunConfig) -> Result<String> {
    let load = |kind| store.read_json::<ModelArtifact>(&store.model(kind), &format!("{} model", kind.as_str()));
    let (mlr_m, lstm_m) = (load(ModelKind::Mlr)?, load(ModelKind::Lstm)?);
    let frame = load_frame(store)?;
    let history = load_candles(store)?;
    let last = history.last_date().ok_or(Error::EmptyHistory)?;
    let from = mlr_m.test_start.max(lstm_m.test_start);
    let phase_cfg = cfg.phase();

    let report = |m: &ModelArtifact| -> Result<phase::PhaseReport> {
        let fc = m.forecast_all(&frame)?;
        let s = eval::horizon_splice(&history, &fc, cfg.eval_horizon, from)?;
        phase::report_for(&s, &phase_cfg)
    };
    let actual = phase::report_for(&SplicedSeries::from_history(&history), &phase_cfg)?.slice(from, last);
    let mlr_r = report(&mlr_m)?.slice(from, last);
    let lstm_r = report(&lstm_m)?.slice(from, last);
    let comparison = eval::compare_models(&mlr_r, &lstm_r, &actual)?;
    let table = comparison.to_table();
    store.write_json(
        &store.comparison(),
        &ComparisonFile {
            schema_version: SCHEMA_VERSION,
            from,
            to: last,
            eval_horizon: cfg.eval_horizon,
            comparison,
        },
    )?;
    Ok(format!(
        "{}-day-ahead closes, {from}..{last}\n{table}-> {}\n",
        cfg.eval_horizon,
        store.comparison().display()
    ))
}
