//! End-to-end runs and their on-disk artifacts.
//!
//! Each `run_*` function is pure compute over a loaded series; the
//! `write_*` functions turn a finished run into files inside an [`OutDir`],
//! which removes everything it wrote if the run is not committed. The
//! manifest records enough (seed, config, input checksum, tool version) to
//! reproduce a run bit for bit.

use crate::lstm::{self, LstmModel, TrainHistory};
use crate::metrics::{self, ComparisonReport, MetricError, MetricsReport};
use crate::sarima::{self, SarimaError, SarimaFit, SarimaOrderRanges, SarimaSearch};
use crate::series::{
    describe, make_windows, split_holdout, DescriptiveStats, Quarter, Scaler, SeriesError,
    TimeSeries,
};
use crate::tuning::{self, LstmSearch, LstmSearchSpace, TuningError};
use crate::unitroot::{adf_test, AdfError, AdfResult, AdfSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const DEFAULT_HOLDOUT: usize = 4;
pub const DEFAULT_LOOKBACK: usize = 4;
pub const DEFAULT_SEED: u64 = 42;
/// The cross-validation fold count used by `lstm` and `compare` runs.
pub const CV_FOLDS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("ingest: {0}")]
    Series(#[from] SeriesError),
    #[error("adf: {0}")]
    Adf(#[from] AdfError),
    #[error("sarima: {0}")]
    Sarima(#[from] SarimaError),
    #[error("lstm: {0}")]
    Lstm(#[from] lstm::LstmError),
    #[error("lstm search: {0}")]
    Tuning(#[from] TuningError),
    #[error("evaluate: {0}")]
    Metric(#[from] MetricError),
    #[error("write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Everything a full run needs. The output directory is accepted from
/// config files but never serialized, so manifests from runs that differ
/// only in their destination stay identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub data: PathBuf,
    #[serde(default = "default_holdout")]
    pub holdout: usize,
    #[serde(default = "default_lookback")]
    pub lookback: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub scale: bool,
    #[serde(default)]
    pub sarima: SarimaOrderRanges,
    #[serde(default)]
    pub lstm: LstmSearchSpace,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_holdout() -> usize {
    DEFAULT_HOLDOUT
}
fn default_lookback() -> usize {
    DEFAULT_LOOKBACK
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

impl RunConfig {
    pub fn new(data: impl Into<PathBuf>) -> Self {
        RunConfig {
            data: data.into(),
            holdout: DEFAULT_HOLDOUT,
            lookback: DEFAULT_LOOKBACK,
            seed: DEFAULT_SEED,
            scale: false,
            sarima: SarimaOrderRanges::default(),
            lstm: LstmSearchSpace::default(),
            workers: default_workers(),
            out: None,
            format: OutputFormat::Json,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.data.as_os_str().is_empty() {
            return Err(PipelineError::BadConfig(
                "no data file given (use --data or a config file)".into(),
            ));
        }
        if self.holdout == 0 {
            return Err(PipelineError::BadConfig("holdout must be >= 1".into()));
        }
        if self.lookback == 0 {
            return Err(PipelineError::BadConfig("lookback must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(PipelineError::BadConfig("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// The LSTM search space with this run's lookback folded in.
    pub fn lstm_space(&self) -> LstmSearchSpace {
        let mut space = self.lstm.clone();
        space.lookback = self.lookback;
        space
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribeReport {
    pub start: String,
    pub end: String,
    pub stats: DescriptiveStats,
}

impl DescribeReport {
    pub fn to_text(&self) -> String {
        let s = &self.stats;
        let mut out = String::new();
        out.push_str(&format!("Descriptive statistics ({} to {})\n", self.start, self.end));
        out.push_str(&format!("  {:<20} {}\n", "observations", s.n));
        let rows = [
            ("mean", s.mean),
            ("standard error", s.standard_error),
            ("median", s.median),
            ("standard deviation", s.std_dev),
            ("excess kurtosis", s.excess_kurtosis),
            ("skewness", s.skewness),
            ("range", s.range),
            ("minimum", s.min),
            ("maximum", s.max),
        ];
        for (name, value) in rows {
            out.push_str(&format!("  {name:<20} {value:.4}\n"));
        }
        out
    }
}

pub fn run_describe(series: &TimeSeries) -> Result<DescribeReport, PipelineError> {
    let stats = describe(series)?;
    Ok(DescribeReport {
        start: series.start().to_string(),
        end: series.end().to_string(),
        stats,
    })
}

pub fn run_adf(
    series: &TimeSeries,
    spec: AdfSpec,
    max_lag: Option<usize>,
) -> Result<AdfResult, PipelineError> {
    Ok(adf_test(series.values(), spec, max_lag)?)
}

pub fn adf_to_text(result: &AdfResult) -> String {
    let verdict = if result.p_value < 0.05 {
        "unit root rejected at the 5% level"
    } else {
        "unit root not rejected at the 5% level"
    };
    format!(
        "ADF test ({} spec)\n  statistic    {:.4}\n  p-value      {:.4}\n  lags         {}\n  observations {}\n  {}\n",
        result.spec, result.statistic, result.p_value, result.lags, result.n_effective, verdict
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SarimaRun {
    pub search: SarimaSearch,
    pub best: SarimaFit,
    pub holdout_periods: Vec<String>,
    pub holdout_actual: Vec<f64>,
    pub forecasts: Vec<f64>,
    pub metrics: MetricsReport,
}

pub fn run_sarima(
    series: &TimeSeries,
    ranges: &SarimaOrderRanges,
    holdout: usize,
) -> Result<SarimaRun, PipelineError> {
    let (train, test) = split_holdout(series, holdout)?;
    let search = sarima::aic_search(&train, ranges)?;
    let best = search.best.clone();
    let forecasts = sarima::forecast(&best, &train, holdout)?;
    let metrics = metrics::evaluate(test.values(), &forecasts)?;
    Ok(SarimaRun {
        search,
        best,
        holdout_periods: test.periods().iter().map(Quarter::to_string).collect(),
        holdout_actual: test.values().to_vec(),
        forecasts,
        metrics,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmRun {
    pub search: LstmSearch,
    pub model: LstmModel,
    pub history: TrainHistory,
    pub scaler: Option<Scaler>,
    pub holdout_periods: Vec<String>,
    pub holdout_actual: Vec<f64>,
    pub forecasts: Vec<f64>,
    pub metrics: MetricsReport,
}

pub fn run_lstm(
    series: &TimeSeries,
    space: &LstmSearchSpace,
    holdout: usize,
    folds: usize,
    scale: bool,
    base_seed: u64,
) -> Result<LstmRun, PipelineError> {
    let (train, test) = split_holdout(series, holdout)?;
    let scaler = if scale {
        Some(Scaler::fit(train.values())?)
    } else {
        None
    };
    let working: Vec<f64> = match &scaler {
        Some(s) => s.transform(train.values()),
        None => train.values().to_vec(),
    };
    let windows = make_windows(&working, space.lookback)?;
    let search = tuning::run_lstm_search(&windows, space, folds, base_seed)?;
    let (model, history) = tuning::final_fit(&windows, &search.best().config)?;
    let raw_forecasts = lstm::forecast_recursive(&model, &working, holdout)?;
    let forecasts = match &scaler {
        Some(s) => s.inverse(&raw_forecasts),
        None => raw_forecasts,
    };
    let metrics = metrics::evaluate(test.values(), &forecasts)?;
    Ok(LstmRun {
        search,
        model,
        history,
        scaler,
        holdout_periods: test.periods().iter().map(Quarter::to_string).collect(),
        holdout_actual: test.values().to_vec(),
        forecasts,
        metrics,
    })
}

/// One row of the fitted-versus-actual data file: every input period once,
/// then one forecast row per holdout step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure2Row {
    pub period: String,
    pub actual: Option<f64>,
    pub lstm: Option<f64>,
    pub sarima: Option<f64>,
    pub set: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRun {
    pub sarima: SarimaRun,
    pub lstm: LstmRun,
    pub comparison: ComparisonReport,
    pub figure2: Vec<Figure2Row>,
}

pub fn run_compare(series: &TimeSeries, config: &RunConfig) -> Result<CompareRun, PipelineError> {
    config.validate()?;
    let sarima_run = run_sarima(series, &config.sarima, config.holdout)?;
    let lstm_run = run_lstm(
        series,
        &config.lstm_space(),
        config.holdout,
        CV_FOLDS,
        config.scale,
        config.seed,
    )?;
    let comparison = metrics::compare(
        &lstm_run.holdout_actual,
        &[
            ("LSTM".to_string(), lstm_run.forecasts.clone()),
            ("SARIMA".to_string(), sarima_run.forecasts.clone()),
        ],
    )?;
    let figure2 = figure2_rows(series, config.holdout, config.lookback, &lstm_run, &sarima_run)?;
    Ok(CompareRun {
        sarima: sarima_run,
        lstm: lstm_run,
        comparison,
        figure2,
    })
}

/// Build the plot data: N period rows (actual everywhere, LSTM fitted
/// values on the training rows it can see), then h forecast rows carrying
/// both models' predictions.
fn figure2_rows(
    series: &TimeSeries,
    holdout: usize,
    lookback: usize,
    lstm_run: &LstmRun,
    sarima_run: &SarimaRun,
) -> Result<Vec<Figure2Row>, PipelineError> {
    let n = series.len();
    let train_len = n - holdout;
    let train_values = &series.values()[..train_len];
    let working: Vec<f64> = match &lstm_run.scaler {
        Some(s) => s.transform(train_values),
        None => train_values.to_vec(),
    };
    let windows = make_windows(&working, lookback)?;
    let mut fitted: Vec<Option<f64>> = vec![None; n];
    for window in &windows {
        let raw = lstm_run.model.predict(&window.inputs);
        let value = match &lstm_run.scaler {
            Some(s) => s.inverse(&[raw])[0],
            None => raw,
        };
        fitted[window.target_index] = Some(value);
    }

    let mut rows = Vec::with_capacity(n + holdout);
    for (t, (period, &value)) in series.periods().iter().zip(series.values()).enumerate() {
        let set = if t < train_len { "train" } else { "test" };
        rows.push(Figure2Row {
            period: period.to_string(),
            actual: Some(value),
            lstm: if t < train_len { fitted[t] } else { None },
            sarima: None,
            set: set.to_string(),
        });
    }
    for (j, period) in lstm_run.holdout_periods.iter().enumerate() {
        rows.push(Figure2Row {
            period: period.clone(),
            actual: None,
            lstm: Some(lstm_run.forecasts[j]),
            sarima: Some(sarima_run.forecasts[j]),
            set: "test".to_string(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub seed: u64,
    pub input_sha256: String,
    pub run_config: serde_json::Value,
    pub timestamps: Timestamps,
}

impl Manifest {
    pub fn new(config: &RunConfig, input_sha256: String, started_unix_ms: u64) -> Self {
        Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            input_sha256,
            run_config: serde_json::to_value(config).expect("config serializes"),
            timestamps: Timestamps {
                started_unix_ms,
                finished_unix_ms: unix_ms(),
            },
        }
    }
}

pub fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Output directory guard. Refuses a non-empty directory up front; unless
/// the run commits, dropping the guard removes every file it wrote, and
/// the directory itself if it was created here.
#[derive(Debug)]
pub struct OutDir {
    path: PathBuf,
    created_root: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutDir {
    pub fn prepare(path: &Path) -> Result<Self, PipelineError> {
        let created_root = if path.exists() {
            let occupied = fs::read_dir(path)
                .map_err(|source| PipelineError::Io {
                    path: path.to_path_buf(),
                    source,
                })?
                .next()
                .is_some();
            if occupied {
                return Err(PipelineError::BadConfig(format!(
                    "output directory {} is not empty",
                    path.display()
                )));
            }
            false
        } else {
            fs::create_dir_all(path).map_err(|source| PipelineError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            true
        };
        Ok(OutDir {
            path: path.to_path_buf(),
            created_root,
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write_text(&mut self, name: &str, contents: &str) -> Result<PathBuf, PipelineError> {
        let path = self.path.join(name);
        let io_err = |source| PipelineError::Io {
            path: path.clone(),
            source,
        };
        let mut file = fs::File::create(&path).map_err(io_err)?;
        file.write_all(contents.as_bytes()).map_err(io_err)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Keep everything written so far.
    pub fn commit(mut self) -> PathBuf {
        self.committed = true;
        std::mem::take(&mut self.path)
    }
}

impl Drop for OutDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for file in &self.written {
            let _ = fs::remove_file(file);
        }
        if self.created_root {
            let _ = fs::remove_dir_all(&self.path);
        }
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn csv_into_string(builder: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    builder(&mut writer).expect("csv rows serialize");
    let bytes = writer.into_inner().expect("csv flushes");
    String::from_utf8(bytes).expect("csv is utf-8")
}

fn fmt_f64(value: f64) -> String {
    format!("{value}")
}

pub fn write_describe_artifacts(
    dir: &mut OutDir,
    report: &DescribeReport,
    format: OutputFormat,
) -> Result<(), PipelineError> {
    match format {
        OutputFormat::Json => {
            dir.write_text("describe.json", &to_pretty_json(report))?;
        }
        OutputFormat::Csv => {
            let s = &report.stats;
            let text = csv_into_string(|w| {
                w.write_record(["statistic", "value"])?;
                for (name, value) in [
                    ("observations", s.n as f64),
                    ("mean", s.mean),
                    ("standard_error", s.standard_error),
                    ("median", s.median),
                    ("std_dev", s.std_dev),
                    ("excess_kurtosis", s.excess_kurtosis),
                    ("skewness", s.skewness),
                    ("range", s.range),
                    ("min", s.min),
                    ("max", s.max),
                ] {
                    w.write_record([name.to_string(), fmt_f64(value)])?;
                }
                Ok(())
            });
            dir.write_text("describe.csv", &text)?;
        }
    }
    Ok(())
}

pub fn write_adf_artifacts(
    dir: &mut OutDir,
    result: &AdfResult,
    format: OutputFormat,
) -> Result<(), PipelineError> {
    match format {
        OutputFormat::Json => {
            dir.write_text("adf.json", &to_pretty_json(result))?;
        }
        OutputFormat::Csv => {
            let text = csv_into_string(|w| {
                w.write_record(["statistic", "p_value", "lags", "spec", "n_effective"])?;
                w.write_record([
                    fmt_f64(result.statistic),
                    fmt_f64(result.p_value),
                    result.lags.to_string(),
                    result.spec.to_string(),
                    result.n_effective.to_string(),
                ])?;
                Ok(())
            });
            dir.write_text("adf.csv", &text)?;
        }
    }
    Ok(())
}

fn sarima_search_csv(search: &SarimaSearch) -> String {
    csv_into_string(|w| {
        w.write_record(["p", "d", "q", "P", "D", "Q", "s", "k", "loglik", "aic", "converged"])?;
        for entry in &search.table {
            if let Ok(fit) = &entry.outcome {
                let o = fit.order;
                w.write_record([
                    o.p.to_string(),
                    o.d.to_string(),
                    o.q.to_string(),
                    o.seasonal_p.to_string(),
                    o.seasonal_d.to_string(),
                    o.seasonal_q.to_string(),
                    o.s.to_string(),
                    o.parameter_count().to_string(),
                    fmt_f64(fit.loglik),
                    fmt_f64(fit.aic),
                    fit.converged.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

fn forecast_csv(periods: &[String], actual: &[f64], forecast: &[f64]) -> String {
    csv_into_string(|w| {
        w.write_record(["period", "actual", "forecast"])?;
        for ((p, a), f) in periods.iter().zip(actual).zip(forecast) {
            w.write_record([p.clone(), fmt_f64(*a), fmt_f64(*f)])?;
        }
        Ok(())
    })
}

pub fn write_sarima_artifacts(dir: &mut OutDir, run: &SarimaRun) -> Result<(), PipelineError> {
    let report = serde_json::json!({
        "best": run.best,
        "holdout": {
            "periods": run.holdout_periods,
            "actual": run.holdout_actual,
            "forecast": run.forecasts,
        },
        "metrics": run.metrics,
    });
    dir.write_text("sarima.json", &to_pretty_json(&report))?;
    dir.write_text("sarima_search.csv", &sarima_search_csv(&run.search))?;
    dir.write_text(
        "sarima_forecast.csv",
        &forecast_csv(&run.holdout_periods, &run.holdout_actual, &run.forecasts),
    )?;
    Ok(())
}

fn lstm_trials_csv(search: &LstmSearch, folds: usize) -> String {
    csv_into_string(|w| {
        let mut header = vec![
            "epochs".to_string(),
            "dropout".to_string(),
            "units".to_string(),
            "batch_size".to_string(),
            "l2".to_string(),
            "seed".to_string(),
        ];
        for i in 1..=folds {
            header.push(format!("fold_mse_{i}"));
        }
        header.push("mean_mse".to_string());
        header.push("status".to_string());
        header.push("seconds".to_string());
        w.write_record(&header)?;
        for trial in &search.trials {
            let c = &trial.config;
            let mut row = vec![
                c.epochs.to_string(),
                fmt_f64(c.recurrent_dropout),
                c.units.to_string(),
                c.batch_size.to_string(),
                fmt_f64(c.l2_lambda),
                c.seed.to_string(),
            ];
            match &trial.outcome {
                Ok(score) => {
                    for i in 0..folds {
                        row.push(score.fold_mses.get(i).map(|m| fmt_f64(*m)).unwrap_or_default());
                    }
                    row.push(fmt_f64(score.mean_mse));
                    row.push("ok".to_string());
                }
                Err(message) => {
                    for _ in 0..folds {
                        row.push(String::new());
                    }
                    row.push(String::new());
                    row.push(message.clone());
                }
            }
            row.push(fmt_f64(trial.seconds));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

fn figure3_csv(history: &TrainHistory) -> String {
    csv_into_string(|w| {
        w.write_record(["epoch", "mse", "mae", "mape"])?;
        for e in &history.epochs {
            w.write_record([
                e.epoch.to_string(),
                fmt_f64(e.mse),
                fmt_f64(e.mae),
                e.mape.map(fmt_f64).unwrap_or_default(),
            ])?;
        }
        Ok(())
    })
}

pub fn write_lstm_artifacts(
    dir: &mut OutDir,
    run: &LstmRun,
    folds: usize,
) -> Result<(), PipelineError> {
    // Timing stays in the trials csv; the report itself must be identical
    // across reruns with the same seed.
    let best = run.search.best();
    let report = serde_json::json!({
        "best_trial": {
            "config": best.config,
            "score": best.outcome.as_ref().ok(),
        },
        "final_config": run.model.config,
        "scaled": run.scaler.is_some(),
        "holdout": {
            "periods": run.holdout_periods,
            "actual": run.holdout_actual,
            "forecast": run.forecasts,
        },
        "metrics": run.metrics,
    });
    dir.write_text("lstm.json", &to_pretty_json(&report))?;
    dir.write_text("lstm_trials.csv", &lstm_trials_csv(&run.search, folds))?;
    dir.write_text("figure3.csv", &figure3_csv(&run.history))?;
    dir.write_text(
        "lstm_forecast.csv",
        &forecast_csv(&run.holdout_periods, &run.holdout_actual, &run.forecasts),
    )?;
    dir.write_text("model.json", &run.model.to_json())?;
    Ok(())
}

fn figure2_csv(rows: &[Figure2Row]) -> String {
    let fmt_opt = |v: &Option<f64>| v.map(fmt_f64).unwrap_or_default();
    csv_into_string(|w| {
        w.write_record(["period", "actual", "lstm", "sarima", "set"])?;
        for row in rows {
            w.write_record([
                row.period.clone(),
                fmt_opt(&row.actual),
                fmt_opt(&row.lstm),
                fmt_opt(&row.sarima),
                row.set.clone(),
            ])?;
        }
        Ok(())
    })
}

pub fn write_compare_artifacts(
    dir: &mut OutDir,
    run: &CompareRun,
    folds: usize,
) -> Result<(), PipelineError> {
    let report = serde_json::json!({
        "sarima_order": run.sarima.best.order.to_string(),
        "lstm_config": run.lstm.model.config,
        "comparison": run.comparison,
    });
    dir.write_text("comparison.json", &to_pretty_json(&report))?;
    dir.write_text("comparison.txt", &run.comparison.to_text())?;
    dir.write_text("figure2.csv", &figure2_csv(&run.figure2))?;
    write_sarima_artifacts(dir, &run.sarima)?;
    write_lstm_artifacts(dir, &run.lstm, folds)?;
    Ok(())
}

pub fn write_manifest(dir: &mut OutDir, manifest: &Manifest) -> Result<(), PipelineError> {
    dir.write_text("manifest.json", &to_pretty_json(manifest))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::Activation;
    use crate::series::Quarter;

    fn seasonal_ramp(n: usize) -> TimeSeries {
        let start = Quarter::new(2000, 1).unwrap();
        let values: Vec<f64> = (0..n)
            .map(|t| 100.0 + 2.0 * t as f64 + [6.0, -3.0, 4.0, -7.0][t % 4])
            .collect();
        TimeSeries::from_start(start, values).unwrap()
    }

    fn toy_space() -> LstmSearchSpace {
        LstmSearchSpace {
            epochs: vec![120],
            dropouts: vec![0.0],
            units: vec![6],
            batch_sizes: vec![2],
            l2_lambdas: vec![0.0],
            lookback: 4,
            learning_rate: 0.01,
            activation: Activation::Relu,
        }
    }

    fn small_ranges() -> SarimaOrderRanges {
        SarimaOrderRanges {
            p: vec![0, 1],
            d: vec![0, 1],
            q: vec![0],
            seasonal_p: vec![0, 1],
            seasonal_d: vec![1],
            seasonal_q: vec![0],
            s: 4,
        }
    }

    fn tiny_ranges() -> SarimaOrderRanges {
        SarimaOrderRanges {
            p: vec![1],
            d: vec![1],
            q: vec![0],
            seasonal_p: vec![0],
            seasonal_d: vec![1],
            seasonal_q: vec![0],
            s: 4,
        }
    }

    #[test]
    fn describe_report_renders_every_statistic() {
        let series = seasonal_ramp(24);
        let report = run_describe(&series).unwrap();
        assert_eq!(report.start, "2000-Q1");
        assert_eq!(report.end, "2005-Q4");
        let text = report.to_text();
        for label in ["mean", "median", "skewness", "excess kurtosis", "range"] {
            assert!(text.contains(label), "missing {label} in:\n{text}");
        }
    }

    #[test]
    fn sarima_run_forecasts_the_holdout_and_scores_it() {
        let series = seasonal_ramp(48);
        let run = run_sarima(&series, &small_ranges(), 4).unwrap();
        assert_eq!(run.forecasts.len(), 4);
        assert_eq!(run.holdout_periods.len(), 4);
        assert_eq!(run.holdout_periods[0], "2011-Q1");
        assert!(run.metrics.mape < 5.0, "sarima mape {}", run.metrics.mape);
        assert!(!run.search.table.is_empty());
    }

    #[test]
    fn lstm_run_inverse_transforms_scaled_forecasts() {
        let series = seasonal_ramp(48);
        let run = run_lstm(&series, &toy_space(), 4, 3, true, 7).unwrap();
        assert_eq!(run.forecasts.len(), 4);
        assert!(run.scaler.is_some());
        // Forecasts must land near the raw-scale holdout, not near z-scores.
        for (f, a) in run.forecasts.iter().zip(&run.holdout_actual) {
            assert!((f - a).abs() / a < 0.25, "forecast {f} vs actual {a}");
        }
        assert_eq!(run.history.epochs.len(), 120);
    }

    #[test]
    fn compare_run_builds_reports_and_figure_data() {
        let series = seasonal_ramp(48);
        let mut config = RunConfig::new("unused.csv");
        config.scale = true;
        config.seed = 7;
        config.sarima = small_ranges();
        config.lstm = toy_space();
        let run = run_compare(&series, &config).unwrap();

        assert_eq!(run.comparison.models.len(), 2);
        assert_eq!(run.comparison.models[0].name, "LSTM");
        assert_eq!(run.comparison.models[1].name, "SARIMA");

        // N period rows plus h forecast rows.
        assert_eq!(run.figure2.len(), 48 + 4);
        let train_rows = run.figure2.iter().filter(|r| r.set == "train").count();
        assert_eq!(train_rows, 44);
        // Fitted values appear exactly on train targets the lookback allows.
        let fitted: Vec<&Figure2Row> = run
            .figure2
            .iter()
            .take(48)
            .filter(|r| r.lstm.is_some())
            .collect();
        assert_eq!(fitted.len(), 44 - 4);
        assert_eq!(fitted[0].period, "2001-Q1");
        let forecast_rows = &run.figure2[48..];
        for row in forecast_rows {
            assert!(row.actual.is_none());
            assert!(row.lstm.is_some());
            assert!(row.sarima.is_some());
            assert_eq!(row.set, "test");
        }
        // Forecast rows repeat the holdout periods.
        assert_eq!(forecast_rows[0].period, run.figure2[44].period);
    }

    #[test]
    fn compare_twice_with_one_seed_is_bit_identical() {
        let series = seasonal_ramp(40);
        let mut config = RunConfig::new("unused.csv");
        config.scale = true;
        config.seed = 3;
        config.sarima = tiny_ranges();
        config.lstm = toy_space();
        let a = run_compare(&series, &config).unwrap();
        let b = run_compare(&series, &config).unwrap();
        let json_a = serde_json::to_string(&a.comparison).unwrap();
        let json_b = serde_json::to_string(&b.comparison).unwrap();
        assert_eq!(json_a, json_b);
        assert_eq!(
            serde_json::to_string(&a.figure2).unwrap(),
            serde_json::to_string(&b.figure2).unwrap()
        );
    }

    #[test]
    fn out_dir_removes_everything_unless_committed() {
        let tmp = tempfile::tempdir().unwrap();
        let target = tmp.path().join("run");
        {
            let mut dir = OutDir::prepare(&target).unwrap();
            dir.write_text("a.txt", "hello").unwrap();
            assert!(target.join("a.txt").exists());
        }
        assert!(!target.exists(), "uncommitted dir should be removed");

        let mut dir = OutDir::prepare(&target).unwrap();
        dir.write_text("a.txt", "hello").unwrap();
        dir.commit();
        assert!(target.join("a.txt").exists());
    }

    #[test]
    fn out_dir_refuses_occupied_directories_but_reuses_empty_ones() {
        let tmp = tempfile::tempdir().unwrap();
        let target = tmp.path().join("run");
        fs::create_dir(&target).unwrap();
        fs::write(target.join("existing.txt"), "x").unwrap();
        assert!(matches!(
            OutDir::prepare(&target),
            Err(PipelineError::BadConfig(_))
        ));

        let empty = tmp.path().join("empty");
        fs::create_dir(&empty).unwrap();
        {
            let mut dir = OutDir::prepare(&empty).unwrap();
            dir.write_text("b.txt", "y").unwrap();
        }
        // Pre-existing directory survives, our partial file does not.
        assert!(empty.exists());
        assert!(!empty.join("b.txt").exists());
    }

    #[test]
    fn manifest_serializes_its_five_documented_keys() {
        let config = RunConfig::new("data.csv");
        let manifest = Manifest::new(&config, "abc123".into(), 5);
        let value = serde_json::to_value(&manifest).unwrap();
        let mut keys: Vec<&str> = value.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            vec!["input_sha256", "run_config", "seed", "timestamps", "tool_version"]
        );
        // The output directory stays out of the manifest.
        assert!(value["run_config"].get("out").is_none());
        assert_eq!(value["run_config"]["holdout"], 4);
    }

    #[test]
    fn sha256_matches_the_known_empty_file_digest() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("empty.bin");
        fs::write(&path, b"").unwrap();
        assert_eq!(
            sha256_file(&path).unwrap(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert!(sha256_file(&tmp.path().join("missing")).is_err());
    }

    #[test]
    fn artifact_files_have_the_documented_headers() {
        let series = seasonal_ramp(40);
        let mut config = RunConfig::new("unused.csv");
        config.scale = true;
        config.sarima = tiny_ranges();
        config.lstm = toy_space();
        let run = run_compare(&series, &config).unwrap();

        let tmp = tempfile::tempdir().unwrap();
        let target = tmp.path().join("out");
        let mut dir = OutDir::prepare(&target).unwrap();
        write_compare_artifacts(&mut dir, &run, CV_FOLDS).unwrap();
        let manifest = Manifest::new(&config, "deadbeef".into(), 1);
        write_manifest(&mut dir, &manifest).unwrap();
        let kept = dir.commit();

        let expect = [
            ("comparison.json", "\"comparison\""),
            ("comparison.txt", "MAPE"),
            ("figure2.csv", "period,actual,lstm,sarima,set"),
            ("sarima_search.csv", "p,d,q,P,D,Q,s,k,loglik,aic,converged"),
            (
                "lstm_trials.csv",
                "epochs,dropout,units,batch_size,l2,seed,fold_mse_1,fold_mse_2,fold_mse_3,mean_mse,status,seconds",
            ),
            ("figure3.csv", "epoch,mse,mae,mape"),
            ("sarima_forecast.csv", "period,actual,forecast"),
            ("lstm_forecast.csv", "period,actual,forecast"),
            ("model.json", "\"weights\""),
            ("manifest.json", "\"tool_version\""),
            ("sarima.json", "\"metrics\""),
            ("lstm.json", "\"final_config\""),
        ];
        for (name, needle) in expect {
            let text = fs::read_to_string(kept.join(name)).unwrap();
            assert!(text.contains(needle), "{name} missing {needle:?}:\n{text}");
        }

        let figure2 = fs::read_to_string(kept.join("figure2.csv")).unwrap();
        assert_eq!(figure2.lines().count(), 1 + 40 + 4);
    }

    #[test]
    fn run_config_validation_and_json_round_trip() {
        let mut config = RunConfig::new("x.csv");
        config.holdout = 0;
        assert!(matches!(
            config.validate(),
            Err(PipelineError::BadConfig(_))
        ));

        let text = r#"{"data": "gdp.csv", "seed": 9, "scale": true}"#;
        let parsed: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(parsed.holdout, DEFAULT_HOLDOUT);
        assert_eq!(parsed.lookback, DEFAULT_LOOKBACK);
        assert_eq!(parsed.seed, 9);
        assert!(parsed.scale);
        assert!(parsed.out.is_none());
        assert_eq!(parsed.lstm.units, vec![250, 500, 1000]);
        parsed.validate().unwrap();
    }

    #[test]
    fn pipeline_errors_name_their_stage() {
        let short = TimeSeries::from_start(
            Quarter::new(2020, 1).unwrap(),
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let err = run_sarima(&short, &small_ranges(), 4).unwrap_err();
        assert!(err.to_string().starts_with("ingest:"), "{err}");
        let err = run_lstm(&short, &toy_space(), 1, 3, false, 1).unwrap_err();
        assert!(err.to_string().contains(":"), "{err}");
    }
}
