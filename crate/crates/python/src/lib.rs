//! Python bindings: series handling, the ADF test, SARIMA search and
//! forecasting, LSTM training and tuning, and the shared accuracy metrics.

use std::str::FromStr;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use quartercast::lstm::{self, Activation, LstmConfig as RsLstmConfig, LstmModel as RsLstmModel};
use quartercast::metrics;
use quartercast::sarima::{self, SarimaFit, SarimaOrder, SarimaOrderRanges};
use quartercast::series::{self, Quarter, Scaler as RsScaler, TimeSeries as RsTimeSeries};
use quartercast::tuning::{self, LstmSearchSpace};
use quartercast::unitroot::{self, AdfSpec};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_activation(name: &str) -> PyResult<Activation> {
    match name {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        other => Err(PyValueError::new_err(format!(
            "unknown activation {other:?}; expected \"relu\" or \"tanh\""
        ))),
    }
}

fn parse_spec(name: &str) -> PyResult<AdfSpec> {
    match name {
        "no-constant" => Ok(AdfSpec::NoConstant),
        "constant" => Ok(AdfSpec::Constant),
        "constant-trend" => Ok(AdfSpec::ConstantTrend),
        other => Err(PyValueError::new_err(format!(
            "unknown regression spec {other:?}; expected \"no-constant\", \"constant\", or \"constant-trend\""
        ))),
    }
}

type OrderTuple = (usize, usize, usize, usize, usize, usize, usize);

fn order_tuple(order: &SarimaOrder) -> OrderTuple {
    (
        order.p,
        order.d,
        order.q,
        order.seasonal_p,
        order.seasonal_d,
        order.seasonal_q,
        order.s,
    )
}

/// A quarterly series with consecutive periods like "1995-Q1".
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct TimeSeries {
    inner: RsTimeSeries,
}

#[pymethods]
impl TimeSeries {
    #[new]
    fn new(periods: Vec<String>, values: Vec<f64>) -> PyResult<Self> {
        let periods = periods
            .iter()
            .map(|p| Quarter::from_str(p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?;
        let inner = RsTimeSeries::new(periods, values).map_err(value_err)?;
        Ok(TimeSeries { inner })
    }

    /// Read a `period,value` CSV file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = series::load_csv(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(TimeSeries { inner })
    }

    /// Build a series from a starting quarter and a list of values.
    #[staticmethod]
    fn from_start(start: &str, values: Vec<f64>) -> PyResult<Self> {
        let start = Quarter::from_str(start).map_err(value_err)?;
        let inner = RsTimeSeries::from_start(start, values).map_err(value_err)?;
        Ok(TimeSeries { inner })
    }

    #[getter]
    fn periods(&self) -> Vec<String> {
        self.inner.periods().iter().map(|q| q.to_string()).collect()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn start(&self) -> String {
        self.inner.start().to_string()
    }

    #[getter]
    fn end(&self) -> String {
        self.inner.end().to_string()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "TimeSeries({}..{}, n={})",
            self.inner.start(),
            self.inner.end(),
            self.inner.len()
        )
    }

    /// Summary statistics as a dict: n, mean, standard_error, median,
    /// std_dev, excess_kurtosis, skewness, range, min, max.
    fn describe<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = series::describe(&self.inner).map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item("n", s.n)?;
        d.set_item("mean", s.mean)?;
        d.set_item("standard_error", s.standard_error)?;
        d.set_item("median", s.median)?;
        d.set_item("std_dev", s.std_dev)?;
        d.set_item("excess_kurtosis", s.excess_kurtosis)?;
        d.set_item("skewness", s.skewness)?;
        d.set_item("range", s.range)?;
        d.set_item("min", s.min)?;
        d.set_item("max", s.max)?;
        Ok(d)
    }

    /// Split off the last `holdout` observations: (train, test).
    fn split_holdout(&self, holdout: usize) -> PyResult<(TimeSeries, TimeSeries)> {
        let (train, test) = series::split_holdout(&self.inner, holdout).map_err(value_err)?;
        Ok((TimeSeries { inner: train }, TimeSeries { inner: test }))
    }
}

/// Z-score scaler fitted on a training split.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Scaler {
    inner: RsScaler,
}

#[pymethods]
impl Scaler {
    #[staticmethod]
    fn fit(values: Vec<f64>) -> PyResult<Self> {
        let inner = RsScaler::fit(&values).map_err(value_err)?;
        Ok(Scaler { inner })
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.inner.mean
    }

    #[getter]
    fn std(&self) -> f64 {
        self.inner.std
    }

    fn transform(&self, values: Vec<f64>) -> Vec<f64> {
        self.inner.transform(&values)
    }

    fn inverse(&self, values: Vec<f64>) -> Vec<f64> {
        self.inner.inverse(&values)
    }

    fn __repr__(&self) -> String {
        format!("Scaler(mean={}, std={})", self.inner.mean, self.inner.std)
    }
}

/// Apply `(1-B)^d` then `(1-B^s)^D` to the values.
#[pyfunction]
#[pyo3(signature = (values, d=1, seasonal_d=0, s=4))]
fn difference(values: Vec<f64>, d: usize, seasonal_d: usize, s: usize) -> PyResult<Vec<f64>> {
    series::difference(&values, d, seasonal_d, s).map_err(value_err)
}

/// Augmented Dickey-Fuller test. `spec` is one of "no-constant",
/// "constant", or "constant-trend"; `max_lag` defaults to the Schwert rule.
#[pyfunction]
#[pyo3(signature = (values, spec="constant", max_lag=None))]
fn adf_test<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    spec: &str,
    max_lag: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = parse_spec(spec)?;
    let r = unitroot::adf_test(&values, spec, max_lag).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("statistic", r.statistic)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("lags", r.lags)?;
    d.set_item("spec", r.spec.to_string())?;
    d.set_item("n_effective", r.n_effective)?;
    Ok(d)
}

/// A fitted SARIMA model.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct SarimaModel {
    inner: SarimaFit,
}

#[pymethods]
impl SarimaModel {
    /// (p, d, q, P, D, Q, s)
    #[getter]
    fn order(&self) -> OrderTuple {
        order_tuple(&self.inner.order)
    }

    #[getter]
    fn aic(&self) -> f64 {
        self.inner.aic
    }

    #[getter]
    fn loglik(&self) -> f64 {
        self.inner.loglik
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn n_effective(&self) -> usize {
        self.inner.n_effective
    }

    /// Estimated coefficients: phi, theta, seasonal_phi, seasonal_theta,
    /// mu (None unless the differenced series keeps a mean), sigma2.
    #[getter]
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let p = &self.inner.params;
        let d = PyDict::new(py);
        d.set_item("phi", p.phi.clone())?;
        d.set_item("theta", p.theta.clone())?;
        d.set_item("seasonal_phi", p.seasonal_phi.clone())?;
        d.set_item("seasonal_theta", p.seasonal_theta.clone())?;
        d.set_item("mu", p.mu)?;
        d.set_item("sigma2", p.sigma2)?;
        Ok(d)
    }

    /// Forecast `horizon` steps past the end of `series`.
    fn forecast(&self, series: &TimeSeries, horizon: usize) -> PyResult<Vec<f64>> {
        sarima::forecast(&self.inner, &series.inner, horizon).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "SarimaModel({}, aic={:.4})",
            self.inner.order, self.inner.aic
        )
    }
}

/// Fit one SARIMA order, given as (p, d, q, P, D, Q, s).
#[pyfunction]
fn sarima_fit(py: Python<'_>, series: &TimeSeries, order: OrderTuple) -> PyResult<SarimaModel> {
    let (p, d, q, sp, sd, sq, s) = order;
    let order = SarimaOrder::new(p, d, q, sp, sd, sq, s).map_err(value_err)?;
    let series = series.inner.clone();
    let inner = py
        .detach(move || sarima::fit(&series, &order))
        .map_err(value_err)?;
    Ok(SarimaModel { inner })
}

/// Fit every order in the grid and return the minimum-AIC model together
/// with the full search table. Omitted axes use the default grid:
/// p,d,q in {0,1,2} and P,D,Q in {0,1} with s=4.
#[pyfunction]
#[pyo3(signature = (series, p=None, d=None, q=None, seasonal_p=None, seasonal_d=None, seasonal_q=None, s=4))]
#[allow(clippy::too_many_arguments)]
fn sarima_search<'py>(
    py: Python<'py>,
    series: &TimeSeries,
    p: Option<Vec<usize>>,
    d: Option<Vec<usize>>,
    q: Option<Vec<usize>>,
    seasonal_p: Option<Vec<usize>>,
    seasonal_d: Option<Vec<usize>>,
    seasonal_q: Option<Vec<usize>>,
    s: usize,
) -> PyResult<(SarimaModel, Vec<Bound<'py, PyDict>>)> {
    let defaults = SarimaOrderRanges::default();
    let ranges = SarimaOrderRanges {
        p: p.unwrap_or(defaults.p),
        d: d.unwrap_or(defaults.d),
        q: q.unwrap_or(defaults.q),
        seasonal_p: seasonal_p.unwrap_or(defaults.seasonal_p),
        seasonal_d: seasonal_d.unwrap_or(defaults.seasonal_d),
        seasonal_q: seasonal_q.unwrap_or(defaults.seasonal_q),
        s,
    };
    let cloned = series.inner.clone();
    let search = py
        .detach(move || sarima::aic_search(&cloned, &ranges))
        .map_err(value_err)?;

    let mut table = Vec::with_capacity(search.table.len());
    for entry in &search.table {
        let row = PyDict::new(py);
        row.set_item("order", order_tuple(&entry.order))?;
        match &entry.outcome {
            Ok(fit) => {
                row.set_item("aic", fit.aic)?;
                row.set_item("loglik", fit.loglik)?;
                row.set_item("converged", fit.converged)?;
                row.set_item("error", Option::<String>::None)?;
            }
            Err(message) => {
                row.set_item("aic", Option::<f64>::None)?;
                row.set_item("loglik", Option::<f64>::None)?;
                row.set_item("converged", Option::<bool>::None)?;
                row.set_item("error", message)?;
            }
        }
        table.push(row);
    }
    Ok((SarimaModel { inner: search.best }, table))
}

/// Hyperparameters for the two-layer LSTM.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct LstmConfig {
    inner: RsLstmConfig,
}

#[pymethods]
impl LstmConfig {
    #[new]
    #[pyo3(signature = (units=None, epochs=None, batch_size=None, recurrent_dropout=None, l2_lambda=None, lookback=None, learning_rate=None, seed=None, activation=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        units: Option<usize>,
        epochs: Option<usize>,
        batch_size: Option<usize>,
        recurrent_dropout: Option<f64>,
        l2_lambda: Option<f64>,
        lookback: Option<usize>,
        learning_rate: Option<f64>,
        seed: Option<u64>,
        activation: Option<&str>,
    ) -> PyResult<Self> {
        let mut inner = RsLstmConfig::default();
        if let Some(v) = units {
            inner.units = v;
        }
        if let Some(v) = epochs {
            inner.epochs = v;
        }
        if let Some(v) = batch_size {
            inner.batch_size = v;
        }
        if let Some(v) = recurrent_dropout {
            inner.recurrent_dropout = v;
        }
        if let Some(v) = l2_lambda {
            inner.l2_lambda = v;
        }
        if let Some(v) = lookback {
            inner.lookback = v;
        }
        if let Some(v) = learning_rate {
            inner.learning_rate = v;
        }
        if let Some(v) = seed {
            inner.seed = v;
        }
        if let Some(name) = activation {
            inner.activation = parse_activation(name)?;
        }
        inner.validate().map_err(value_err)?;
        Ok(LstmConfig { inner })
    }

    #[getter]
    fn units(&self) -> usize {
        self.inner.units
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs
    }

    #[getter]
    fn batch_size(&self) -> usize {
        self.inner.batch_size
    }

    #[getter]
    fn recurrent_dropout(&self) -> f64 {
        self.inner.recurrent_dropout
    }

    #[getter]
    fn l2_lambda(&self) -> f64 {
        self.inner.l2_lambda
    }

    #[getter]
    fn lookback(&self) -> usize {
        self.inner.lookback
    }

    #[getter]
    fn learning_rate(&self) -> f64 {
        self.inner.learning_rate
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn activation(&self) -> String {
        match self.inner.activation {
            Activation::Relu => "relu".to_string(),
            Activation::Tanh => "tanh".to_string(),
        }
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "LstmConfig(units={}, epochs={}, batch_size={}, recurrent_dropout={}, l2_lambda={}, lookback={}, learning_rate={}, seed={}, activation={:?})",
            c.units,
            c.epochs,
            c.batch_size,
            c.recurrent_dropout,
            c.l2_lambda,
            c.lookback,
            c.learning_rate,
            c.seed,
            self.activation(),
        )
    }
}

/// A trained LSTM.
#[pyclass]
struct LstmModel {
    inner: RsLstmModel,
}

#[pymethods]
impl LstmModel {
    #[getter]
    fn config(&self) -> LstmConfig {
        LstmConfig {
            inner: self.inner.config.clone(),
        }
    }

    /// One-step prediction from exactly `lookback` inputs.
    fn predict(&self, window: Vec<f64>) -> PyResult<f64> {
        let lookback = self.inner.config.lookback;
        if window.len() != lookback {
            return Err(PyValueError::new_err(format!(
                "window has {} values, model lookback is {}",
                window.len(),
                lookback
            )));
        }
        Ok(self.inner.predict(&window))
    }

    /// Recursive multi-step forecast from the end of `history`.
    fn forecast(&self, history: Vec<f64>, horizon: usize) -> PyResult<Vec<f64>> {
        lstm::forecast_recursive(&self.inner, &history, horizon).map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = RsLstmModel::from_json(text).map_err(value_err)?;
        Ok(LstmModel { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "LstmModel(units={}, lookback={})",
            self.inner.config.units, self.inner.config.lookback
        )
    }
}

/// Train on sliding windows built from `values`. Returns the model and the
/// per-epoch training metrics (mape is None where a target is zero).
#[pyfunction]
fn train_lstm<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    config: &LstmConfig,
) -> PyResult<(LstmModel, Vec<Bound<'py, PyDict>>)> {
    let windows = series::make_windows(&values, config.inner.lookback).map_err(value_err)?;
    let config_inner = config.inner.clone();
    let (model, history) = py
        .detach(move || lstm::train(&config_inner, &windows))
        .map_err(value_err)?;
    let mut epochs = Vec::with_capacity(history.epochs.len());
    for e in &history.epochs {
        let row = PyDict::new(py);
        row.set_item("epoch", e.epoch)?;
        row.set_item("mse", e.mse)?;
        row.set_item("mae", e.mae)?;
        row.set_item("mape", e.mape)?;
        epochs.push(row);
    }
    Ok((LstmModel { inner: model }, epochs))
}

/// Expanding-window cross-validation folds over `n` windows.
/// Each fold trains on everything before its validation block.
#[pyfunction]
fn cv_splits<'py>(py: Python<'py>, n: usize, folds: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let splits = tuning::cv_splits(n, folds).map_err(value_err)?;
    let mut out = Vec::with_capacity(splits.len());
    for fold in &splits {
        let row = PyDict::new(py);
        row.set_item("train", (fold.train.start, fold.train.end))?;
        row.set_item("validation", (fold.validation.start, fold.validation.end))?;
        out.push(row);
    }
    Ok(out)
}

/// Grid search with expanding-window CV. Returns a dict with the winning
/// config, its per-fold and mean validation MSE, the seed for the final
/// refit, and one row per trial. Omitted axes use the default grid.
#[pyfunction]
#[pyo3(signature = (values, epochs=None, dropouts=None, units=None, batch_sizes=None, l2_lambdas=None, lookback=4, learning_rate=0.001, activation="relu", folds=3, seed=42))]
#[allow(clippy::too_many_arguments)]
fn lstm_grid_search<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    epochs: Option<Vec<usize>>,
    dropouts: Option<Vec<f64>>,
    units: Option<Vec<usize>>,
    batch_sizes: Option<Vec<usize>>,
    l2_lambdas: Option<Vec<f64>>,
    lookback: usize,
    learning_rate: f64,
    activation: &str,
    folds: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let defaults = LstmSearchSpace::default();
    let space = LstmSearchSpace {
        epochs: epochs.unwrap_or(defaults.epochs),
        dropouts: dropouts.unwrap_or(defaults.dropouts),
        units: units.unwrap_or(defaults.units),
        batch_sizes: batch_sizes.unwrap_or(defaults.batch_sizes),
        l2_lambdas: l2_lambdas.unwrap_or(defaults.l2_lambdas),
        lookback,
        learning_rate,
        activation: parse_activation(activation)?,
    };
    let windows = series::make_windows(&values, lookback).map_err(value_err)?;
    let search = py
        .detach(move || tuning::run_lstm_search(&windows, &space, folds, seed))
        .map_err(value_err)?;

    let best = search.best();
    let score = best.outcome.as_ref().expect("best trial succeeded");
    let result = PyDict::new(py);
    result.set_item(
        "best",
        LstmConfig {
            inner: best.config.clone(),
        },
    )?;
    result.set_item("fold_mses", score.fold_mses.clone())?;
    result.set_item("mean_mse", score.mean_mse)?;
    result.set_item("final_seed", tuning::final_seed(best.config.seed))?;

    let mut trials = Vec::with_capacity(search.trials.len());
    for trial in &search.trials {
        let row = PyDict::new(py);
        let c = &trial.config;
        row.set_item("epochs", c.epochs)?;
        row.set_item("dropout", c.recurrent_dropout)?;
        row.set_item("units", c.units)?;
        row.set_item("batch_size", c.batch_size)?;
        row.set_item("l2_lambda", c.l2_lambda)?;
        row.set_item("seed", c.seed)?;
        match &trial.outcome {
            Ok(s) => {
                row.set_item("fold_mses", s.fold_mses.clone())?;
                row.set_item("mean_mse", s.mean_mse)?;
                row.set_item("error", Option::<String>::None)?;
            }
            Err(message) => {
                row.set_item("fold_mses", Option::<Vec<f64>>::None)?;
                row.set_item("mean_mse", Option::<f64>::None)?;
                row.set_item("error", message)?;
            }
        }
        row.set_item("seconds", trial.seconds)?;
        trials.push(row);
    }
    result.set_item("trials", trials)?;
    Ok(result)
}

#[pyfunction]
fn mse(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    metrics::mse(&actual, &predicted).map_err(value_err)
}

#[pyfunction]
fn mae(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    metrics::mae(&actual, &predicted).map_err(value_err)
}

#[pyfunction]
fn mape(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    metrics::mape(&actual, &predicted).map_err(value_err)
}

/// All three error metrics at once: {n, mse, mae, mape}.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    actual: Vec<f64>,
    predicted: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = metrics::evaluate(&actual, &predicted).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("mse", r.mse)?;
    d.set_item("mae", r.mae)?;
    d.set_item("mape", r.mape)?;
    Ok(d)
}

#[pymodule]
fn quartercast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TimeSeries>()?;
    m.add_class::<Scaler>()?;
    m.add_class::<SarimaModel>()?;
    m.add_class::<LstmConfig>()?;
    m.add_class::<LstmModel>()?;
    m.add_function(wrap_pyfunction!(difference, m)?)?;
    m.add_function(wrap_pyfunction!(adf_test, m)?)?;
    m.add_function(wrap_pyfunction!(sarima_fit, m)?)?;
    m.add_function(wrap_pyfunction!(sarima_search, m)?)?;
    m.add_function(wrap_pyfunction!(train_lstm, m)?)?;
    m.add_function(wrap_pyfunction!(cv_splits, m)?)?;
    m.add_function(wrap_pyfunction!(lstm_grid_search, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(mape, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
