//! Hyperparameter grid search with rolling-origin cross-validation.
//!
//! The window list is cut into `folds + 1` contiguous blocks. Fold `i`
//! trains on blocks `1..=i` and validates on block `i + 1`, so validation
//! data always lies strictly after the training data. Trials are scored by
//! the mean validation MSE across folds.

use crate::lstm::{self, Activation, LstmConfig, LstmModel, TrainHistory};
use crate::metrics;
use crate::series::SupervisedWindow;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum TuningError {
    #[error("cross-validation needs at least one fold")]
    NoFolds,
    #[error("{folds}-fold cross-validation needs at least {needed} windows, got {got}")]
    TooFewWindows {
        got: usize,
        needed: usize,
        folds: usize,
    },
    #[error("search space invalid: {0}")]
    BadSpace(String),
    #[error("every trial failed; first error: {0}")]
    NoSuccessfulTrial(String),
    #[error(transparent)]
    Lstm(#[from] lstm::LstmError),
}

/// Index ranges into the window list for one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvFold {
    pub train: Range<usize>,
    pub validation: Range<usize>,
}

/// Cut `0..n` into `folds + 1` near-equal contiguous blocks (any remainder
/// goes to the earliest blocks) and expand them into rolling-origin folds.
pub fn cv_splits(n: usize, folds: usize) -> Result<Vec<CvFold>, TuningError> {
    if folds == 0 {
        return Err(TuningError::NoFolds);
    }
    let blocks = folds + 1;
    let needed = 2 * blocks;
    if n < needed {
        return Err(TuningError::TooFewWindows { got: n, needed, folds });
    }
    let base = n / blocks;
    let remainder = n % blocks;
    let mut boundaries = Vec::with_capacity(blocks + 1);
    boundaries.push(0usize);
    for block in 0..blocks {
        let size = base + usize::from(block < remainder);
        boundaries.push(boundaries[block] + size);
    }
    Ok((0..folds)
        .map(|i| CvFold {
            train: 0..boundaries[i + 1],
            validation: boundaries[i + 1]..boundaries[i + 2],
        })
        .collect())
}

/// The grid to search. The five vectors are the grid axes; lookback,
/// learning rate, and activation are held fixed across the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmSearchSpace {
    pub epochs: Vec<usize>,
    pub dropouts: Vec<f64>,
    pub units: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub l2_lambdas: Vec<f64>,
    pub lookback: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for LstmSearchSpace {
    fn default() -> Self {
        LstmSearchSpace {
            epochs: vec![250, 500, 1000],
            dropouts: vec![0.0, 0.1, 0.2, 0.3],
            units: vec![250, 500, 1000],
            batch_sizes: vec![1, 4, 8],
            l2_lambdas: vec![0.01, 0.02, 0.03],
            lookback: 4,
            learning_rate: 0.001,
            activation: Activation::Relu,
        }
    }
}

impl LstmSearchSpace {
    fn validate(&self) -> Result<(), TuningError> {
        let axes: [(&str, bool); 5] = [
            ("epochs", self.epochs.is_empty()),
            ("dropouts", self.dropouts.is_empty()),
            ("units", self.units.is_empty()),
            ("batch_sizes", self.batch_sizes.is_empty()),
            ("l2_lambdas", self.l2_lambdas.is_empty()),
        ];
        for (name, empty) in axes {
            if empty {
                return Err(TuningError::BadSpace(format!("axis {name} is empty")));
            }
        }
        if self.units.iter().any(|&u| u == 0) {
            return Err(TuningError::BadSpace("units must be positive".into()));
        }
        if self.batch_sizes.iter().any(|&b| b == 0) {
            return Err(TuningError::BadSpace("batch sizes must be positive".into()));
        }
        if self.dropouts.iter().any(|d| !(0.0..1.0).contains(d)) {
            return Err(TuningError::BadSpace("dropouts must be in [0, 1)".into()));
        }
        if self.l2_lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(TuningError::BadSpace(
                "l2 penalties must be finite and >= 0".into(),
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(TuningError::BadSpace("learning rate must be positive".into()));
        }
        if self.lookback == 0 {
            return Err(TuningError::BadSpace("lookback must be positive".into()));
        }
        Ok(())
    }

    /// Grid enumeration in axis order epochs, dropout, units, batch, l2.
    /// Each config carries its value-derived trial seed.
    pub fn configs(&self, base_seed: u64) -> Vec<LstmConfig> {
        let mut out = Vec::new();
        for &epochs in &self.epochs {
            for &dropout in &self.dropouts {
                for &units in &self.units {
                    for &batch_size in &self.batch_sizes {
                        for &l2_lambda in &self.l2_lambdas {
                            let mut config = LstmConfig {
                                units,
                                epochs,
                                batch_size,
                                recurrent_dropout: dropout,
                                l2_lambda,
                                lookback: self.lookback,
                                learning_rate: self.learning_rate,
                                seed: 0,
                                activation: self.activation,
                            };
                            config.seed = trial_seed(base_seed, &config);
                            out.push(config);
                        }
                    }
                }
            }
        }
        out
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(state, |acc, &b| {
        (acc ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Deterministic per-trial seed derived from the base seed and the config's
/// axis values (epochs, dropout, units, batch, l2). Identical values give
/// identical seeds no matter where the config sits in the grid; the
/// config's own `seed` field is ignored.
pub fn trial_seed(base_seed: u64, config: &LstmConfig) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &base_seed.to_le_bytes());
    h = fnv1a(h, &(config.epochs as u64).to_le_bytes());
    h = fnv1a(h, &config.recurrent_dropout.to_bits().to_le_bytes());
    h = fnv1a(h, &(config.units as u64).to_le_bytes());
    h = fnv1a(h, &(config.batch_size as u64).to_le_bytes());
    h = fnv1a(h, &config.l2_lambda.to_bits().to_le_bytes());
    h
}

/// Seed for the final full-data fit after a search, chained off the
/// winning trial's seed so the two fits are decorrelated but reproducible.
pub fn final_seed(trial_seed: u64) -> u64 {
    let h = fnv1a(FNV_OFFSET, &trial_seed.to_le_bytes());
    fnv1a(h, b"final-fit")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub fold_mses: Vec<f64>,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub config: LstmConfig,
    pub outcome: Result<TrialScore, String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmSearch {
    pub trials: Vec<TrialResult>,
    pub best_index: usize,
}

impl LstmSearch {
    pub fn best(&self) -> &TrialResult {
        &self.trials[self.best_index]
    }
}

fn run_trial(config: &LstmConfig, windows: &[SupervisedWindow], folds: &[CvFold]) -> TrialResult {
    let started = Instant::now();
    let mut fold_mses = Vec::with_capacity(folds.len());
    let mut failure: Option<String> = None;
    for fold in folds {
        match lstm::train(config, &windows[fold.train.clone()]) {
            Ok((model, _)) => {
                let validation = &windows[fold.validation.clone()];
                let (targets, predictions): (Vec<f64>, Vec<f64>) = validation
                    .iter()
                    .map(|w| (w.target, model.predict(&w.inputs)))
                    .unzip();
                match metrics::mse(&targets, &predictions) {
                    Ok(mse) if mse.is_finite() => fold_mses.push(mse),
                    Ok(mse) => {
                        failure = Some(format!("non-finite validation MSE {mse}"));
                        break;
                    }
                    Err(e) => {
                        failure = Some(e.to_string());
                        break;
                    }
                }
            }
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    let outcome = match failure {
        Some(message) => Err(message),
        None => {
            let mean_mse = fold_mses.iter().sum::<f64>() / fold_mses.len() as f64;
            Ok(TrialScore { fold_mses, mean_mse })
        }
    };
    TrialResult {
        config: config.clone(),
        outcome,
        seconds: started.elapsed().as_secs_f64(),
    }
}

// Ranking after the score: simpler models first (fewer units, then fewer
// epochs), then the remaining axes lexicographically.
fn rank_key(trial: &TrialResult) -> (f64, usize, usize, f64, usize, f64) {
    let score = trial
        .outcome
        .as_ref()
        .map(|s| s.mean_mse)
        .unwrap_or(f64::INFINITY);
    let c = &trial.config;
    (
        score,
        c.units,
        c.epochs,
        c.recurrent_dropout,
        c.batch_size,
        c.l2_lambda,
    )
}

fn key_less(a: &(f64, usize, usize, f64, usize, f64), b: &(f64, usize, usize, f64, usize, f64)) -> bool {
    (a.0.total_cmp(&b.0))
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
        .then(a.3.total_cmp(&b.3))
        .then(a.4.cmp(&b.4))
        .then(a.5.total_cmp(&b.5))
        .is_lt()
}

/// Train and score every config in the grid. Trials run in parallel but
/// the result table keeps the grid enumeration order, and each trial's
/// seed depends only on its hyperparameter values and the base seed.
pub fn run_lstm_search(
    windows: &[SupervisedWindow],
    space: &LstmSearchSpace,
    folds: usize,
    base_seed: u64,
) -> Result<LstmSearch, TuningError> {
    space.validate()?;
    if let Some(w) = windows.iter().find(|w| w.inputs.len() != space.lookback) {
        return Err(TuningError::BadSpace(format!(
            "windows carry {} inputs but the space expects lookback {}",
            w.inputs.len(),
            space.lookback
        )));
    }
    let splits = cv_splits(windows.len(), folds)?;
    let configs = space.configs(base_seed);

    let trials: Vec<TrialResult> = configs
        .par_iter()
        .map(|config| run_trial(config, windows, &splits))
        .collect();

    let mut best_index: Option<usize> = None;
    for (index, trial) in trials.iter().enumerate() {
        if trial.outcome.is_err() {
            continue;
        }
        match best_index {
            None => best_index = Some(index),
            Some(current) => {
                if key_less(&rank_key(trial), &rank_key(&trials[current])) {
                    best_index = Some(index);
                }
            }
        }
    }
    match best_index {
        Some(best_index) => Ok(LstmSearch { trials, best_index }),
        None => {
            let first = trials
                .first()
                .and_then(|t| t.outcome.as_ref().err().cloned())
                .unwrap_or_else(|| "empty grid".into());
            Err(TuningError::NoSuccessfulTrial(first))
        }
    }
}

/// Refit the winning config on every window, using a seed chained off the
/// trial seed.
pub fn final_fit(
    windows: &[SupervisedWindow],
    best: &LstmConfig,
) -> Result<(LstmModel, TrainHistory), TuningError> {
    let mut config = best.clone();
    config.seed = final_seed(best.seed);
    Ok(lstm::train(&config, windows)?)
}
