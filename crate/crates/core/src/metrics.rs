//! Forecast accuracy metrics and multi-model comparison reports.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch for {name}: {actual} actual vs {predicted} predicted")]
    LengthMismatch {
        name: String,
        actual: usize,
        predicted: usize,
    },
    #[error("MAPE undefined: actual value at index {index} is zero")]
    ZeroActual { index: usize },
    #[error("no models to compare")]
    NoModels,
}

fn check_lengths(name: &str, actual: &[f64], predicted: &[f64]) -> Result<(), MetricError> {
    if actual.is_empty() {
        return Err(MetricError::Empty);
    }
    if actual.len() != predicted.len() {
        return Err(MetricError::LengthMismatch {
            name: name.to_string(),
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check_lengths("mse", actual, predicted)?;
    let n = actual.len() as f64;
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).powi(2))
        .sum::<f64>()
        / n)
}

/// Mean absolute error.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check_lengths("mae", actual, predicted)?;
    let n = actual.len() as f64;
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).abs())
        .sum::<f64>()
        / n)
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check_lengths("mape", actual, predicted)?;
    if let Some(index) = actual.iter().position(|a| *a == 0.0) {
        return Err(MetricError::ZeroActual { index });
    }
    let n = actual.len() as f64;
    Ok(100.0 / n
        * actual
            .iter()
            .zip(predicted)
            .map(|(a, p)| ((a - p) / a).abs())
            .sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub mse: f64,
    pub mae: f64,
    pub mape: f64,
}

pub fn evaluate(actual: &[f64], predicted: &[f64]) -> Result<MetricsReport, MetricError> {
    Ok(MetricsReport {
        n: actual.len(),
        mse: mse(actual, predicted)?,
        mae: mae(actual, predicted)?,
        mape: mape(actual, predicted)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub name: String,
    pub predictions: Vec<f64>,
    pub metrics: MetricsReport,
}

/// Holdout actuals plus per-model predictions and metrics, models sorted by
/// name so output ordering is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub actuals: Vec<f64>,
    pub models: Vec<ModelEval>,
}

pub fn compare(
    actual: &[f64],
    predictions: &[(String, Vec<f64>)],
) -> Result<ComparisonReport, MetricError> {
    if predictions.is_empty() {
        return Err(MetricError::NoModels);
    }
    let mut models = Vec::with_capacity(predictions.len());
    for (name, preds) in predictions {
        check_lengths(name, actual, preds)?;
        models.push(ModelEval {
            name: name.clone(),
            predictions: preds.clone(),
            metrics: evaluate(actual, preds)?,
        });
    }
    models.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(ComparisonReport {
        actuals: actual.to_vec(),
        models,
    })
}

impl ComparisonReport {
    /// Aligned text table: one row per metric, one column per model.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<10}", "Metric"));
        for m in &self.models {
            out.push_str(&format!("{:>16}", m.name));
        }
        out.push('\n');
        let rows: [(&str, fn(&MetricsReport) -> String); 3] = [
            ("MAPE", |r| format!("{:.2}%", r.mape)),
            ("MAE", |r| format!("{:.2}", r.mae)),
            ("MSE", |r| format!("{:.2}", r.mse)),
        ];
        for (label, fmt) in rows {
            out.push_str(&format!("{label:<10}"));
            for m in &self.models {
                out.push_str(&format!("{:>16}", fmt(&m.metrics)));
            }
            out.push('\n');
        }
        out
    }
}
