//! Augmented Dickey-Fuller unit-root test.
//!
//! The regression is estimated by OLS on normal equations; lag order is
//! selected by AIC over a common sample (all candidates see the same rows,
//! the final fit then uses every usable row). P-values come from monotone
//! interpolation of the asymptotic Dickey-Fuller percentile table for the
//! chosen deterministic specification.

use crate::ols::{self, OlsError};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum AdfError {
    #[error("series has {len} observations, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("max_lag {max_lag} too large for {len} observations")]
    BadMaxLag { max_lag: usize, len: usize },
    #[error("regression failed: {0}")]
    Regression(#[from] OlsError),
    #[error("no lag candidate produced a valid regression")]
    NoValidLag,
}

/// Deterministic terms included in the test regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdfSpec {
    NoConstant,
    Constant,
    ConstantTrend,
}

impl AdfSpec {
    fn deterministic_terms(self) -> usize {
        match self {
            AdfSpec::NoConstant => 0,
            AdfSpec::Constant => 1,
            AdfSpec::ConstantTrend => 2,
        }
    }
}

impl std::fmt::Display for AdfSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let label = match self {
            AdfSpec::NoConstant => "no-constant",
            AdfSpec::Constant => "constant",
            AdfSpec::ConstantTrend => "constant-trend",
        };
        f.write_str(label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub p_value: f64,
    pub lags: usize,
    pub spec: AdfSpec,
    pub n_effective: usize,
}

const P_KNOTS: [f64; 8] = [0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99];
const STAT_NO_CONSTANT: [f64; 8] = [-2.58, -2.23, -1.95, -1.62, 0.89, 1.28, 1.62, 2.00];
const STAT_CONSTANT: [f64; 8] = [-3.43, -3.12, -2.86, -2.57, -0.44, -0.07, 0.23, 0.60];
const STAT_CONSTANT_TREND: [f64; 8] = [-3.96, -3.66, -3.41, -3.12, -1.25, -0.94, -0.66, -0.33];

/// P-value for an ADF statistic: piecewise-linear in the percentile table,
/// linearly extrapolated beyond it, clamped to [0.001, 0.999].
pub fn df_pvalue(statistic: f64, spec: AdfSpec) -> f64 {
    let stats = match spec {
        AdfSpec::NoConstant => &STAT_NO_CONSTANT,
        AdfSpec::Constant => &STAT_CONSTANT,
        AdfSpec::ConstantTrend => &STAT_CONSTANT_TREND,
    };
    let last = stats.len() - 1;
    let (lo, hi) = if statistic <= stats[0] {
        (0, 1)
    } else if statistic >= stats[last] {
        (last - 1, last)
    } else {
        let hi = stats.iter().position(|s| statistic <= *s).unwrap();
        (hi - 1, hi)
    };
    let slope = (P_KNOTS[hi] - P_KNOTS[lo]) / (stats[hi] - stats[lo]);
    let p = P_KNOTS[lo] + slope * (statistic - stats[lo]);
    p.clamp(0.001, 0.999)
}

/// Schwert's rule of thumb for the maximum lag order.
pub fn schwert_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Run the augmented Dickey-Fuller test. `max_lag` caps the AIC lag search;
/// when absent it defaults to Schwert's rule, reduced if the series is short.
pub fn adf_test(
    values: &[f64],
    spec: AdfSpec,
    max_lag: Option<usize>,
) -> Result<AdfResult, AdfError> {
    let n = values.len();
    if n < 11 {
        return Err(AdfError::TooShort { len: n, needed: 11 });
    }
    let max_lag = match max_lag {
        Some(m) => {
            if n < m + 10 {
                return Err(AdfError::BadMaxLag { max_lag: m, len: n });
            }
            m
        }
        None => schwert_max_lag(n).min(n - 10),
    };

    let deterministic = spec.deterministic_terms();

    // Lag selection on the sample every candidate can use.
    let mut best: Option<(f64, usize)> = None;
    for k in 0..=max_lag {
        let (rows, targets) = design(values, spec, k, max_lag + 1);
        let params = deterministic + 1 + k;
        if rows.len() <= params {
            continue;
        }
        let Ok(fit) = ols::fit(&rows, &targets) else {
            continue;
        };
        let aic = 2.0 * params as f64 - 2.0 * fit.loglik;
        if best.map_or(true, |(b, _)| aic < b) {
            best = Some((aic, k));
        }
    }
    let (_, lags) = best.ok_or(AdfError::NoValidLag)?;

    // Final regression over every row the chosen lag allows.
    let (rows, targets) = design(values, spec, lags, lags + 1);
    let fit = ols::fit(&rows, &targets)?;
    let gamma = fit.coefficients[deterministic];
    let se = fit.standard_errors[deterministic];
    let statistic = gamma / se;

    Ok(AdfResult {
        statistic,
        p_value: df_pvalue(statistic, spec),
        lags,
        spec,
        n_effective: n - 1 - lags,
    })
}

/// Rows `[const?, trend?, y_{t-1}, dy_{t-1}, .., dy_{t-k}]` and targets
/// `dy_t`, for t from `t_start` to the end of the series.
fn design(values: &[f64], spec: AdfSpec, k: usize, t_start: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = values.len();
    let dy: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for t in t_start..n {
        let mut row = Vec::with_capacity(spec.deterministic_terms() + 1 + k);
        if spec != AdfSpec::NoConstant {
            row.push(1.0);
        }
        if spec == AdfSpec::ConstantTrend {
            row.push(t as f64);
        }
        row.push(values[t - 1]);
        for j in 1..=k {
            row.push(dy[t - 1 - j]);
        }
        rows.push(row);
        targets.push(dy[t - 1]);
    }
    (rows, targets)
}
