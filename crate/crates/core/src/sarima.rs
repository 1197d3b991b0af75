//! Seasonal ARIMA estimation by conditional sum of squares.
//!
//! The multiplicative model `(p,d,q)(P,D,Q)_s` is fitted on the differenced
//! series by minimizing the CSS objective with Nelder-Mead. Polynomials are
//! kept in the Box-Jenkins sign convention: both the AR and MA products are
//! `1 - sum(coef_j * B^j)`, and the maps produced by [`expand_polynomials`]
//! store the `coef_j`.

use crate::optim::NelderMead;
use crate::series::{self, SeriesError, TimeSeries};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum SarimaError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("AR polynomial has a root on or inside the stationarity margin")]
    NonStationary,
    #[error("MA polynomial has a root on or inside the invertibility margin")]
    NonInvertible,
    #[error("series has {len} observations, need more than {needed} for order {order}")]
    TooShort {
        len: usize,
        needed: usize,
        order: String,
    },
    #[error("seasonal orders require season length >= 2, got {s}")]
    BadSeason { s: usize },
    #[error("parameter count mismatch: order wants {expected} coefficients, got {got}")]
    BadParams { expected: usize, got: usize },
    #[error("forecast horizon must be positive")]
    BadHorizon,
    #[error("no order in the search space produced a valid fit")]
    NoFit,
}

/// Model order `(p,d,q)(P,D,Q)_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SarimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    pub s: usize,
}

impl SarimaOrder {
    pub fn new(
        p: usize,
        d: usize,
        q: usize,
        seasonal_p: usize,
        seasonal_d: usize,
        seasonal_q: usize,
        s: usize,
    ) -> Result<Self, SarimaError> {
        let order = SarimaOrder {
            p,
            d,
            q,
            seasonal_p,
            seasonal_d,
            seasonal_q,
            s,
        };
        if order.has_seasonal_part() && s < 2 {
            return Err(SarimaError::BadSeason { s });
        }
        Ok(order)
    }

    fn has_seasonal_part(&self) -> bool {
        self.seasonal_p + self.seasonal_d + self.seasonal_q > 0
    }

    /// Largest AR lag of the expanded polynomial; also the burn-in length.
    pub fn max_ar_lag(&self) -> usize {
        self.p + self.s * self.seasonal_p
    }

    pub fn max_ma_lag(&self) -> usize {
        self.q + self.s * self.seasonal_q
    }

    /// Whether the model on the differenced scale carries a mean term.
    pub fn with_mean(&self) -> bool {
        self.d + self.seasonal_d == 0
    }

    pub fn coefficient_count(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    /// Number of estimated parameters including the innovation variance.
    pub fn parameter_count(&self) -> usize {
        self.coefficient_count() + usize::from(self.with_mean()) + 1
    }
}

impl std::fmt::Display for SarimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{})_{}",
            self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q, self.s
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaParams {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub seasonal_phi: Vec<f64>,
    pub seasonal_theta: Vec<f64>,
    pub mu: Option<f64>,
    pub sigma2: f64,
}

impl SarimaParams {
    pub fn zeroed(order: &SarimaOrder) -> Self {
        SarimaParams {
            phi: vec![0.0; order.p],
            theta: vec![0.0; order.q],
            seasonal_phi: vec![0.0; order.seasonal_p],
            seasonal_theta: vec![0.0; order.seasonal_q],
            mu: order.with_mean().then_some(0.0),
            sigma2: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaFit {
    pub order: SarimaOrder,
    pub params: SarimaParams,
    pub loglik: f64,
    pub aic: f64,
    pub n_effective: usize,
    pub converged: bool,
}

/// Expand the multiplicative AR and MA products into sparse lag maps.
/// For `(1 - 0.5B)(1 - 0.3B^4)` the AR map is `{1: 0.5, 4: 0.3, 5: -0.15}`.
pub fn expand_polynomials(
    order: &SarimaOrder,
    params: &SarimaParams,
) -> (BTreeMap<usize, f64>, BTreeMap<usize, f64>) {
    let ar = expand_product(&params.phi, &params.seasonal_phi, order.s);
    let ma = expand_product(&params.theta, &params.seasonal_theta, order.s);
    (ar, ma)
}

fn expand_product(plain: &[f64], seasonal: &[f64], s: usize) -> BTreeMap<usize, f64> {
    let mut a = vec![0.0; plain.len() + 1];
    a[0] = 1.0;
    for (i, &c) in plain.iter().enumerate() {
        a[i + 1] = -c;
    }
    let mut b = vec![0.0; seasonal.len() * s + 1];
    b[0] = 1.0;
    for (j, &c) in seasonal.iter().enumerate() {
        b[(j + 1) * s] = -c;
    }
    let mut product = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            product[i + j] += ai * bj;
        }
    }
    product
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &c)| c != 0.0)
        .map(|(lag, &c)| (lag, -c))
        .collect()
}

/// The margin by which roots must clear the unit circle.
pub const ROOT_MARGIN: f64 = 1e-6;

/// True when every root of `1 - sum(coef_j z^j)` has modulus strictly
/// greater than `1 + margin`. Uses the Schur-Cohn reflection-coefficient
/// recursion on the margin-scaled coefficients.
pub fn roots_outside_unit_circle(coeffs: &BTreeMap<usize, f64>, margin: f64) -> bool {
    let Some(&max_lag) = coeffs.keys().max() else {
        return true;
    };
    let mut c = vec![0.0f64; max_lag];
    for (&lag, &value) in coeffs {
        c[lag - 1] = value * (1.0 + margin).powi(lag as i32);
    }
    let mut m = c.len();
    while m > 0 {
        let r = c[m - 1];
        if r.abs() >= 1.0 {
            return false;
        }
        if m == 1 {
            break;
        }
        let denom = 1.0 - r * r;
        let next: Vec<f64> = (0..m - 1).map(|i| (c[i] + r * c[m - 2 - i]) / denom).collect();
        c = next;
        m -= 1;
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CssEvaluation {
    /// Residuals aligned with the differenced series; the first
    /// `max_ar_lag` entries are the conditioned-on zeros.
    pub residuals: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    pub n_effective: usize,
}

/// Conditional-sum-of-squares evaluation on an already differenced series.
pub fn css_objective(
    w: &[f64],
    order: &SarimaOrder,
    params: &SarimaParams,
) -> Result<CssEvaluation, SarimaError> {
    let expected = order.coefficient_count();
    let got = params.phi.len()
        + params.theta.len()
        + params.seasonal_phi.len()
        + params.seasonal_theta.len();
    if got != expected
        || params.phi.len() != order.p
        || params.theta.len() != order.q
        || params.seasonal_phi.len() != order.seasonal_p
        || params.seasonal_theta.len() != order.seasonal_q
    {
        return Err(SarimaError::BadParams { expected, got });
    }

    let (ar, ma) = expand_polynomials(order, params);
    if !roots_outside_unit_circle(&ar, ROOT_MARGIN) {
        return Err(SarimaError::NonStationary);
    }
    if !roots_outside_unit_circle(&ma, ROOT_MARGIN) {
        return Err(SarimaError::NonInvertible);
    }

    let burn = order.max_ar_lag();
    if w.len() <= burn {
        return Err(SarimaError::TooShort {
            len: w.len(),
            needed: burn,
            order: order.to_string(),
        });
    }
    let n_effective = w.len() - burn;
    let mu = params.mu.unwrap_or(0.0);

    let mut residuals = vec![0.0f64; w.len()];
    for t in burn..w.len() {
        let mut value = w[t] - mu;
        for (&lag, &coef) in &ar {
            value -= coef * (w[t - lag] - mu);
        }
        for (&lag, &coef) in &ma {
            if t >= lag {
                value += coef * residuals[t - lag];
            }
        }
        residuals[t] = value;
    }

    let sse: f64 = residuals[burn..].iter().map(|e| e * e).sum();
    let sigma2 = sse / n_effective as f64;
    let loglik = gaussian_css_loglik(sigma2, n_effective);
    Ok(CssEvaluation {
        residuals,
        sigma2,
        loglik,
        n_effective,
    })
}

/// Gaussian log-likelihood of a CSS fit, `-n/2 (ln(2 pi sigma2) + 1)`.
/// A zero variance is floored so a perfect fit stays finite.
pub fn gaussian_css_loglik(sigma2: f64, n_effective: usize) -> f64 {
    let n = n_effective as f64;
    let floored = sigma2.max(1e-300);
    -n / 2.0 * ((2.0 * std::f64::consts::PI * floored).ln() + 1.0)
}

fn params_from_vector(order: &SarimaOrder, v: &[f64]) -> SarimaParams {
    let mut iter = v.iter().copied();
    let phi: Vec<f64> = (&mut iter).take(order.p).collect();
    let theta: Vec<f64> = (&mut iter).take(order.q).collect();
    let seasonal_phi: Vec<f64> = (&mut iter).take(order.seasonal_p).collect();
    let seasonal_theta: Vec<f64> = (&mut iter).take(order.seasonal_q).collect();
    let mu = order.with_mean().then(|| iter.next().unwrap());
    SarimaParams {
        phi,
        theta,
        seasonal_phi,
        seasonal_theta,
        mu,
        sigma2: f64::NAN,
    }
}

const INFEASIBLE_PENALTY: f64 = 1e12;

/// Fit the order by CSS. Coefficients start at 0.1, the mean (present only
/// when `d + D = 0`) at the differenced-series mean; infeasible parameter
/// vectors are scored with a flat penalty.
pub fn fit(series: &TimeSeries, order: &SarimaOrder) -> Result<SarimaFit, SarimaError> {
    if order.has_seasonal_part() && order.s < 2 {
        return Err(SarimaError::BadSeason { s: order.s });
    }
    let needed = order.d + order.seasonal_d * order.s + order.max_ar_lag() + 10;
    if series.len() <= needed {
        return Err(SarimaError::TooShort {
            len: series.len(),
            needed,
            order: order.to_string(),
        });
    }
    let w = series::difference(series.values(), order.d, order.seasonal_d, order.s)?;

    let n_free = order.coefficient_count() + usize::from(order.with_mean());
    if n_free == 0 {
        let eval = css_objective(&w, order, &SarimaParams::zeroed(order))?;
        let mut params = SarimaParams::zeroed(order);
        params.sigma2 = eval.sigma2;
        let k = order.parameter_count();
        return Ok(SarimaFit {
            order: *order,
            params,
            loglik: eval.loglik,
            aic: 2.0 * k as f64 - 2.0 * eval.loglik,
            n_effective: eval.n_effective,
            converged: true,
        });
    }

    let w_mean = w.iter().sum::<f64>() / w.len() as f64;
    let mut x0 = vec![0.1; order.coefficient_count()];
    let mut steps = vec![0.25; order.coefficient_count()];
    if order.with_mean() {
        x0.push(w_mean);
        steps.push(0.1 * w_mean.abs().max(1.0));
    }

    let objective = |v: &[f64]| -> f64 {
        let candidate = params_from_vector(order, v);
        match css_objective(&w, order, &candidate) {
            Ok(eval) if eval.loglik.is_finite() => -eval.loglik,
            _ => INFEASIBLE_PENALTY,
        }
    };

    let result = NelderMead::default().minimize(objective, &x0, &steps);
    let mut params = params_from_vector(order, &result.x);
    let eval = css_objective(&w, order, &params)?;
    params.sigma2 = eval.sigma2;
    let k = order.parameter_count();
    Ok(SarimaFit {
        order: *order,
        params,
        loglik: eval.loglik,
        aic: 2.0 * k as f64 - 2.0 * eval.loglik,
        n_effective: eval.n_effective,
        converged: result.converged,
    })
}

/// Multi-step forecast on the differenced scale: AR terms recurse on
/// forecasts, MA terms use in-sample residuals and zero for the future.
pub fn forecast_differenced(
    fit: &SarimaFit,
    w: &[f64],
    horizon: usize,
) -> Result<Vec<f64>, SarimaError> {
    if horizon == 0 {
        return Err(SarimaError::BadHorizon);
    }
    let eval = css_objective(w, &fit.order, &fit.params)?;
    let (ar, ma) = expand_polynomials(&fit.order, &fit.params);
    let mu = fit.params.mu.unwrap_or(0.0);

    let n = w.len();
    let mut extended = w.to_vec();
    let mut residuals = eval.residuals;
    for t in n..n + horizon {
        let mut value = mu;
        for (&lag, &coef) in &ar {
            value += coef * (extended[t - lag] - mu);
        }
        for (&lag, &coef) in &ma {
            if t >= lag && t - lag < n {
                value -= coef * residuals[t - lag];
            }
        }
        extended.push(value);
        residuals.push(0.0);
    }
    Ok(extended[n..].to_vec())
}

/// Forecast `horizon` steps on the original scale.
pub fn forecast(
    fit: &SarimaFit,
    history: &TimeSeries,
    horizon: usize,
) -> Result<Vec<f64>, SarimaError> {
    let order = &fit.order;
    let w = series::difference(history.values(), order.d, order.seasonal_d, order.s)?;
    let diffs = forecast_differenced(fit, &w, horizon)?;
    Ok(series::integrate_forecasts(
        history.values(),
        &diffs,
        order.d,
        order.seasonal_d,
        order.s,
    )?)
}

/// Order bounds for [`aic_search`]. Defaults cover `p,d,q` in 0..=2 and
/// `P,D,Q` in 0..=1 with a quarterly season.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaOrderRanges {
    pub p: Vec<usize>,
    pub d: Vec<usize>,
    pub q: Vec<usize>,
    pub seasonal_p: Vec<usize>,
    pub seasonal_d: Vec<usize>,
    pub seasonal_q: Vec<usize>,
    pub s: usize,
}

impl Default for SarimaOrderRanges {
    fn default() -> Self {
        SarimaOrderRanges {
            p: vec![0, 1, 2],
            d: vec![0, 1, 2],
            q: vec![0, 1, 2],
            seasonal_p: vec![0, 1],
            seasonal_d: vec![0, 1],
            seasonal_q: vec![0, 1],
            s: 4,
        }
    }
}

impl SarimaOrderRanges {
    /// All orders in lexicographic `(p,d,q,P,D,Q)` enumeration.
    pub fn orders(&self) -> Vec<SarimaOrder> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &d in &self.d {
                for &q in &self.q {
                    for &sp in &self.seasonal_p {
                        for &sd in &self.seasonal_d {
                            for &sq in &self.seasonal_q {
                                out.push(SarimaOrder {
                                    p,
                                    d,
                                    q,
                                    seasonal_p: sp,
                                    seasonal_d: sd,
                                    seasonal_q: sq,
                                    s: self.s,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchEntry {
    pub order: SarimaOrder,
    pub outcome: Result<SarimaFit, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SarimaSearch {
    pub best: SarimaFit,
    pub table: Vec<SearchEntry>,
}

fn order_key(o: &SarimaOrder) -> (usize, usize, usize, usize, usize, usize) {
    (o.p, o.d, o.q, o.seasonal_p, o.seasonal_d, o.seasonal_q)
}

/// Fit every order in the ranges and keep the minimum-AIC fit. Ties go to
/// fewer parameters, then lexicographic order. Failed fits stay in the
/// table with their error text.
pub fn aic_search(
    series: &TimeSeries,
    ranges: &SarimaOrderRanges,
) -> Result<SarimaSearch, SarimaError> {
    let orders = ranges.orders();
    let table: Vec<SearchEntry> = orders
        .par_iter()
        .map(|order| SearchEntry {
            order: *order,
            outcome: fit(series, order).map_err(|e| e.to_string()),
        })
        .collect();

    let best = table
        .iter()
        .filter_map(|entry| entry.outcome.as_ref().ok())
        .filter(|fit| fit.aic.is_finite())
        .min_by(|a, b| {
            (a.aic, a.order.parameter_count(), order_key(&a.order))
                .partial_cmp(&(b.aic, b.order.parameter_count(), order_key(&b.order)))
                .unwrap()
        })
        .cloned()
        .ok_or(SarimaError::NoFit)?;

    Ok(SarimaSearch { best, table })
}
