//! Quarterly time-series forecasting toolkit.
//!
//! The crate covers the full workflow for a univariate quarterly series:
//! ingestion and descriptive statistics ([`series`]), unit-root testing
//! ([`unitroot`]), seasonal ARIMA estimation with AIC order search
//! ([`sarima`]), a small recurrent network trained from scratch ([`lstm`]),
//! holdout metrics ([`metrics`]), rolling-origin hyperparameter search
//! ([`tuning`]), and the end-to-end comparison pipeline ([`pipeline`]).

pub mod lstm;
pub mod metrics;
pub mod ols;
pub mod optim;
pub mod pipeline;
pub mod sarima;
pub mod series;
pub mod tuning;
pub mod unitroot;
