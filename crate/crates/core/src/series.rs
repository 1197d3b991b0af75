//! Core series types: quarterly periods, validated series, descriptive
//! statistics, differencing, and supervised windowing.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum SeriesError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad period label {text:?}: expected YYYY-Qn with n in 1..=4")]
    BadPeriod { text: String },
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("line {line}: duplicate period {period}")]
    DuplicatePeriod { line: usize, period: Quarter },
    #[error("line {line}: gap in periods, expected {expected} found {found}")]
    PeriodGap {
        line: usize,
        expected: Quarter,
        found: Quarter,
    },
    #[error("expected header 'period,value', found {found:?}")]
    BadHeader { found: String },
    #[error("value at line {line} is not finite")]
    NonFinite { line: usize },
    #[error("series has {len} observations, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("periods and values have different lengths ({periods} vs {values})")]
    LengthMismatch { periods: usize, values: usize },
    #[error("series is empty")]
    Empty,
    #[error("zero variance: skewness and kurtosis are undefined")]
    ZeroVariance,
    #[error("holdout length {h} must satisfy 0 < h < {len}")]
    BadHoldout { h: usize, len: usize },
    #[error("lookback {lookback} must satisfy 0 < lookback < {len}")]
    BadLookback { lookback: usize, len: usize },
    #[error("cannot difference length {len} with d={d}, seasonal d={sd}, s={s}")]
    CannotDifference {
        len: usize,
        d: usize,
        sd: usize,
        s: usize,
    },
    #[error("seasonal differencing requires s >= 1")]
    BadSeason,
}

/// A calendar quarter, ordered by (year, quarter).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Quarter {
    pub year: i32,
    pub quarter: u8,
}

impl Quarter {
    pub fn new(year: i32, quarter: u8) -> Result<Self, SeriesError> {
        if !(1..=4).contains(&quarter) {
            return Err(SeriesError::BadPeriod {
                text: format!("{year}-Q{quarter}"),
            });
        }
        Ok(Quarter { year, quarter })
    }

    /// The quarter immediately after this one.
    pub fn next(self) -> Quarter {
        if self.quarter == 4 {
            Quarter {
                year: self.year + 1,
                quarter: 1,
            }
        } else {
            Quarter {
                year: self.year,
                quarter: self.quarter + 1,
            }
        }
    }
}

impl FromStr for Quarter {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SeriesError::BadPeriod { text: s.to_string() };
        let (year, q) = s.split_once("-Q").ok_or_else(bad)?;
        if year.is_empty() || q.len() != 1 {
            return Err(bad());
        }
        let year: i32 = year.parse().map_err(|_| bad())?;
        let quarter: u8 = q.parse().map_err(|_| bad())?;
        Quarter::new(year, quarter).map_err(|_| bad())
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-Q{}", self.year, self.quarter)
    }
}

/// A univariate quarterly series with consecutive periods and finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    periods: Vec<Quarter>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(periods: Vec<Quarter>, values: Vec<f64>) -> Result<Self, SeriesError> {
        if periods.len() != values.len() {
            return Err(SeriesError::LengthMismatch {
                periods: periods.len(),
                values: values.len(),
            });
        }
        if periods.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (i, pair) in periods.windows(2).enumerate() {
            let expected = pair[0].next();
            if pair[1] == pair[0] {
                return Err(SeriesError::DuplicatePeriod {
                    line: i + 3,
                    period: pair[1],
                });
            }
            if pair[1] != expected {
                return Err(SeriesError::PeriodGap {
                    line: i + 3,
                    expected,
                    found: pair[1],
                });
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite { line: i + 2 });
        }
        Ok(TimeSeries { periods, values })
    }

    /// Convenience constructor: consecutive quarters starting at `start`.
    pub fn from_start(start: Quarter, values: Vec<f64>) -> Result<Self, SeriesError> {
        let mut periods = Vec::with_capacity(values.len());
        let mut q = start;
        for _ in 0..values.len() {
            periods.push(q);
            q = q.next();
        }
        TimeSeries::new(periods, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn periods(&self) -> &[Quarter] {
        &self.periods
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> Quarter {
        self.periods[0]
    }

    pub fn end(&self) -> Quarter {
        self.periods[self.periods.len() - 1]
    }

    /// The quarter that would follow the last observation.
    pub fn next_period(&self) -> Quarter {
        self.end().next()
    }
}

/// Load a `period,value` CSV. The header row is required, periods must be
/// consecutive quarters, and values must parse as finite doubles.
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeries, SeriesError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SeriesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text)
}

fn parse_csv(text: &str) -> Result<TimeSeries, SeriesError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(SeriesError::BadHeader {
        found: String::new(),
    })?;
    if header.trim() != "period,value" {
        return Err(SeriesError::BadHeader {
            found: header.trim().to_string(),
        });
    }

    let mut periods: Vec<Quarter> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let (period, value) = row.split_once(',').ok_or_else(|| SeriesError::BadRow {
            line,
            reason: "expected two comma-separated fields".to_string(),
        })?;
        let period: Quarter = period.trim().parse().map_err(|_| SeriesError::BadRow {
            line,
            reason: format!("bad period label {:?}", period.trim()),
        })?;
        let value: f64 = value.trim().parse().map_err(|_| SeriesError::BadRow {
            line,
            reason: format!("bad numeric value {:?}", value.trim()),
        })?;
        if !value.is_finite() {
            return Err(SeriesError::NonFinite { line });
        }
        if let Some(&prev) = periods.last() {
            if period == prev {
                return Err(SeriesError::DuplicatePeriod { line, period });
            }
            if period != prev.next() {
                return Err(SeriesError::PeriodGap {
                    line,
                    expected: prev.next(),
                    found: period,
                });
            }
        }
        periods.push(period);
        values.push(value);
    }

    if values.len() < 2 {
        return Err(SeriesError::TooShort {
            len: values.len(),
            min: 2,
        });
    }
    TimeSeries::new(periods, values)
}

/// Summary statistics in the layout of a spreadsheet `Descriptive Statistics`
/// block: sample standard deviation, bias-corrected skewness, and
/// bias-corrected excess kurtosis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub standard_error: f64,
    pub median: f64,
    pub std_dev: f64,
    pub excess_kurtosis: f64,
    pub skewness: f64,
    pub range: f64,
    pub min: f64,
    pub max: f64,
}

pub fn describe(series: &TimeSeries) -> Result<DescriptiveStats, SeriesError> {
    describe_values(series.values())
}

pub fn describe_values(values: &[f64]) -> Result<DescriptiveStats, SeriesError> {
    let n = values.len();
    if n < 4 {
        return Err(SeriesError::TooShort { len: n, min: 4 });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let std_dev = (ss / (nf - 1.0)).sqrt();
    if std_dev == 0.0 {
        return Err(SeriesError::ZeroVariance);
    }

    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };

    let z3: f64 = values.iter().map(|v| ((v - mean) / std_dev).powi(3)).sum();
    let z4: f64 = values.iter().map(|v| ((v - mean) / std_dev).powi(4)).sum();
    let skewness = nf / ((nf - 1.0) * (nf - 2.0)) * z3;
    let excess_kurtosis = nf * (nf + 1.0) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0)) * z4
        - 3.0 * (nf - 1.0).powi(2) / ((nf - 2.0) * (nf - 3.0));

    let min = sorted[0];
    let max = sorted[n - 1];
    Ok(DescriptiveStats {
        n,
        mean,
        standard_error: std_dev / nf.sqrt(),
        median,
        std_dev,
        excess_kurtosis,
        skewness,
        range: max - min,
        min,
        max,
    })
}

/// Apply `(1-B)^d` then `(1-B^s)^D` to `values`.
pub fn difference(values: &[f64], d: usize, sd: usize, s: usize) -> Result<Vec<f64>, SeriesError> {
    if sd > 0 && s == 0 {
        return Err(SeriesError::BadSeason);
    }
    let consumed = d + sd * s;
    if values.len() <= consumed {
        return Err(SeriesError::CannotDifference {
            len: values.len(),
            d,
            sd,
            s,
        });
    }
    let mut out = values.to_vec();
    for _ in 0..d {
        out = lag_difference(&out, 1);
    }
    for _ in 0..sd {
        out = lag_difference(&out, s);
    }
    Ok(out)
}

fn lag_difference(values: &[f64], lag: usize) -> Vec<f64> {
    values
        .iter()
        .skip(lag)
        .zip(values.iter())
        .map(|(a, b)| a - b)
        .collect()
}

/// Invert [`difference`]: extend the original-scale series by one value per
/// entry of `diffs`, given at least `d + sd*s` trailing history values.
pub fn integrate_forecasts(
    history: &[f64],
    diffs: &[f64],
    d: usize,
    sd: usize,
    s: usize,
) -> Result<Vec<f64>, SeriesError> {
    if sd > 0 && s == 0 {
        return Err(SeriesError::BadSeason);
    }
    if history.len() < d + sd * s {
        return Err(SeriesError::CannotDifference {
            len: history.len(),
            d,
            sd,
            s,
        });
    }

    // Tower of partial differences: levels[0] is the original scale, then d
    // first-difference levels, then sd seasonal levels. New values enter at
    // the top and are folded back down one level at a time.
    let mut levels: Vec<Vec<f64>> = vec![history.to_vec()];
    let mut lags: Vec<usize> = Vec::new();
    for _ in 0..d {
        let prev = levels.last().unwrap();
        levels.push(lag_difference(prev, 1));
        lags.push(1);
    }
    for _ in 0..sd {
        let prev = levels.last().unwrap();
        levels.push(lag_difference(prev, s));
        lags.push(s);
    }

    let mut out = Vec::with_capacity(diffs.len());
    for &w in diffs {
        levels.last_mut().unwrap().push(w);
        let mut value = w;
        for level in (0..levels.len() - 1).rev() {
            let lag = lags[level];
            let anchor = levels[level][levels[level].len() - lag];
            value += anchor;
            levels[level].push(value);
        }
        out.push(value);
    }
    Ok(out)
}

/// Split off the last `h` observations as a holdout.
pub fn split_holdout(series: &TimeSeries, h: usize) -> Result<(TimeSeries, TimeSeries), SeriesError> {
    let len = series.len();
    if h == 0 || h >= len {
        return Err(SeriesError::BadHoldout { h, len });
    }
    let cut = len - h;
    let train = TimeSeries::new(
        series.periods()[..cut].to_vec(),
        series.values()[..cut].to_vec(),
    )?;
    let test = TimeSeries::new(
        series.periods()[cut..].to_vec(),
        series.values()[cut..].to_vec(),
    )?;
    Ok((train, test))
}

/// A supervised regression example: `lookback` consecutive values and the
/// value that follows them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedWindow {
    pub inputs: Vec<f64>,
    pub target: f64,
    pub target_index: usize,
}

/// Slide a window of length `lookback` over `values`, producing
/// `values.len() - lookback` examples in temporal order.
pub fn make_windows(values: &[f64], lookback: usize) -> Result<Vec<SupervisedWindow>, SeriesError> {
    if lookback == 0 || lookback >= values.len() {
        return Err(SeriesError::BadLookback {
            lookback,
            len: values.len(),
        });
    }
    Ok((0..values.len() - lookback)
        .map(|i| SupervisedWindow {
            inputs: values[i..i + lookback].to_vec(),
            target: values[i + lookback],
            target_index: i + lookback,
        })
        .collect())
}

/// Z-score scaler fitted on a training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

impl Scaler {
    pub fn fit(values: &[f64]) -> Result<Self, SeriesError> {
        if values.len() < 2 {
            return Err(SeriesError::TooShort {
                len: values.len(),
                min: 2,
            });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if std == 0.0 {
            return Err(SeriesError::ZeroVariance);
        }
        Ok(Scaler { mean, std })
    }

    pub fn transform(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| (v - self.mean) / self.std).collect()
    }

    pub fn inverse(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| v * self.std + self.mean).collect()
    }
}
