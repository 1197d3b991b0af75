//! Ordinary least squares via normal equations with partial pivoting.
//!
//! The systems solved here are tiny (a handful of regressors), so a dense
//! Gaussian elimination on the augmented normal equations is plenty.

#[derive(Debug, thiserror::Error)]
pub enum OlsError {
    #[error("need more rows than regressors: {rows} rows, {cols} regressors")]
    TooFewRows { rows: usize, cols: usize },
    #[error("rows have inconsistent widths")]
    RaggedRows,
    #[error("design matrix is singular or nearly singular")]
    Singular,
    #[error("residual variance is zero, standard errors undefined")]
    PerfectFit,
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sse: f64,
    /// Unbiased residual variance, `sse / (n - k)`.
    pub sigma2: f64,
    /// Gaussian log-likelihood at the MLE variance `sse / n`.
    pub loglik: f64,
    pub n: usize,
    pub k: usize,
}

pub fn fit(rows: &[Vec<f64>], y: &[f64]) -> Result<OlsFit, OlsError> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != k) {
        return Err(OlsError::RaggedRows);
    }
    if k == 0 || n <= k || y.len() != n {
        return Err(OlsError::TooFewRows { rows: n, cols: k });
    }

    // Augmented system [X'X | X'y | I]; elimination yields both the solution
    // and (X'X)^-1 for standard errors.
    let width = k + 1 + k;
    let mut aug = vec![vec![0.0f64; width]; k];
    for i in 0..k {
        for j in 0..k {
            aug[i][j] = rows.iter().map(|r| r[i] * r[j]).sum();
        }
        aug[i][k] = rows.iter().zip(y).map(|(r, yi)| r[i] * yi).sum();
        aug[i][k + 1 + i] = 1.0;
    }

    let scale = (0..k)
        .map(|i| aug[i][i].abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let tol = scale * 1e-12;

    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&a, &b| aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap())
            .unwrap();
        if aug[pivot_row][col].abs() < tol {
            return Err(OlsError::Singular);
        }
        aug.swap(col, pivot_row);
        let pivot = aug[col][col];
        for j in 0..width {
            aug[col][j] /= pivot;
        }
        for row in 0..k {
            if row != col {
                let factor = aug[row][col];
                if factor != 0.0 {
                    for j in 0..width {
                        aug[row][j] -= factor * aug[col][j];
                    }
                }
            }
        }
    }

    let coefficients: Vec<f64> = (0..k).map(|i| aug[i][k]).collect();
    let residuals: Vec<f64> = rows
        .iter()
        .zip(y)
        .map(|(r, yi)| yi - r.iter().zip(&coefficients).map(|(x, c)| x * c).sum::<f64>())
        .collect();
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    if sse <= 0.0 {
        return Err(OlsError::PerfectFit);
    }
    let sigma2 = sse / (n - k) as f64;
    let standard_errors: Vec<f64> = (0..k)
        .map(|i| (sigma2 * aug[i][k + 1 + i]).sqrt())
        .collect();
    let nf = n as f64;
    let loglik = -nf / 2.0 * ((2.0 * std::f64::consts::PI * sse / nf).ln() + 1.0);

    Ok(OlsFit {
        coefficients,
        standard_errors,
        residuals,
        sse,
        sigma2,
        loglik,
        n,
        k,
    })
}
