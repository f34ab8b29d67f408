//! Trailing-window moment estimates: covariance, volatility and benchmark beta.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::PanelSlice;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("estimation window has {0} months, at least 2 required")]
    WindowTooShort(usize),
    #[error("benchmark series has zero variance over the window")]
    DegenerateBenchmark,
    #[error("benchmark series has {found} months, panel has {expected}")]
    BenchmarkLength { expected: usize, found: usize },
    #[error("half-life must be positive and finite, got {0}")]
    InvalidHalfLife(f64),
}

/// Observation weighting within an estimation window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Weighting {
    #[default]
    Equal,
    /// Weights decay by half every `half_life` months going back from the
    /// most recent observation.
    Exponential { half_life: f64 },
}

impl Weighting {
    /// Normalized observation weights, oldest first.
    fn observation_weights(&self, len: usize) -> Result<Vec<f64>, EstimationError> {
        match *self {
            Weighting::Equal => Ok(vec![1.0 / len as f64; len]),
            Weighting::Exponential { half_life } => {
                if !(half_life.is_finite() && half_life > 0.0) {
                    return Err(EstimationError::InvalidHalfLife(half_life));
                }
                let decay = 0.5f64.powf(1.0 / half_life);
                let raw: Vec<f64> = (0..len).map(|t| decay.powi((len - 1 - t) as i32)).collect();
                let total: f64 = raw.iter().sum();
                Ok(raw.into_iter().map(|w| w / total).collect())
            }
        }
    }
}

/// Weighted moments over one window. Uses the reliability-weight correction
/// `1 / (1 - sum(a^2))`, which is the `T-1` divisor under equal weighting.
struct Moments {
    weights: Vec<f64>,
    correction: f64,
}

impl Moments {
    fn new(len: usize, weighting: &Weighting) -> Result<Self, EstimationError> {
        if len < 2 {
            return Err(EstimationError::WindowTooShort(len));
        }
        let weights = weighting.observation_weights(len)?;
        let sum_sq: f64 = weights.iter().map(|a| a * a).sum();
        Ok(Self { weights, correction: 1.0 / (1.0 - sum_sq) })
    }

    fn demean(&self, xs: &[f64]) -> Vec<f64> {
        // constant series center to exact zeros, not rounding residue
        if xs.iter().all(|x| *x == xs[0]) {
            return vec![0.0; xs.len()];
        }
        let mean: f64 = xs.iter().zip(&self.weights).map(|(x, a)| x * a).sum();
        xs.iter().map(|x| x - mean).collect()
    }

    fn cross(&self, x: &[f64], y: &[f64]) -> f64 {
        let s: f64 = x
            .iter()
            .zip(y)
            .zip(&self.weights)
            .map(|((u, v), a)| a * (u * v))
            .sum();
        s * self.correction
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    matrix: DMatrix<f64>,
    window_end: usize,
    window_length: usize,
}

impl CovarianceEstimate {
    /// Wraps a caller-supplied matrix. The matrix must be square; the lower
    /// triangle is mirrored from the upper one.
    pub fn from_matrix(matrix: DMatrix<f64>, window_end: usize, window_length: usize) -> Self {
        assert!(matrix.is_square(), "covariance matrix must be square");
        let mut matrix = matrix;
        let n = matrix.nrows();
        for i in 0..n {
            for j in 0..i {
                matrix[(i, j)] = matrix[(j, i)];
            }
        }
        Self { matrix, window_end, window_length }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_assets(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn window_end(&self) -> usize {
        self.window_end
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    /// Square roots of the diagonal.
    pub fn volatilities(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaEstimate {
    pub betas: Vec<f64>,
    pub benchmark_id: String,
    pub window_end: usize,
}

pub fn sample_covariance(
    slice: &PanelSlice<'_>,
    weighting: &Weighting,
) -> Result<CovarianceEstimate, EstimationError> {
    let moments = Moments::new(slice.len(), weighting)?;
    let n = slice.n_assets();
    let centered: Vec<Vec<f64>> = (0..n).map(|j| moments.demean(&slice.column(j))).collect();
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let c = moments.cross(&centered[i], &centered[j]);
            matrix[(i, j)] = c;
            matrix[(j, i)] = c;
        }
    }
    Ok(CovarianceEstimate { matrix, window_end: slice.end(), window_length: slice.len() })
}

/// Betas of every panel asset against `benchmark_returns`, a series aligned
/// with the full panel (not just the slice).
pub fn benchmark_beta(
    slice: &PanelSlice<'_>,
    benchmark_returns: &[f64],
    benchmark_id: &str,
    weighting: &Weighting,
) -> Result<BetaEstimate, EstimationError> {
    let expected = slice.panel().n_months();
    if benchmark_returns.len() != expected {
        return Err(EstimationError::BenchmarkLength { expected, found: benchmark_returns.len() });
    }
    let moments = Moments::new(slice.len(), weighting)?;
    let window = &benchmark_returns[slice.start()..slice.end()];
    let bench = moments.demean(window);
    let var = moments.cross(&bench, &bench);
    let scale = window.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    // Demeaning a constant series leaves rounding residue of order eps * |r|.
    let noise = 64.0 * f64::EPSILON * scale;
    if !(var > noise * noise) {
        return Err(EstimationError::DegenerateBenchmark);
    }
    let betas = (0..slice.n_assets())
        .map(|j| moments.cross(&moments.demean(&slice.column(j)), &bench) / var)
        .collect();
    Ok(BetaEstimate {
        betas,
        benchmark_id: benchmark_id.to_string(),
        window_end: slice.end(),
    })
}
