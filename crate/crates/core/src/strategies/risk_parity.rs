use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{StrategyError, StrategyId, WeightVector};
use crate::estimation::CovarianceEstimate;

/// Stop once every fractional risk contribution is this close to `1/N`.
pub const ERC_TOLERANCE: f64 = 1e-10;
pub const ERC_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskParityMode {
    /// Inverse volatility; exact risk parity when correlations are zero.
    #[default]
    Naive,
    /// Equal risk contributions under the full covariance.
    Erc,
}

pub fn risk_parity_weights(cov: &CovarianceEstimate, mode: RiskParityMode) -> Result<WeightVector, StrategyError> {
    let sigma = cov.matrix();
    if let Some(index) = (0..cov.n_assets()).find(|&i| !(sigma[(i, i)] > 0.0)) {
        return Err(StrategyError::ZeroVarianceAsset { index });
    }
    let raw = match mode {
        RiskParityMode::Naive => cov.volatilities().into_iter().map(|s| 1.0 / s).collect(),
        RiskParityMode::Erc => equal_risk_contribution(sigma)?,
    };
    Ok(WeightVector::normalized(raw, cov.window_end(), StrategyId::RiskParity))
}

fn max_contribution_gap(sigma: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len();
    let total: f64 = y.iter().sum();
    let w: Vec<f64> = y.iter().map(|v| v / total).collect();
    let marginal: Vec<f64> = (0..n).map(|i| (0..n).map(|j| sigma[(i, j)] * w[j]).sum()).collect();
    let variance: f64 = w.iter().zip(&marginal).map(|(a, m)| a * m).sum();
    if !(variance > 0.0) {
        return f64::INFINITY;
    }
    let target = 1.0 / n as f64;
    w.iter()
        .zip(&marginal)
        .map(|(a, m)| (a * m / variance - target).abs())
        .fold(0.0, f64::max)
}

/// Cyclical coordinate descent on `½ yᵀΣy − (1/N) Σ ln y_i`, whose minimizer
/// satisfies `y_i (Σy)_i = 1/N`. Each coordinate step is the positive root of
/// `Σ_ii y_i² + c_i y_i − 1/N = 0` with `c_i = Σ_{j≠i} Σ_ij y_j`.
fn equal_risk_contribution(sigma: &DMatrix<f64>) -> Result<Vec<f64>, StrategyError> {
    let n = sigma.nrows();
    let budget = 1.0 / n as f64;
    let mut y = vec![budget; n];
    let mut gap = f64::INFINITY;
    for _ in 0..ERC_MAX_SWEEPS {
        for i in 0..n {
            let c: f64 = (0..n).filter(|&j| j != i).map(|j| sigma[(i, j)] * y[j]).sum();
            let a = sigma[(i, i)];
            y[i] = (-c + (c * c + 4.0 * a * budget).sqrt()) / (2.0 * a);
        }
        gap = max_contribution_gap(sigma, &y);
        if gap < ERC_TOLERANCE {
            return Ok(y);
        }
    }
    Err(StrategyError::NoConvergence { sweeps: ERC_MAX_SWEEPS, deviation: gap })
}
