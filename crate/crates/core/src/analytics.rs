//! Performance statistics, risk decomposition and concentration indices.
//!
//! Annualization conventions for monthly data: geometric compounding of the
//! return, `√12` scaling of the sample standard deviation (`T − 1` divisor),
//! and `(return − risk_free) / volatility` for the Sharpe ratio.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::estimation::CovarianceEstimate;
use crate::strategies::WeightVector;

const PERIODS_PER_YEAR: f64 = 12.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("series has {0} observations, at least 2 required")]
    SeriesTooShort(usize),
    #[error("series `{0}` has zero variance")]
    DegenerateSeries(String),
    #[error("series lengths differ: {0}")]
    LengthMismatch(String),
    #[error("concentration indices need at least 2 assets")]
    SingleAssetUniverse,
    #[error("portfolio has zero risk")]
    ZeroRiskPortfolio,
    #[error("empty weight history")]
    EmptyHistory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceStats {
    pub annualized_return: f64,
    pub annualized_volatility: f64,
    /// Absent when volatility is zero.
    pub sharpe_ratio: Option<f64>,
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.iter().all(|x| *x == xs[0]) {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `risk_free` is an annual decimal rate.
pub fn annualize(monthly_returns: &[f64], risk_free: f64) -> Result<PerformanceStats, AnalyticsError> {
    let t = monthly_returns.len();
    if t < 2 {
        return Err(AnalyticsError::SeriesTooShort(t));
    }
    let growth: f64 = monthly_returns.iter().map(|r| 1.0 + r).product();
    let annualized_return = growth.powf(PERIODS_PER_YEAR / t as f64) - 1.0;
    let annualized_volatility = sample_std(monthly_returns) * PERIODS_PER_YEAR.sqrt();
    let sharpe_ratio = (annualized_volatility > 0.0)
        .then(|| (annualized_return - risk_free) / annualized_volatility);
    Ok(PerformanceStats { annualized_return, annualized_volatility, sharpe_ratio })
}

/// Labelled symmetric matrix of pairwise Pearson correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub matrix: DMatrix<f64>,
}

pub fn strategy_correlations(series: &[(String, Vec<f64>)]) -> Result<CorrelationMatrix, AnalyticsError> {
    let Some((_, first)) = series.first() else {
        return Ok(CorrelationMatrix { labels: Vec::new(), matrix: DMatrix::zeros(0, 0) });
    };
    let len = first.len();
    if len < 2 {
        return Err(AnalyticsError::SeriesTooShort(len));
    }
    if let Some((label, s)) = series.iter().find(|(_, s)| s.len() != len) {
        return Err(AnalyticsError::LengthMismatch(format!("`{label}` has {} observations, expected {len}", s.len())));
    }
    let centered: Vec<Vec<f64>> = series
        .iter()
        .map(|(label, s)| {
            if sample_std(s) == 0.0 {
                return Err(AnalyticsError::DegenerateSeries(label.clone()));
            }
            let mean = s.iter().sum::<f64>() / len as f64;
            Ok(s.iter().map(|x| x - mean).collect())
        })
        .collect::<Result<_, _>>()?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let k = series.len();
    let mut matrix = DMatrix::identity(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let rho = dot(&centered[i], &centered[j])
                / (dot(&centered[i], &centered[i]) * dot(&centered[j], &centered[j])).sqrt();
            let rho = rho.clamp(-1.0, 1.0);
            matrix[(i, j)] = rho;
            matrix[(j, i)] = rho;
        }
    }
    Ok(CorrelationMatrix { labels: series.iter().map(|(l, _)| l.clone()).collect(), matrix })
}

/// `((Σ s²) − 1/N) / (1 − 1/N)` for shares summing to one. Rounding excursions
/// just outside `[0, 1]` are snapped to the bound.
fn normalized_concentration(shares: &[f64]) -> Result<f64, AnalyticsError> {
    let n = shares.len();
    if n < 2 {
        return Err(AnalyticsError::SingleAssetUniverse);
    }
    let inv = 1.0 / n as f64;
    let sum_sq: f64 = shares.iter().map(|s| s * s).sum();
    let value = (sum_sq - inv) / (1.0 - inv);
    const SNAP: f64 = 1e-12;
    Ok(if value < 0.0 && value > -SNAP {
        0.0
    } else if value > 1.0 && value < 1.0 + SNAP {
        1.0
    } else {
        value
    })
}

/// Normalized Herfindahl–Hirschman index of capital weights.
pub fn hhi(w: &WeightVector) -> Result<f64, AnalyticsError> {
    normalized_concentration(w.weights())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskContributions {
    /// Fractional contributions `w_n (Σw)_n / (wᵀΣw)`.
    pub rc: Vec<f64>,
    pub portfolio_vol: f64,
}

fn portfolio_moments(w: &[f64], cov: &CovarianceEstimate) -> (DVector<f64>, f64) {
    let w = DVector::from_column_slice(w);
    let marginal = cov.matrix() * &w;
    let variance = w.dot(&marginal);
    (marginal, variance)
}

pub fn risk_contributions(w: &WeightVector, cov: &CovarianceEstimate) -> Result<RiskContributions, AnalyticsError> {
    let (marginal, variance) = portfolio_moments(w.weights(), cov);
    if !(variance > 0.0) {
        return Err(AnalyticsError::ZeroRiskPortfolio);
    }
    let rc = w.weights().iter().zip(marginal.iter()).map(|(a, m)| a * m / variance).collect();
    Ok(RiskContributions { rc, portfolio_vol: variance.sqrt() })
}

/// Euler terms `w_n ∂σ/∂w_n` of portfolio volatility; they sum to `σ`.
pub fn marginal_volatility_contributions(w: &[f64], cov: &CovarianceEstimate) -> Result<Vec<f64>, AnalyticsError> {
    let (marginal, variance) = portfolio_moments(w, cov);
    if !(variance > 0.0) {
        return Err(AnalyticsError::ZeroRiskPortfolio);
    }
    let vol = variance.sqrt();
    Ok(w.iter().zip(marginal.iter()).map(|(a, m)| a * m / vol).collect())
}

/// Full risk diversification index over fractional risk contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskDiversification {
    pub value: f64,
    /// Set when some contribution is negative, which long-only weights on a
    /// PSD covariance cannot produce; the value is still the formula's output.
    pub negative_contributions: bool,
}

pub fn rdi_full(rc: &RiskContributions) -> Result<RiskDiversification, AnalyticsError> {
    let value = normalized_concentration(&rc.rc)?;
    Ok(RiskDiversification { value, negative_contributions: rc.rc.iter().any(|r| *r < 0.0) })
}

/// Risk diversification index assuming zero correlations, where each asset's
/// risk share is `w_n²σ_n² / Σ w_j²σ_j²`.
pub fn rdi_simplified(w: &WeightVector, vols: &[f64]) -> Result<f64, AnalyticsError> {
    assert_eq!(w.len(), vols.len(), "weights and volatilities differ in length");
    if w.len() < 2 {
        return Err(AnalyticsError::SingleAssetUniverse);
    }
    let risk: Vec<f64> = w.weights().iter().zip(vols).map(|(a, s)| (a * s).powi(2)).collect();
    let total: f64 = risk.iter().sum();
    if !(total > 0.0) {
        return Err(AnalyticsError::ZeroRiskPortfolio);
    }
    let shares: Vec<f64> = risk.iter().map(|r| r / total).collect();
    normalized_concentration(&shares)
}

pub fn average_allocation(history: &[WeightVector]) -> Result<Vec<f64>, AnalyticsError> {
    let first = history.first().ok_or(AnalyticsError::EmptyHistory)?;
    let mut mean = vec![0.0; first.len()];
    for w in history {
        for (m, x) in mean.iter_mut().zip(w.weights()) {
            *m += x;
        }
    }
    let k = history.len() as f64;
    Ok(mean.into_iter().map(|m| m / k).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationReport {
    pub hhi: f64,
    pub rdi_full: f64,
    pub rdi_simplified: f64,
    /// Whether any date produced negative risk contributions.
    pub negative_contributions: bool,
}

/// Averages all three indices over rebalance dates; `history[k]` is paired
/// with `covariances[k]`.
pub fn average_concentration(
    history: &[WeightVector],
    covariances: &[CovarianceEstimate],
) -> Result<ConcentrationReport, AnalyticsError> {
    if history.is_empty() {
        return Err(AnalyticsError::EmptyHistory);
    }
    if history.len() != covariances.len() {
        return Err(AnalyticsError::LengthMismatch(format!(
            "{} weight vectors, {} covariance estimates",
            history.len(),
            covariances.len()
        )));
    }
    let mut acc = ConcentrationReport { hhi: 0.0, rdi_full: 0.0, rdi_simplified: 0.0, negative_contributions: false };
    for (w, cov) in history.iter().zip(covariances) {
        acc.hhi += hhi(w)?;
        let full = rdi_full(&risk_contributions(w, cov)?)?;
        acc.rdi_full += full.value;
        acc.negative_contributions |= full.negative_contributions;
        acc.rdi_simplified += rdi_simplified(w, &cov.volatilities())?;
    }
    let k = history.len() as f64;
    acc.hhi /= k;
    acc.rdi_full /= k;
    acc.rdi_simplified /= k;
    Ok(acc)
}
