//! Target allocations for the five strategies.
//!
//! Every rule returns a [`WeightVector`]: long only, fully invested. The
//! risk-only rules read a covariance or beta estimate; the two benchmarks
//! (equal weight and the fixed balanced mix) ignore estimates entirely.

mod min_variance;
mod risk_parity;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::BetaEstimate;

pub use min_variance::{
    min_variance_weights, single_factor_covariance, single_factor_min_variance,
    unconstrained_min_variance, SingleFactorModel,
};
pub use risk_parity::{risk_parity_weights, RiskParityMode, ERC_MAX_SWEEPS, ERC_TOLERANCE};

/// Weights must sum to one within this tolerance.
pub const SUM_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_LOW_BETA_FLOOR: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("covariance matrix is singular to working precision (condition {condition:.3e})")]
    SingularCovariance { condition: f64 },
    #[error("long-only repair removed every asset")]
    EmptyActiveSet,
    #[error("asset {index} has zero variance")]
    ZeroVarianceAsset { index: usize },
    #[error("equal-risk solver did not converge in {sweeps} sweeps (max deviation {deviation:.3e})")]
    NoConvergence { sweeps: usize, deviation: f64 },
    #[error("benchmark fractions sum to {sum}, expected 1")]
    WeightSumMismatch { sum: f64 },
    #[error("asset `{0}` has no benchmark fraction")]
    UnassignedAsset(String),
    #[error("benchmark names asset `{0}` which is not in the panel")]
    UnknownAsset(String),
    #[error("benchmark fraction for `{asset}` is {value}; fractions must be nonnegative")]
    NegativeFraction { asset: String, value: f64 },
    #[error("invalid single-factor model: {0}")]
    InvalidModel(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Strategy tags, in the order reports list them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyId {
    Balanced,
    EqualWeight,
    MinVariance,
    RiskParity,
    LowBeta,
}

impl StrategyId {
    pub const ALL: [StrategyId; 5] = [
        StrategyId::Balanced,
        StrategyId::EqualWeight,
        StrategyId::MinVariance,
        StrategyId::RiskParity,
        StrategyId::LowBeta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyId::Balanced => "balanced",
            StrategyId::EqualWeight => "equal-weight",
            StrategyId::MinVariance => "min-variance",
            StrategyId::RiskParity => "risk-parity",
            StrategyId::LowBeta => "low-beta",
        }
    }

    /// Whether the rule allocates from risk estimates alone.
    pub fn is_risk_only(self) -> bool {
        matches!(self, StrategyId::MinVariance | StrategyId::RiskParity | StrategyId::LowBeta)
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

/// A long-only, fully invested allocation at one rebalance date.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    as_of: usize,
    strategy: StrategyId,
}

impl WeightVector {
    /// Validates caller-supplied weights against the long-only and budget
    /// invariants.
    pub fn new(weights: Vec<f64>, as_of: usize, strategy: StrategyId) -> Result<Self, StrategyError> {
        if weights.is_empty() {
            return Err(StrategyError::InvalidWeights("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(StrategyError::InvalidWeights(format!("weight {w} is negative or non-finite")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(StrategyError::InvalidWeights(format!("weights sum to {sum}")));
        }
        Ok(Self { weights, as_of, strategy })
    }

    /// Scales nonnegative raw scores to unit sum. Callers guarantee the
    /// scores are finite, nonnegative and not all zero.
    pub(crate) fn normalized(raw: Vec<f64>, as_of: usize, strategy: StrategyId) -> Self {
        let total: f64 = raw.iter().sum();
        debug_assert!(total > 0.0 && total.is_finite(), "cannot normalize scores summing to {total}");
        let weights = raw.into_iter().map(|w| w / total).collect();
        Self { weights, as_of, strategy }
    }

    /// Wraps weights the caller has already computed to satisfy the
    /// invariants up to rounding.
    pub(crate) fn from_parts(weights: Vec<f64>, as_of: usize, strategy: StrategyId) -> Self {
        Self { weights, as_of, strategy }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_of(&self) -> usize {
        self.as_of
    }

    pub fn strategy(&self) -> StrategyId {
        self.strategy
    }

    pub fn dated(mut self, as_of: usize) -> Self {
        self.as_of = as_of;
        self
    }
}

/// `w_n ∝ 1 / max(β_n, floor)`. `floor` must be positive; it keeps the map
/// total for negative or vanishing betas.
pub fn low_beta_weights(betas: &BetaEstimate, floor: f64) -> WeightVector {
    assert!(floor > 0.0 && floor.is_finite(), "low-beta floor must be positive, got {floor}");
    let raw = betas.betas.iter().map(|b| 1.0 / b.max(floor)).collect();
    WeightVector::normalized(raw, betas.window_end, StrategyId::LowBeta)
}

pub fn equal_weights(n: usize) -> WeightVector {
    assert!(n > 0, "equal weights need at least one asset");
    WeightVector::normalized(vec![1.0; n], 0, StrategyId::EqualWeight)
}

/// Fixed-mix weights laid out in `assets` order.
pub fn balanced_weights(
    assignment: &BTreeMap<String, f64>,
    assets: &[String],
) -> Result<WeightVector, StrategyError> {
    for (asset, &value) in assignment {
        if !assets.contains(asset) {
            return Err(StrategyError::UnknownAsset(asset.clone()));
        }
        if !(value >= 0.0 && value.is_finite()) {
            return Err(StrategyError::NegativeFraction { asset: asset.clone(), value });
        }
    }
    let weights = assets
        .iter()
        .map(|a| assignment.get(a).copied().ok_or_else(|| StrategyError::UnassignedAsset(a.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(StrategyError::WeightSumMismatch { sum });
    }
    Ok(WeightVector { weights, as_of: 0, strategy: StrategyId::Balanced })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn betas(b: &[f64]) -> BetaEstimate {
        BetaEstimate { betas: b.to_vec(), benchmark_id: "bench".into(), window_end: 36 }
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn low_beta_examples() {
        assert_close(low_beta_weights(&betas(&[1.0; 4]), 0.05).weights(), &[0.25; 4], 1e-15);
        assert_close(low_beta_weights(&betas(&[0.5, 1.0]), 0.05).weights(), &[2.0 / 3.0, 1.0 / 3.0], 1e-15);
        let floored = low_beta_weights(&betas(&[-0.2, 1.0]), 0.05);
        assert_close(floored.weights(), &[20.0 / 21.0, 1.0 / 21.0], 1e-15);
        assert_eq!(floored.as_of(), 36);
        assert_eq!(floored.strategy(), StrategyId::LowBeta);
    }

    #[test]
    fn equal_weight_examples() {
        assert_eq!(equal_weights(4).weights(), &[0.25; 4]);
        assert_eq!(equal_weights(1).weights(), &[1.0]);
        assert_close(equal_weights(10).weights(), &[0.1; 10], 1e-16);
    }

    #[test]
    fn balanced_examples() {
        let assets: Vec<String> = ["equity", "commodity", "corp", "treasury"].map(String::from).into();
        let map: BTreeMap<String, f64> = [("equity", 0.6), ("commodity", 0.2), ("corp", 0.1), ("treasury", 0.1)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(balanced_weights(&map, &assets).unwrap().weights(), &[0.6, 0.2, 0.1, 0.1]);

        let two: Vec<String> = vec!["a".into(), "b".into()];
        let half: BTreeMap<String, f64> = [("a".to_string(), 0.5), ("b".to_string(), 0.5)].into();
        assert_eq!(balanced_weights(&half, &two).unwrap().weights(), &[0.5, 0.5]);

        let short: BTreeMap<String, f64> = [("a".to_string(), 0.7), ("b".to_string(), 0.2)].into();
        assert!(matches!(balanced_weights(&short, &two), Err(StrategyError::WeightSumMismatch { .. })));

        let missing: BTreeMap<String, f64> = [("a".to_string(), 1.0)].into();
        assert_eq!(balanced_weights(&missing, &two), Err(StrategyError::UnassignedAsset("b".into())));

        let extra: BTreeMap<String, f64> = [("a".to_string(), 0.5), ("b".to_string(), 0.5), ("c".to_string(), 0.0)].into();
        assert_eq!(balanced_weights(&extra, &two), Err(StrategyError::UnknownAsset("c".into())));

        let neg: BTreeMap<String, f64> = [("a".to_string(), 1.5), ("b".to_string(), -0.5)].into();
        assert!(matches!(balanced_weights(&neg, &two), Err(StrategyError::NegativeFraction { .. })));
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5], 0, StrategyId::Balanced).is_ok());
        assert!(WeightVector::new(vec![1.2, -0.2], 0, StrategyId::Balanced).is_err());
        assert!(WeightVector::new(vec![0.5, 0.4], 0, StrategyId::Balanced).is_err());
        assert!(WeightVector::new(vec![], 0, StrategyId::Balanced).is_err());
    }

    #[test]
    fn strategy_tags_round_trip() {
        for id in StrategyId::ALL {
            assert_eq!(id.as_str().parse::<StrategyId>().unwrap(), id);
        }
        assert!("max-sharpe".parse::<StrategyId>().is_err());
    }
}
