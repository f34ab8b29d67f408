use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{StrategyError, StrategyId, WeightVector};
use crate::estimation::CovarianceEstimate;

/// Matrices with a larger eigenvalue spread are treated as singular.
const MAX_CONDITION: f64 = 1e12;
/// Relative slack on the optimality (multiplier) test.
const KKT_TOLERANCE: f64 = 1e-10;

/// One common factor plus independent idiosyncratic noise:
/// `Σ = factor_var · ββᵀ + diag(idio_vars)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleFactorModel {
    pub betas: Vec<f64>,
    pub idio_vars: Vec<f64>,
    pub factor_var: f64,
}

impl SingleFactorModel {
    fn validate(&self) -> Result<(), StrategyError> {
        if self.betas.len() != self.idio_vars.len() || self.betas.is_empty() {
            return Err(StrategyError::InvalidModel(format!(
                "{} betas but {} idiosyncratic variances",
                self.betas.len(),
                self.idio_vars.len()
            )));
        }
        if self.betas.iter().any(|b| !b.is_finite()) {
            return Err(StrategyError::InvalidModel("non-finite beta".into()));
        }
        if self.idio_vars.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(StrategyError::InvalidModel("idiosyncratic variances must be positive".into()));
        }
        if !(self.factor_var >= 0.0 && self.factor_var.is_finite()) {
            return Err(StrategyError::InvalidModel("factor variance must be nonnegative".into()));
        }
        Ok(())
    }
}

pub fn single_factor_covariance(model: &SingleFactorModel) -> Result<CovarianceEstimate, StrategyError> {
    model.validate()?;
    let b = DVector::from_column_slice(&model.betas);
    let matrix = &b * b.transpose() * model.factor_var + DMatrix::from_diagonal(&DVector::from_column_slice(&model.idio_vars));
    Ok(CovarianceEstimate::from_matrix(matrix, 0, 0))
}

/// Long-only minimum-variance weights under a single-factor covariance.
pub fn single_factor_min_variance(model: &SingleFactorModel) -> Result<WeightVector, StrategyError> {
    min_variance_weights(&single_factor_covariance(model)?)
}

fn check_invertible(sigma: &DMatrix<f64>) -> Result<(), StrategyError> {
    let eigen = SymmetricEigen::new(sigma.clone());
    let (lo, hi) = eigen
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > 0.0) || !(lo > hi / MAX_CONDITION) {
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        return Err(StrategyError::SingularCovariance { condition });
    }
    Ok(())
}

/// Fully invested minimum-variance weights restricted to `set`:
/// `Σ_S⁻¹ 1 / (1ᵀ Σ_S⁻¹ 1)`, with no sign constraint.
fn budget_solution(sigma: &DMatrix<f64>, set: &[usize]) -> Result<Vec<f64>, StrategyError> {
    let k = set.len();
    let sub = DMatrix::from_fn(k, k, |i, j| sigma[(set[i], set[j])]);
    let chol = sub
        .cholesky()
        .ok_or(StrategyError::SingularCovariance { condition: f64::INFINITY })?;
    let x = chol.solve(&DVector::from_element(k, 1.0));
    let total: f64 = x.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(StrategyError::SingularCovariance { condition: f64::INFINITY });
    }
    Ok(x.iter().map(|v| v / total).collect())
}

fn scatter(n: usize, set: &[usize], values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&i, &v) in set.iter().zip(values) {
        out[i] = v;
    }
    out
}

/// Row sums of `Σ⁻¹`, normalized to unit sum. May contain negative entries.
pub fn unconstrained_min_variance(cov: &CovarianceEstimate) -> Result<Vec<f64>, StrategyError> {
    check_invertible(cov.matrix())?;
    let all: Vec<usize> = (0..cov.n_assets()).collect();
    budget_solution(cov.matrix(), &all)
}

/// Minimizes `wᵀΣw` subject to `Σw = 1, w ≥ 0`.
///
/// Starts from the closed form on the full universe and, while any weight is
/// negative, drops the most negative asset and re-solves. The clipped point is
/// then checked against the optimality conditions and refined by a primal
/// active-set pass, which only moves when clipping dropped an asset that
/// belongs in the optimum.
pub fn min_variance_weights(cov: &CovarianceEstimate) -> Result<WeightVector, StrategyError> {
    let sigma = cov.matrix();
    let n = cov.n_assets();
    check_invertible(sigma)?;

    let mut active: Vec<usize> = (0..n).collect();
    let mut w = loop {
        let x = budget_solution(sigma, &active)?;
        let most_negative = x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v < 0.0)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k);
        match most_negative {
            None => break scatter(n, &active, &x),
            Some(k) => {
                active.remove(k);
                if active.is_empty() {
                    return Err(StrategyError::EmptyActiveSet);
                }
            }
        }
    };

    let mut free: Vec<bool> = (0..n).map(|i| active.contains(&i)).collect();
    for _ in 0..(4 * n * n + 8) {
        let set: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        if set.is_empty() {
            return Err(StrategyError::EmptyActiveSet);
        }
        let target = scatter(n, &set, &budget_solution(sigma, &set)?);
        let step: Vec<f64> = target.iter().zip(&w).map(|(t, c)| t - c).collect();

        if step.iter().all(|s| s.abs() <= 1e-14) {
            w = target;
            let gradient = sigma * DVector::from_column_slice(&w);
            let level: f64 = w.iter().zip(gradient.iter()).map(|(a, g)| a * g).sum();
            let entering = (0..n)
                .filter(|&i| !free[i])
                .map(|i| (i, gradient[i] - level))
                .filter(|(_, m)| *m < -KKT_TOLERANCE * level.abs())
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match entering {
                Some((i, _)) => free[i] = true,
                None => break,
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &set {
            if step[i] < 0.0 {
                let limit = -w[i] / step[i];
                if limit < alpha {
                    alpha = limit;
                    blocking = Some(i);
                }
            }
        }
        for i in 0..n {
            w[i] = (w[i] + alpha * step[i]).max(0.0);
        }
        if let Some(b) = blocking {
            w[b] = 0.0;
            free[b] = false;
        }
    }

    Ok(WeightVector::normalized(w, cov.window_end(), StrategyId::MinVariance))
}
