//! Monthly rebalancing loop with turnover-proportional transaction costs.
//!
//! For each evaluation month `t` in `[window, T)` the loop estimates from the
//! trailing slice `[t − window, t)`, sets the target allocation, and realizes
//! `targetᵀ r_t`. Turnover at `t` compares the target with the previous
//! target drifted through month `t − 1`. The very first allocation is a full
//! purchase; it is recorded in [`StrategyResult::initial_purchase`] and never
//! charged, so every net series starts from the same footing.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{benchmark_beta, sample_covariance, CovarianceEstimate, EstimationError, Weighting};
use crate::market_data::{slice_window, MarketDataError, ReturnPanel, YearMonth};
use crate::strategies::{
    balanced_weights, equal_weights, low_beta_weights, min_variance_weights, risk_parity_weights,
    RiskParityMode, StrategyError, StrategyId, WeightVector, DEFAULT_LOW_BETA_FLOOR,
};

/// Identifier attached to beta estimates against the fixed-mix benchmark.
pub const BENCHMARK_ID: &str = "balanced";

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid backtest configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient history: {required} months required (window + 1), {available} available")]
    InsufficientHistory { required: usize, available: usize },
    #[error("benchmark assignment: {0}")]
    Benchmark(#[source] StrategyError),
    #[error("{date}: estimation failed for {strategy}: {source}")]
    Estimation { date: YearMonth, strategy: StrategyId, source: EstimationError },
    #[error("{date}: {strategy} allocation failed: {source}")]
    Strategy { date: YearMonth, strategy: StrategyId, source: StrategyError },
    #[error("{date}: {strategy} portfolio lost everything (return {portfolio_return})")]
    PortfolioWipeout { date: YearMonth, strategy: StrategyId, portfolio_return: f64 },
    #[error(transparent)]
    Data(#[from] MarketDataError),
}

impl BacktestError {
    fn date(&self) -> Option<YearMonth> {
        match self {
            BacktestError::Estimation { date, .. }
            | BacktestError::Strategy { date, .. }
            | BacktestError::PortfolioWipeout { date, .. } => Some(*date),
            _ => None,
        }
    }
}

fn default_window() -> usize {
    36
}

fn default_cost_rates() -> Vec<f64> {
    vec![0.0, 0.001, 0.005]
}

fn default_strategies() -> Vec<StrategyId> {
    StrategyId::ALL.to_vec()
}

fn default_floor() -> f64 {
    DEFAULT_LOW_BETA_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestConfig {
    /// Trailing estimation window in months.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Cost per unit of turnover, as decimals (0.001 = 10 bp).
    #[serde(default = "default_cost_rates")]
    pub cost_rates: Vec<f64>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyId>,
    #[serde(default)]
    pub risk_parity_mode: RiskParityMode,
    #[serde(default = "default_floor")]
    pub low_beta_floor: f64,
    #[serde(default)]
    pub weighting: Weighting,
    /// Fixed-mix benchmark fractions by asset id. Also the reference series
    /// for low-beta betas. Run configurations supply it from their own
    /// top-level table.
    #[serde(skip)]
    pub benchmark: BTreeMap<String, f64>,
}

impl BacktestConfig {
    pub fn new(benchmark: BTreeMap<String, f64>) -> Self {
        Self {
            window: default_window(),
            cost_rates: default_cost_rates(),
            strategies: default_strategies(),
            risk_parity_mode: RiskParityMode::default(),
            low_beta_floor: default_floor(),
            weighting: Weighting::default(),
            benchmark,
        }
    }

    pub fn validate(&self) -> Result<(), BacktestError> {
        let bad = |m: String| Err(BacktestError::InvalidConfig(m));
        if self.window < 2 {
            return bad(format!("window must be at least 2 months, got {}", self.window));
        }
        if let Some(c) = self.cost_rates.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return bad(format!("cost rate {c} must be a nonnegative number"));
        }
        if self.strategies.is_empty() {
            return bad("no strategies selected".into());
        }
        let mut seen = self.strategies.clone();
        seen.sort();
        if seen.windows(2).any(|p| p[0] == p[1]) {
            return bad("strategy list contains duplicates".into());
        }
        if !(self.low_beta_floor > 0.0 && self.low_beta_floor.is_finite()) {
            return bad(format!("low-beta floor must be positive, got {}", self.low_beta_floor));
        }
        if let Weighting::Exponential { half_life } = self.weighting {
            if !(half_life > 0.0 && half_life.is_finite()) {
                return bad(format!("half-life must be positive, got {half_life}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("portfolio return {portfolio_return} wipes out the position")]
pub struct PortfolioWipeout {
    pub portfolio_return: f64,
}

/// Weights after one period of returns: `w_i(1 + r_i) / (1 + Σ_j w_j r_j)`.
pub fn drift_weights(w: &WeightVector, period_returns: &[f64]) -> Result<WeightVector, PortfolioWipeout> {
    assert_eq!(w.len(), period_returns.len(), "return vector length mismatch");
    let portfolio_return: f64 = w.weights().iter().zip(period_returns).map(|(a, r)| a * r).sum();
    let growth = 1.0 + portfolio_return;
    if !(growth > 0.0) {
        return Err(PortfolioWipeout { portfolio_return });
    }
    let drifted = w
        .weights()
        .iter()
        .zip(period_returns)
        .map(|(a, r)| a * (1.0 + r) / growth)
        .collect();
    Ok(WeightVector::from_parts(drifted, w.as_of(), w.strategy()))
}

/// Total purchases and sales needed to move from one allocation to another,
/// as fractions of portfolio value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeLegs {
    pub buys: f64,
    pub sells: f64,
}

impl TradeLegs {
    pub fn between(current: &WeightVector, target: &WeightVector) -> Self {
        assert_eq!(current.len(), target.len(), "allocations over different asset sets");
        let (mut buys, mut sells) = (0.0, 0.0);
        for (c, t) in current.weights().iter().zip(target.weights()) {
            let d = t - c;
            if d > 0.0 {
                buys += d;
            } else {
                sells -= d;
            }
        }
        Self { buys, sells }
    }

    /// The smaller of the two legs.
    pub fn turnover(&self) -> f64 {
        self.buys.min(self.sells)
    }
}

pub fn turnover(previous_drifted: &WeightVector, target: &WeightVector) -> f64 {
    TradeLegs::between(previous_drifted, target).turnover()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult {
    pub strategy: StrategyId,
    /// Target allocation for each evaluation month.
    pub weights: Vec<WeightVector>,
    pub gross: Vec<f64>,
    /// `net[c][k]`: month `k` return after cost rate `cost_rates[c]`.
    pub net: Vec<Vec<f64>>,
    /// `cumulative[c][k]`: growth of 1.0 through the end of month `k`.
    pub cumulative: Vec<Vec<f64>>,
    /// Rebalancing trades; `None` for the first month, which has no prior
    /// position.
    pub trades: Vec<Option<TradeLegs>>,
    /// Size of the initial purchase (always the full allocation, 1.0).
    pub initial_purchase: f64,
}

impl StrategyResult {
    pub fn turnover(&self) -> Vec<Option<f64>> {
        self.trades.iter().map(|t| t.map(|l| l.turnover())).collect()
    }

    /// Turnover at every rebalance after the initial purchase.
    pub fn rebalance_turnover(&self) -> Vec<f64> {
        self.trades.iter().flatten().map(TradeLegs::turnover).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    /// Evaluation months, `dates[window..T]` of the panel.
    pub months: Vec<YearMonth>,
    /// Panel index of the first evaluation month.
    pub first_month: usize,
    pub cost_rates: Vec<f64>,
    /// Covariance estimate behind each month's allocation.
    pub covariances: Vec<CovarianceEstimate>,
    /// One entry per configured strategy, in configuration order.
    pub strategies: Vec<StrategyResult>,
}

impl BacktestResult {
    pub fn strategy(&self, id: StrategyId) -> Option<&StrategyResult> {
        self.strategies.iter().find(|s| s.strategy == id)
    }
}

struct Context<'a> {
    panel: &'a ReturnPanel,
    config: &'a BacktestConfig,
    benchmark: WeightVector,
    benchmark_returns: Vec<f64>,
    covariances: &'a [CovarianceEstimate],
}

impl Context<'_> {
    fn target(&self, id: StrategyId, t: usize, k: usize) -> Result<WeightVector, BacktestError> {
        let date = self.panel.dates()[t];
        let strategy_err = |source| BacktestError::Strategy { date, strategy: id, source };
        let w = match id {
            StrategyId::Balanced => self.benchmark.clone(),
            StrategyId::EqualWeight => equal_weights(self.panel.n_assets()),
            StrategyId::MinVariance => min_variance_weights(&self.covariances[k]).map_err(strategy_err)?,
            StrategyId::RiskParity => {
                risk_parity_weights(&self.covariances[k], self.config.risk_parity_mode).map_err(strategy_err)?
            }
            StrategyId::LowBeta => {
                let slice = slice_window(self.panel, t, self.config.window)?;
                let betas = benchmark_beta(&slice, &self.benchmark_returns, BENCHMARK_ID, &self.config.weighting)
                    .map_err(|source| BacktestError::Estimation { date, strategy: id, source })?;
                low_beta_weights(&betas, self.config.low_beta_floor)
            }
        };
        Ok(w.dated(t))
    }

    fn run(&self, id: StrategyId) -> Result<StrategyResult, BacktestError> {
        let (window, total) = (self.config.window, self.panel.n_months());
        let months = total - window;
        let costs = &self.config.cost_rates;
        let mut out = StrategyResult {
            strategy: id,
            weights: Vec::with_capacity(months),
            gross: Vec::with_capacity(months),
            net: vec![Vec::with_capacity(months); costs.len()],
            cumulative: vec![Vec::with_capacity(months); costs.len()],
            trades: Vec::with_capacity(months),
            initial_purchase: 0.0,
        };
        let mut level = vec![1.0; costs.len()];

        for (k, t) in (window..total).enumerate() {
            let target = self.target(id, t, k)?;
            let returns = self.panel.month_returns(t);
            let gross: f64 = target.weights().iter().zip(&returns).map(|(w, r)| w * r).sum();

            let trade = match out.weights.last() {
                None => {
                    out.initial_purchase = target.weights().iter().sum();
                    None
                }
                Some(previous) => {
                    let held = self.panel.month_returns(t - 1);
                    let drifted = drift_weights(previous, &held).map_err(|e| BacktestError::PortfolioWipeout {
                        date: self.panel.dates()[t - 1],
                        strategy: id,
                        portfolio_return: e.portfolio_return,
                    })?;
                    Some(TradeLegs::between(&drifted, &target))
                }
            };
            let charged = trade.map_or(0.0, |l| l.turnover());
            for (c, rate) in costs.iter().enumerate() {
                let net = gross - rate * charged;
                level[c] *= 1.0 + net;
                out.net[c].push(net);
                out.cumulative[c].push(level[c]);
            }
            out.gross.push(gross);
            out.trades.push(trade);
            out.weights.push(target);
        }
        Ok(out)
    }
}

/// Runs every configured strategy over the panel. Strategies are evaluated
/// in parallel; results keep configuration order. On failure the error with
/// the earliest date wins, ties broken by configuration order.
pub fn run_backtest(panel: &ReturnPanel, config: &BacktestConfig) -> Result<BacktestResult, BacktestError> {
    config.validate()?;
    let total = panel.n_months();
    if total < config.window + 1 {
        return Err(BacktestError::InsufficientHistory { required: config.window + 1, available: total });
    }
    let benchmark = balanced_weights(&config.benchmark, panel.assets()).map_err(BacktestError::Benchmark)?;
    let benchmark_returns = panel.constant_mix_returns(benchmark.weights());

    let covariances = (config.window..total)
        .into_par_iter()
        .map(|t| {
            let slice = slice_window(panel, t, config.window)?;
            sample_covariance(&slice, &config.weighting).map_err(|e| BacktestError::InvalidConfig(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let context = Context { panel, config, benchmark, benchmark_returns, covariances: &covariances };
    let outcomes: Vec<Result<StrategyResult, BacktestError>> =
        config.strategies.par_iter().map(|&id| context.run(id)).collect();

    let mut strategies = Vec::with_capacity(outcomes.len());
    let mut first_error: Option<BacktestError> = None;
    for outcome in outcomes {
        match outcome {
            Ok(r) => strategies.push(r),
            Err(e) => {
                let earlier = match &first_error {
                    None => true,
                    Some(prev) => e.date() < prev.date(),
                };
                if earlier {
                    first_error = Some(e);
                }
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }

    Ok(BacktestResult {
        months: panel.dates()[config.window..].to_vec(),
        first_month: config.window,
        cost_rates: config.cost_rates.clone(),
        covariances,
        strategies,
    })
}
