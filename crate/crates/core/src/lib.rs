//! Risk-only portfolio construction and evaluation.
//!
//! Builds minimum-variance, risk-parity and low-beta allocations from
//! trailing covariance estimates, runs them next to equal-weight and
//! fixed-mix benchmarks in a monthly rebalancing backtest with
//! turnover-proportional costs, and reports performance, turnover, and
//! capital and risk concentration.
//!
//! Modules follow the pipeline order:
//!
//! - [`market_data`]: monthly return panels and trailing windows
//! - [`estimation`]: covariance and benchmark-beta estimates
//! - [`strategies`]: target weights for each strategy
//! - [`backtest`]: the rebalancing loop
//! - [`analytics`]: performance statistics and concentration indices
//! - [`cli`]: configuration files and report generation

pub mod analytics;
pub mod backtest;
pub mod cli;
pub mod estimation;
pub mod market_data;
pub mod strategies;

pub use backtest::{run_backtest, BacktestConfig, BacktestResult};
pub use market_data::{load_panel, ReturnPanel, YearMonth};
pub use strategies::{StrategyId, WeightVector};
