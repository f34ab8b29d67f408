//! Study orchestration behind the `riskonly` binary: configuration, the
//! report pipeline, and exit-code mapping.

mod config;
mod report;
mod study;

use std::path::PathBuf;

use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::backtest::BacktestError;
use crate::estimation::EstimationError;
use crate::market_data::MarketDataError;
use crate::strategies::StrategyError;

pub use config::{ReportFormat, RunConfig};
pub use report::{format_number, write_reports, Report};
pub use study::{build_reports, run_study, validate_study, StudySummary, REPORT_FILES};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("panel file not found: {}", .0.display())]
    MissingPanel(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("panel {}: {source}", path.display())]
    Panel { path: PathBuf, source: MarketDataError },
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error("{context}: {source}")]
    Analytics { context: String, source: AnalyticsError },
}

impl StudyError {
    /// 1 usage or configuration, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            StudyError::Config(_) | StudyError::MissingPanel(_) | StudyError::Io { .. } => 1,
            StudyError::Panel { .. } => 2,
            StudyError::Backtest(e) => match e {
                BacktestError::InvalidConfig(_) | BacktestError::Benchmark(_) => 1,
                BacktestError::InsufficientHistory { .. }
                | BacktestError::PortfolioWipeout { .. }
                | BacktestError::Data(_) => 2,
                BacktestError::Strategy { source, .. } => match source {
                    StrategyError::InvalidWeights(_)
                    | StrategyError::InvalidModel(_)
                    | StrategyError::WeightSumMismatch { .. }
                    | StrategyError::UnassignedAsset(_)
                    | StrategyError::UnknownAsset(_)
                    | StrategyError::NegativeFraction { .. } => 1,
                    _ => 3,
                },
                BacktestError::Estimation { source, .. } => match source {
                    EstimationError::InvalidHalfLife(_) => 1,
                    EstimationError::BenchmarkLength { .. } | EstimationError::WindowTooShort(_) => 2,
                    EstimationError::DegenerateBenchmark => 3,
                },
            },
            StudyError::Analytics { .. } => 3,
        }
    }
}
