use std::fs;
use std::path::{Path, PathBuf};

use super::config::{hex_digest, RunConfig};
use super::report::{format_number, format_optional, write_reports, Report};
use super::StudyError;
use crate::analytics::{annualize, average_allocation, average_concentration, strategy_correlations, AnalyticsError};
use crate::backtest::{run_backtest, BacktestError, BacktestResult};
use crate::market_data::{load_panel, ReturnPanel};

pub const REPORT_FILES: [&str; 7] = [
    "summary.csv",
    "cumulative.csv",
    "correlations.csv",
    "turnover.csv",
    "assets.csv",
    "allocations.csv",
    "concentration.csv",
];

#[derive(Debug, Clone)]
pub struct StudySummary {
    pub n_months: usize,
    pub n_assets: usize,
    /// Months with an allocation (panel length minus the window).
    pub evaluation_months: usize,
    pub files: Vec<PathBuf>,
}

fn load(config: &RunConfig) -> Result<(ReturnPanel, String), StudyError> {
    if !config.panel.is_file() {
        return Err(StudyError::MissingPanel(config.panel.clone()));
    }
    let bytes = fs::read(&config.panel).map_err(|source| StudyError::Io { path: config.panel.clone(), source })?;
    let panel = load_panel(bytes.as_slice(), &config.panel_format)
        .map_err(|source| StudyError::Panel { path: config.panel.clone(), source })?;
    config.check_benchmark(panel.assets())?;
    let required = config.backtest.window + 1;
    if panel.n_months() < required {
        return Err(BacktestError::InsufficientHistory { required, available: panel.n_months() }.into());
    }
    Ok((panel, hex_digest(&bytes)))
}

/// Checks configuration and panel without running the backtest.
pub fn validate_study(config: &RunConfig) -> Result<StudySummary, StudyError> {
    let (panel, _) = load(config)?;
    Ok(StudySummary {
        n_months: panel.n_months(),
        n_assets: panel.n_assets(),
        evaluation_months: panel.n_months() - config.backtest.window,
        files: Vec::new(),
    })
}

/// Runs the full study and writes the seven reports into `out` (or the
/// configured output directory). Nothing is written unless every stage
/// succeeds.
pub fn run_study(config: &RunConfig, out: Option<&Path>) -> Result<StudySummary, StudyError> {
    let (panel, panel_hash) = load(config)?;
    let result = run_backtest(&panel, &config.backtest)?;
    let reports = build_reports(&panel, &result, config, &panel_hash)?;
    let files = write_reports(out.unwrap_or(&config.output_dir), &reports)?;
    Ok(StudySummary {
        n_months: panel.n_months(),
        n_assets: panel.n_assets(),
        evaluation_months: result.months.len(),
        files,
    })
}

fn analytics(context: impl Into<String>) -> impl FnOnce(AnalyticsError) -> StudyError {
    let context = context.into();
    move |source| StudyError::Analytics { context, source }
}

pub fn build_reports(
    panel: &ReturnPanel,
    result: &BacktestResult,
    config: &RunConfig,
    panel_hash: &str,
) -> Result<Vec<Report>, StudyError> {
    let period = format!(
        "{}..{}",
        result.months.first().expect("nonempty evaluation period"),
        result.months.last().expect("nonempty evaluation period")
    );
    let common = vec![
        ("generator".to_string(), format!("riskonly {}", env!("CARGO_PKG_VERSION"))),
        ("config_sha256".to_string(), config.config_hash.clone()),
        ("panel_sha256".to_string(), panel_hash.to_string()),
        ("evaluation_period".to_string(), period),
        ("window_months".to_string(), config.backtest.window.to_string()),
    ];
    let mut by_cost: Vec<usize> = (0..result.cost_rates.len()).collect();
    by_cost.sort_by(|&a, &b| result.cost_rates[a].total_cmp(&result.cost_rates[b]));

    let stats_note = "geometric annualized return; stdev (T-1) x sqrt(12); sharpe = (return - risk_free) / volatility";

    let mut summary = Report::new(
        "summary.csv",
        ["strategy", "cost_rate", "annualized_return", "annualized_volatility", "sharpe_ratio", "mean_turnover"]
            .map(String::from)
            .into(),
    )
    .with_metadata(&common)
    .meta("conventions", stats_note)
    .meta("risk_free", format_number(config.risk_free))
    .meta("costs", "net = gross - cost_rate x turnover; initial purchase not charged");
    for s in &result.strategies {
        let rebalances = s.rebalance_turnover();
        let mean_turnover = (!rebalances.is_empty()).then(|| rebalances.iter().sum::<f64>() / rebalances.len() as f64);
        for &c in &by_cost {
            let stats = annualize(&s.net[c], config.risk_free).map_err(analytics(format!("{} summary", s.strategy)))?;
            summary.push(vec![
                s.strategy.to_string(),
                format_number(result.cost_rates[c]),
                format_number(stats.annualized_return),
                format_number(stats.annualized_volatility),
                format_optional(stats.sharpe_ratio),
                format_optional(mean_turnover),
            ]);
        }
    }

    let mut cumulative = Report::new(
        "cumulative.csv",
        ["date", "strategy", "cost_rate", "cumulative_index"].map(String::from).into(),
    )
    .with_metadata(&common)
    .meta("base", "growth of 1.0 invested at the start of the evaluation period, through the end of each month");
    for s in &result.strategies {
        for &c in &by_cost {
            for (date, level) in result.months.iter().zip(&s.cumulative[c]) {
                cumulative.push(vec![
                    date.to_string(),
                    s.strategy.to_string(),
                    format_number(result.cost_rates[c]),
                    format_number(*level),
                ]);
            }
        }
    }

    let series: Vec<(String, Vec<f64>)> =
        result.strategies.iter().map(|s| (s.strategy.to_string(), s.gross.clone())).collect();
    let corr = strategy_correlations(&series).map_err(analytics("strategy correlations"))?;
    let mut columns = vec!["strategy".to_string()];
    columns.extend(corr.labels.iter().cloned());
    let mut correlations = Report::new("correlations.csv", columns)
        .with_metadata(&common)
        .meta("series", "pearson correlation of gross monthly returns");
    for (i, label) in corr.labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend((0..corr.labels.len()).map(|j| format_number(corr.matrix[(i, j)])));
        correlations.push(row);
    }

    let mut turnover = Report::new(
        "turnover.csv",
        ["date", "strategy", "kind", "buys", "sells", "turnover"].map(String::from).into(),
    )
    .with_metadata(&common)
    .meta("turnover", "min(total bought, total sold) as a fraction of portfolio value");
    for s in &result.strategies {
        for (date, trade) in result.months.iter().zip(&s.trades) {
            let row = match trade {
                None => vec![
                    date.to_string(),
                    s.strategy.to_string(),
                    "initial".to_string(),
                    format_number(s.initial_purchase),
                    format_number(0.0),
                    format_number(s.initial_purchase),
                ],
                Some(legs) => vec![
                    date.to_string(),
                    s.strategy.to_string(),
                    "rebalance".to_string(),
                    format_number(legs.buys),
                    format_number(legs.sells),
                    format_number(legs.turnover()),
                ],
            };
            turnover.push(row);
        }
    }

    let mut assets = Report::new(
        "assets.csv",
        ["asset", "annualized_return", "annualized_volatility", "sharpe_ratio"].map(String::from).into(),
    )
    .with_metadata(&common)
    .meta("conventions", stats_note)
    .meta("risk_free", format_number(config.risk_free));
    for (j, asset) in panel.assets().iter().enumerate() {
        let r: Vec<f64> = (result.first_month..panel.n_months()).map(|t| panel.returns()[(t, j)]).collect();
        let stats = annualize(&r, config.risk_free).map_err(analytics(format!("asset {asset}")))?;
        assets.push(vec![
            asset.clone(),
            format_number(stats.annualized_return),
            format_number(stats.annualized_volatility),
            format_optional(stats.sharpe_ratio),
        ]);
    }

    let mut columns = vec!["strategy".to_string()];
    columns.extend(panel.assets().iter().cloned());
    let mut allocations = Report::new("allocations.csv", columns)
        .with_metadata(&common)
        .meta("weights", "mean target weight across rebalance dates");
    for s in &result.strategies {
        let mean = average_allocation(&s.weights).map_err(analytics(format!("{} allocations", s.strategy)))?;
        let mut row = vec![s.strategy.to_string()];
        row.extend(mean.into_iter().map(format_number));
        allocations.push(row);
    }

    let mut concentration = Report::new(
        "concentration.csv",
        ["strategy", "hhi", "rdi_full", "rdi_simplified", "negative_risk_contributions"]
            .map(String::from)
            .into(),
    )
    .with_metadata(&common)
    .meta("indices", "normalized index per rebalance date from target weights and that date's covariance, averaged");
    for s in &result.strategies {
        let c = average_concentration(&s.weights, &result.covariances)
            .map_err(analytics(format!("{} concentration", s.strategy)))?;
        concentration.push(vec![
            s.strategy.to_string(),
            format_number(c.hhi),
            format_number(c.rdi_full),
            format_number(c.rdi_simplified),
            c.negative_contributions.to_string(),
        ]);
    }

    Ok(vec![summary, cumulative, correlations, turnover, assets, allocations, concentration])
}
