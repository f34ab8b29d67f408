use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::StudyError;
use crate::backtest::BacktestConfig;
use crate::market_data::LoadOptions;
use crate::strategies::balanced_weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    panel: PathBuf,
    #[serde(default)]
    panel_format: LoadOptions,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    #[serde(default)]
    risk_free: f64,
    #[serde(default = "default_formats")]
    formats: Vec<ReportFormat>,
    benchmark: BTreeMap<String, f64>,
    #[serde(default)]
    backtest: Option<BacktestConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("reports")
}

fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Csv]
}

/// Everything one study run needs. Relative paths in the file resolve
/// against the directory holding the configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub panel: PathBuf,
    pub panel_format: LoadOptions,
    pub output_dir: PathBuf,
    /// Annual risk-free rate used in Sharpe ratios.
    pub risk_free: f64,
    pub formats: Vec<ReportFormat>,
    pub backtest: BacktestConfig,
    /// SHA-256 of the configuration file bytes, hex encoded.
    pub config_hash: String,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, StudyError> {
        let bytes = fs::read(path).map_err(|source| StudyError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| StudyError::Config(format!("{} is not valid UTF-8", path.display())))?;
        Self::parse(text, base, hex_digest(&bytes))
    }

    pub fn parse(text: &str, base: &Path, config_hash: String) -> Result<Self, StudyError> {
        let file: RunConfigFile = toml::from_str(text).map_err(|e| StudyError::Config(e.to_string()))?;
        let mut backtest = file.backtest.unwrap_or_else(|| BacktestConfig::new(BTreeMap::new()));
        backtest.benchmark = file.benchmark;
        backtest.validate().map_err(|e| StudyError::Config(e.to_string()))?;
        if !file.risk_free.is_finite() {
            return Err(StudyError::Config("risk_free must be finite".into()));
        }
        if file.formats.is_empty() {
            return Err(StudyError::Config("at least one report format is required".into()));
        }
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        Ok(Self {
            panel: resolve(file.panel),
            panel_format: file.panel_format,
            output_dir: resolve(file.output_dir),
            risk_free: file.risk_free,
            formats: file.formats,
            backtest,
            config_hash,
        })
    }

    /// Checks that the benchmark table fits the given asset list.
    pub fn check_benchmark(&self, assets: &[String]) -> Result<(), StudyError> {
        balanced_weights(&self.backtest.benchmark, assets)
            .map(|_| ())
            .map_err(|e| StudyError::Config(format!("benchmark: {e}")))
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::{RiskParityMode, StrategyId};

    const MINIMAL: &str = r#"
panel = "data/panel.csv"

[benchmark]
equity = 0.6
commodity = 0.2
corp = 0.1
treasury = 0.1
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(MINIMAL, Path::new("/study"), "h".into()).unwrap();
        assert_eq!(c.panel, PathBuf::from("/study/data/panel.csv"));
        assert_eq!(c.output_dir, PathBuf::from("/study/reports"));
        assert_eq!(c.backtest.window, 36);
        assert_eq!(c.backtest.cost_rates, vec![0.0, 0.001, 0.005]);
        assert_eq!(c.backtest.strategies, StrategyId::ALL.to_vec());
        assert_eq!(c.backtest.risk_parity_mode, RiskParityMode::Naive);
        assert_eq!(c.backtest.low_beta_floor, 0.05);
        assert_eq!(c.backtest.benchmark["equity"], 0.6);
        assert_eq!(c.risk_free, 0.0);
        assert_eq!(c.formats, vec![ReportFormat::Csv]);
    }

    #[test]
    fn explicit_sections() {
        let text = r#"
panel = "/abs/panel.csv"
output_dir = "out"
risk_free = 0.02

[panel_format]
delimiter = ";"

[benchmark]
a = 0.5
b = 0.5

[backtest]
window = 24
cost_rates = [0.0, 0.002]
strategies = ["min-variance", "risk-parity"]
risk_parity_mode = "erc"
weighting = { scheme = "exponential", half_life = 12.0 }
"#;
        let c = RunConfig::parse(text, Path::new("cfg"), "h".into()).unwrap();
        assert_eq!(c.panel, PathBuf::from("/abs/panel.csv"));
        assert_eq!(c.output_dir, PathBuf::from("cfg/out"));
        assert_eq!(c.panel_format.delimiter, ';');
        assert_eq!(c.backtest.window, 24);
        assert_eq!(c.backtest.strategies, vec![StrategyId::MinVariance, StrategyId::RiskParity]);
        assert_eq!(c.backtest.risk_parity_mode, RiskParityMode::Erc);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "panel = 'p.csv'\n",
            "panel = 'p.csv'\nbogus = 1\n[benchmark]\na = 1.0\n",
            "panel = 'p.csv'\n[benchmark]\na = 1.0\n[backtest]\nwindow = 1\n",
            "panel = 'p.csv'\n[benchmark]\na = 1.0\n[backtest]\nstrategies = ['momentum']\n",
            "panel = 'p.csv'\nformats = []\n[benchmark]\na = 1.0\n",
        ] {
            assert!(matches!(RunConfig::parse(text, Path::new("."), String::new()), Err(StudyError::Config(_))), "{text}");
        }
    }

    #[test]
    fn benchmark_must_cover_panel() {
        let c = RunConfig::parse(MINIMAL, Path::new("."), String::new()).unwrap();
        let assets: Vec<String> = ["equity", "commodity", "corp", "treasury"].map(String::from).into();
        assert!(c.check_benchmark(&assets).is_ok());
        assert!(c.check_benchmark(&assets[..3]).is_err());
    }
}
