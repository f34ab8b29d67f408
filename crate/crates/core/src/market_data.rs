//! Monthly return panels: ingestion, validation and trailing-window addressing.
//!
//! A [`ReturnPanel`] holds aligned simple monthly returns for `N` assets over
//! `T` consecutive months. Panels are immutable once loaded.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("malformed input at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate date {0}")]
    DuplicateDate(YearMonth),
    #[error("missing month between {previous} and {next}")]
    NonMonthlyGap { previous: YearMonth, next: YearMonth },
    #[error("panel needs at least 2 asset columns, found {0}")]
    TooFewAssets(usize),
    #[error("panel contains no data rows")]
    EmptyPanel,
    #[error("insufficient history: window needs {required} trailing months, {available} available")]
    InsufficientHistory { required: usize, available: usize },
    #[error("window end {end} exceeds panel length {len}")]
    OutOfRange { end: usize, len: usize },
    #[error("window length must be positive")]
    EmptyWindow,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A calendar month, ordered chronologically. Text form is `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            Self { year: self.year + 1, month: 1 }
        } else {
            Self { year: self.year, month: self.month + 1 }
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| format!("date `{s}` is not in YYYY-MM form"))?;
        if y.len() != 4 || m.len() != 2 {
            return Err(format!("date `{s}` is not in YYYY-MM form"));
        }
        let year: i32 = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
        let month: u8 = m.parse().map_err(|_| format!("bad month in `{s}`"))?;
        YearMonth::new(year, month).ok_or_else(|| format!("month out of range in `{s}`"))
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Options controlling how a delimited panel is read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadOptions {
    pub delimiter: char,
    /// Expected name of the first column.
    pub date_column: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { delimiter: ',', date_column: "date".to_string() }
    }
}

/// Aligned monthly simple returns, `T` rows (months) by `N` columns (assets).
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<YearMonth>,
    assets: Vec<String>,
    returns: DMatrix<f64>,
}

impl ReturnPanel {
    /// Builds a panel from in-memory data, enforcing the same invariants as
    /// [`load_panel`]. Rows must already be in chronological order.
    pub fn new(
        dates: Vec<YearMonth>,
        assets: Vec<String>,
        returns: DMatrix<f64>,
    ) -> Result<Self, MarketDataError> {
        if assets.len() < 2 {
            return Err(MarketDataError::TooFewAssets(assets.len()));
        }
        if dates.is_empty() {
            return Err(MarketDataError::EmptyPanel);
        }
        if returns.nrows() != dates.len() || returns.ncols() != assets.len() {
            return Err(MarketDataError::MalformedRow {
                line: 0,
                reason: format!(
                    "matrix is {}x{}, expected {}x{}",
                    returns.nrows(),
                    returns.ncols(),
                    dates.len(),
                    assets.len()
                ),
            });
        }
        for pair in dates.windows(2) {
            check_successor(pair[0], pair[1])?;
        }
        if let Some((k, _)) = returns.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let row = k % returns.nrows();
            return Err(MarketDataError::MalformedRow {
                line: row as u64 + 2,
                reason: "non-finite return".to_string(),
            });
        }
        Ok(Self { dates, assets, returns })
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    /// `T x N` return matrix.
    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn n_months(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Returns of every asset in month `t`.
    pub fn month_returns(&self, t: usize) -> Vec<f64> {
        self.returns.row(t).iter().copied().collect()
    }

    pub fn asset_index(&self, id: &str) -> Option<usize> {
        self.assets.iter().position(|a| a == id)
    }

    /// Return series of a constant-mix portfolio rebalanced back to `weights`
    /// every month.
    pub fn constant_mix_returns(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.n_assets(), "weight vector length mismatch");
        (0..self.n_months())
            .map(|t| {
                self.returns
                    .row(t)
                    .iter()
                    .zip(weights)
                    .map(|(r, w)| r * w)
                    .sum()
            })
            .collect()
    }

    /// Writes the panel in the same delimited format [`load_panel`] reads.
    /// Values use the shortest representation that parses back to the same
    /// `f64`, so a reload is bit-identical.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), MarketDataError> {
        write!(out, "date")?;
        for a in &self.assets {
            write!(out, ",{a}")?;
        }
        writeln!(out)?;
        for (t, d) in self.dates.iter().enumerate() {
            write!(out, "{d}")?;
            for v in self.returns.row(t).iter() {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn check_successor(prev: YearMonth, next: YearMonth) -> Result<(), MarketDataError> {
    if next == prev {
        Err(MarketDataError::DuplicateDate(next))
    } else if next != prev.succ() {
        Err(MarketDataError::NonMonthlyGap { previous: prev, next })
    } else {
        Ok(())
    }
}

/// Reads a delimited panel: header `date,<asset1>,...,<assetN>`, one row per
/// month with `YYYY-MM` dates and decimal returns. Rows may appear in any
/// order; they are sorted by date before gap and duplicate checks.
pub fn load_panel<R: Read>(source: R, options: &LoadOptions) -> Result<ReturnPanel, MarketDataError> {
    let delimiter = u8::try_from(options.delimiter).map_err(|_| MarketDataError::MalformedRow {
        line: 0,
        reason: format!("delimiter {:?} is not a single-byte character", options.delimiter),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .clone();
    let mut columns = header.iter();
    match columns.next() {
        Some(first) if first.trim_start_matches('\u{feff}') == options.date_column => {}
        other => {
            return Err(MarketDataError::MalformedRow {
                line: 1,
                reason: format!(
                    "first header column must be `{}`, found `{}`",
                    options.date_column,
                    other.unwrap_or("")
                ),
            })
        }
    }
    let assets: Vec<String> = columns.map(str::to_string).collect();
    if assets.len() < 2 {
        return Err(MarketDataError::TooFewAssets(assets.len()));
    }

    let mut rows: Vec<(YearMonth, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != assets.len() + 1 {
            return Err(MarketDataError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", assets.len() + 1, record.len()),
            });
        }
        let date: YearMonth = record[0]
            .parse()
            .map_err(|reason| MarketDataError::MalformedRow { line, reason })?;
        let values = record
            .iter()
            .skip(1)
            .map(|cell| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(MarketDataError::MalformedRow {
                    line,
                    reason: format!("cell `{cell}` is not a finite decimal"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((date, values));
    }
    if rows.is_empty() {
        return Err(MarketDataError::EmptyPanel);
    }
    rows.sort_by_key(|(d, _)| *d);
    for pair in rows.windows(2) {
        check_successor(pair[0].0, pair[1].0)?;
    }

    let n = assets.len();
    let dates: Vec<YearMonth> = rows.iter().map(|(d, _)| *d).collect();
    let returns = DMatrix::from_fn(rows.len(), n, |t, j| rows[t].1[j]);
    Ok(ReturnPanel { dates, assets, returns })
}

fn csv_error(e: csv::Error, fallback_line: u64) -> MarketDataError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    MarketDataError::MalformedRow { line, reason: e.to_string() }
}

/// Half-open month range `[start, end)` within a panel.
#[derive(Debug, Clone, Copy)]
pub struct PanelSlice<'a> {
    panel: &'a ReturnPanel,
    start: usize,
    end: usize,
}

impl<'a> PanelSlice<'a> {
    pub fn panel(&self) -> &'a ReturnPanel {
        self.panel
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn n_assets(&self) -> usize {
        self.panel.n_assets()
    }

    /// Returns of asset `j` over the slice.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (self.start..self.end).map(|t| self.panel.returns[(t, j)]).collect()
    }

    /// All returns over the slice as a `len x N` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        self.panel
            .returns
            .rows(self.start, self.len())
            .into_owned()
    }
}

/// The `window` months strictly before `end_month`. Month `end_month` itself
/// is never included, so a slice can inform the allocation made at that month.
pub fn slice_window(
    panel: &ReturnPanel,
    end_month: usize,
    window: usize,
) -> Result<PanelSlice<'_>, MarketDataError> {
    if window == 0 {
        return Err(MarketDataError::EmptyWindow);
    }
    if end_month > panel.n_months() {
        return Err(MarketDataError::OutOfRange { end: end_month, len: panel.n_months() });
    }
    if end_month < window {
        return Err(MarketDataError::InsufficientHistory { required: window, available: end_month });
    }
    Ok(PanelSlice { panel, start: end_month - window, end: end_month })
}
