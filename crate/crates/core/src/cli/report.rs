use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::StudyError;

/// Fixed 12-significant-digit plain decimal rendering, so reruns produce
/// identical bytes and no value is shown in exponent form.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let x = if x == 0.0 { 0.0 } else { x };
    let sci = format!("{:.11e}", x);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent form");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let mut out = String::with_capacity(24);
    if negative {
        out.push('-');
    }
    if exponent >= 11 {
        out.push_str(&digits);
        out.extend(std::iter::repeat('0').take((exponent - 11) as usize));
    } else if exponent >= 0 {
        let split = exponent as usize + 1;
        out.push_str(&digits[..split]);
        out.push('.');
        out.push_str(&digits[split..]);
    } else {
        out.push_str("0.");
        out.extend(std::iter::repeat('0').take((-exponent - 1) as usize));
        out.push_str(&digits);
    }
    out
}

pub fn format_optional(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

/// One delimited report: a metadata comment block, a schema line, and rows.
#[derive(Debug, Clone)]
pub struct Report {
    pub name: &'static str,
    metadata: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(name: &'static str, columns: Vec<String>) -> Self {
        Self { name, metadata: Vec::new(), columns, rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.push((key.to_string(), value.into()));
        self
    }

    pub fn with_metadata(mut self, entries: &[(String, String)]) -> Self {
        self.metadata.extend_from_slice(entries);
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width differs from schema in {}", self.name);
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Writes every report through a temporary file and a rename. If any write
/// fails, files already placed by this call are removed.
pub fn write_reports(dir: &Path, reports: &[Report]) -> Result<Vec<PathBuf>, StudyError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| StudyError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::with_capacity(reports.len());
    for report in reports {
        let target = dir.join(report.name);
        let temp = dir.join(format!(".{}.tmp", report.name));
        let result = fs::write(&temp, report.render())
            .and_then(|_| fs::rename(&temp, &target))
            .map_err(io(&target));
        if let Err(e) = result {
            let _ = fs::remove_file(&temp);
            for path in &written {
                let _ = fs::remove_file(path);
            }
            return Err(e);
        }
        written.push(target);
    }
    Ok(written)
}
