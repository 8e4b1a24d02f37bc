//! CSV ingestion, column selection and price-to-returns preprocessing.

use std::path::Path;

use clap::ValueEnum;
use copula_indep::RawSample;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preprocess {
    None,
    /// `(p_t − p_{t−1}) / p_{t−1}`
    Returns,
    /// `ln(p_t / p_{t−1})`
    LogReturns,
}

/// Raw text cells of a CSV file with their 1-based line numbers.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
    has_header: bool,
}

impl Table {
    pub fn read(path: &Path, has_header: bool) -> Result<Self, CliError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let mut headers: Vec<String> = if has_header {
            reader
                .headers()
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
                .iter()
                .map(str::to_string)
                .collect()
        } else {
            Vec::new()
        };
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record.iter().map(str::to_string).collect::<Vec<_>>()));
        }
        if !has_header {
            let width = rows.first().map_or(0, |(_, r)| r.len());
            headers = (1..=width).map(|j| j.to_string()).collect();
        }
        if rows.is_empty() {
            return Err(CliError::Data(format!("{}: no data rows", path.display())));
        }
        Ok(Table { headers, rows, has_header })
    }

    /// 0-based column for a header name or a 1-based index.
    pub fn resolve(&self, selector: &str) -> Result<usize, CliError> {
        if self.has_header {
            if let Some(j) = self.headers.iter().position(|h| h == selector) {
                return Ok(j);
            }
        }
        match selector.parse::<usize>() {
            Ok(j) if (1..=self.headers.len()).contains(&j) => Ok(j - 1),
            _ => Err(CliError::Usage(format!(
                "column `{selector}` not found; available columns: {}",
                self.available()
            ))),
        }
    }

    fn available(&self) -> String {
        if self.has_header {
            self.headers.join(", ")
        } else {
            format!("1..={} (no header row)", self.headers.len())
        }
    }

    /// Resolves selectors (all columns when empty); at least two, no repeats.
    pub fn select(&self, selectors: &[String]) -> Result<Vec<usize>, CliError> {
        let columns: Vec<usize> = if selectors.is_empty() {
            (0..self.headers.len()).collect()
        } else {
            selectors.iter().map(|s| self.resolve(s)).collect::<Result<_, _>>()?
        };
        if columns.len() < 2 {
            return Err(CliError::Usage(format!(
                "at least two columns are needed; available columns: {}",
                self.available()
            )));
        }
        for (k, c) in columns.iter().enumerate() {
            if columns[..k].contains(c) {
                return Err(CliError::Usage(format!("column `{}` selected twice", self.headers[*c])));
            }
        }
        Ok(columns)
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    /// Numeric values of the chosen columns, after preprocessing.
    pub fn extract(&self, columns: &[usize], preprocess: Preprocess) -> Result<RawSample, CliError> {
        let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(self.rows.len()); columns.len()];
        for (line, row) in &self.rows {
            for (k, &j) in columns.iter().enumerate() {
                let name = &self.headers[j];
                let cell = row.get(j).map(String::as_str).unwrap_or("");
                if cell.is_empty() {
                    return Err(CliError::Data(format!("line {line}, column `{name}`: missing value")));
                }
                let x: f64 = cell.parse().map_err(|_| {
                    CliError::Data(format!("line {line}, column `{name}`: cannot parse `{cell}` as a number"))
                })?;
                if !x.is_finite() {
                    return Err(CliError::Data(format!("line {line}, column `{name}`: `{cell}` is not finite")));
                }
                values[k].push(x);
            }
        }
        if preprocess != Preprocess::None {
            if self.rows.len() < 2 {
                return Err(CliError::Data("returns need at least two rows".into()));
            }
            for (k, col) in values.iter_mut().enumerate() {
                let name = &self.headers[columns[k]];
                *col = returns(col, preprocess).map_err(|t| {
                    let line = self.rows[t].0;
                    CliError::Data(format!(
                        "line {line}, column `{name}`: price must be {} to form returns",
                        if preprocess == Preprocess::LogReturns { "positive" } else { "non-zero" }
                    ))
                })?;
            }
        }
        RawSample::from_columns(&values).map_err(CliError::from)
    }
}

/// Returns of a price series; on failure, the 0-based row of the bad price.
pub fn returns(prices: &[f64], kind: Preprocess) -> Result<Vec<f64>, usize> {
    prices
        .windows(2)
        .enumerate()
        .map(|(t, w)| match kind {
            Preprocess::LogReturns if w[0] > 0.0 && w[1] > 0.0 => Ok((w[1] / w[0]).ln()),
            Preprocess::LogReturns => Err(if w[0] > 0.0 { t + 1 } else { t }),
            _ if w[0] != 0.0 => Ok((w[1] - w[0]) / w[0]),
            _ => Err(t),
        })
        .collect()
}
