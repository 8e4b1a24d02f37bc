//! Hypothesis files for `screen`.
//!
//! ```toml
//! # two groups, each listed in chain order; names or 1-based indices
//! groups = [["X1", "X2", "X3"], ["X4", 5]]
//! ```

use std::path::Path;

use copula_indep::PartitionHypothesis;
use serde::Deserialize;

use crate::data::Table;
use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HypothesisFile {
    groups: Vec<Vec<ColumnRef>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ColumnRef {
    Index(usize),
    Name(String),
}

/// A hypothesis over the columns it mentions, in group order.
#[derive(Debug, Clone)]
pub struct ResolvedHypothesis {
    /// 0-based CSV columns; position `k` is column `k + 1` of the hypothesis.
    pub columns: Vec<usize>,
    pub hypothesis: PartitionHypothesis,
}

pub fn parse(text: &str, table: &Table) -> Result<ResolvedHypothesis, CliError> {
    let file: HypothesisFile =
        toml::from_str(text).map_err(|e| CliError::Usage(format!("hypothesis file: {e}")))?;
    if file.groups.len() != 2 {
        return Err(CliError::Usage(format!(
            "hypothesis file: expected exactly two groups, found {}",
            file.groups.len()
        )));
    }
    let mut columns = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for group in &file.groups {
        let mut chain = Vec::new();
        for r in group {
            let selector = match r {
                ColumnRef::Index(i) => i.to_string(),
                ColumnRef::Name(s) => s.clone(),
            };
            let c = table.resolve(&selector)?;
            if columns.contains(&c) {
                return Err(CliError::Usage(format!(
                    "hypothesis file: column `{}` appears more than once",
                    table.headers[c]
                )));
            }
            columns.push(c);
            chain.push(columns.len());
        }
        groups.push(chain);
    }
    let second = groups.pop().expect("two groups");
    let first = groups.pop().expect("two groups");
    let hypothesis = PartitionHypothesis::new(columns.len(), first, second)?;
    Ok(ResolvedHypothesis { columns, hypothesis })
}

pub fn load(path: &Path, table: &Table) -> Result<ResolvedHypothesis, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read hypothesis file {}: {e}", path.display())))?;
    parse(&text, table)
}
