//! Pairwise screening of a hypothesised split of a random vector into two
//! mutually independent, internally dependent groups.
//!
//! Within each group the consecutive pairs of its chain must all show
//! dependence, and every cross-group pair must fail to reject independence.
//! Every test is bivariate, so one null table of `(kind, d = 2, n)` serves
//! all pairs. No multiplicity correction is applied; the report carries the
//! per-test level and the number of tests run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{pseudo_sample, RawSample, TiePolicy};
use crate::metrics::StatisticKind;
use crate::montecarlo::{build_null, test_with_null, NullDistribution, TestReport};
use crate::rng::{derive, Purpose};

/// Two disjoint groups of 1-based column indices, each listed in chain order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionHypothesis {
    d: usize,
    groups: [Vec<usize>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRole {
    /// Consecutive members of one group's chain; dependence expected.
    Within,
    /// One member from each group; independence expected.
    Cross,
}

/// A pair of 1-based column indices to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpec {
    pub a: usize,
    pub b: usize,
    pub role: PairRole,
}

impl PairSpec {
    /// Whether the test outcome matches what the hypothesis predicts.
    pub fn as_expected(&self, rejected: bool) -> bool {
        match self.role {
            PairRole::Within => rejected,
            PairRole::Cross => !rejected,
        }
    }
}

impl PartitionHypothesis {
    pub fn new(d: usize, first: Vec<usize>, second: Vec<usize>) -> Result<Self> {
        let groups = [first, second];
        for (g, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::config(format!("group {} is empty", g + 1)));
            }
            if let Some(&bad) = group.iter().find(|&&c| c == 0 || c > d) {
                return Err(Error::config(format!(
                    "column {bad} in group {} is outside 1..={d}",
                    g + 1
                )));
            }
        }
        let mut seen = vec![false; d + 1];
        for &c in groups.iter().flatten() {
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::config(format!("column {c} appears more than once")));
            }
        }
        Ok(PartitionHypothesis { d, groups })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn groups(&self) -> &[Vec<usize>; 2] {
        &self.groups
    }

    /// Chain pairs of the first group, then of the second, then the cross
    /// pairs with the first group's index varying fastest.
    pub fn pairs(&self) -> Vec<PairSpec> {
        let mut out = Vec::new();
        for group in &self.groups {
            out.extend(group.windows(2).map(|w| PairSpec {
                a: w[0],
                b: w[1],
                role: PairRole::Within,
            }));
        }
        for &b in &self.groups[1] {
            for &a in &self.groups[0] {
                out.push(PairSpec { a, b, role: PairRole::Cross });
            }
        }
        out
    }

    /// `(|G1| − 1) + (|G2| − 1) + |G1|·|G2|`.
    pub fn test_count(&self) -> usize {
        let (g1, g2) = (self.groups[0].len(), self.groups[1].len());
        g1 - 1 + g2 - 1 + g1 * g2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub pair: PairSpec,
    pub report: TestReport,
    pub rejected: bool,
    pub as_expected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub hypothesis: PartitionHypothesis,
    pub kind: StatisticKind,
    pub alpha: f64,
    pub test_count: usize,
    pub pairs: Vec<PairReport>,
    pub verdict: Verdict,
}

/// Derives the verdict from per-pair outcomes alone.
pub fn verdict_from(pairs: &[PairReport]) -> Verdict {
    verdict_labelled(pairs, |i| i.to_string())
}

/// As [`verdict_from`], naming columns with `label` in the reason.
pub fn verdict_labelled(pairs: &[PairReport], label: impl Fn(usize) -> String) -> Verdict {
    let fmt = |role: PairRole| {
        pairs
            .iter()
            .filter(|p| p.pair.role == role && !p.as_expected)
            .map(|p| format!("({}, {})", label(p.pair.a), label(p.pair.b)))
            .collect::<Vec<_>>()
    };
    let within = fmt(PairRole::Within);
    let cross = fmt(PairRole::Cross);
    let mut reasons = Vec::new();
    if !within.is_empty() {
        reasons.push(format!("independence not rejected within groups for {}", within.join(", ")));
    }
    if !cross.is_empty() {
        reasons.push(format!("independence rejected across groups for {}", cross.join(", ")));
    }
    if reasons.is_empty() {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent { reason: reasons.join("; ") }
    }
}

/// Builds the shared bivariate null table, then screens.
pub fn screen_partition(
    raw: &RawSample,
    hyp: &PartitionHypothesis,
    kind: StatisticKind,
    alpha: f64,
    replications: usize,
    seed: u64,
    tie_policy: TiePolicy,
) -> Result<ScreenReport> {
    if raw.n() % 6 != 0 {
        return Err(Error::Divisibility { n: raw.n(), divisor: 6 });
    }
    let nd = build_null(kind, 2, raw.n(), replications, seed)?;
    screen_with_null(raw, hyp, &nd, alpha, tie_policy)
}

/// Screens against a precomputed `d = 2` table. Under random tie-breaking
/// pair `k` uses a tie-break seed derived from `(seed, k)`.
pub fn screen_with_null(
    raw: &RawSample,
    hyp: &PartitionHypothesis,
    nd: &NullDistribution,
    alpha: f64,
    tie_policy: TiePolicy,
) -> Result<ScreenReport> {
    if raw.d() != hyp.dim() {
        return Err(Error::config(format!(
            "hypothesis is for {} columns but the data has {}",
            hyp.dim(),
            raw.d()
        )));
    }
    if nd.d() != 2 {
        return Err(Error::config("screening needs a bivariate null table"));
    }
    let pairs = hyp.pairs();
    let reports = pairs
        .par_iter()
        .enumerate()
        .map(|(k, pair)| {
            let columns = raw.select_columns(&[pair.a - 1, pair.b - 1])?;
            let ties = match tie_policy {
                TiePolicy::Error => TiePolicy::Error,
                TiePolicy::RandomBreak { seed } => TiePolicy::RandomBreak {
                    seed: derive(seed, Purpose::PairTest, k as u64),
                },
            };
            let ps = pseudo_sample(&columns, ties).map_err(|e| match e {
                Error::TiesPresent { column } => Error::TiesPresent {
                    column: if column == 1 { pair.a } else { pair.b },
                },
                other => other,
            })?;
            let report = test_with_null(&ps, nd, &[alpha])?;
            let rejected = report.levels[0].reject;
            Ok(PairReport {
                pair: *pair,
                rejected,
                as_expected: pair.as_expected(rejected),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScreenReport {
        hypothesis: hyp.clone(),
        kind: nd.kind(),
        alpha,
        test_count: reports.len(),
        verdict: verdict_from(&reports),
        pairs: reports,
    })
}
