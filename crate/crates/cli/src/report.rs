//! Report documents: one JSON document, or a long-format CSV table whose
//! rows repeat the provenance columns.

use std::io::Write;

use clap::ValueEnum;
use copula_indep::montecarlo::{PowerEstimate, TestReport, CACHE_VERSION};
use copula_indep::screen::{verdict_labelled, PairRole, ScreenReport, Verdict};
use copula_indep::{NullDistribution, StatisticKind, TiePolicy};
use serde::Serialize;

use crate::data::Preprocess;
use crate::{CliError, SimArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize)]
pub struct DataProvenance {
    pub input: String,
    pub header: bool,
    pub columns: Vec<String>,
    pub preprocess: Preprocess,
    pub tie_policy: TiePolicy,
    pub truncate: bool,
    pub rows_read: usize,
    /// After preprocessing, before truncation.
    pub observations: usize,
    pub dropped: usize,
}

/// Everything needed to rerun the command and get the same numbers.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub library_version: &'static str,
    pub null_table_format: u32,
    pub seed: u64,
    pub null_sims: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alt_sims: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataProvenance>,
}

impl Provenance {
    pub fn new(sim: &SimArgs, alt_sims: Option<usize>, data: Option<DataProvenance>) -> Self {
        Provenance {
            tool: "copula-indep",
            tool_version: env!("CARGO_PKG_VERSION"),
            library_version: copula_indep::VERSION,
            null_table_format: CACHE_VERSION,
            seed: sim.seed,
            null_sims: sim.null_sims,
            alt_sims,
            data,
        }
    }
}

#[derive(Serialize)]
struct Document<'a, R: Serialize> {
    command: &'static str,
    provenance: &'a Provenance,
    result: R,
    notes: &'a [String],
}

fn write_json<R: Serialize>(
    out: &mut (dyn Write + Send),
    command: &'static str,
    provenance: &Provenance,
    result: R,
    notes: &[String],
) -> Result<(), CliError> {
    let doc = Document { command, provenance, result, notes };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn write_csv(out: &mut (dyn Write + Send), header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    out.write_all(&bytes)?;
    Ok(())
}

#[derive(Serialize)]
struct TestResult<'a> {
    columns: &'a [String],
    kind: StatisticKind,
    n: usize,
    d: usize,
    statistic: f64,
    p_value: f64,
    levels: &'a [copula_indep::montecarlo::LevelDecision],
}

pub fn write_test(
    out: &mut (dyn Write + Send),
    format: Format,
    provenance: Provenance,
    columns: &[String],
    report: &TestReport,
    notes: Vec<String>,
) -> Result<(), CliError> {
    let s = &report.statistic;
    match format {
        Format::Json => {
            let result = TestResult {
                columns,
                kind: s.kind,
                n: s.n,
                d: s.d,
                statistic: s.value,
                p_value: report.p_value,
                levels: &report.levels,
            };
            write_json(out, "test", &provenance, result, &notes)
        }
        Format::Csv => {
            let rows = report
                .levels
                .iter()
                .map(|l| {
                    vec![
                        columns.join(";"),
                        s.kind.to_string(),
                        s.n.to_string(),
                        s.d.to_string(),
                        s.value.to_string(),
                        l.alpha.to_string(),
                        l.critical_value.to_string(),
                        l.reject.to_string(),
                        report.p_value.to_string(),
                        provenance.null_sims.to_string(),
                        provenance.seed.to_string(),
                    ]
                })
                .collect();
            write_csv(
                out,
                &["columns", "kind", "n", "d", "statistic", "alpha", "critical_value", "reject", "p_value", "null_sims", "seed"],
                rows,
            )
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Critical {
    pub alpha: f64,
    pub critical_value: f64,
}

#[derive(Serialize)]
struct NullTableResult<'a> {
    kind: StatisticKind,
    d: usize,
    n: usize,
    distinct_values: usize,
    critical_values: &'a [Critical],
}

pub fn write_null_table(
    out: &mut (dyn Write + Send),
    format: Format,
    provenance: Provenance,
    nd: &NullDistribution,
    critical: Vec<Critical>,
    notes: Vec<String>,
) -> Result<(), CliError> {
    match format {
        Format::Json => {
            let result = NullTableResult {
                kind: nd.kind(),
                d: nd.d(),
                n: nd.n(),
                distinct_values: nd.distinct_values(),
                critical_values: &critical,
            };
            write_json(out, "null-table", &provenance, result, &notes)
        }
        Format::Csv => {
            let rows = critical
                .iter()
                .map(|c| {
                    vec![
                        nd.kind().to_string(),
                        nd.d().to_string(),
                        nd.n().to_string(),
                        c.alpha.to_string(),
                        c.critical_value.to_string(),
                        nd.distinct_values().to_string(),
                        provenance.null_sims.to_string(),
                        provenance.seed.to_string(),
                    ]
                })
                .collect();
            write_csv(
                out,
                &["kind", "d", "n", "alpha", "critical_value", "distinct_values", "null_sims", "seed"],
                rows,
            )
        }
    }
}

#[derive(Serialize)]
struct PowerRow<'a> {
    family: &'static str,
    params: String,
    #[serde(flatten)]
    estimate: &'a PowerEstimate,
}

pub fn write_power(
    out: &mut (dyn Write + Send),
    format: Format,
    provenance: Provenance,
    rows: &[PowerEstimate],
    notes: Vec<String>,
) -> Result<(), CliError> {
    match format {
        Format::Json => {
            let result: Vec<PowerRow> = rows
                .iter()
                .map(|e| PowerRow { family: e.spec.family(), params: e.spec.params(), estimate: e })
                .collect();
            write_json(out, "power", &provenance, result, &notes)
        }
        Format::Csv => {
            let rows = rows
                .iter()
                .map(|e| {
                    vec![
                        e.spec.family().to_string(),
                        e.spec.params(),
                        e.kind.to_string(),
                        e.n.to_string(),
                        e.alpha.to_string(),
                        e.power.to_string(),
                        e.se.to_string(),
                        e.rejections.to_string(),
                        e.replications.to_string(),
                        e.critical_value.to_string(),
                        e.null_replications.to_string(),
                        e.seed.to_string(),
                    ]
                })
                .collect();
            write_csv(
                out,
                &[
                    "family", "params", "kind", "n", "alpha", "power", "se", "rejections", "alt_sims", "critical_value",
                    "null_sims", "seed",
                ],
                rows,
            )
        }
    }
}

#[derive(Serialize)]
struct PairRow<'a> {
    a: &'a str,
    b: &'a str,
    role: PairRole,
    statistic: f64,
    critical_value: f64,
    p_value: f64,
    rejected: bool,
    as_expected: bool,
}

#[derive(Serialize)]
struct ScreenResult<'a> {
    groups: Vec<Vec<&'a str>>,
    kind: StatisticKind,
    n: usize,
    alpha: f64,
    test_count: usize,
    pairs: Vec<PairRow<'a>>,
    #[serde(flatten)]
    verdict: &'a Verdict,
}

fn verdict_text(v: &Verdict) -> String {
    match v {
        Verdict::Consistent => "consistent".into(),
        Verdict::Inconsistent { reason } => format!("inconsistent: {reason}"),
    }
}

pub fn write_screen(
    out: &mut (dyn Write + Send),
    format: Format,
    provenance: Provenance,
    names: &[String],
    report: &ScreenReport,
    notes: Vec<String>,
) -> Result<(), CliError> {
    let name = |i: usize| names[i - 1].as_str();
    let verdict = verdict_labelled(&report.pairs, |i| name(i).to_string());
    let pairs: Vec<PairRow> = report
        .pairs
        .iter()
        .map(|p| PairRow {
            a: name(p.pair.a),
            b: name(p.pair.b),
            role: p.pair.role,
            statistic: p.report.statistic.value,
            critical_value: p.report.levels[0].critical_value,
            p_value: p.report.p_value,
            rejected: p.rejected,
            as_expected: p.as_expected,
        })
        .collect();
    let n = report.pairs.first().map_or(0, |p| p.report.statistic.n);
    match format {
        Format::Json => {
            let groups = report
                .hypothesis
                .groups()
                .iter()
                .map(|g| g.iter().map(|&i| name(i)).collect())
                .collect();
            let result = ScreenResult {
                groups,
                kind: report.kind,
                n,
                alpha: report.alpha,
                test_count: report.test_count,
                pairs,
                verdict: &verdict,
            };
            write_json(out, "screen", &provenance, result, &notes)
        }
        Format::Csv => {
            let verdict = verdict_text(&verdict);
            let rows = pairs
                .iter()
                .map(|p| {
                    vec![
                        p.a.to_string(),
                        p.b.to_string(),
                        match p.role {
                            PairRole::Within => "within".to_string(),
                            PairRole::Cross => "cross".to_string(),
                        },
                        report.kind.to_string(),
                        n.to_string(),
                        p.statistic.to_string(),
                        report.alpha.to_string(),
                        p.critical_value.to_string(),
                        p.p_value.to_string(),
                        p.rejected.to_string(),
                        p.as_expected.to_string(),
                        verdict.clone(),
                        provenance.null_sims.to_string(),
                        provenance.seed.to_string(),
                    ]
                })
                .collect();
            write_csv(
                out,
                &[
                    "a", "b", "role", "kind", "n", "statistic", "alpha", "critical_value", "p_value", "rejected",
                    "as_expected", "verdict", "null_sims", "seed",
                ],
                rows,
            )
        }
    }
}
