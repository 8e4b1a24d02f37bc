//! Front end for the `copula-indep` binary: argument types, CSV ingestion,
//! and the four subcommands `test`, `null-table`, `power` and `screen`.
//!
//! Every document written to stdout is a pure function of the arguments and
//! the input file; progress and cache messages go to stderr.

pub mod data;
pub mod hypothesis;
pub mod report;

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use copula_indep::montecarlo::{
    estimate_power_with_null, test_with_null, CacheOutcome, NullCache, NullKey, DEFAULT_LEVELS,
};
use copula_indep::screen::screen_with_null;
use copula_indep::{
    build_null, critical_value, pseudo_sample, truncate_to_multiple, CopulaSamplerSpec, Error, NullDistribution,
    RawSample, StatisticKind, TiePolicy,
};
use thiserror::Error as ThisError;

use data::{Preprocess, Table};
use report::{Format, Provenance};

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for usage or configuration problems, 3 for problems with the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Core(e) => match e {
                Error::TiesPresent { .. } | Error::Divisibility { .. } | Error::Cache(_) => 3,
                _ => 2,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "copula-indep", version, about = "Checkerboard-copula tests of independence")]
pub struct Cli {
    /// Worker threads (default: all cores). Never changes any reported number.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test mutual independence of the selected CSV columns.
    Test(TestArgs),
    /// Build (and optionally cache) a null table and print its critical values.
    NullTable(NullTableArgs),
    /// Estimate power over a grid of samplers, statistics and sample sizes.
    Power(PowerArgs),
    /// Check a hypothesised split of the columns into two independent groups.
    Screen(ScreenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieChoice {
    Error,
    Random,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV input file.
    pub input: PathBuf,

    /// Treat the first row as data; columns are then selected by 1-based index.
    #[arg(long)]
    pub no_header: bool,

    /// `returns` and `log-returns` turn price columns into returns first.
    #[arg(long, value_enum, default_value = "none")]
    pub preprocess: Preprocess,

    /// `random` breaks ties by a shuffle seeded from `--seed`.
    #[arg(long, value_enum, default_value = "error")]
    pub tie_policy: TieChoice,

    /// Drop `n mod 6` observations, chosen by a draw seeded from `--seed`.
    #[arg(long)]
    pub truncate: bool,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Null replications.
    #[arg(long, default_value_t = 10_000)]
    pub null_sims: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Directory holding reusable null tables.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

fn parse_kind(s: &str) -> Result<StatisticKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_spec(s: &str) -> Result<CopulaSamplerSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Columns by header name or 1-based index (default: all).
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,

    /// tv, hellinger, sup or kl.
    #[arg(long, default_value = "hellinger", value_parser = parse_kind)]
    pub stat: StatisticKind,

    /// Test level; repeatable (default: 0.10, 0.05, 0.01).
    #[arg(long)]
    pub alpha: Vec<f64>,

    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct NullTableArgs {
    #[arg(long, default_value = "hellinger", value_parser = parse_kind)]
    pub stat: StatisticKind,

    /// Dimension.
    #[arg(long)]
    pub d: usize,

    /// Sample size (a multiple of 6).
    #[arg(long)]
    pub n: usize,

    /// Levels to report; repeatable (default: 0.10, 0.05, 0.01).
    #[arg(long)]
    pub alpha: Vec<f64>,

    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Sampler, e.g. `fm:p=0.5` or `gaussian:d=3,rho=0.3`; repeatable.
    #[arg(long, required = true, value_parser = parse_spec)]
    pub spec: Vec<CopulaSamplerSpec>,

    /// Statistic; repeatable or comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "hellinger", value_parser = parse_kind)]
    pub stat: Vec<StatisticKind>,

    /// Sample sizes; repeatable or comma-separated.
    #[arg(long, required = true, value_delimiter = ',')]
    pub n: Vec<usize>,

    /// Test level; repeatable (default: 0.05).
    #[arg(long)]
    pub alpha: Vec<f64>,

    /// Replications under each alternative.
    #[arg(long, default_value_t = 1_000)]
    pub alt_sims: usize,

    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// TOML file: `groups = [["X1", "X2"], ["X3", 4]]`, each group in chain order.
    #[arg(long)]
    pub hypothesis: PathBuf,

    #[arg(long, default_value = "hellinger", value_parser = parse_kind)]
    pub stat: StatisticKind,

    /// Level of every pairwise test.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[command(flatten)]
    pub sim: SimArgs,
}

/// Runs a parsed command line, writing the document to `out` and
/// diagnostics to `err`.
pub fn run(cli: Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| dispatch(cli.command, out, err)),
        None => dispatch(cli.command, out, err),
    }
}

fn dispatch(command: Command, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match command {
        Command::Test(a) => cmd_test(&a, out, err),
        Command::NullTable(a) => cmd_null_table(&a, out, err),
        Command::Power(a) => cmd_power(&a, out, err),
        Command::Screen(a) => cmd_screen(&a, out, err),
    }
}

fn levels(requested: &[f64], default: &[f64]) -> Result<Vec<f64>, CliError> {
    let levels = if requested.is_empty() { default.to_vec() } else { requested.to_vec() };
    if let Some(a) = levels.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {a}")));
    }
    Ok(levels)
}

/// A null table from the cache directory when one is given.
fn null_table(key: NullKey, cache_dir: Option<&Path>, err: &mut (dyn Write + Send)) -> Result<NullDistribution, CliError> {
    let Some(dir) = cache_dir else {
        return Ok(build_null(key.kind, key.d, key.n, key.replications, key.seed)?);
    };
    let cache = NullCache::new(dir);
    let (nd, outcome) = cache.load_or_build(key)?;
    let path = cache.path_for(&key);
    match outcome {
        CacheOutcome::Hit => writeln!(err, "null table served from cache: {}", path.display())?,
        CacheOutcome::Built => writeln!(err, "null table cached: {}", path.display())?,
        CacheOutcome::Rebuilt(why) => writeln!(err, "warning: cached null table unusable ({why}); rebuilt it")?,
    }
    Ok(nd)
}

/// Flags statistics whose null law has few atoms.
fn discreteness_note(nd: &NullDistribution) -> Option<String> {
    let distinct = nd.distinct_values();
    (distinct * 20 < nd.replications()).then(|| {
        format!(
            "the {} statistic is heavily discretized at d = {}, n = {}: {} distinct values in {} null draws, \
             so the actual size can sit well below the nominal level",
            nd.kind(),
            nd.d(),
            nd.n(),
            distinct,
            nd.replications()
        )
    })
}

/// Loaded, preprocessed and (optionally) truncated data.
struct Prepared {
    raw: RawSample,
    names: Vec<String>,
    provenance: report::DataProvenance,
}

fn prepare(args: &DataArgs, table: &Table, columns: &[usize], seed: u64) -> Result<Prepared, CliError> {
    let names: Vec<String> = columns.iter().map(|&c| table.headers[c].clone()).collect();
    let mut raw = table.extract(columns, args.preprocess)?;
    let observations = raw.n();
    if observations % 6 != 0 {
        if args.truncate {
            raw = truncate_to_multiple(&raw, 6, seed)?;
        } else {
            return Err(CliError::Data(format!(
                "{observations} observations is not a multiple of 6 (orders 2 and 3 must both divide n); \
                 rerun with --truncate to drop {} of them by a seeded draw",
                observations % 6
            )));
        }
    }
    let provenance = report::DataProvenance {
        input: args.input.display().to_string(),
        header: !args.no_header,
        columns: names.clone(),
        preprocess: args.preprocess,
        tie_policy: tie_policy(args, seed),
        truncate: args.truncate,
        rows_read: table.rows(),
        observations,
        dropped: observations - raw.n(),
    };
    Ok(Prepared { raw, names, provenance })
}

fn tie_policy(args: &DataArgs, seed: u64) -> TiePolicy {
    match args.tie_policy {
        TieChoice::Error => TiePolicy::Error,
        TieChoice::Random => TiePolicy::RandomBreak { seed },
    }
}

/// Names the offending column in tie errors.
fn name_ties(e: Error, names: &[String]) -> CliError {
    match e {
        Error::TiesPresent { column } => CliError::Data(format!(
            "column `{}` contains tied values; rerun with --tie-policy random to break them by a seeded draw",
            names[column - 1]
        )),
        other => other.into(),
    }
}

pub fn cmd_test(args: &TestArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let levels = levels(&args.alpha, &DEFAULT_LEVELS)?;
    let table = Table::read(&args.data.input, !args.data.no_header)?;
    let columns = table.select(&args.columns)?;
    let prepared = prepare(&args.data, &table, &columns, args.sim.seed)?;
    let ps = pseudo_sample(&prepared.raw, tie_policy(&args.data, args.sim.seed))
        .map_err(|e| name_ties(e, &prepared.names))?;
    let key = NullKey {
        kind: args.stat,
        d: ps.d(),
        n: ps.n(),
        replications: args.sim.null_sims,
        seed: args.sim.seed,
    };
    let nd = null_table(key, args.sim.cache_dir.as_deref(), err)?;
    let result = test_with_null(&ps, &nd, &levels)?;
    let notes = discreteness_note(&nd).into_iter().collect();
    let provenance = Provenance::new(&args.sim, None, Some(prepared.provenance));
    report::write_test(out, args.sim.format, provenance, &prepared.names, &result, notes)
}

pub fn cmd_null_table(args: &NullTableArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let levels = levels(&args.alpha, &DEFAULT_LEVELS)?;
    let key = NullKey {
        kind: args.stat,
        d: args.d,
        n: args.n,
        replications: args.sim.null_sims,
        seed: args.sim.seed,
    };
    let nd = null_table(key, args.sim.cache_dir.as_deref(), err)?;
    let critical = levels
        .iter()
        .map(|&a| Ok(report::Critical { alpha: a, critical_value: critical_value(&nd, a)? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let notes = discreteness_note(&nd).into_iter().collect();
    let provenance = Provenance::new(&args.sim, None, None);
    report::write_null_table(out, args.sim.format, provenance, &nd, critical, notes)
}

pub fn cmd_power(args: &PowerArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let levels = levels(&args.alpha, &[0.05])?;
    if args.alt_sims == 0 {
        return Err(CliError::Usage("--alt-sims must be positive".into()));
    }
    let mut tables: HashMap<NullKey, NullDistribution> = HashMap::new();
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for spec in &args.spec {
        for &kind in &args.stat {
            for &n in &args.n {
                let key = NullKey {
                    kind,
                    d: spec.dim(),
                    n,
                    replications: args.sim.null_sims,
                    seed: args.sim.seed,
                };
                if !tables.contains_key(&key) {
                    let nd = null_table(key, args.sim.cache_dir.as_deref(), err)?;
                    notes.extend(discreteness_note(&nd));
                    tables.insert(key, nd);
                }
                for &alpha in &levels {
                    rows.push(estimate_power_with_null(spec, &tables[&key], alpha, args.alt_sims, args.sim.seed)?);
                }
            }
        }
    }
    let provenance = Provenance::new(&args.sim, Some(args.alt_sims), None);
    report::write_power(out, args.sim.format, provenance, &rows, notes)
}

pub fn cmd_screen(args: &ScreenArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    levels(&[args.alpha], &[])?;
    let table = Table::read(&args.data.input, !args.data.no_header)?;
    let resolved = hypothesis::load(&args.hypothesis, &table)?;
    let prepared = prepare(&args.data, &table, &resolved.columns, args.sim.seed)?;
    let key = NullKey {
        kind: args.stat,
        d: 2,
        n: prepared.raw.n(),
        replications: args.sim.null_sims,
        seed: args.sim.seed,
    };
    let nd = null_table(key, args.sim.cache_dir.as_deref(), err)?;
    let result = screen_with_null(
        &prepared.raw,
        &resolved.hypothesis,
        &nd,
        args.alpha,
        tie_policy(&args.data, args.sim.seed),
    )
    .map_err(|e| name_ties(e, &prepared.names))?;
    let mut notes: Vec<String> = discreteness_note(&nd).into_iter().collect();
    notes.push(format!(
        "{} pairwise tests, each at level {}; no multiplicity correction is applied",
        result.test_count, result.alpha
    ));
    let provenance = Provenance::new(&args.sim, None, Some(prepared.provenance));
    report::write_screen(out, args.sim.format, provenance, &prepared.names, &result, notes)
}
