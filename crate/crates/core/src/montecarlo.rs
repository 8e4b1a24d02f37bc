//! Monte Carlo calibration: null tables, critical values, p-values, the
//! rejection rule and power estimation.
//!
//! Replication `r` of any simulation draws only from stream `r` of a seed
//! derived from the master seed, so every number is independent of how many
//! rayon workers run the loop.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{pseudo_sample, PseudoSample, RawSample, TiePolicy};
use crate::metrics::{eta_statistic, StatisticKind, StatisticValue};
use crate::partition::check_dim;
use crate::rng::{derive, Purpose, RngSeed};
use crate::samplers::{sample_null, CopulaSamplerSpec};

/// Smallest accepted number of null replications.
pub const MIN_NULL_REPLICATIONS: usize = 100;

/// Levels reported when none are requested (90%, 95% and 99% quantiles).
pub const DEFAULT_LEVELS: [f64; 3] = [0.10, 0.05, 0.01];

/// Bumped whenever the cache layout or the null simulation changes.
pub const CACHE_VERSION: u32 = 1;

/// Sorted Monte Carlo draws of η under independence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    kind: StatisticKind,
    d: usize,
    n: usize,
    replications: usize,
    seed: u64,
    values: Vec<f64>,
}

/// Identifies a null table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NullKey {
    pub kind: StatisticKind,
    pub d: usize,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
}

impl NullKey {
    fn validate(&self) -> Result<()> {
        check_dim(self.d)?;
        if self.n % 6 != 0 || self.n == 0 {
            return Err(Error::Divisibility { n: self.n, divisor: 6 });
        }
        if self.replications < MIN_NULL_REPLICATIONS {
            return Err(Error::config(format!(
                "at least {MIN_NULL_REPLICATIONS} null replications are required, got {}",
                self.replications
            )));
        }
        Ok(())
    }

    fn file_name(&self) -> String {
        format!(
            "null-{}-d{}-n{}-N{}-s{}.json",
            self.kind, self.d, self.n, self.replications, self.seed
        )
    }
}

impl NullDistribution {
    /// Wraps precomputed draws; they are sorted here.
    pub fn from_values(key: NullKey, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != key.replications {
            return Err(Error::domain(format!(
                "expected {} null values, got {}",
                key.replications,
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain("null values must be finite and non-negative"));
        }
        values.sort_by(f64::total_cmp);
        Ok(NullDistribution {
            kind: key.kind,
            d: key.d,
            n: key.n,
            replications: key.replications,
            seed: key.seed,
            values,
        })
    }

    pub fn key(&self) -> NullKey {
        NullKey {
            kind: self.kind,
            d: self.d,
            n: self.n,
            replications: self.replications,
            seed: self.seed,
        }
    }

    pub fn kind(&self) -> StatisticKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn replications(&self) -> usize {
        self.replications
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn distinct_values(&self) -> usize {
        1 + self.values.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// `N` draws of η over independent random-permutation pseudo-samples.
pub fn build_null(kind: StatisticKind, d: usize, n: usize, replications: usize, seed: u64) -> Result<NullDistribution> {
    let key = NullKey { kind, d, n, replications, seed };
    key.validate()?;
    let base = derive(seed, Purpose::NullTable, 0);
    let values = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let ps = sample_null(d, n, &mut RngSeed::new(base, r).rng())?;
            Ok(eta_statistic(&ps, kind)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    NullDistribution::from_values(key, values)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("level must lie in (0, 1), got {alpha}")))
    }
}

/// Order statistic of rank `ceil((1−α)N)` (1-based).
pub fn critical_value(nd: &NullDistribution, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let n = nd.values.len();
    // the small slack keeps e.g. (1 − 0.05)·10000 from rounding up to 9501
    let rank = (((1.0 - alpha) * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(nd.values[rank - 1])
}

/// `(1 + #{draws ≥ observed}) / (N + 1)`.
///
/// A draw tied with the observed value counts against rejection here, just
/// as a critical value tied with the observed value does not reject, so
/// `p < α` only when `observed > critical_value(α)`.
pub fn p_value(nd: &NullDistribution, observed: f64) -> f64 {
    let below = nd.values.partition_point(|&v| v < observed);
    let at_least = nd.values.len() - below;
    (1 + at_least) as f64 / (nd.values.len() + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDecision {
    pub alpha: f64,
    pub critical_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: StatisticValue,
    pub levels: Vec<LevelDecision>,
    pub p_value: f64,
    pub null_replications: usize,
    pub null_seed: u64,
}

impl TestReport {
    pub fn rejects_at(&self, alpha: f64) -> Option<bool> {
        self.levels.iter().find(|l| l.alpha == alpha).map(|l| l.reject)
    }
}

/// Tests a pseudo-sample against an existing table of matching shape.
pub fn test_with_null(ps: &PseudoSample, nd: &NullDistribution, levels: &[f64]) -> Result<TestReport> {
    if ps.n() != nd.n || ps.d() != nd.d {
        return Err(Error::config(format!(
            "null table is for n = {}, d = {} but the sample has n = {}, d = {}",
            nd.n,
            nd.d,
            ps.n(),
            ps.d()
        )));
    }
    if levels.is_empty() {
        return Err(Error::config("at least one level is required"));
    }
    let statistic = eta_statistic(ps, nd.kind)?;
    let levels = levels
        .iter()
        .map(|&alpha| {
            let critical_value = critical_value(nd, alpha)?;
            Ok(LevelDecision {
                alpha,
                critical_value,
                reject: statistic.value > critical_value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TestReport {
        statistic,
        p_value: p_value(nd, statistic.value),
        levels,
        null_replications: nd.replications,
        null_seed: nd.seed,
    })
}

/// Ranks the data, simulates the null of matching `(d, n)` and decides at each level.
pub fn test_independence(
    raw: &RawSample,
    kind: StatisticKind,
    levels: &[f64],
    replications: usize,
    seed: u64,
    tie_policy: TiePolicy,
) -> Result<TestReport> {
    let ps = pseudo_sample(raw, tie_policy)?;
    if ps.n() % 6 != 0 {
        return Err(Error::Divisibility { n: ps.n(), divisor: 6 });
    }
    let nd = build_null(kind, ps.d(), ps.n(), replications, seed)?;
    test_with_null(&ps, &nd, levels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub spec: CopulaSamplerSpec,
    pub kind: StatisticKind,
    pub n: usize,
    pub alpha: f64,
    pub critical_value: f64,
    pub replications: usize,
    pub rejections: usize,
    pub power: f64,
    pub se: f64,
    pub null_replications: usize,
    pub seed: u64,
}

/// Rejection rate of the level-α test over `replications` samples from `spec`.
pub fn estimate_power(
    spec: &CopulaSamplerSpec,
    kind: StatisticKind,
    n: usize,
    alpha: f64,
    null_replications: usize,
    replications: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    let nd = build_null(kind, spec.dim(), n, null_replications, seed)?;
    estimate_power_with_null(spec, &nd, alpha, replications, seed)
}

/// As [`estimate_power`], reusing a table built for `(kind, spec.dim(), n)`.
pub fn estimate_power_with_null(
    spec: &CopulaSamplerSpec,
    nd: &NullDistribution,
    alpha: f64,
    replications: usize,
    seed: u64,
) -> Result<PowerEstimate> {
    if spec.dim() != nd.d {
        return Err(Error::config(format!(
            "sampler `{spec}` has d = {} but the null table has d = {}",
            spec.dim(),
            nd.d
        )));
    }
    if replications == 0 {
        return Err(Error::config("at least one alternative replication is required"));
    }
    let critical = critical_value(nd, alpha)?;
    let base = derive(seed, Purpose::Alternative, 0);
    let rejections = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let raw = spec.sample(nd.n, RngSeed::new(base, r))?;
            let ties = TiePolicy::RandomBreak { seed: derive(base, Purpose::TieBreak, r) };
            let ps = pseudo_sample(&raw, ties)?;
            Ok(usize::from(eta_statistic(&ps, nd.kind)?.value > critical))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    let power = rejections as f64 / replications as f64;
    Ok(PowerEstimate {
        spec: spec.clone(),
        kind: nd.kind,
        n: nd.n,
        alpha,
        critical_value: critical,
        replications,
        rejections,
        power,
        se: (power * (1.0 - power) / replications as f64).sqrt(),
        null_replications: nd.replications,
        seed,
    })
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    format: String,
    version: u32,
    key: NullKey,
    values: Vec<f64>,
}

const CACHE_FORMAT: &str = "copula-indep-null-table";

/// Writes a table as a self-describing JSON record.
pub fn save_null(nd: &NullDistribution, path: &Path) -> Result<()> {
    let record = CacheRecord {
        format: CACHE_FORMAT.to_string(),
        version: CACHE_VERSION,
        key: nd.key(),
        values: nd.values.clone(),
    };
    let text = serde_json::to_string(&record).map_err(|e| Error::Cache(e.to_string()))?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(|e| Error::Cache(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))
}

/// Reads a table, refusing anything whose format, version or key differs
/// from `expected`.
pub fn load_null(path: &Path, expected: NullKey) -> Result<NullDistribution> {
    let text = fs::read_to_string(path).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
    let record: CacheRecord =
        serde_json::from_str(&text).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
    if record.format != CACHE_FORMAT || record.version != CACHE_VERSION {
        return Err(Error::Cache(format!(
            "{}: unsupported format `{}` version {}",
            path.display(),
            record.format,
            record.version
        )));
    }
    if record.key != expected {
        return Err(Error::Cache(format!("{}: key mismatch", path.display())));
    }
    if record.values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Cache(format!("{}: values are not sorted", path.display())));
    }
    NullDistribution::from_values(expected, record.values).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))
}

/// How a cached table was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum CacheOutcome {
    Hit,
    Built,
    /// The file existed but could not be used; the message says why.
    Rebuilt(String),
}

/// Directory of null tables, one file per key.
#[derive(Debug, Clone)]
pub struct NullCache {
    dir: PathBuf,
}

impl NullCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        NullCache { dir: dir.into() }
    }

    pub fn path_for(&self, key: &NullKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    pub fn load_or_build(&self, key: NullKey) -> Result<(NullDistribution, CacheOutcome)> {
        key.validate()?;
        let path = self.path_for(&key);
        let outcome = if path.exists() {
            match load_null(&path, key) {
                Ok(nd) => return Ok((nd, CacheOutcome::Hit)),
                Err(e) => CacheOutcome::Rebuilt(e.to_string()),
            }
        } else {
            CacheOutcome::Built
        };
        let nd = build_null(key.kind, key.d, key.n, key.replications, key.seed)?;
        fs::create_dir_all(&self.dir).map_err(|e| Error::Cache(format!("{}: {e}", self.dir.display())))?;
        save_null(&nd, &path)?;
        Ok((nd, outcome))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(values: Vec<f64>) -> NullDistribution {
        let key = NullKey {
            kind: StatisticKind::TotalVariation,
            d: 2,
            n: 6,
            replications: values.len(),
            seed: 0,
        };
        NullDistribution::from_values(key, values).unwrap()
    }

    #[test]
    fn critical_value_rank_arithmetic() {
        let nd = synthetic((1..=10_000).map(f64::from).collect());
        assert_eq!(critical_value(&nd, 0.05).unwrap(), 9_500.0);
        assert_eq!(critical_value(&nd, 0.10).unwrap(), 9_000.0);
        assert_eq!(critical_value(&nd, 0.01).unwrap(), 9_900.0);
        assert!(critical_value(&nd, 0.0).is_err());
        assert!(critical_value(&nd, 1.0).is_err());
    }

    #[test]
    fn degenerate_null() {
        let nd = synthetic(vec![0.3; 200]);
        for a in [0.5, 0.1, 0.05, 0.01] {
            assert_eq!(critical_value(&nd, a).unwrap(), 0.3);
        }
        assert_eq!(p_value(&nd, 0.3), 1.0);
        assert_eq!(nd.distinct_values(), 1);
    }

    #[test]
    fn p_value_extremes() {
        let nd = synthetic((0..9_999).map(f64::from).collect());
        assert_eq!(p_value(&nd, 1e9), 1.0 / 10_000.0);
        assert_eq!(p_value(&nd, 0.0), 1.0);
    }

    #[test]
    fn p_value_agrees_with_critical_value() {
        // many ties, exhaustive over observed values and levels
        let values: Vec<f64> = (0..200).map(|i| f64::from(i / 7)).collect();
        let nd = synthetic(values);
        for obs10 in 0..320 {
            let obs = f64::from(obs10) / 10.0;
            for a in [0.01, 0.02, 0.05, 0.1, 0.2, 0.5] {
                if p_value(&nd, obs) < a {
                    assert!(obs > critical_value(&nd, a).unwrap(), "obs {obs}, alpha {a}");
                }
            }
        }
    }

    #[test]
    fn build_null_validation() {
        assert_eq!(
            build_null(StatisticKind::Hellinger, 2, 35, 1000, 1),
            Err(Error::Divisibility { n: 35, divisor: 6 })
        );
        assert!(matches!(build_null(StatisticKind::Hellinger, 2, 36, 99, 1), Err(Error::Config(_))));
    }

    #[test]
    fn comonotone_data_is_rejected() {
        let raw = RawSample::from_columns(&[(0..36).map(f64::from).collect(), (0..36).map(f64::from).collect()])
            .unwrap();
        for kind in StatisticKind::ALL {
            let report = test_independence(&raw, kind, &DEFAULT_LEVELS, 2_000, 3, TiePolicy::Error).unwrap();
            assert!(report.levels.iter().all(|l| l.reject), "{kind}");
            assert!(report.p_value <= 1.0 / 2_001.0 + 1e-15);
        }
    }

    #[test]
    fn cache_roundtrip_and_refusal() {
        let dir = tempfile::tempdir().unwrap();
        let cache = NullCache::new(dir.path());
        let key = NullKey {
            kind: StatisticKind::KullbackLeibler,
            d: 2,
            n: 12,
            replications: 150,
            seed: 4,
        };
        let (built, outcome) = cache.load_or_build(key).unwrap();
        assert_eq!(outcome, CacheOutcome::Built);
        let (hit, outcome) = cache.load_or_build(key).unwrap();
        assert_eq!(outcome, CacheOutcome::Hit);
        assert_eq!(built, hit);

        let other = NullKey { seed: 5, ..key };
        assert!(matches!(load_null(&cache.path_for(&key), other), Err(Error::Cache(_))));

        fs::write(cache.path_for(&key), "{ not json").unwrap();
        let (rebuilt, outcome) = cache.load_or_build(key).unwrap();
        assert!(matches!(outcome, CacheOutcome::Rebuilt(_)));
        assert_eq!(rebuilt, built);
    }
}
