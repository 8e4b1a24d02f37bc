//! Sample d-copula of order `m`: pseudo-sample, box frequencies, cumulative
//! subcopula grid and piecewise-constant density.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{check_dim, check_order, ipow, BoxIndex, Lattice, PiecewiseDensity, SubcopulaGrid};
use crate::rng::{derive, Purpose, RngSeed};

/// `n` observations of a `d`-dimensional continuous random vector, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl RawSample {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(d)?;
        if n == 0 {
            return Err(Error::domain("raw sample needs at least one observation"));
        }
        if data.len() != n * d {
            return Err(Error::domain(format!(
                "expected {} values for {n} x {d} sample, got {}",
                n * d,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite value at row {}, column {}",
                pos / d + 1,
                pos % d + 1
            )));
        }
        Ok(RawSample { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::domain(format!("row {} has a different length", r + 1)));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let d = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::domain("columns have different lengths"));
        }
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            data.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(n, d, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(j).step_by(self.d).copied()
    }

    /// Sub-sample made of the given columns (0-based), in that order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<RawSample> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.d) {
            return Err(Error::domain(format!("column {} out of range", bad + 1)));
        }
        let mut data = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            let row = self.row(i);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        RawSample::new(self.n, cols.len(), data)
    }

    /// Applies `f` to every value of the sample.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<RawSample> {
        RawSample::new(self.n, self.d, self.data.iter().map(|&x| f(x)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum TiePolicy {
    /// Abort on any tied column values.
    Error,
    /// Break ties by a shuffle drawn from this seed before ranking.
    RandomBreak { seed: u64 },
}

/// Ranks divided by `n`; each column is a permutation of `{1/n, …, n/n}`.
/// Ranks are stored as integers so every coordinate is exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoSample {
    n: usize,
    d: usize,
    ranks: Vec<u32>,
}

impl PseudoSample {
    /// Builds a pseudo-sample from 1-based ranks, row-major.
    pub fn from_ranks(n: usize, d: usize, ranks: Vec<u32>) -> Result<Self> {
        check_dim(d)?;
        if n == 0 || ranks.len() != n * d {
            return Err(Error::domain(format!(
                "expected {} ranks for {n} x {d} pseudo-sample, got {}",
                n * d,
                ranks.len()
            )));
        }
        let mut seen = vec![false; n];
        for j in 0..d {
            seen.iter_mut().for_each(|s| *s = false);
            for i in 0..n {
                let r = ranks[i * d + j] as usize;
                if r == 0 || r > n || std::mem::replace(&mut seen[r - 1], true) {
                    return Err(Error::domain(format!(
                        "column {} is not a permutation of 1..={n}",
                        j + 1
                    )));
                }
            }
        }
        Ok(PseudoSample { n, d, ranks })
    }

    pub(crate) fn from_ranks_unchecked(n: usize, d: usize, ranks: Vec<u32>) -> Self {
        PseudoSample { n, d, ranks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rank(&self, i: usize, j: usize) -> u32 {
        self.ranks[i * self.d + j]
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        let n = self.n as f64;
        self.ranks[i * self.d..(i + 1) * self.d]
            .iter()
            .map(|&r| r as f64 / n)
            .collect()
    }

    /// Pseudo-sample restricted to two columns (0-based).
    pub fn pair(&self, a: usize, b: usize) -> PseudoSample {
        let ranks = (0..self.n)
            .flat_map(|i| [self.rank(i, a), self.rank(i, b)])
            .collect();
        PseudoSample::from_ranks_unchecked(self.n, 2, ranks)
    }
}

/// Replaces each coordinate by its within-column rank divided by `n`.
pub fn pseudo_sample(raw: &RawSample, tie_policy: TiePolicy) -> Result<PseudoSample> {
    let (n, d) = (raw.n(), raw.d());
    let mut ranks = vec![0u32; n * d];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for j in 0..d {
        let col: Vec<f64> = raw.column(j).collect();
        order.clear();
        order.extend(0..n);
        if let TiePolicy::RandomBreak { seed } = tie_policy {
            let mut rng = RngSeed::new(derive(seed, Purpose::TieBreak, 0), j as u64).rng();
            order.shuffle(&mut rng);
        }
        // stable sort keeps the shuffled order among equal values
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        if tie_policy == TiePolicy::Error && order.windows(2).any(|w| col[w[0]] == col[w[1]]) {
            return Err(Error::TiesPresent { column: j + 1 });
        }
        for (r, &i) in order.iter().enumerate() {
            ranks[i * d + j] = (r + 1) as u32;
        }
    }
    Ok(PseudoSample { n, d, ranks })
}

/// Drops `n mod multiple` observations chosen by a seeded draw, keeping the
/// remaining rows in their original order.
pub fn truncate_to_multiple(raw: &RawSample, multiple: usize, seed: u64) -> Result<RawSample> {
    if multiple == 0 {
        return Err(Error::domain("truncation multiple must be positive"));
    }
    let drop = raw.n() % multiple;
    if drop == 0 {
        return Ok(raw.clone());
    }
    if raw.n() < multiple {
        return Err(Error::Divisibility {
            n: raw.n(),
            divisor: multiple,
        });
    }
    let mut rng = RngSeed::new(derive(seed, Purpose::Truncate, 0), 0).rng();
    let mut idx: Vec<usize> = (0..raw.n()).collect();
    let (dropped, _) = idx.partial_shuffle(&mut rng, drop);
    let mut dropped = dropped.to_vec();
    dropped.sort_unstable();
    let mut data = Vec::with_capacity((raw.n() - drop) * raw.d());
    for i in 0..raw.n() {
        if dropped.binary_search(&i).is_err() {
            data.extend_from_slice(raw.row(i));
        }
    }
    RawSample::new(raw.n() - drop, raw.d(), data)
}

/// Relative box frequencies `S_m^n`, held as integer counts over `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTensor {
    order: usize,
    dim: usize,
    n: usize,
    counts: Vec<u64>,
}

impl FrequencyTensor {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Box counts in storage order.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, b: &BoxIndex) -> u64 {
        self.counts[b.flat()]
    }

    /// Relative frequency `s_b = count / n`.
    pub fn frequency(&self, b: &BoxIndex) -> f64 {
        self.count(b) as f64 / self.n as f64
    }

    /// Builds a tensor from raw counts, checking they sum to `n` and that
    /// every marginal slab holds exactly `n/m` points.
    pub fn from_counts(order: usize, dim: usize, counts: Vec<u64>) -> Result<Self> {
        check_order(order)?;
        check_dim(dim)?;
        let lattice = Lattice::new(order, dim);
        if counts.len() != lattice.len() {
            return Err(Error::domain(format!(
                "expected {} box counts, got {}",
                lattice.len(),
                counts.len()
            )));
        }
        let n: u64 = counts.iter().sum();
        if n == 0 || n % order as u64 != 0 {
            return Err(Error::Divisibility {
                n: n as usize,
                divisor: order,
            });
        }
        let mut slabs = vec![0u64; order * dim];
        let mut idx = vec![0; dim];
        for (flat, &c) in counts.iter().enumerate() {
            lattice.unravel(flat, &mut idx);
            for (j, &k) in idx.iter().enumerate() {
                slabs[j * order + k] += c;
            }
        }
        let per_slab = n / order as u64;
        if let Some(pos) = slabs.iter().position(|&s| s != per_slab) {
            return Err(Error::domain(format!(
                "slab {} of axis {} holds {} points, expected {per_slab}",
                pos % order + 1,
                pos / order + 1,
                slabs[pos]
            )));
        }
        Ok(FrequencyTensor {
            order,
            dim,
            n: n as usize,
            counts,
        })
    }
}

/// Counts the pseudo-observations falling in each box of the order-`m`
/// partition. Requires `m | n`.
pub fn frequency_tensor(ps: &PseudoSample, m: usize) -> Result<FrequencyTensor> {
    check_order(m)?;
    let (n, d) = (ps.n(), ps.d());
    if n % m != 0 {
        return Err(Error::Divisibility { n, divisor: m });
    }
    let mut counts = vec![0u64; ipow(m, d)];
    for row in ps.ranks.chunks_exact(d) {
        // rank r lies in box ceil(r m / n), computed exactly in integers
        let flat = row
            .iter()
            .fold(0, |acc, &r| acc * m + (r as usize * m).div_ceil(n) - 1);
        counts[flat] += 1;
    }
    Ok(FrequencyTensor {
        order: m,
        dim: d,
        n,
        counts,
    })
}

/// Cumulative sums of the box counts on the `(m+1)^d` grid.
pub fn subcopula_grid(s: &FrequencyTensor) -> SubcopulaGrid {
    let (m, d) = (s.order, s.dim);
    let grid = Lattice::new(m + 1, d);
    let boxes = Lattice::new(m, d);
    let mut cum = vec![0u64; grid.len()];
    let mut idx = vec![0; d];
    for (flat, &c) in s.counts.iter().enumerate() {
        boxes.unravel(flat, &mut idx);
        idx.iter_mut().for_each(|k| *k += 1);
        cum[grid.ravel(&idx)] = c;
    }
    // prefix sums along each axis in turn
    for j in 0..d {
        let stride = grid.stride(j);
        for flat in 0..grid.len() {
            if (flat / stride) % (m + 1) != 0 {
                cum[flat] += cum[flat - stride];
            }
        }
    }
    SubcopulaGrid::from_counts(m, d, cum, s.n as u64)
        .expect("cumulative box counts of a valid frequency tensor form a subcopula")
}

/// Sample copula density: `m^d · s_b` on box `b`.
pub fn sample_copula_density(s: &FrequencyTensor) -> PiecewiseDensity {
    let scale = ipow(s.order, s.dim) as f64 / s.n as f64;
    let values = s.counts.iter().map(|&c| c as f64 * scale).collect();
    PiecewiseDensity::new(s.order, s.dim, values).expect("box frequencies sum to one")
}
