//! Uniform partitions of the unit hypercube and the tensors that live on them.
//!
//! Two lattices are used throughout the crate. The *box lattice* has `m^d`
//! cells, one per box of the uniform partition of order `m`; the *grid
//! lattice* has `(m+1)^d` points `{0, 1/m, …, 1}^d`. Both are stored dense
//! and row-major with the first coordinate varying slowest.
//!
//! Box `i_j` along an axis is the interval `((i_j-1)/m, i_j/m]`, except the
//! first one which is closed at 0.

use crate::error::{Error, Result};

/// Tolerance below which a negative inclusion–exclusion volume is treated as
/// floating cancellation and clamped to zero.
pub const VOLUME_CLAMP: f64 = 1e-14;

/// Tolerance used when checking grounding, margins and total mass.
pub const GRID_TOLERANCE: f64 = 1e-12;

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must be at least 2, got {d}")));
    }
    Ok(())
}

pub(crate) fn check_order(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::domain(format!("partition order must be at least 2, got {m}")));
    }
    Ok(())
}

/// `base^exp` for lattice sizes; panics on overflow, which only happens for
/// absurd dimensions.
pub(crate) fn ipow(base: usize, exp: usize) -> usize {
    base.checked_pow(exp as u32).expect("lattice size overflows usize")
}

/// Dense row-major lattice with `side` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Lattice {
    pub side: usize,
    pub dim: usize,
}

impl Lattice {
    pub fn new(side: usize, dim: usize) -> Self {
        Lattice { side, dim }
    }

    pub fn len(&self) -> usize {
        ipow(self.side, self.dim)
    }

    /// Stride of axis `j`.
    pub fn stride(&self, j: usize) -> usize {
        ipow(self.side, self.dim - 1 - j)
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &k| acc * self.side + k)
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = flat % self.side;
            flat /= self.side;
        }
    }
}

/// Position of a point along one axis: the index of the lower grid point of
/// its cell in `0..m` and the fractional offset inside that cell.
///
/// Offsets within a few ulps of a grid point snap onto it so that evaluation
/// at `k/m` reproduces stored grid values exactly.
fn locate(u: f64, m: usize) -> (usize, f64) {
    let x = u * m as f64;
    let nearest = x.round();
    let x = if (x - nearest).abs() <= 4.0 * f64::EPSILON * m as f64 {
        nearest
    } else {
        x
    };
    let lower = (x.floor() as usize).min(m - 1);
    (lower, x - lower as f64)
}

fn check_point(u: &[f64], d: usize) -> Result<()> {
    if u.len() != d {
        return Err(Error::domain(format!(
            "point has {} coordinates, expected {d}",
            u.len()
        )));
    }
    for (j, &x) in u.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!(
                "coordinate {} = {x} lies outside [0, 1]",
                j + 1
            )));
        }
    }
    Ok(())
}

/// A box of the uniform partition of order `m`, with 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoxIndex {
    indices: Vec<usize>,
    order: usize,
}

impl BoxIndex {
    pub fn new(indices: Vec<usize>, order: usize) -> Result<Self> {
        check_order(order)?;
        if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > order) {
            return Err(Error::domain(format!(
                "box index component {bad} outside 1..={order}"
            )));
        }
        Ok(BoxIndex { indices, order })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Every box of the order-`m` partition of `I^d`, in storage order.
    pub fn all(order: usize, dim: usize) -> impl Iterator<Item = BoxIndex> {
        let lattice = Lattice::new(order, dim);
        (0..lattice.len()).map(move |flat| {
            let mut idx = vec![0; dim];
            lattice.unravel(flat, &mut idx);
            idx.iter_mut().for_each(|i| *i += 1);
            BoxIndex { indices: idx, order }
        })
    }

    /// Flat offset in an `m^d` box tensor.
    pub fn flat(&self) -> usize {
        self.indices
            .iter()
            .fold(0, |acc, &i| acc * self.order + (i - 1))
    }
}

/// The box of the order-`m` uniform partition containing `u`.
pub fn box_index(u: &[f64], m: usize) -> Result<BoxIndex> {
    check_order(m)?;
    check_point(u, u.len())?;
    let indices = u
        .iter()
        .map(|&x| {
            let (lower, frac) = locate(x, m);
            // a point sitting exactly on an interior grid line belongs to the lower box
            if frac == 0.0 {
                lower.max(1)
            } else {
                lower + 1
            }
        })
        .collect();
    Ok(BoxIndex { indices, order: m })
}

/// A point of the grid `{0, 1/m, …, 1}^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridPoint {
    indices: Vec<usize>,
    order: usize,
}

impl GridPoint {
    pub fn new(indices: Vec<usize>, order: usize) -> Result<Self> {
        check_order(order)?;
        if let Some(&bad) = indices.iter().find(|&&k| k > order) {
            return Err(Error::domain(format!(
                "grid index {bad} outside 0..={order}"
            )));
        }
        Ok(GridPoint { indices, order })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn coords(&self) -> Vec<f64> {
        let m = self.order as f64;
        self.indices.iter().map(|&k| k as f64 / m).collect()
    }

    pub fn all(order: usize, dim: usize) -> impl Iterator<Item = GridPoint> {
        let lattice = Lattice::new(order + 1, dim);
        (0..lattice.len()).map(move |flat| {
            let mut idx = vec![0; dim];
            lattice.unravel(flat, &mut idx);
            GridPoint { indices: idx, order }
        })
    }
}

/// A density that is constant on every box of the uniform partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDensity {
    order: usize,
    dim: usize,
    values: Vec<f64>,
}

impl PiecewiseDensity {
    pub fn new(order: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        check_order(order)?;
        check_dim(dim)?;
        let expected = ipow(order, dim);
        if values.len() != expected {
            return Err(Error::InvalidDensity(format!(
                "expected {expected} box values, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDensity(format!(
                "box density {bad} is negative or not finite"
            )));
        }
        let mass: f64 = values.iter().sum::<f64>() / expected as f64;
        if (mass - 1.0).abs() > GRID_TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "density integrates to {mass}, not 1"
            )));
        }
        Ok(PiecewiseDensity {
            order,
            dim,
            values,
        })
    }

    /// The density of Lebesgue measure, identically 1.
    pub fn uniform(order: usize, dim: usize) -> Result<Self> {
        check_order(order)?;
        check_dim(dim)?;
        Ok(PiecewiseDensity {
            order,
            dim,
            values: vec![1.0; ipow(order, dim)],
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Box densities in storage order (see [`BoxIndex::all`]).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, b: &BoxIndex) -> f64 {
        self.values[b.flat()]
    }

    /// Lebesgue measure of a single box, `m^-d`.
    pub fn box_measure(&self) -> f64 {
        1.0 / self.values.len() as f64
    }
}

/// Exact numerators of grid values sharing one denominator.
#[derive(Debug, Clone, PartialEq)]
struct ExactGrid {
    numerators: Vec<u64>,
    denominator: u64,
}

/// A d-subcopula on the grid `{0, 1/m, …, 1}^d`, extended to all of `I^d`
/// by d-multilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcopulaGrid {
    order: usize,
    dim: usize,
    values: Vec<f64>,
    exact: Option<ExactGrid>,
}

impl SubcopulaGrid {
    /// Validates grounding, uniform margins and d-increasingness, clamping
    /// negative volumes no larger than [`VOLUME_CLAMP`].
    pub fn new(order: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_volume_tolerance(order, dim, values, VOLUME_CLAMP)
    }

    pub(crate) fn with_volume_tolerance(
        order: usize,
        dim: usize,
        values: Vec<f64>,
        volume_tolerance: f64,
    ) -> Result<Self> {
        check_order(order)?;
        check_dim(dim)?;
        let grid = SubcopulaGrid {
            order,
            dim,
            values,
            exact: None,
        };
        grid.validate(volume_tolerance)?;
        Ok(grid)
    }

    /// Grid whose values are `numerators / denominator`, e.g. cumulative box
    /// counts of a sample of size `denominator`.
    pub fn from_counts(order: usize, dim: usize, numerators: Vec<u64>, denominator: u64) -> Result<Self> {
        check_order(order)?;
        check_dim(dim)?;
        if denominator == 0 {
            return Err(Error::InvalidSubcopula("zero denominator".into()));
        }
        let n = denominator as f64;
        let values = numerators.iter().map(|&c| c as f64 / n).collect();
        let grid = SubcopulaGrid {
            order,
            dim,
            values,
            exact: Some(ExactGrid {
                numerators,
                denominator,
            }),
        };
        grid.validate(0.0)?;
        Ok(grid)
    }

    /// The product copula restricted to the grid.
    pub fn product(order: usize, dim: usize) -> Result<Self> {
        check_order(order)?;
        check_dim(dim)?;
        let values = GridPoint::all(order, dim)
            .map(|g| g.coords().iter().product())
            .collect();
        Self::new(order, dim, values)
    }

    fn validate(&self, volume_tolerance: f64) -> Result<()> {
        let lattice = self.lattice();
        if self.values.len() != lattice.len() {
            return Err(Error::InvalidSubcopula(format!(
                "expected {} grid values, got {}",
                lattice.len(),
                self.values.len()
            )));
        }
        if let Some(bad) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSubcopula(format!("non-finite grid value {bad}")));
        }
        let m = self.order;
        let mut idx = vec![0; self.dim];
        for (flat, &t) in self.values.iter().enumerate() {
            lattice.unravel(flat, &mut idx);
            if idx.contains(&0) && t.abs() > GRID_TOLERANCE {
                return Err(Error::InvalidSubcopula(format!(
                    "value {t} at {idx:?} should be 0 (grounding)"
                )));
            }
            let off_top: Vec<usize> = (0..self.dim).filter(|&j| idx[j] != m).collect();
            match off_top.as_slice() {
                [] if (t - 1.0).abs() > GRID_TOLERANCE => {
                    return Err(Error::InvalidSubcopula(format!(
                        "value {t} at the upper corner should be 1"
                    )));
                }
                [j] => {
                    let expect = idx[*j] as f64 / m as f64;
                    if (t - expect).abs() > GRID_TOLERANCE {
                        return Err(Error::InvalidSubcopula(format!(
                            "margin {} at level {} is {t}, expected {expect}",
                            j + 1,
                            idx[*j]
                        )));
                    }
                }
                _ => {}
            }
        }
        for b in BoxIndex::all(m, self.dim) {
            let v = self.raw_volume(&b);
            if v < -volume_tolerance {
                return Err(Error::InvalidSubcopula(format!(
                    "box {:?} has negative volume {v}",
                    b.indices()
                )));
            }
        }
        Ok(())
    }

    fn lattice(&self) -> Lattice {
        Lattice::new(self.order + 1, self.dim)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Grid values in storage order (see [`GridPoint::all`]).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, g: &GridPoint) -> f64 {
        self.values[self.lattice().ravel(g.indices())]
    }

    /// Exact rational value `(numerator, denominator)` at a grid point, when
    /// the grid originates from counts.
    pub fn exact_at(&self, g: &GridPoint) -> Option<(u64, u64)> {
        let flat = self.lattice().ravel(g.indices());
        self.exact
            .as_ref()
            .map(|e| (e.numerators[flat], e.denominator))
    }

    /// d-multilinear interpolation of the grid values at `u`.
    pub fn multilinear_eval(&self, u: &[f64]) -> Result<f64> {
        check_point(u, self.dim)?;
        Ok(self.eval_unchecked(u))
    }

    pub(crate) fn eval_unchecked(&self, u: &[f64]) -> f64 {
        let lattice = self.lattice();
        let mut base = 0;
        let mut frac = [0.0f64; 16];
        let mut strides = [0usize; 16];
        assert!(self.dim <= 16, "multilinear evaluation supports d <= 16");
        for (j, &x) in u.iter().enumerate() {
            let (lower, w) = locate(x, self.order);
            let stride = lattice.stride(j);
            base += lower * stride;
            frac[j] = w;
            strides[j] = stride;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut weight = 1.0;
            let mut flat = base;
            for j in 0..self.dim {
                if corner >> j & 1 == 1 {
                    weight *= frac[j];
                    flat += strides[j];
                } else {
                    weight *= 1.0 - frac[j];
                }
            }
            if weight != 0.0 {
                total += weight * self.values[flat];
            }
        }
        total
    }

    /// Signed inclusion–exclusion sum over the vertices of box `b`, before
    /// clamping.
    fn raw_volume(&self, b: &BoxIndex) -> f64 {
        let lattice = self.lattice();
        let d = self.dim;
        if let Some(exact) = &self.exact {
            let mut acc: i128 = 0;
            for corner in 0..(1usize << d) {
                let (flat, lower_count) = vertex(&lattice, b, corner);
                let v = exact.numerators[flat] as i128;
                if lower_count % 2 == 0 {
                    acc += v;
                } else {
                    acc -= v;
                }
            }
            return acc as f64 / exact.denominator as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let (flat, lower_count) = vertex(&lattice, b, corner);
            if lower_count % 2 == 0 {
                acc += self.values[flat];
            } else {
                acc -= self.values[flat];
            }
        }
        acc
    }

    /// Volume of box `b` under the subcopula; tiny negative cancellation
    /// residue is clamped to 0.
    pub fn grid_box_volume(&self, b: &BoxIndex) -> Result<f64> {
        if b.order() != self.order || b.dim() != self.dim {
            return Err(Error::domain(format!(
                "box of order {} and dimension {} does not fit a grid of order {} and dimension {}",
                b.order(),
                b.dim(),
                self.order,
                self.dim
            )));
        }
        Ok(self.raw_volume(b).max(0.0))
    }

    /// The piecewise-constant density `m^d · volume` of the multilinear extension.
    pub fn density(&self) -> PiecewiseDensity {
        let scale = ipow(self.order, self.dim) as f64;
        let values = BoxIndex::all(self.order, self.dim)
            .map(|b| scale * self.raw_volume(&b).max(0.0))
            .collect();
        PiecewiseDensity {
            order: self.order,
            dim: self.dim,
            values,
        }
    }
}

/// Flat grid offset of a vertex of box `b` selected by the bits of `corner`
/// (bit set = upper end), and how many coordinates sit at the lower end.
fn vertex(lattice: &Lattice, b: &BoxIndex, corner: usize) -> (usize, usize) {
    let mut flat = 0;
    let mut lower = 0;
    for (j, &i) in b.indices().iter().enumerate() {
        let k = if corner >> j & 1 == 1 {
            i
        } else {
            lower += 1;
            i - 1
        };
        flat = flat * lattice.side + k;
    }
    (flat, lower)
}
