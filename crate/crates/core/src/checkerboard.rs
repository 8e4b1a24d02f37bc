//! Checkerboard approximation `C^(m)` of analytic copulas.
//!
//! `C^(m)` agrees with `C` on the grid `{0, 1/m, …, 1}^d` and is extended by
//! d-multilinear interpolation, so its density is constant on every box of
//! the uniform partition. Besides the classic families this module carries
//! the two one-parameter families that arise when a copula coincides with
//! its own order-2 checkerboard (bivariate and trivariate), which serve as
//! oracles for the characterization of the product copula.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::partition::{box_index, check_dim, check_order, ipow, BoxIndex, GridPoint, Lattice, PiecewiseDensity, SubcopulaGrid};

/// Tolerance on negative box volumes of an analytic evaluator.
pub const NOT_A_COPULA_TOLERANCE: f64 = 1e-10;

/// Tolerance for the margin, grounding and Fréchet–Hoeffding probes.
const PROBE_TOLERANCE: f64 = 1e-12;

/// Points per axis of the construction-time probe grid.
const PROBE_POINTS: usize = 21;

/// Upper bound on the number of probe points for the bounds check.
const PROBE_BUDGET: usize = 200_000;

type Evaluator = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A d-copula given by a closed-form evaluator.
#[derive(Clone)]
pub struct AnalyticCopula {
    name: String,
    dim: usize,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for AnalyticCopula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticCopula")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

impl AnalyticCopula {
    /// Wraps an evaluator after probing grounding, uniform margins and the
    /// Fréchet–Hoeffding bounds on a 21-point-per-axis grid. In high
    /// dimension the bounds probe uses fewer points per axis to stay within
    /// a fixed budget. d-increasingness is not probed here; it is checked box
    /// by box when a checkerboard is built.
    pub fn new<F>(name: impl Into<String>, dim: usize, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        check_dim(dim)?;
        let copula = AnalyticCopula {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
        };
        copula.probe()?;
        Ok(copula)
    }

    fn fail(&self, reason: String) -> Error {
        Error::NotACopula {
            name: self.name.clone(),
            reason,
        }
    }

    fn probe(&self) -> Result<()> {
        let d = self.dim;
        let step = 1.0 / (PROBE_POINTS - 1) as f64;
        let mut u = vec![1.0; d];
        for j in 0..d {
            for k in 0..PROBE_POINTS {
                let x = k as f64 * step;
                u.iter_mut().for_each(|v| *v = 1.0);
                u[j] = x;
                let c = (self.eval)(&u);
                if (c - x).abs() > PROBE_TOLERANCE {
                    return Err(self.fail(format!("margin {} at {x} evaluates to {c}", j + 1)));
                }
                u.iter_mut().for_each(|v| *v = x);
                u[j] = 0.0;
                let c = (self.eval)(&u);
                if c.abs() > PROBE_TOLERANCE {
                    return Err(self.fail(format!("not grounded: C = {c} with coordinate {} at 0", j + 1)));
                }
            }
        }
        let mut per_axis = PROBE_POINTS;
        while per_axis > 3 && ipow(per_axis, d) > PROBE_BUDGET {
            per_axis -= 1;
        }
        let lattice = Lattice::new(per_axis, d);
        let mut idx = vec![0; d];
        for flat in 0..lattice.len() {
            lattice.unravel(flat, &mut idx);
            for (x, &k) in u.iter_mut().zip(&idx) {
                *x = k as f64 / (per_axis - 1) as f64;
            }
            let c = (self.eval)(&u);
            let upper = u.iter().copied().fold(1.0, f64::min);
            let lower = (u.iter().sum::<f64>() - (d - 1) as f64).max(0.0);
            if !(c >= lower - PROBE_TOLERANCE && c <= upper + PROBE_TOLERANCE) {
                return Err(self.fail(format!(
                    "C({u:?}) = {c} violates the Fréchet–Hoeffding bounds [{lower}, {upper}]"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim || u.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::domain(format!("{u:?} is not a point of I^{}", self.dim)));
        }
        Ok((self.eval)(u))
    }

    /// Independence copula `Π_d`.
    pub fn product(d: usize) -> Result<Self> {
        Self::new(format!("product(d={d})"), d, |u| u.iter().product())
    }

    /// Upper Fréchet–Hoeffding bound `M_d` (comonotonicity).
    pub fn upper_bound(d: usize) -> Result<Self> {
        Self::new(format!("M(d={d})"), d, |u| u.iter().copied().fold(1.0, f64::min))
    }

    /// Lower Fréchet–Hoeffding bound `W_2` (countermonotonicity).
    pub fn lower_bound() -> Result<Self> {
        Self::new("W(d=2)", 2, |u| (u[0] + u[1] - 1.0).max(0.0))
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::domain(format!("Clayton theta must be > 0, got {theta}")));
        }
        Self::new(format!("clayton(theta={theta})"), 2, move |u| {
            if u[0] == 0.0 || u[1] == 0.0 {
                return 0.0;
            }
            (u[0].powf(-theta) + u[1].powf(-theta) - 1.0).powf(-1.0 / theta)
        })
    }

    pub fn gumbel(theta: f64) -> Result<Self> {
        if !(theta >= 1.0 && theta.is_finite()) {
            return Err(Error::domain(format!("Gumbel theta must be >= 1, got {theta}")));
        }
        Self::new(format!("gumbel(theta={theta})"), 2, move |u| {
            if u[0] == 0.0 || u[1] == 0.0 {
                return 0.0;
            }
            let s = (-u[0].ln()).powf(theta) + (-u[1].ln()).powf(theta);
            (-s.powf(1.0 / theta)).exp()
        })
    }

    pub fn frank(theta: f64) -> Result<Self> {
        if theta == 0.0 || !theta.is_finite() {
            return Err(Error::domain(format!("Frank theta must be finite and nonzero, got {theta}")));
        }
        Self::new(format!("frank(theta={theta})"), 2, move |u| {
            let a = (-theta * u[0]).exp_m1();
            let b = (-theta * u[1]).exp_m1();
            -(a * b / (-theta).exp_m1()).ln_1p() / theta
        })
    }

    /// `p·M_2 + (1−p)·W_2`.
    pub fn frechet_mardia(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("mixture weight must lie in [0, 1], got {p}")));
        }
        Self::new(format!("frechet-mardia(p={p})"), 2, move |u| {
            p * u[0].min(u[1]) + (1.0 - p) * (u[0] + u[1] - 1.0).max(0.0)
        })
    }
}

/// Inclusion–exclusion volume of the closed box `b` of the order-`m`
/// partition under `c`.
pub fn copula_box_volume(c: &AnalyticCopula, b: &BoxIndex, m: usize) -> Result<f64> {
    check_order(m)?;
    if b.order() != m || b.dim() != c.dim() {
        return Err(Error::domain(format!(
            "box {:?} does not belong to the order-{m} partition of I^{}",
            b.indices(),
            c.dim()
        )));
    }
    let d = c.dim();
    let mut u = vec![0.0; d];
    let mut volume = 0.0;
    for corner in 0..(1usize << d) {
        let mut lower = 0;
        for (j, &i) in b.indices().iter().enumerate() {
            let k = if corner >> j & 1 == 1 {
                i
            } else {
                lower += 1;
                i - 1
            };
            u[j] = k as f64 / m as f64;
        }
        let v = (c.eval)(&u);
        if lower % 2 == 0 {
            volume += v;
        } else {
            volume -= v;
        }
    }
    if volume < -NOT_A_COPULA_TOLERANCE {
        return Err(Error::NotACopula {
            name: c.name().to_string(),
            reason: format!("box {:?} of order {m} has volume {volume}", b.indices()),
        });
    }
    Ok(volume.max(0.0))
}

/// Order-`m` checkerboard approximation: grid values of the source copula,
/// extended multilinearly, with its piecewise-constant density.
#[derive(Debug, Clone)]
pub struct CheckerboardCopula {
    grid: SubcopulaGrid,
    density: PiecewiseDensity,
    source: String,
}

impl CheckerboardCopula {
    pub fn grid(&self) -> &SubcopulaGrid {
        &self.grid
    }

    pub fn density(&self) -> &PiecewiseDensity {
        &self.density
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn order(&self) -> usize {
        self.grid.order()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        self.grid.multilinear_eval(u)
    }

    /// The checkerboard itself as an analytic copula.
    pub fn to_analytic(&self) -> Result<AnalyticCopula> {
        let grid = self.grid.clone();
        AnalyticCopula::new(
            format!("checkerboard(m={}) of {}", self.order(), self.source),
            self.dim(),
            move |u| grid.eval_unchecked(u),
        )
    }
}

pub fn checkerboard(c: &AnalyticCopula, m: usize) -> Result<CheckerboardCopula> {
    check_order(m)?;
    for b in BoxIndex::all(m, c.dim()) {
        copula_box_volume(c, &b, m)?;
    }
    let values = GridPoint::all(m, c.dim())
        .map(|g| {
            if g.indices().contains(&0) {
                0.0
            } else {
                (c.eval)(&g.coords())
            }
        })
        .collect();
    let grid = SubcopulaGrid::with_volume_tolerance(m, c.dim(), values, NOT_A_COPULA_TOLERANCE)
        .map_err(|e| Error::NotACopula {
            name: c.name().to_string(),
            reason: e.to_string(),
        })?;
    let density = grid.density();
    Ok(CheckerboardCopula {
        grid,
        density,
        source: c.name().to_string(),
    })
}

/// The bivariate copula that equals its own order-2 checkerboard, with
/// `α = C(1/2, 1/2) ∈ [0, 1/2]`. Box volumes are `α` on the diagonal and
/// `1/2 − α` off it.
pub fn closed_form_c2_bivariate(alpha: f64) -> Result<AnalyticCopula> {
    if !(0.0..=0.5).contains(&alpha) {
        return Err(Error::domain(format!("alpha must lie in [0, 1/2], got {alpha}")));
    }
    AnalyticCopula::new(format!("c2-bivariate(alpha={alpha})"), 2, move |p| {
        let (u, v) = (p[0], p[1]);
        let b = box_index(p, 2).expect("evaluator called inside I^2");
        match b.indices() {
            [1, 1] => 4.0 * alpha * u * v,
            [1, 2] => 2.0 * alpha * u + 4.0 * (0.5 - alpha) * u * (v - 0.5),
            [2, 1] => 2.0 * alpha * v + 4.0 * (0.5 - alpha) * (u - 0.5) * v,
            _ => alpha + (1.0 - 2.0 * alpha) * (u + v - 1.0) + 4.0 * alpha * (u - 0.5) * (v - 0.5),
        }
    })
}

/// The trivariate copula that equals its own order-2 checkerboard and has
/// uniform bivariate margins, with `α₀ = C(1/2, 1/2, 1/2) ∈ [0, 1/4]`.
pub fn closed_form_c2_trivariate(alpha0: f64) -> Result<AnalyticCopula> {
    if !(0.0..=0.25).contains(&alpha0) {
        return Err(Error::domain(format!("alpha0 must lie in [0, 1/4], got {alpha0}")));
    }
    let a8 = 8.0 * alpha0;
    AnalyticCopula::new(format!("c2-trivariate(alpha0={alpha0})"), 3, move |p| {
        let (u, v, w) = (p[0], p[1], p[2]);
        let b = box_index(p, 2).expect("evaluator called inside I^3");
        match b.indices() {
            [1, 1, 1] => a8 * u * v * w,
            [1, 1, 2] => (2.0 - a8) * u * v * w + (a8 - 1.0) * u * v,
            [1, 2, 1] => (2.0 - a8) * u * v * w + (a8 - 1.0) * u * w,
            [2, 1, 1] => (2.0 - a8) * u * v * w + (a8 - 1.0) * v * w,
            [1, 2, 2] => a8 * u * v * w + (1.0 - a8) * u * v + (1.0 - a8) * u * w + (a8 - 1.0) * u,
            [2, 1, 2] => a8 * u * v * w + (1.0 - a8) * u * v + (1.0 - a8) * v * w + (a8 - 1.0) * v,
            [2, 2, 1] => a8 * u * v * w + (1.0 - a8) * u * w + (1.0 - a8) * v * w + (a8 - 1.0) * w,
            _ => {
                let (x, y, z) = (u - 0.5, v - 0.5, w - 0.5);
                (0.5 - 2.0 * alpha0) * (x + y + z)
                    + 4.0 * alpha0 * (x * y + x * z + y * z)
                    + alpha0
                    + (2.0 - a8) * x * y * z
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn product_box_volume() {
        let pi = AnalyticCopula::product(2).unwrap();
        for b in BoxIndex::all(2, 2) {
            assert!(close(copula_box_volume(&pi, &b, 2).unwrap(), 0.25));
        }
    }

    #[test]
    fn comonotone_off_diagonal_volume() {
        let m2 = AnalyticCopula::upper_bound(2).unwrap();
        let b = BoxIndex::new(vec![1, 2], 2).unwrap();
        assert_eq!(copula_box_volume(&m2, &b, 2).unwrap(), 0.0);
        let cb = checkerboard(&m2, 2).unwrap();
        assert_eq!(cb.eval(&[0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn volume_of_first_column_second_row_is_one_ninth() {
        let b = BoxIndex::new(vec![1, 2], 3).unwrap();
        for alpha in [0.0, 0.1, 0.2, 0.25, 0.33, 0.5] {
            let c = closed_form_c2_bivariate(alpha).unwrap();
            assert!(close(copula_box_volume(&c, &b, 3).unwrap(), 1.0 / 9.0));
        }
    }

    #[test]
    fn clayton_grid_matches_evaluator() {
        let c = AnalyticCopula::clayton(2.0).unwrap();
        let cb = checkerboard(&c, 2).unwrap();
        for g in GridPoint::all(2, 2) {
            let u = g.coords();
            assert!(close(cb.eval(&u).unwrap(), c.eval(&u).unwrap()));
        }
    }

    #[test]
    fn closed_form_domain_errors() {
        assert!(matches!(closed_form_c2_bivariate(0.6), Err(Error::Domain(_))));
        assert!(matches!(closed_form_c2_bivariate(-0.1), Err(Error::Domain(_))));
        assert!(matches!(closed_form_c2_trivariate(0.3), Err(Error::Domain(_))));
    }

    #[test]
    fn quarter_alpha_is_the_product() {
        let c = closed_form_c2_bivariate(0.25).unwrap();
        for i in 0..=100 {
            for j in 0..=100 {
                let u = [i as f64 / 100.0, j as f64 / 100.0];
                assert!(close(c.eval(&u).unwrap(), u[0] * u[1]));
            }
        }
    }

    #[test]
    fn point_identities() {
        for alpha in [0.0, 0.1, 0.25, 0.4, 0.5] {
            let c = closed_form_c2_bivariate(alpha).unwrap();
            assert!(close(c.eval(&[0.25, 0.5]).unwrap(), alpha / 2.0));
            let c3 = checkerboard(&c, 3).unwrap();
            assert!(close(c3.eval(&[0.25, 0.5]).unwrap(), alpha / 3.0 + 1.0 / 24.0));
        }
        for alpha0 in [0.0, 1.0 / 16.0, 0.125, 0.25] {
            let c = closed_form_c2_trivariate(alpha0).unwrap();
            assert!(close(c.eval(&[0.25, 0.5, 0.5]).unwrap(), alpha0 / 2.0));
            let c3 = checkerboard(&c, 3).unwrap();
            let expect = 2.0 / 9.0 * alpha0 + 5.0 / 144.0;
            assert!(close(c3.eval(&[0.25, 0.5, 0.5]).unwrap(), expect));
        }
    }

    #[test]
    fn closed_forms_are_their_own_order_two_checkerboards() {
        // the branch formulas must agree with multilinear interpolation of
        // their own grid values everywhere
        for alpha in [0.0, 0.1, 0.3, 0.5] {
            let c = closed_form_c2_bivariate(alpha).unwrap();
            let cb = checkerboard(&c, 2).unwrap();
            for i in 0..=40 {
                for j in 0..=40 {
                    let u = [i as f64 / 40.0, j as f64 / 40.0];
                    assert!(close(c.eval(&u).unwrap(), cb.eval(&u).unwrap()));
                }
            }
        }
        for alpha0 in [0.0, 0.05, 0.125, 0.25] {
            let c = closed_form_c2_trivariate(alpha0).unwrap();
            let cb = checkerboard(&c, 2).unwrap();
            for i in 0..=12 {
                for j in 0..=12 {
                    for k in 0..=12 {
                        let u = [i as f64 / 12.0, j as f64 / 12.0, k as f64 / 12.0];
                        assert!(close(c.eval(&u).unwrap(), cb.eval(&u).unwrap()));
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_non_copulas() {
        // margins wrong
        assert!(matches!(
            AnalyticCopula::new("half", 2, |u| 0.5 * u[0] * u[1]),
            Err(Error::NotACopula { .. })
        ));
        // W_3 satisfies margins and bounds but is not 3-increasing
        let w3 = AnalyticCopula::new("W3", 3, |u| (u[0] + u[1] + u[2] - 2.0).max(0.0)).unwrap();
        assert!(matches!(checkerboard(&w3, 2), Err(Error::NotACopula { .. })));
    }

    #[test]
    fn density_is_scaled_volume() {
        let c = AnalyticCopula::frank(4.0).unwrap();
        let cb = checkerboard(&c, 3).unwrap();
        for b in BoxIndex::all(3, 2) {
            let v = copula_box_volume(&c, &b, 3).unwrap();
            assert!(close(cb.density().value(&b), 9.0 * v));
        }
    }
}
