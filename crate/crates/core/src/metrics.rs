//! Discrepancies between a sample copula and the independence reference, and
//! the η statistics averaging them over partition orders 2 and 3.
//!
//! TV, Hellinger and KL compare the piecewise-constant density with the
//! uniform density on `I^d`. The sup distance compares the multilinear
//! extension of a subcopula grid with `Π_d`; on each box the difference is
//! multilinear in every coordinate, so its extremes sit at the box vertices
//! and the maximum over grid points is the exact supremum.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{frequency_tensor, sample_copula_density, subcopula_grid, FrequencyTensor, PseudoSample};
use crate::partition::{ipow, GridPoint, PiecewiseDensity, SubcopulaGrid};

/// Partition orders averaged by the η statistics.
pub const ETA_ORDERS: [usize; 2] = [2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatisticKind {
    #[serde(rename = "tv")]
    TotalVariation,
    #[serde(rename = "hellinger")]
    Hellinger,
    #[serde(rename = "sup")]
    Supremum,
    #[serde(rename = "kl")]
    KullbackLeibler,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 4] = [
        StatisticKind::TotalVariation,
        StatisticKind::Hellinger,
        StatisticKind::Supremum,
        StatisticKind::KullbackLeibler,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StatisticKind::TotalVariation => "tv",
            StatisticKind::Hellinger => "hellinger",
            StatisticKind::Supremum => "sup",
            StatisticKind::KullbackLeibler => "kl",
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StatisticKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown statistic `{s}` (expected tv, hellinger, sup or kl)")))
    }
}

/// An observed η value together with the sample shape it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticValue {
    pub kind: StatisticKind,
    pub value: f64,
    pub n: usize,
    pub d: usize,
}

/// Total variation distance between two piecewise densities on the same partition.
pub fn total_variation(f: &PiecewiseDensity, g: &PiecewiseDensity) -> Result<f64> {
    if f.order() != g.order() || f.dim() != g.dim() {
        return Err(Error::domain("densities live on different partitions"));
    }
    let sum: f64 = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(0.5 * sum * f.box_measure())
}

/// `½ ∫ |f − 1| dλ`.
pub fn tv_to_uniform(f: &PiecewiseDensity) -> f64 {
    0.5 * f.values().iter().map(|v| (v - 1.0).abs()).sum::<f64>() * f.box_measure()
}

/// `(1/√2) (∫ (√f − 1)² dλ)^½`.
pub fn hellinger_to_uniform(f: &PiecewiseDensity) -> f64 {
    let sq: f64 = f
        .values()
        .iter()
        .map(|v| {
            let r = v.sqrt() - 1.0;
            r * r
        })
        .sum();
    (sq * f.box_measure()).sqrt() / std::f64::consts::SQRT_2
}

/// `∫ f ln f dλ` with `0 ln 0 = 0`.
pub fn kl_to_uniform(f: &PiecewiseDensity) -> f64 {
    let sum: f64 = f
        .values()
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum();
    // exact uniform densities can leave -0.0 or tiny negative rounding
    (sum * f.box_measure()).max(0.0)
}

/// `sup |T̃(u) − Π_d(u)|` over `I^d`, attained at a grid point.
pub fn sup_to_independence(t: &SubcopulaGrid) -> f64 {
    GridPoint::all(t.order(), t.dim())
        .zip(t.values())
        .map(|(g, &v)| (v - g.coords().iter().product::<f64>()).abs())
        .fold(0.0, f64::max)
}

/// The chosen discrepancy of the order-`m` sample copula.
pub fn discrepancy(ps: &PseudoSample, m: usize, kind: StatisticKind) -> Result<f64> {
    let s = frequency_tensor(ps, m)?;
    Ok(match kind {
        StatisticKind::TotalVariation => tv_to_uniform(&sample_copula_density(&s)),
        StatisticKind::Hellinger => hellinger_to_uniform(&sample_copula_density(&s)),
        StatisticKind::KullbackLeibler => kl_to_uniform(&sample_copula_density(&s)),
        StatisticKind::Supremum => sup_to_independence(&subcopula_grid(&s)),
    })
}

/// `Σ_b |m^d·count_b − n|`, so that `D_TV = A / (2 n m^d)`.
fn tv_numerator(s: &FrequencyTensor) -> u128 {
    let scale = ipow(s.order(), s.dim()) as i128;
    let n = s.n() as i128;
    s.counts().iter().map(|&c| (scale * c as i128 - n).unsigned_abs()).sum()
}

/// `max_g |m^d·n·T(g) − n·Π_j i_j|`, so that `D_sup = S / (n m^d)`.
fn sup_numerator(s: &FrequencyTensor) -> u128 {
    let t = subcopula_grid(s);
    let n = s.n() as i128;
    GridPoint::all(t.order(), t.dim())
        .map(|g| {
            let (num, _) = t.exact_at(&g).expect("count-based grid");
            let prod: i128 = g.indices().iter().map(|&i| i as i128).product();
            (num as i128 * ipow(t.order(), t.dim()) as i128 - n * prod).unsigned_abs()
        })
        .max()
        .unwrap_or(0)
}

/// η = (D₂ + D₃)/2. Requires `6 | n`.
///
/// TV and sup are rationals with denominator dividing `4 n 6^d`; they are
/// evaluated from that exact numerator so equal values compare equal, which
/// matters for the ties their discrete null laws produce.
pub fn eta_statistic(ps: &PseudoSample, kind: StatisticKind) -> Result<StatisticValue> {
    let (n, d) = (ps.n(), ps.d());
    if n % 6 != 0 {
        return Err(Error::Divisibility { n, divisor: 6 });
    }
    let value = match kind {
        StatisticKind::TotalVariation | StatisticKind::Supremum => {
            let numerator = |m| -> Result<u128> {
                let s = frequency_tensor(ps, m)?;
                Ok(match kind {
                    StatisticKind::TotalVariation => tv_numerator(&s),
                    _ => 2 * sup_numerator(&s),
                })
            };
            // D₂ + D₃ = (3^d A₂ + 2^d A₃) / (2 n 6^d)
            let (a2, a3) = (numerator(2)?, numerator(3)?);
            let num = ipow(3, d) as u128 * a2 + ipow(2, d) as u128 * a3;
            num as f64 / (4 * n as u128 * ipow(6, d) as u128) as f64
        }
        _ => {
            let mut total = 0.0;
            for m in ETA_ORDERS {
                total += discrepancy(ps, m, kind)?;
            }
            total / ETA_ORDERS.len() as f64
        }
    };
    Ok(StatisticValue { kind, value, n, d })
}
