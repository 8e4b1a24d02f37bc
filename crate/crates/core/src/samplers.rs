//! Seeded generators for the null hypothesis and for the copula families
//! used in power studies.
//!
//! Archimedean families are drawn with the Marshall–Olkin frailty
//! construction `U_j = ψ(E_j / V)`, where `ψ` is the generator inverse
//! (Laplace transform of the frailty `V`) and `E_j` are i.i.d. standard
//! exponentials:
//!
//! | family  | frailty `V`                          | `ψ(t)`                              |
//! |---------|--------------------------------------|-------------------------------------|
//! | Clayton | Gamma(1/θ, 1)                        | `(1 + t)^(-1/θ)`                    |
//! | Gumbel  | positive stable, index 1/θ           | `exp(-t^(1/θ))`                     |
//! | Frank   | logarithmic series, `p = 1 - e^(-θ)` | `-ln(1 - (1 - e^(-θ)) e^(-t)) / θ`  |
//!
//! Frank with negative θ is not Archimedean-by-frailty and is only offered
//! for `d = 2`, via conditional inversion.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::estimator::{PseudoSample, RawSample};
use crate::partition::check_dim;
use crate::rng::RngSeed;

/// `d` independent uniformly random permutations of `{1, …, n}`, one per
/// axis: the exact law of the ranks of an i.i.d. continuous sample under
/// independence.
pub fn sample_null<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<PseudoSample> {
    check_dim(d)?;
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let mut ranks = vec![0u32; n * d];
    let mut perm: Vec<u32> = (1..=n as u32).collect();
    for j in 0..d {
        perm.shuffle(rng);
        for (i, &r) in perm.iter().enumerate() {
            ranks[i * d + j] = r;
        }
    }
    Ok(PseudoSample::from_ranks_unchecked(n, d, ranks))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchimedeanFamily {
    Clayton,
    Gumbel,
    Frank,
}

impl ArchimedeanFamily {
    fn check(&self, theta: f64, d: usize) -> Result<()> {
        check_dim(d)?;
        let ok = theta.is_finite()
            && match self {
                ArchimedeanFamily::Clayton => theta > 0.0,
                ArchimedeanFamily::Gumbel => theta >= 1.0,
                ArchimedeanFamily::Frank => theta > 0.0 || (theta < 0.0 && d == 2),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "theta = {theta} is outside the {self:?} domain for d = {d}"
            )))
        }
    }
}

/// Positive stable variate with Laplace transform `exp(-t^alpha)`,
/// `0 < alpha <= 1` (Chambers–Mallows–Stuck / Kanter representation).
fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha == 1.0 {
        return 1.0;
    }
    let theta = PI * rng.random::<f64>();
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * theta).sin() / theta.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * theta).sin() / e).powf((1.0 - alpha) / alpha);
    a * b
}

/// Logarithmic series variate, `P(V = k) = -p^k / (k ln(1-p))`, by Kemp's
/// LK algorithm.
fn logarithmic<R: Rng + ?Sized>(p: f64, rng: &mut R) -> f64 {
    let v: f64 = rng.random();
    if v >= p {
        return 1.0;
    }
    let u: f64 = rng.random();
    // q = 1 - (1-p)^u
    let q = -((1.0 - p).ln() * u).exp_m1();
    if v <= q * q {
        (1.0 + v.ln() / q.ln()).floor()
    } else if v <= q {
        2.0
    } else {
        1.0
    }
}

/// Frank conditional inversion for the second coordinate, any θ ≠ 0.
fn frank_conditional(theta: f64, u: f64, w: f64) -> f64 {
    let a = (-theta * u).exp();
    let g = (-theta).exp_m1();
    let x = w * g / (a - w * (a - 1.0));
    -x.ln_1p() / theta
}

/// `n` i.i.d. vectors from a d-variate Archimedean copula.
pub fn sample_archimedean<R: Rng + ?Sized>(
    family: ArchimedeanFamily,
    theta: f64,
    d: usize,
    n: usize,
    rng: &mut R,
) -> Result<RawSample> {
    family.check(theta, d)?;
    let mut data = Vec::with_capacity(n * d);
    match family {
        ArchimedeanFamily::Clayton => {
            let gamma = Gamma::new(1.0 / theta, 1.0).map_err(|e| Error::domain(e.to_string()))?;
            for _ in 0..n {
                let v: f64 = gamma.sample(rng);
                for _ in 0..d {
                    let e: f64 = Exp1.sample(rng);
                    data.push((e / v).ln_1p().mul_add(-1.0 / theta, 0.0).exp());
                }
            }
        }
        ArchimedeanFamily::Gumbel => {
            let alpha = 1.0 / theta;
            for _ in 0..n {
                let v = positive_stable(alpha, rng);
                for _ in 0..d {
                    let e: f64 = Exp1.sample(rng);
                    data.push((-(e / v).powf(alpha)).exp());
                }
            }
        }
        ArchimedeanFamily::Frank if theta > 0.0 => {
            let p = -(-theta).exp_m1();
            let scale = (-theta).exp_m1();
            for _ in 0..n {
                let v = logarithmic(p, rng);
                for _ in 0..d {
                    let e: f64 = Exp1.sample(rng);
                    data.push(-(scale * (-e / v).exp()).ln_1p() / theta);
                }
            }
        }
        ArchimedeanFamily::Frank => {
            for _ in 0..n {
                let u: f64 = rng.random();
                let w: f64 = rng.random();
                data.push(u);
                data.push(frank_conditional(theta, u, w));
            }
        }
    }
    RawSample::new(n, d, data)
}

/// Mixture `p·M₂ + (1−p)·W₂`: each point is `(U, U)` with probability `p`,
/// otherwise `(U, 1−U)`.
pub fn sample_frechet_mardia<R: Rng + ?Sized>(p: f64, n: usize, rng: &mut R) -> Result<RawSample> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("mixture weight must lie in [0, 1], got {p}")));
    }
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let comonotone = rng.random::<f64>() < p;
        data.push(u);
        data.push(if comonotone { u } else { 1.0 - u });
    }
    RawSample::new(n, 2, data)
}

/// Mixture of a Gumbel copula (weight `p`) and the same copula with the
/// second coordinate reflected.
pub fn sample_gumbel_id_mixture<R: Rng + ?Sized>(
    p: f64,
    theta: f64,
    n: usize,
    rng: &mut R,
) -> Result<RawSample> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("mixture weight must lie in [0, 1], got {p}")));
    }
    ArchimedeanFamily::Gumbel.check(theta, 2)?;
    let alpha = 1.0 / theta;
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let v = positive_stable(alpha, rng);
        let plain = rng.random::<f64>() < p;
        let e1: f64 = Exp1.sample(rng);
        let e2: f64 = Exp1.sample(rng);
        let u1 = (-(e1 / v).powf(alpha)).exp();
        let u2 = (-(e2 / v).powf(alpha)).exp();
        data.push(u1);
        data.push(if plain { u2 } else { 1.0 - u2 });
    }
    RawSample::new(n, 2, data)
}

/// A positive-definite correlation matrix, stored with its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    d: usize,
    entries: Vec<f64>,
    lower: Vec<f64>,
}

impl CorrelationMatrix {
    /// Full symmetric matrix, row-major.
    pub fn new(d: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(d)?;
        if entries.len() != d * d {
            return Err(Error::domain(format!("expected {} matrix entries", d * d)));
        }
        for i in 0..d {
            if entries[i * d + i] != 1.0 {
                return Err(Error::domain("correlation matrix diagonal must be 1"));
            }
            for j in 0..i {
                let (a, b) = (entries[i * d + j], entries[j * d + i]);
                if a != b || !(-1.0..=1.0).contains(&a) {
                    return Err(Error::domain(format!(
                        "entry ({}, {}) = {a} is not a symmetric correlation",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let lower = cholesky(d, &entries)?;
        Ok(CorrelationMatrix { d, entries, lower })
    }

    /// Same correlation `rho` for every pair.
    pub fn equicorrelation(d: usize, rho: f64) -> Result<Self> {
        check_dim(d)?;
        if !(rho > -1.0 / (d - 1) as f64 && rho < 1.0) {
            return Err(Error::domain(format!(
                "equicorrelation {rho} is not positive definite for d = {d}"
            )));
        }
        let entries = (0..d * d)
            .map(|k| if k / d == k % d { 1.0 } else { rho })
            .collect();
        Self::new(d, entries)
    }

    /// Matrix from its strict upper triangle listed row by row:
    /// `ρ12, ρ13, …, ρ1d, ρ23, …`.
    pub fn from_upper(d: usize, upper: &[f64]) -> Result<Self> {
        check_dim(d)?;
        if upper.len() != d * (d - 1) / 2 {
            return Err(Error::domain(format!(
                "expected {} upper-triangle entries for d = {d}, got {}",
                d * (d - 1) / 2,
                upper.len()
            )));
        }
        let mut entries = vec![0.0; d * d];
        let mut it = upper.iter();
        for i in 0..d {
            entries[i * d + i] = 1.0;
            for j in i + 1..d {
                let r = *it.next().expect("length checked");
                entries[i * d + j] = r;
                entries[j * d + i] = r;
            }
        }
        Self::new(d, entries)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    /// Strict upper triangle, row by row.
    pub fn upper(&self) -> Vec<f64> {
        (0..self.d)
            .flat_map(|i| (i + 1..self.d).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect()
    }

    /// Equal off-diagonal entries, if any.
    pub fn common_correlation(&self) -> Option<f64> {
        let upper = self.upper();
        let first = upper[0];
        upper.iter().all(|&r| r == first).then_some(first)
    }

    fn correlate(&self, eps: &[f64], out: &mut Vec<f64>) {
        let d = self.d;
        for i in 0..d {
            out.push((0..=i).map(|k| self.lower[i * d + k] * eps[k]).sum());
        }
    }
}

fn cholesky(d: usize, a: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let diag = a[i * d + i] - s;
                if diag <= 1e-12 {
                    return Err(Error::domain("correlation matrix is not positive definite"));
                }
                l[i * d + i] = diag.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EllipticalFamily {
    Gaussian,
    StudentT { nu: f64 },
}

/// Gaussian `Z = L ε`, or Student t `Z / sqrt(W/ν)` with `W ~ χ²(ν)`.
/// Raw (non-uniform) values are returned; ranking happens downstream.
pub fn sample_elliptical<R: Rng + ?Sized>(
    family: EllipticalFamily,
    corr: &CorrelationMatrix,
    n: usize,
    rng: &mut R,
) -> Result<RawSample> {
    let d = corr.dim();
    let chi = match family {
        EllipticalFamily::Gaussian => None,
        EllipticalFamily::StudentT { nu } => {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::domain(format!("degrees of freedom must be > 0, got {nu}")));
            }
            Some((nu, ChiSquared::new(nu).map_err(|e| Error::domain(e.to_string()))?))
        }
    };
    let mut data = Vec::with_capacity(n * d);
    let mut eps = vec![0.0; d];
    for _ in 0..n {
        eps.iter_mut().for_each(|e| *e = StandardNormal.sample(rng));
        let start = data.len();
        corr.correlate(&eps, &mut data);
        if let Some((nu, chi)) = &chi {
            let w: f64 = chi.sample(rng);
            let scale = (w / nu).sqrt();
            data[start..].iter_mut().for_each(|z| *z /= scale);
        }
    }
    RawSample::new(n, d, data)
}

/// A data-generating model with a canonical text form such as
/// `clayton:theta=2`, `gaussian:d=3,rho=0.5` or `fm:p=0.5`.
///
/// | text                               | model                                   |
/// |------------------------------------|-----------------------------------------|
/// | `indep:d=D`                        | independent uniforms                    |
/// | `clayton:theta=T[,d=D]`            | Clayton, θ > 0                          |
/// | `gumbel:theta=T[,d=D]`             | Gumbel, θ ≥ 1                           |
/// | `frank:theta=T[,d=D]`              | Frank, θ ≠ 0 (θ < 0 only for d = 2)     |
/// | `fm:p=P`                           | `p·M₂ + (1−p)·W₂`                       |
/// | `gumbel-id:p=P,theta=T`            | Gumbel / reflected Gumbel mixture       |
/// | `gaussian:d=D,rho=R`               | Gaussian, equicorrelation               |
/// | `gaussian:d=D,upper=R12/R13/…`     | Gaussian, full correlation matrix       |
/// | `t:d=D,rho=R,nu=V`                 | Student t, equicorrelation              |
/// | `t:d=D,upper=R12/R13/…,nu=V`       | Student t, full correlation matrix      |
///
/// `d` defaults to 2 for the Archimedean families.
#[derive(Debug, Clone, PartialEq)]
pub enum CopulaSamplerSpec {
    Independence { d: usize },
    Archimedean { family: ArchimedeanFamily, theta: f64, d: usize },
    FrechetMardia { p: f64 },
    GumbelIdMixture { p: f64, theta: f64 },
    Elliptical { family: EllipticalFamily, corr: CorrelationMatrix },
}

impl CopulaSamplerSpec {
    pub fn independence(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(CopulaSamplerSpec::Independence { d })
    }

    pub fn archimedean(family: ArchimedeanFamily, theta: f64, d: usize) -> Result<Self> {
        family.check(theta, d)?;
        Ok(CopulaSamplerSpec::Archimedean { family, theta, d })
    }

    pub fn frechet_mardia(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("mixture weight must lie in [0, 1], got {p}")));
        }
        Ok(CopulaSamplerSpec::FrechetMardia { p })
    }

    pub fn gumbel_id_mixture(p: f64, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("mixture weight must lie in [0, 1], got {p}")));
        }
        ArchimedeanFamily::Gumbel.check(theta, 2)?;
        Ok(CopulaSamplerSpec::GumbelIdMixture { p, theta })
    }

    pub fn gaussian_equicorr(d: usize, rho: f64) -> Result<Self> {
        Ok(CopulaSamplerSpec::Elliptical {
            family: EllipticalFamily::Gaussian,
            corr: CorrelationMatrix::equicorrelation(d, rho)?,
        })
    }

    pub fn student_t_equicorr(d: usize, rho: f64, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain(format!("degrees of freedom must be > 0, got {nu}")));
        }
        Ok(CopulaSamplerSpec::Elliptical {
            family: EllipticalFamily::StudentT { nu },
            corr: CorrelationMatrix::equicorrelation(d, rho)?,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            CopulaSamplerSpec::Independence { d } => *d,
            CopulaSamplerSpec::Archimedean { d, .. } => *d,
            CopulaSamplerSpec::FrechetMardia { .. } | CopulaSamplerSpec::GumbelIdMixture { .. } => 2,
            CopulaSamplerSpec::Elliptical { corr, .. } => corr.dim(),
        }
    }

    /// Family tag of the text form.
    pub fn family(&self) -> &'static str {
        match self {
            CopulaSamplerSpec::Independence { .. } => "indep",
            CopulaSamplerSpec::Archimedean { family, .. } => match family {
                ArchimedeanFamily::Clayton => "clayton",
                ArchimedeanFamily::Gumbel => "gumbel",
                ArchimedeanFamily::Frank => "frank",
            },
            CopulaSamplerSpec::FrechetMardia { .. } => "fm",
            CopulaSamplerSpec::GumbelIdMixture { .. } => "gumbel-id",
            CopulaSamplerSpec::Elliptical { family, .. } => match family {
                EllipticalFamily::Gaussian => "gaussian",
                EllipticalFamily::StudentT { .. } => "t",
            },
        }
    }

    /// Parameter part of the text form.
    pub fn params(&self) -> String {
        match self {
            CopulaSamplerSpec::Independence { d } => format!("d={d}"),
            CopulaSamplerSpec::Archimedean { theta, d: 2, .. } => format!("theta={theta}"),
            CopulaSamplerSpec::Archimedean { theta, d, .. } => format!("theta={theta},d={d}"),
            CopulaSamplerSpec::FrechetMardia { p } => format!("p={p}"),
            CopulaSamplerSpec::GumbelIdMixture { p, theta } => format!("p={p},theta={theta}"),
            CopulaSamplerSpec::Elliptical { family, corr } => {
                let matrix = match corr.common_correlation() {
                    Some(rho) => format!("rho={rho}"),
                    None => {
                        let upper: Vec<String> = corr.upper().iter().map(f64::to_string).collect();
                        format!("upper={}", upper.join("/"))
                    }
                };
                match family {
                    EllipticalFamily::Gaussian => format!("d={},{matrix}", corr.dim()),
                    EllipticalFamily::StudentT { nu } => format!("d={},{matrix},nu={nu}", corr.dim()),
                }
            }
        }
    }

    /// Whether the model is the independence copula.
    pub fn is_independence(&self) -> bool {
        match self {
            CopulaSamplerSpec::Independence { .. } => true,
            CopulaSamplerSpec::Archimedean { family: ArchimedeanFamily::Gumbel, theta, .. } => *theta == 1.0,
            CopulaSamplerSpec::Elliptical { corr, .. } => {
                matches!(corr.common_correlation(), Some(r) if r == 0.0)
                    && matches!(self, CopulaSamplerSpec::Elliptical { family: EllipticalFamily::Gaussian, .. })
            }
            _ => false,
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<RawSample> {
        match self {
            CopulaSamplerSpec::Independence { d } => {
                let data = (0..n * d).map(|_| rng.random::<f64>()).collect();
                RawSample::new(n, *d, data)
            }
            CopulaSamplerSpec::Archimedean { family, theta, d } => {
                sample_archimedean(*family, *theta, *d, n, rng)
            }
            CopulaSamplerSpec::FrechetMardia { p } => sample_frechet_mardia(*p, n, rng),
            CopulaSamplerSpec::GumbelIdMixture { p, theta } => sample_gumbel_id_mixture(*p, *theta, n, rng),
            CopulaSamplerSpec::Elliptical { family, corr } => sample_elliptical(*family, corr, n, rng),
        }
    }

    pub fn sample(&self, n: usize, seed: RngSeed) -> Result<RawSample> {
        self.sample_with(n, &mut seed.rng())
    }
}

impl fmt::Display for CopulaSamplerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family(), self.params())
    }
}

impl Serialize for CopulaSamplerSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CopulaSamplerSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for CopulaSamplerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::config(format!("sampler spec `{s}`: {msg}"));
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params: Vec<(&str, &str)> = Vec::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("parameter `{part}` is not key=value")))?;
            if params.iter().any(|(seen, _)| *seen == k.trim()) {
                return Err(bad(format!("parameter `{k}` given twice")));
            }
            params.push((k.trim(), v.trim()));
        }
        let allowed: &[&str] = match family {
            "indep" => &["d"],
            "clayton" | "gumbel" | "frank" => &["theta", "d"],
            "fm" => &["p"],
            "gumbel-id" => &["p", "theta"],
            "gaussian" => &["d", "rho", "upper"],
            "t" => &["d", "rho", "upper", "nu"],
            other => return Err(bad(format!("unknown family `{other}`"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(bad(format!("unexpected parameter `{k}`")));
        }
        let raw = |key: &str| params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let num = |key: &str| -> Result<Option<f64>> {
            raw(key)
                .map(|v| v.parse::<f64>().map_err(|_| bad(format!("`{key}={v}` is not a number"))))
                .transpose()
        };
        let need = |key: &str| -> Result<f64> { num(key)?.ok_or_else(|| bad(format!("missing `{key}`"))) };
        let dim = |default: Option<usize>| -> Result<usize> {
            match raw("d") {
                Some(v) => v.parse().map_err(|_| bad(format!("`d={v}` is not an integer"))),
                None => default.ok_or_else(|| bad("missing `d`".into())),
            }
        };
        let corr = |d: usize| -> Result<CorrelationMatrix> {
            match (num("rho")?, raw("upper")) {
                (Some(rho), None) => CorrelationMatrix::equicorrelation(d, rho),
                (None, Some(upper)) => {
                    let values = upper
                        .split('/')
                        .map(|v| v.parse::<f64>().map_err(|_| bad(format!("`{v}` is not a number"))))
                        .collect::<Result<Vec<_>>>()?;
                    CorrelationMatrix::from_upper(d, &values)
                }
                _ => Err(bad("give exactly one of `rho` and `upper`".into())),
            }
        };
        match family {
            "indep" => CopulaSamplerSpec::independence(dim(None)?),
            "clayton" => CopulaSamplerSpec::archimedean(ArchimedeanFamily::Clayton, need("theta")?, dim(Some(2))?),
            "gumbel" => CopulaSamplerSpec::archimedean(ArchimedeanFamily::Gumbel, need("theta")?, dim(Some(2))?),
            "frank" => CopulaSamplerSpec::archimedean(ArchimedeanFamily::Frank, need("theta")?, dim(Some(2))?),
            "fm" => CopulaSamplerSpec::frechet_mardia(need("p")?),
            "gumbel-id" => CopulaSamplerSpec::gumbel_id_mixture(need("p")?, need("theta")?),
            "gaussian" => Ok(CopulaSamplerSpec::Elliptical {
                family: EllipticalFamily::Gaussian,
                corr: corr(dim(None)?)?,
            }),
            _ => {
                let nu = need("nu")?;
                if !(nu > 0.0 && nu.is_finite()) {
                    return Err(bad(format!("degrees of freedom must be > 0, got {nu}")));
                }
                Ok(CopulaSamplerSpec::Elliptical {
                    family: EllipticalFamily::StudentT { nu },
                    corr: corr(dim(None)?)?,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::frequency_tensor;
    use crate::partition::BoxIndex;

    #[test]
    fn null_sample_is_deterministic_permutation() {
        let a = sample_null(3, 12, &mut RngSeed::new(5, 0).rng()).unwrap();
        let b = sample_null(3, 12, &mut RngSeed::new(5, 0).rng()).unwrap();
        assert_eq!(a, b);
        assert!(PseudoSample::from_ranks(12, 3, a.ranks().to_vec()).is_ok());
    }

    #[test]
    fn null_corner_frequency_is_unbiased() {
        // s_{1,1} at m = 2 has mean 1/4; its variance is estimated from the draws
        let reps = 10_000;
        let b = BoxIndex::new(vec![1, 1], 2).unwrap();
        let draws: Vec<f64> = (0..reps)
            .map(|r| {
                let ps = sample_null(2, 12, &mut RngSeed::new(99, r).rng()).unwrap();
                frequency_tensor(&ps, 2).unwrap().frequency(&b)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / reps as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - 0.25).abs() < 4.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn frechet_mardia_extremes() {
        let mut rng = RngSeed::new(1, 0).rng();
        let diag = sample_frechet_mardia(1.0, 200, &mut rng).unwrap();
        assert!((0..200).all(|i| diag.row(i)[0] == diag.row(i)[1]));
        let anti = sample_frechet_mardia(0.0, 200, &mut rng).unwrap();
        assert!((0..200).all(|i| anti.row(i)[0] == 1.0 - anti.row(i)[1]));
        assert!(sample_frechet_mardia(1.5, 10, &mut rng).is_err());
    }

    #[test]
    fn domain_errors() {
        let mut rng = RngSeed::new(1, 0).rng();
        assert!(sample_archimedean(ArchimedeanFamily::Clayton, 0.0, 2, 5, &mut rng).is_err());
        assert!(sample_archimedean(ArchimedeanFamily::Gumbel, 0.5, 2, 5, &mut rng).is_err());
        assert!(sample_archimedean(ArchimedeanFamily::Frank, -2.0, 3, 5, &mut rng).is_err());
        assert!(sample_archimedean(ArchimedeanFamily::Frank, -2.0, 2, 5, &mut rng).is_ok());
        assert!(CorrelationMatrix::equicorrelation(3, -0.6).is_err());
        assert!(CorrelationMatrix::equicorrelation(3, -0.4).is_ok());
        assert!(CorrelationMatrix::from_upper(3, &[0.9, 0.9, -0.9]).is_err());
    }

    #[test]
    fn archimedean_output_is_in_unit_cube() {
        let mut rng = RngSeed::new(3, 0).rng();
        for (fam, theta) in [
            (ArchimedeanFamily::Clayton, 0.5),
            (ArchimedeanFamily::Clayton, 8.0),
            (ArchimedeanFamily::Gumbel, 1.0),
            (ArchimedeanFamily::Gumbel, 6.0),
            (ArchimedeanFamily::Frank, 0.3),
            (ArchimedeanFamily::Frank, 25.0),
        ] {
            let s = sample_archimedean(fam, theta, 4, 500, &mut rng).unwrap();
            for i in 0..500 {
                assert!(s.row(i).iter().all(|u| (0.0..=1.0).contains(u)), "{fam:?} {theta}");
            }
        }
    }

    #[test]
    fn logarithmic_series_mean() {
        // E[V] = -p / ((1 - p) ln(1 - p))
        let p: f64 = 0.8;
        let mut rng = RngSeed::new(11, 0).rng();
        let reps = 200_000;
        let mean = (0..reps).map(|_| logarithmic(p, &mut rng)).sum::<f64>() / reps as f64;
        let expect = -p / ((1.0 - p) * (1.0 - p).ln());
        assert!((mean - expect).abs() < 0.03, "{mean} vs {expect}");
    }

    #[test]
    fn positive_stable_laplace_transform() {
        // E[exp(-t V)] = exp(-t^alpha)
        let alpha = 0.5;
        let mut rng = RngSeed::new(12, 0).rng();
        let reps = 200_000;
        for t in [0.5, 1.0, 2.0] {
            let lt = (0..reps)
                .map(|_| (-t * positive_stable(alpha, &mut rng)).exp())
                .sum::<f64>()
                / reps as f64;
            assert!((lt - (-(t as f64).powf(alpha)).exp()).abs() < 0.005, "t={t}: {lt}");
        }
    }

    #[test]
    fn text_form_roundtrip() {
        for text in [
            "indep:d=3",
            "clayton:theta=2",
            "gumbel:theta=2.5,d=3",
            "frank:theta=-4",
            "fm:p=0.5",
            "gumbel-id:p=0.5,theta=3",
            "gaussian:d=3,rho=0.5",
            "gaussian:d=3,upper=0.5/0/0",
            "t:d=4,rho=0.3,nu=4",
        ] {
            let spec: CopulaSamplerSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert!("clayton:theta=-1".parse::<CopulaSamplerSpec>().is_err());
        assert!("gaussian:d=3".parse::<CopulaSamplerSpec>().is_err());
        assert!("fm:p=0.5,q=1".parse::<CopulaSamplerSpec>().is_err());
        assert!("beta:a=1".parse::<CopulaSamplerSpec>().is_err());
    }

    #[test]
    fn spec_sampling_is_deterministic() {
        let spec: CopulaSamplerSpec = "t:d=3,rho=0.4,nu=4".parse().unwrap();
        let a = spec.sample(50, RngSeed::new(8, 2)).unwrap();
        let b = spec.sample(50, RngSeed::new(8, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.d(), 3);
    }
}
