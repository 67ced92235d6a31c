//! Probability laws for matrix entries.
//!
//! [`AtomicLaw`] is a finitely supported law with exact (`Rational`) or
//! floating masses. Continuous laws only exist as samplers ([`ContinuousLaw`])
//! with a numeric density for the difference `ξ - ξ'`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::rng::stream;
use crate::scalar::{parse_rational, rational, Rational, Scalar};

/// Draws rejected before [`sample_truncated`] gives up on a single index.
pub const REJECTION_RETRY_CAP: usize = 1_000_000;

/// Absolute tolerance of the quadrature used for continuous laws.
pub const QUADRATURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LawError {
    #[error("law has no atoms")]
    Empty,
    #[error("atom mass {0} is not a positive probability")]
    InvalidMass(String),
    #[error("masses sum to {0}, not 1")]
    MassSum(String),
    #[error("law has zero variance")]
    DegenerateLaw,
    #[error("standard deviation {0} is not rational; standardize a floating copy instead")]
    IrrationalScale(String),
    #[error("invalid spacing certificate: {0}")]
    InvalidCertificate(String),
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("rejection sampling exceeded {cap} retries at draw {index}")]
    RejectionDiverges { index: usize, cap: usize },
    #[error("cannot parse law literal `{0}`")]
    Parse(String),
    #[error("law `{0}` is not atomic")]
    NotAtomic(String),
}

fn cmp<T: PartialOrd>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// A finitely supported probability law in canonical form: values strictly
/// increasing, masses positive and summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicLaw<T> {
    atoms: Vec<(T, T)>,
    label: String,
}

impl<T: Scalar> AtomicLaw<T> {
    pub fn new(atoms: Vec<(T, T)>, label: impl Into<String>) -> Result<Self, LawError> {
        if atoms.is_empty() {
            return Err(LawError::Empty);
        }
        for (_, p) in &atoms {
            if !p.is_positive() || *p > T::one() {
                return Err(LawError::InvalidMass(p.to_string()));
            }
        }
        let total = atoms.iter().fold(T::zero(), |acc, (_, p)| acc + p.clone());
        let ok = if T::EXACT { total.is_one() } else { (total.to_f64() - 1.0).abs() <= 1e-12 };
        if !ok {
            return Err(LawError::MassSum(total.to_string()));
        }
        Ok(Self::canonical(atoms, label.into()))
    }

    /// Sorts, merges equal values and drops zero masses. Masses are trusted.
    pub(crate) fn canonical(mut atoms: Vec<(T, T)>, label: String) -> Self {
        atoms.retain(|(_, p)| !p.is_zero());
        atoms.sort_by(|a, b| cmp(&a.0, &b.0));
        let scale = atoms.iter().map(|(v, _)| v.abs()).fold(T::zero(), |m, x| if x > m { x } else { m });
        let mut merged: Vec<(T, T)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some((last, mass)) if T::same_atom(last, &v, &scale) => *mass = mass.clone() + p,
                _ => merged.push((v, p)),
            }
        }
        AtomicLaw { atoms: merged, label }
    }

    pub fn point(value: T) -> Self {
        AtomicLaw { label: format!("point({value})"), atoms: vec![(value, T::one())] }
    }

    /// Symmetric ±1 law.
    pub fn bernoulli() -> Self {
        let h = T::half();
        AtomicLaw { atoms: vec![(-T::one(), h.clone()), (T::one(), h)], label: "bernoulli".into() }
    }

    /// Lazy sign: ±1 with probability `mu/2` each, 0 otherwise.
    pub fn lazy_sign(mu: T) -> Result<Self, LawError> {
        if mu.is_negative() || mu > T::one() {
            return Err(LawError::InvalidMass(mu.to_string()));
        }
        let side = mu.clone() * T::half();
        let atoms = vec![(-T::one(), side.clone()), (T::zero(), T::one() - mu.clone()), (T::one(), side)];
        Ok(Self::canonical(atoms, format!("lazy({mu})")))
    }

    /// Uniform on `{-1, 0, 1}`.
    pub fn uniform3() -> Self {
        let third = T::one() / T::from_i64(3);
        let atoms = vec![(-T::one(), third.clone()), (T::zero(), third.clone()), (T::one(), third)];
        AtomicLaw { atoms, label: "uniform3".into() }
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.atoms.iter().map(|(v, _)| v)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass_of(&self, value: &T) -> T {
        self.atoms.iter().find(|(v, _)| v == value).map_or_else(T::zero, |(_, p)| p.clone())
    }

    pub fn max_mass(&self) -> T {
        self.atoms.iter().map(|(_, p)| p.clone()).fold(T::zero(), |m, p| if p > m { p } else { m })
    }

    pub fn mean(&self) -> T {
        self.atoms.iter().fold(T::zero(), |acc, (v, p)| acc + v.clone() * p.clone())
    }

    pub fn variance(&self) -> T {
        let mu = self.mean();
        self.atoms.iter().fold(T::zero(), |acc, (v, p)| {
            let d = v.clone() - mu.clone();
            acc + d.clone() * d * p.clone()
        })
    }

    /// Largest `|value|` in the support.
    pub fn max_abs(&self) -> T {
        self.values().map(|v| v.abs()).fold(T::zero(), |m, x| if x > m { x } else { m })
    }

    /// Law of `f(ξ)`.
    pub fn map_values(&self, f: impl Fn(&T) -> T) -> Self {
        let atoms = self.atoms.iter().map(|(v, p)| (f(v), p.clone())).collect();
        Self::canonical(atoms, self.label.clone())
    }

    /// Law of `ξ + η` for independent `ξ ~ self`, `η ~ other`.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut atoms = Vec::with_capacity(self.len() * other.len());
        for (a, p) in &self.atoms {
            for (b, q) in &other.atoms {
                atoms.push((a.clone() + b.clone(), p.clone() * q.clone()));
            }
        }
        Self::canonical(atoms, format!("{}*{}", self.label, other.label))
    }

    /// Total mass of atoms satisfying `pred`.
    pub fn mass_where(&self, mut pred: impl FnMut(&T) -> bool) -> T {
        self.atoms.iter().filter(|(v, _)| pred(v)).fold(T::zero(), |acc, (_, p)| acc + p.clone())
    }

    pub fn to_f64(&self) -> AtomicLaw<f64> {
        let atoms = self.atoms.iter().map(|(v, p)| (v.to_f64(), p.to_f64())).collect();
        AtomicLaw::canonical(atoms, self.label.clone())
    }

    /// Index of the atom selected by a uniform draw `u` in `[0, 1)`.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, (_, p)) in self.atoms.iter().enumerate() {
            acc += p.to_f64();
            if u < acc {
                return i;
            }
        }
        self.atoms.len() - 1
    }

    /// Precomputed floating sampler; cheap to draw from in hot loops.
    pub fn sampler(&self) -> DiscreteSampler {
        let mut acc = 0.0;
        let cdf = self
            .atoms
            .iter()
            .map(|(_, p)| {
                acc += p.to_f64();
                acc
            })
            .collect();
        DiscreteSampler { values: self.values().map(Scalar::to_f64).collect(), cdf, label: self.label.clone() }
    }
}

impl<T: Scalar> fmt::Display for AtomicLaw<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "atoms[")?;
        for (i, (v, p)) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "({v},{p})")?;
        }
        write!(f, "]")
    }
}

/// Affine rescaling to mean 0 and variance 1.
///
/// Exact laws whose standard deviation is irrational cannot be represented;
/// they return [`LawError::IrrationalScale`] and should be converted with
/// [`AtomicLaw::to_f64`] first.
pub fn standardize<T: Scalar>(law: &AtomicLaw<T>) -> Result<AtomicLaw<T>, LawError> {
    let var = law.variance();
    if law.len() < 2 || var.is_zero() {
        return Err(LawError::DegenerateLaw);
    }
    let sd = var.sqrt().ok_or_else(|| LawError::IrrationalScale(var.to_string()))?;
    let mu = law.mean();
    Ok(law.map_values(|v| (v.clone() - mu.clone()) / sd.clone()))
}

/// Exact law of `ξ - ξ'`.
pub fn difference_law<T: Scalar>(law: &AtomicLaw<T>) -> AtomicLaw<T> {
    let reflected = law.map_values(|v| -v.clone());
    law.convolve(&reflected).with_label(format!("diff({})", law.label()))
}

/// Law of `η·(ξ - ξ')` with `η` a lazy sign of parameter `mu`.
pub fn lazy_difference_law<T: Scalar>(law: &AtomicLaw<T>, mu: T) -> Result<AtomicLaw<T>, LawError> {
    if mu.is_negative() || mu > T::one() {
        return Err(LawError::InvalidMass(mu.to_string()));
    }
    // The difference law is symmetric, so η = ±1 both give it back.
    let diff = difference_law(law);
    let mut atoms: Vec<(T, T)> = diff.atoms().iter().map(|(v, p)| (v.clone(), p.clone() * mu.clone())).collect();
    atoms.push((T::zero(), T::one() - mu.clone()));
    Ok(AtomicLaw::canonical(atoms, format!("lazydiff({},{mu})", law.label())))
}

/// Witnesses `(c1, c2, c3)` for `P(c1 <= |ξ - ξ'| <= c2) >= c3`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacingCertificate<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
}

impl<T: Scalar> SpacingCertificate<T> {
    pub fn new(c1: T, c2: T, c3: T) -> Result<Self, LawError> {
        if !c1.is_positive() || c2 < c1 {
            return Err(LawError::InvalidCertificate(format!("need 0 < c1 <= c2, got c1={c1}, c2={c2}")));
        }
        if !c3.is_positive() || c3 > T::one() {
            return Err(LawError::InvalidCertificate(format!("need 0 < c3 <= 1, got {c3}")));
        }
        Ok(SpacingCertificate { c1, c2, c3 })
    }
}

/// Exact check of the spacing condition on an atomic law.
pub fn verify_spacing<T: Scalar>(law: &AtomicLaw<T>, cert: &SpacingCertificate<T>) -> bool {
    let diff = difference_law(law);
    let scale = diff.max_abs();
    let mass = diff.mass_where(|x| {
        let a = x.abs();
        T::fits(&cert.c1, &a, &scale) && T::fits(&a, &cert.c2, &scale)
    });
    T::fits(&cert.c3, &mass, &T::one())
}

/// `max_a P(ξ = a)^2 <= 1 - c3`, the atom bound implied by the spacing
/// condition (since `P(ξ = ξ') >= max_a P(ξ = a)^2`).
pub fn odlyzko_atom_bound<T: Scalar>(law: &AtomicLaw<T>, cert: &SpacingCertificate<T>) -> bool {
    let m = law.max_mass();
    T::fits(&(m.clone() * m), &(T::one() - cert.c3.clone()), &T::one())
}

/// Anything that yields iid real draws.
pub trait Sampler: Send + Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    fn label(&self) -> String;
}

#[derive(Clone, Debug)]
pub struct DiscreteSampler {
    pub values: Vec<f64>,
    cdf: Vec<f64>,
    label: String,
}

impl DiscreteSampler {
    pub fn sample_index(&self, rng: &mut dyn RngCore) -> usize {
        let u: f64 = rng.random();
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1)
    }
}

impl Sampler for DiscreteSampler {
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.values[self.sample_index(rng)]
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

impl<T: Scalar> Sampler for AtomicLaw<T> {
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.atoms[self.sample_index(rng.random())].0.to_f64()
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ContinuousLaw {
    /// Standard normal.
    Gaussian,
    Uniform { lo: f64, hi: f64 },
}

impl ContinuousLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            ContinuousLaw::Gaussian => 0.0,
            ContinuousLaw::Uniform { lo, hi } => (lo + hi) / 2.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ContinuousLaw::Gaussian => 1.0,
            ContinuousLaw::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
        }
    }

    /// Density of `ξ - ξ'`.
    pub fn difference_density(&self, x: f64) -> f64 {
        match *self {
            ContinuousLaw::Gaussian => (-x * x / 4.0).exp() / (4.0 * std::f64::consts::PI).sqrt(),
            ContinuousLaw::Uniform { lo, hi } => {
                let w = hi - lo;
                ((w - x.abs()) / (w * w)).max(0.0)
            }
        }
    }
}

impl Sampler for ContinuousLaw {
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            ContinuousLaw::Gaussian => rng.sample(StandardNormal),
            ContinuousLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    fn label(&self) -> String {
        match self {
            ContinuousLaw::Gaussian => "gaussian".into(),
            ContinuousLaw::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
        }
    }
}

/// Spacing check for a continuous law by quadrature of the difference density.
pub fn verify_spacing_continuous(law: &ContinuousLaw, cert: &SpacingCertificate<f64>) -> bool {
    let f = |x: f64| law.difference_density(x);
    let mass = 2.0 * integrate(&f, cert.c1, cert.c2, QUADRATURE_TOL);
    mass + QUADRATURE_TOL >= cert.c3
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = (a + b) / 2.0;
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, whole: f64, m: f64, fm: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1) + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    if a >= b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 50)
}

/// Seed, truncation exponent `B` and dimension `n`; draws are kept only when
/// `|x| <= n^(B+1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub truncation_exponent: f64,
    pub n: usize,
}

impl SamplerConfig {
    pub fn new(seed: u64, truncation_exponent: f64, n: usize) -> Result<Self, LawError> {
        let cfg = SamplerConfig { seed, truncation_exponent, n };
        let bound = cfg.bound();
        if n == 0 || !bound.is_finite() || bound <= 0.0 {
            return Err(LawError::InvalidConfig(format!("truncation bound n^(B+1) = {bound} for n={n}, B={truncation_exponent}")));
        }
        Ok(cfg)
    }

    pub fn bound(&self) -> f64 {
        (self.n as f64).powf(self.truncation_exponent + 1.0)
    }
}

/// `count` draws with rejection above the truncation bound. Draw `i` uses its
/// own stream keyed by `(seed, i)`, so any subset can be regenerated alone.
pub fn sample_truncated(sampler: &dyn Sampler, cfg: &SamplerConfig, count: usize) -> Result<Vec<f64>, LawError> {
    let bound = cfg.bound();
    (0..count)
        .map(|i| {
            let mut rng = stream(cfg.seed, i as u64);
            for _ in 0..REJECTION_RETRY_CAP {
                let x = sampler.sample(&mut rng);
                if x.abs() <= bound {
                    return Ok(x);
                }
            }
            Err(LawError::RejectionDiverges { index: i, cap: REJECTION_RETRY_CAP })
        })
        .collect()
}

/// Law literal accepted in configs: `bernoulli`, `lazy(mu)`, `uniform3`,
/// `gaussian` or `atoms[(v,p),...]`.
#[derive(Clone, Debug, PartialEq)]
pub enum LawSpec {
    Bernoulli,
    Lazy(Rational),
    Uniform3,
    Gaussian,
    Atoms(Vec<(Rational, Rational)>),
}

impl LawSpec {
    pub fn is_atomic(&self) -> bool {
        !matches!(self, LawSpec::Gaussian)
    }

    pub fn atomic(&self) -> Result<AtomicLaw<Rational>, LawError> {
        match self {
            LawSpec::Bernoulli => Ok(AtomicLaw::bernoulli()),
            LawSpec::Lazy(mu) => AtomicLaw::lazy_sign(mu.clone()),
            LawSpec::Uniform3 => Ok(AtomicLaw::uniform3()),
            LawSpec::Gaussian => Err(LawError::NotAtomic(self.to_string())),
            LawSpec::Atoms(atoms) => AtomicLaw::new(atoms.clone(), self.to_string()),
        }
    }

    pub fn sampler(&self) -> Result<Box<dyn Sampler>, LawError> {
        match self {
            LawSpec::Gaussian => Ok(Box::new(ContinuousLaw::Gaussian)),
            _ => Ok(Box::new(self.atomic()?.sampler())),
        }
    }

    /// Default spacing certificate: the smallest and largest nonzero gaps of
    /// `ξ - ξ'`, with `c3` their exact mass. `None` for a point mass.
    pub fn default_certificate(&self) -> Option<SpacingCertificate<f64>> {
        match self {
            // P(1 <= |ξ-ξ'| <= 3) = erf(3/2) - erf(1/2) = 0.4456 for N(0, 2).
            LawSpec::Gaussian => SpacingCertificate::new(1.0, 3.0, 0.44).ok(),
            _ => {
                let diff = difference_law(&self.atomic().ok()?);
                let positive: Vec<&(Rational, Rational)> = diff.atoms().iter().filter(|(v, _)| v.is_positive()).collect();
                let c1 = positive.first()?.0.clone();
                let c2 = positive.last()?.0.clone();
                let mass = positive.iter().fold(Rational::zero(), |acc, (_, p)| acc + p) * crate::scalar::int(2);
                SpacingCertificate::new(c1.to_f64(), c2.to_f64(), mass.to_f64()).ok()
            }
        }
    }
}

impl fmt::Display for LawSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawSpec::Bernoulli => write!(f, "bernoulli"),
            LawSpec::Lazy(mu) => write!(f, "lazy({mu})"),
            LawSpec::Uniform3 => write!(f, "uniform3"),
            LawSpec::Gaussian => write!(f, "gaussian"),
            LawSpec::Atoms(atoms) => {
                let parts: Vec<String> = atoms.iter().map(|(v, p)| format!("({v},{p})")).collect();
                write!(f, "atoms[{}]", parts.join(","))
            }
        }
    }
}

impl FromStr for LawSpec {
    type Err = LawError;

    fn from_str(s: &str) -> Result<Self, LawError> {
        let err = || LawError::Parse(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match t.as_str() {
            "bernoulli" => return Ok(LawSpec::Bernoulli),
            "uniform3" => return Ok(LawSpec::Uniform3),
            "gaussian" => return Ok(LawSpec::Gaussian),
            _ => {}
        }
        if let Some(mu) = t.strip_prefix("lazy(").and_then(|r| r.strip_suffix(')')) {
            let mu = parse_rational(mu).ok_or_else(err)?;
            if mu.is_negative() || mu > Rational::one() {
                return Err(err());
            }
            return Ok(LawSpec::Lazy(mu));
        }
        let body = t.strip_prefix("atoms[").and_then(|r| r.strip_suffix(']')).ok_or_else(err)?;
        let body = body.strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(err)?;
        let atoms = body
            .split("),(")
            .map(|pair| {
                let (v, p) = pair.split_once(',').ok_or_else(err)?;
                Ok((parse_rational(v).ok_or_else(err)?, parse_rational(p).ok_or_else(err)?))
            })
            .collect::<Result<Vec<_>, LawError>>()?;
        AtomicLaw::new(atoms.clone(), "atoms")?;
        Ok(LawSpec::Atoms(atoms))
    }
}

impl serde::Serialize for LawSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for LawSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Exact Bernoulli certificate `(2, 2, 1/2)`.
pub fn bernoulli_certificate() -> SpacingCertificate<Rational> {
    SpacingCertificate { c1: crate::scalar::int(2), c2: crate::scalar::int(2), c3: rational(1, 2) }
}
