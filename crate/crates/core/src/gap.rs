//! Generalized arithmetic progressions `g0 + k1 g1 + ... + kr gr` over an
//! integer box, with exact rational arithmetic.
//!
//! Generators may share one irrational unit `sqrt(d)`; values are then stored
//! as rational coefficients of that unit and compared exactly.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::exact::{bigint_to_i64, primitive_integer, rank_i64, rational_kernel};
use crate::scalar::{parse_rational, rational_gcd, Rational, Scalar};

/// Default limit on the number of box points any operation will visit.
pub const ENUMERATION_CAP: u128 = 10_000_000;

/// Restoration rounds allowed after each elimination step.
pub const RESTORATION_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GapError {
    #[error("coordinate {coord} = {value} outside [{lo}, {hi}]")]
    OutOfBox { coord: usize, value: i64, lo: i64, hi: i64 },
    #[error("point has {got} coordinates, GAP has rank {rank}")]
    DimensionMismatch { got: usize, rank: usize },
    #[error("volume {volume} exceeds enumeration cap {cap}")]
    VolumeTooLarge { volume: u128, cap: u128 },
    #[error("points have full rank; no integer hyperplane exists")]
    FullRank,
    #[error("lower bound exceeds upper bound in coordinate {0}")]
    InvalidBounds(usize),
    #[error("generators use different irrational units")]
    MixedUnits,
    #[error("cannot parse GAP literal: {0}")]
    Parse(String),
    #[error("GAP is not proper")]
    NotProper,
    #[error("GAP is not symmetric")]
    NotSymmetric,
    #[error("value {index} does not match its witness")]
    WitnessMismatch { index: usize },
    #[error("rank reduction stalled: {0}")]
    ReductionStalled(String),
    #[error("integer overflow in hyperplane coefficients")]
    Overflow,
}

/// Common unit of every value in a GAP.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub enum Unit {
    #[default]
    One,
    /// `sqrt(d)` for a square-free positive integer `d > 1`.
    Sqrt(u64),
}

impl Unit {
    pub fn to_f64(&self) -> f64 {
        match self {
            Unit::One => 1.0,
            Unit::Sqrt(d) => (*d as f64).sqrt(),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unit::One => write!(f, "1"),
            Unit::Sqrt(d) => write!(f, "sqrt({d})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(v)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(i64::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gap {
    pub offset: Rational,
    pub generators: Vec<Rational>,
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    pub unit: Unit,
}

impl Gap {
    pub fn new(offset: Rational, generators: Vec<Rational>, lower: Vec<i64>, upper: Vec<i64>) -> Result<Gap, GapError> {
        if lower.len() != generators.len() || upper.len() != generators.len() {
            return Err(GapError::DimensionMismatch { got: lower.len().min(upper.len()), rank: generators.len() });
        }
        if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
            return Err(GapError::InvalidBounds(i));
        }
        Ok(Gap { offset, generators, lower, upper, unit: Unit::One })
    }

    /// `{sum k_i g_i : |k_i| <= bounds_i}`.
    pub fn symmetric(generators: Vec<Rational>, bounds: Vec<i64>) -> Result<Gap, GapError> {
        let lower = bounds.iter().map(|b| -b).collect();
        Gap::new(Rational::zero(), generators, lower, bounds)
    }

    pub fn with_unit(mut self, unit: Unit) -> Gap {
        self.unit = unit;
        self
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    /// Number of box points, saturating at `u128::MAX`.
    pub fn volume(&self) -> u128 {
        self.lower.iter().zip(&self.upper).fold(1u128, |acc, (lo, hi)| acc.saturating_mul((hi - lo + 1) as u128))
    }

    pub fn is_symmetric(&self) -> bool {
        self.offset.is_zero() && self.lower.iter().zip(&self.upper).all(|(lo, hi)| *lo == -hi)
    }

    fn check_point(&self, p: &LatticePoint) -> Result<(), GapError> {
        if p.dim() != self.rank() {
            return Err(GapError::DimensionMismatch { got: p.dim(), rank: self.rank() });
        }
        for (i, &k) in p.0.iter().enumerate() {
            if k < self.lower[i] || k > self.upper[i] {
                return Err(GapError::OutOfBox { coord: i, value: k, lo: self.lower[i], hi: self.upper[i] });
            }
        }
        Ok(())
    }

    /// Value at `p`, as a coefficient of [`Gap::unit`].
    pub fn evaluate(&self, p: &LatticePoint) -> Result<Rational, GapError> {
        self.check_point(p)?;
        Ok(self.value_unchecked(&p.0))
    }

    fn value_unchecked(&self, k: &[i64]) -> Rational {
        k.iter().zip(&self.generators).fold(self.offset.clone(), |acc, (&k, g)| acc + g * Rational::from_integer(BigInt::from(k)))
    }

    pub fn value_f64(&self, coefficient: &Rational) -> f64 {
        Scalar::to_f64(coefficient) * self.unit.to_f64()
    }

    fn check_cap(&self, cap: u128) -> Result<(), GapError> {
        let volume = self.volume();
        if volume > cap {
            return Err(GapError::VolumeTooLarge { volume, cap });
        }
        Ok(())
    }

    /// Generators scaled by the common denominator, if they fit in `i128`.
    fn scaled(&self) -> Option<(Vec<i128>, i128, BigInt)> {
        let l = self.generators.iter().chain([&self.offset]).fold(BigInt::one(), |acc, g| acc.lcm(g.denom()));
        let to_i128 = |g: &Rational| (g.numer() * (&l / g.denom())).to_i128();
        let gens = self.generators.iter().map(to_i128).collect::<Option<Vec<_>>>()?;
        let off = to_i128(&self.offset)?;
        // Keep every partial sum comfortably inside i128.
        let reach: f64 = gens.iter().zip(self.lower.iter().zip(&self.upper)).map(|(g, (lo, hi))| (*g as f64).abs() * (lo.abs().max(hi.abs()) as f64)).sum::<f64>() + (off as f64).abs();
        (reach < 1e36).then_some((gens, off, l))
    }

    /// Every value over the box, with multiplicity, sorted.
    pub fn enumerate(&self) -> Result<Vec<Rational>, GapError> {
        self.enumerate_capped(ENUMERATION_CAP)
    }

    pub fn enumerate_capped(&self, cap: u128) -> Result<Vec<Rational>, GapError> {
        self.check_cap(cap)?;
        if let Some((gens, off, l)) = self.scaled() {
            let mut vals = Vec::with_capacity(self.volume() as usize);
            for_each_point(&self.lower, &self.upper, |k| vals.push(scaled_value(&gens, off, k)));
            vals.sort_unstable();
            return Ok(vals.into_iter().map(|v| Rational::new(BigInt::from(v), l.clone())).collect());
        }
        let mut vals = Vec::with_capacity(self.volume() as usize);
        for_each_point(&self.lower, &self.upper, |k| vals.push(self.value_unchecked(k)));
        vals.sort();
        Ok(vals)
    }

    /// Two distinct box points with the same value, if any.
    pub fn collision(&self) -> Result<Option<(LatticePoint, LatticePoint)>, GapError> {
        self.check_cap(ENUMERATION_CAP)?;
        let mut tagged: Vec<(Rational, Vec<i64>)> = Vec::new();
        if let Some((gens, off, _)) = self.scaled() {
            let mut fast: Vec<(i128, Vec<i64>)> = Vec::with_capacity(self.volume() as usize);
            for_each_point(&self.lower, &self.upper, |k| fast.push((scaled_value(&gens, off, k), k.to_vec())));
            fast.sort_unstable();
            return Ok(fast.windows(2).find(|w| w[0].0 == w[1].0).map(|w| (LatticePoint(w[0].1.clone()), LatticePoint(w[1].1.clone()))));
        }
        for_each_point(&self.lower, &self.upper, |k| tagged.push((self.value_unchecked(k), k.to_vec())));
        tagged.sort();
        Ok(tagged.windows(2).find(|w| w[0].0 == w[1].0).map(|w| (LatticePoint(w[0].1.clone()), LatticePoint(w[1].1.clone()))))
    }

    pub fn is_proper(&self) -> Result<bool, GapError> {
        if self.rank() == 1 && !self.generators[0].is_zero() {
            return Ok(true);
        }
        Ok(self.collision()?.is_none())
    }

    /// The box point whose value is closest to `a`, among those within `beta`.
    /// Ties go to the lexicographically smallest point.
    pub fn beta_close(&self, a: &Rational, beta: &Rational) -> Result<Option<LatticePoint>, GapError> {
        self.check_cap(ENUMERATION_CAP)?;
        let mut best: Option<(f64, Rational, Vec<i64>)> = None;
        let mut consider = |k: &[i64], coef: Rational| {
            if !within(&coef, &self.unit, a, beta) {
                return;
            }
            let dist = (self.value_f64(&coef) - Scalar::to_f64(a)).abs();
            let better = match &best {
                None => true,
                Some((d, c, _)) => match dist.partial_cmp(d).unwrap_or(Ordering::Equal) {
                    Ordering::Less => true,
                    // Float distances can tie spuriously; break exactly when the unit is rational.
                    Ordering::Equal => self.unit == Unit::One && (&coef - a).abs() < (c - a).abs(),
                    Ordering::Greater => false,
                },
            };
            if better {
                best = Some((dist, coef, k.to_vec()));
            }
        };
        match (&self.unit, self.scaled()) {
            (Unit::One, Some((gens, off, l))) => {
                let lr = Rational::from_integer(l.clone());
                let lo = ((a - beta) * &lr).ceil().to_integer().to_i128();
                let hi = ((a + beta) * &lr).floor().to_integer().to_i128();
                let (Some(lo), Some(hi)) = (lo, hi) else {
                    return Ok(None);
                };
                for_each_point(&self.lower, &self.upper, |k| {
                    let v = scaled_value(&gens, off, k);
                    if v >= lo && v <= hi {
                        consider(k, Rational::new(BigInt::from(v), l.clone()));
                    }
                });
            }
            _ => for_each_point(&self.lower, &self.upper, |k| consider(k, self.value_unchecked(k))),
        }
        Ok(best.map(|(_, _, k)| LatticePoint(k)))
    }

    /// Whether the points' coordinate vectors have full rank `r`.
    pub fn spans(&self, points: &[LatticePoint]) -> Result<bool, GapError> {
        for p in points {
            self.check_point(p)?;
        }
        let rows: Vec<Vec<i64>> = points.iter().map(|p| p.0.clone()).collect();
        Ok(rank_i64(&rows) == self.rank())
    }
}

fn scaled_value(gens: &[i128], off: i128, k: &[i64]) -> i128 {
    gens.iter().zip(k).fold(off, |acc, (g, &k)| acc + g * k as i128)
}

/// Visits every integer point of the box in lexicographic order.
fn for_each_point(lower: &[i64], upper: &[i64], mut f: impl FnMut(&[i64])) {
    let r = lower.len();
    let mut k = lower.to_vec();
    loop {
        f(&k);
        let mut i = r;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if k[i] < upper[i] {
                k[i] += 1;
                break;
            }
            k[i] = lower[i];
        }
    }
}

/// `|c·unit - a| <= beta`, exactly.
fn within(c: &Rational, unit: &Unit, a: &Rational, beta: &Rational) -> bool {
    let lo = a - beta;
    let hi = a + beta;
    cmp_unit(c, unit, &lo) != Ordering::Less && cmp_unit(c, unit, &hi) != Ordering::Greater
}

/// Compares `c·unit` with the rational `x`.
fn cmp_unit(c: &Rational, unit: &Unit, x: &Rational) -> Ordering {
    match unit {
        Unit::One => c.cmp(x),
        Unit::Sqrt(d) => {
            let (sc, sx) = (c.signum(), x.signum());
            if sc != sx {
                return sc.cmp(&sx);
            }
            let lhs = c * c * Rational::from_integer(BigInt::from(*d));
            let rhs = x * x;
            if sc.is_negative() {
                rhs.cmp(&lhs)
            } else {
                lhs.cmp(&rhs)
            }
        }
    }
}

/// A primitive integer normal vector to the span of `points` in dimension
/// `dim`, with its last nonzero entry positive. Among the kernel basis vectors
/// the lexicographically smallest is returned.
pub fn integer_hyperplane(points: &[LatticePoint], dim: usize) -> Result<Vec<i64>, GapError> {
    let rows: Vec<Vec<Rational>> = points.iter().map(|p| p.0.iter().map(|&k| Rational::from_integer(BigInt::from(k))).collect()).collect();
    let kernel = rational_kernel(&rows, dim);
    kernel
        .iter()
        .map(|v| {
            let mut a = primitive_integer(v);
            if a.iter().rev().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
                a.iter_mut().for_each(|x| *x = -x.clone());
            }
            bigint_to_i64(&a).ok_or(GapError::Overflow)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .min()
        .ok_or(GapError::FullRank)
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepKind {
    /// `g_i' = g_i - α_i w` with `w = g_pivot / α_pivot`; coordinate `pivot` dropped.
    Hyperplane { alpha: Vec<i64>, pivot: usize, w: Rational },
    /// A collision relation `d` with `|d_pivot| = 1` substituted away.
    Substitution { relation: Vec<i64>, pivot: usize },
    /// Everything folded onto the gcd of the generators.
    Collapse { generator: Rational },
    /// Zero generators removed.
    DropZero { removed: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionStep {
    pub kind: StepKind,
    pub rank_after: usize,
    pub volume_after: u128,
    /// Every witness keeps its value across the step, exactly.
    pub identity_holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub gap: Gap,
    pub witnesses: Vec<LatticePoint>,
    pub steps: Vec<ReductionStep>,
    /// Output volume over input volume.
    pub volume_inflation: f64,
}

/// Reduces a proper symmetric GAP until the witnesses of `values` span it,
/// keeping it proper and symmetric and containing every value.
pub fn rank_reduce(q: &Gap, values: &[Rational], witnesses: &[LatticePoint]) -> Result<Reduction, GapError> {
    if !q.is_symmetric() {
        return Err(GapError::NotSymmetric);
    }
    if !q.is_proper()? {
        return Err(GapError::NotProper);
    }
    if values.len() != witnesses.len() {
        return Err(GapError::WitnessMismatch { index: values.len().min(witnesses.len()) });
    }
    for (i, (v, w)) in values.iter().zip(witnesses).enumerate() {
        if q.evaluate(w)? != *v {
            return Err(GapError::WitnessMismatch { index: i });
        }
    }
    let mut state = State { gap: q.clone(), witnesses: witnesses.to_vec(), steps: Vec::new() };
    while !state.gap.spans(&state.witnesses)? {
        let alpha = integer_hyperplane(&state.witnesses, state.gap.rank())?;
        state.eliminate(&alpha);
        state.drop_zero_generators();
        state.restore()?;
    }
    let volume_inflation = state.gap.volume() as f64 / q.volume() as f64;
    Ok(Reduction { gap: state.gap, witnesses: state.witnesses, steps: state.steps, volume_inflation })
}

struct State {
    gap: Gap,
    witnesses: Vec<LatticePoint>,
    steps: Vec<ReductionStep>,
}

impl State {
    fn commit(&mut self, kind: StepKind, gap: Gap, witnesses: Vec<LatticePoint>) {
        let identity_holds = self.witnesses.iter().zip(&witnesses).all(|(old, new)| self.gap.value_unchecked(&old.0) == gap.value_unchecked(&new.0));
        debug_assert!(identity_holds, "reduction step changed a witness value");
        self.steps.push(ReductionStep { kind, rank_after: gap.rank(), volume_after: gap.volume(), identity_holds });
        self.gap = gap;
        self.witnesses = witnesses;
    }

    fn eliminate(&mut self, alpha: &[i64]) {
        let pivot = alpha.iter().rposition(|&a| a != 0).expect("hyperplane normal is nonzero");
        let w = &self.gap.generators[pivot] / Rational::from_integer(BigInt::from(alpha[pivot]));
        let generators = (0..self.gap.rank()).filter(|&i| i != pivot).map(|i| &self.gap.generators[i] - &w * Rational::from_integer(BigInt::from(alpha[i]))).collect();
        let gap = Gap { generators, lower: drop(&self.gap.lower, pivot), upper: drop(&self.gap.upper, pivot), ..self.gap.clone() };
        let witnesses = self.witnesses.iter().map(|p| LatticePoint(drop(&p.0, pivot))).collect();
        self.commit(StepKind::Hyperplane { alpha: alpha.to_vec(), pivot, w }, gap, witnesses);
    }

    fn drop_zero_generators(&mut self) {
        let removed: Vec<usize> = (0..self.gap.rank()).filter(|&i| self.gap.generators[i].is_zero()).collect();
        if removed.is_empty() {
            return;
        }
        let keep: Vec<usize> = (0..self.gap.rank()).filter(|i| !removed.contains(i)).collect();
        let pick = |v: &[i64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let gap = Gap {
            generators: keep.iter().map(|&i| self.gap.generators[i].clone()).collect(),
            lower: pick(&self.gap.lower),
            upper: pick(&self.gap.upper),
            ..self.gap.clone()
        };
        let witnesses = self.witnesses.iter().map(|p| LatticePoint(pick(&p.0))).collect();
        self.commit(StepKind::DropZero { removed }, gap, witnesses);
    }

    /// Bounded properness restoration: substitute away a collision relation
    /// with a unit coefficient, or fold onto the generator gcd.
    fn restore(&mut self) -> Result<(), GapError> {
        for _ in 0..RESTORATION_ROUNDS {
            if self.gap.volume() > ENUMERATION_CAP {
                return Err(GapError::ReductionStalled(format!("volume {} exceeds the enumeration cap", self.gap.volume())));
            }
            let Some((k, k2)) = self.gap.collision()? else {
                return Ok(());
            };
            let diff: Vec<i64> = k.0.iter().zip(&k2.0).map(|(a, b)| a - b).collect();
            let g = diff.iter().fold(0i64, |acc, &x| acc.gcd(&x));
            let d: Vec<i64> = diff.iter().map(|x| x / g).collect();
            match d.iter().rposition(|x| x.abs() == 1) {
                Some(j) => self.substitute(&d, j),
                None => self.collapse(),
            }
            self.drop_zero_generators();
        }
        if self.gap.is_proper()? {
            Ok(())
        } else {
            Err(GapError::ReductionStalled(format!("still improper after {RESTORATION_ROUNDS} restoration rounds")))
        }
    }

    /// `sum d_i g_i = 0` with `d_j = ±1` gives `g_j = -d_j sum_{i != j} d_i g_i`.
    fn substitute(&mut self, d: &[i64], j: usize) {
        let r = self.gap.rank();
        let keep: Vec<usize> = (0..r).filter(|&i| i != j).collect();
        let bound = |i: usize| self.gap.upper[i] + d[i].abs() * self.gap.upper[j];
        let upper: Vec<i64> = keep.iter().map(|&i| bound(i)).collect();
        let gap = Gap {
            generators: keep.iter().map(|&i| self.gap.generators[i].clone()).collect(),
            lower: upper.iter().map(|b| -b).collect(),
            upper,
            ..self.gap.clone()
        };
        let witnesses = self.witnesses.iter().map(|p| LatticePoint(keep.iter().map(|&i| p.0[i] - d[j] * d[i] * p.0[j]).collect())).collect();
        self.commit(StepKind::Substitution { relation: d.to_vec(), pivot: j }, gap, witnesses);
    }

    fn collapse(&mut self) {
        let h = rational_gcd(&self.gap.generators).expect("zero generators were dropped");
        let m: Vec<i64> = self.gap.generators.iter().map(|g| (g / &h).to_integer().to_i64().expect("generator multiple fits i64")).collect();
        let bound: i64 = m.iter().zip(&self.gap.upper).map(|(mi, k)| mi.abs() * k).sum();
        let gap = Gap { generators: vec![h.clone()], lower: vec![-bound], upper: vec![bound], ..self.gap.clone() };
        let witnesses = self.witnesses.iter().map(|p| LatticePoint(vec![m.iter().zip(&p.0).map(|(a, b)| a * b).sum()])).collect();
        self.commit(StepKind::Collapse { generator: h }, gap, witnesses);
    }
}

fn drop(v: &[i64], skip: usize) -> Vec<i64> {
    v.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &x)| x).collect()
}

/// Parses `c`, `c*sqrt(d)` or `sqrt(d)`.
fn parse_value(s: &str) -> Result<(Rational, Unit), GapError> {
    let err = || GapError::Parse(format!("bad value `{s}`"));
    let s = s.trim();
    let (coef, unit) = match s.find("sqrt(") {
        None => (s, Unit::One),
        Some(i) => {
            let d: u64 = s[i + 5..].strip_suffix(')').ok_or_else(err)?.trim().parse().map_err(|_| err())?;
            let coef = s[..i].trim().trim_end_matches('*').trim();
            let coef = match coef {
                "" => "1",
                "-" => "-1",
                c => c,
            };
            (coef, sqrt_unit(d))
        }
    };
    let c = parse_rational(coef).ok_or_else(err)?;
    Ok(match unit {
        Unit::Sqrt(1) => (c, Unit::One),
        u => (c, u),
    })
}

/// `sqrt(d)` with square factors pulled out is handled by the caller; here
/// perfect squares collapse to the rational unit.
fn sqrt_unit(d: u64) -> Unit {
    let r = (d as f64).sqrt().round() as u64;
    if r * r == d {
        Unit::One
    } else {
        Unit::Sqrt(d)
    }
}

fn parse_list(s: &str) -> Result<Vec<String>, GapError> {
    let body = s.trim().strip_prefix('[').and_then(|r| r.strip_suffix(']')).ok_or_else(|| GapError::Parse(format!("expected a list, got `{s}`")))?;
    if body.trim().is_empty() {
        return Ok(Vec::new());
    }
    Ok(body.split(',').map(|x| x.trim().to_string()).collect())
}

fn parse_ints(s: &str) -> Result<Vec<i64>, GapError> {
    parse_list(s)?.iter().map(|x| x.parse().map_err(|_| GapError::Parse(format!("bad bound `{x}`")))).collect()
}

impl FromStr for Gap {
    type Err = GapError;

    /// `gap{g0=0; g=[1,10]; K=[-2,-2]; K'=[2,2]}`
    fn from_str(s: &str) -> Result<Gap, GapError> {
        let body = s.trim().strip_prefix("gap{").and_then(|r| r.strip_suffix('}')).ok_or_else(|| GapError::Parse(s.to_string()))?;
        let (mut g0, mut g, mut lower, mut upper) = (None, None, None, None);
        for field in body.split(';').map(str::trim).filter(|f| !f.is_empty()) {
            let (key, value) = field.split_once('=').ok_or_else(|| GapError::Parse(format!("bad field `{field}`")))?;
            match key.trim() {
                "g0" => g0 = Some(parse_value(value)?),
                "g" => g = Some(parse_list(value)?.iter().map(|x| parse_value(x)).collect::<Result<Vec<_>, _>>()?),
                "K" => lower = Some(parse_ints(value)?),
                "K'" => upper = Some(parse_ints(value)?),
                other => return Err(GapError::Parse(format!("unknown field `{other}`"))),
            }
        }
        let g = g.ok_or_else(|| GapError::Parse("missing g".into()))?;
        let upper = upper.ok_or_else(|| GapError::Parse("missing K'".into()))?;
        let lower = lower.unwrap_or_else(|| upper.iter().map(|b| -b).collect());
        let (offset, offset_unit) = g0.unwrap_or((Rational::zero(), Unit::One));
        let mut unit = Unit::One;
        for u in g.iter().map(|(_, u)| u).chain([&offset_unit]) {
            match (&unit, u) {
                (_, Unit::One) => {}
                (Unit::One, Unit::Sqrt(_)) => unit = u.clone(),
                (Unit::Sqrt(a), Unit::Sqrt(b)) if a == b => {}
                _ => return Err(GapError::MixedUnits),
            }
        }
        if unit != Unit::One && (g.iter().any(|(c, u)| *u == Unit::One && !c.is_zero()) || (offset_unit == Unit::One && !offset.is_zero())) {
            return Err(GapError::MixedUnits);
        }
        Ok(Gap::new(offset, g.into_iter().map(|(c, _)| c).collect(), lower, upper)?.with_unit(unit))
    }
}

impl fmt::Display for Gap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |c: &Rational| match self.unit {
            Unit::One => c.to_string(),
            Unit::Sqrt(d) => format!("{c}*sqrt({d})"),
        };
        let join = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join(",");
        let gens: Vec<String> = self.generators.iter().map(show).collect();
        write!(f, "gap{{g0={}; g=[{}]; K=[{}]; K'=[{}]}}", show(&self.offset), gens.join(","), join(&self.lower), join(&self.upper))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rational};

    fn sym(g: &[i64], k: &[i64]) -> Gap {
        Gap::symmetric(g.iter().map(|&x| int(x)).collect(), k.to_vec()).unwrap()
    }

    fn pt(k: &[i64]) -> LatticePoint {
        LatticePoint(k.to_vec())
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(sym(&[1], &[3]).evaluate(&pt(&[2])).unwrap(), int(2));
        let q = sym(&[1, 10], &[2, 2]);
        assert_eq!(q.evaluate(&pt(&[1, 1])).unwrap(), int(11));
        assert_eq!(q.evaluate(&pt(&[3, 0])), Err(GapError::OutOfBox { coord: 0, value: 3, lo: -2, hi: 2 }));
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(sym(&[1], &[1]).enumerate().unwrap(), vec![int(-1), int(0), int(1)]);
        let vals = sym(&[1, 3], &[2, 2]).enumerate().unwrap();
        assert_eq!(vals.len(), 25);
        assert_eq!(vals.iter().filter(|v| **v == int(2)).count(), 2);
        let mut distinct = sym(&[1, 10], &[2, 2]).enumerate().unwrap();
        distinct.dedup();
        assert_eq!(distinct.len(), 25);
    }

    #[test]
    fn enumerate_rational_generators() {
        let q = Gap::symmetric(vec![rational(1, 2), rational(1, 3)], vec![1, 1]).unwrap();
        let vals = q.enumerate().unwrap();
        assert_eq!(vals[0], rational(-5, 6));
        assert_eq!(vals[8], rational(5, 6));
        assert!(q.is_proper().unwrap());
    }

    #[test]
    fn volume_cap() {
        let q = sym(&[1, 1000, 1_000_000], &[1000, 1000, 1000]);
        assert!(matches!(q.enumerate(), Err(GapError::VolumeTooLarge { .. })));
    }

    #[test]
    fn properness() {
        assert!(sym(&[1, 10], &[2, 2]).is_proper().unwrap());
        assert!(!sym(&[1, 3], &[2, 2]).is_proper().unwrap());
        assert!(sym(&[7], &[100]).is_proper().unwrap());
    }

    #[test]
    fn beta_close_examples() {
        let q = sym(&[1], &[3]);
        assert_eq!(q.beta_close(&rational(12, 5), &rational(1, 2)).unwrap(), Some(pt(&[2])));
        assert_eq!(q.beta_close(&rational(12, 5), &rational(3, 10)).unwrap(), None);
        let q = sym(&[1, 10], &[2, 2]);
        assert_eq!(q.beta_close(&rational(1105, 100), &rational(1, 10)).unwrap(), Some(pt(&[1, 1])));
    }

    #[test]
    fn beta_close_ties_are_lexicographic() {
        // 0.5 is equidistant from 0 and 1; both are within 1/2.
        let q = sym(&[1], &[3]);
        assert_eq!(q.beta_close(&rational(1, 2), &rational(1, 2)).unwrap(), Some(pt(&[0])));
        // 1 = 1 + 0*1 = 0 + 1*1 in an improper GAP.
        let q = sym(&[1, 1], &[1, 1]);
        assert_eq!(q.beta_close(&int(1), &int(0)).unwrap(), Some(pt(&[0, 1])));
    }

    #[test]
    fn spans_examples() {
        let q = sym(&[1, 10], &[2, 2]);
        assert!(!q.spans(&[pt(&[1, 1]), pt(&[2, 2])]).unwrap());
        assert!(q.spans(&[pt(&[1, 0]), pt(&[0, 1])]).unwrap());
        assert!(sym(&[1], &[3]).spans(&[pt(&[2])]).unwrap());
        assert!(matches!(q.spans(&[pt(&[5, 0])]), Err(GapError::OutOfBox { .. })));
    }

    #[test]
    fn hyperplanes() {
        assert_eq!(integer_hyperplane(&[pt(&[1, 1]), pt(&[2, 2])], 2).unwrap(), vec![-1, 1]);
        assert_eq!(integer_hyperplane(&[pt(&[1, 0]), pt(&[0, 1])], 2), Err(GapError::FullRank));
        // Last nonzero entry positive: (2,-1) becomes (-2,1).
        assert_eq!(integer_hyperplane(&[pt(&[2, 4])], 2).unwrap(), vec![-2, 1]);
        assert_eq!(integer_hyperplane(&[pt(&[0, 0])], 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn worked_reduction() {
        let q = sym(&[1, 10], &[2, 2]);
        let out = rank_reduce(&q, &[int(11), int(22)], &[pt(&[1, 1]), pt(&[2, 2])]).unwrap();
        assert_eq!(out.gap, sym(&[11], &[2]));
        assert_eq!(out.witnesses, vec![pt(&[1]), pt(&[2])]);
        assert_eq!(out.steps.len(), 1);
        assert!(matches!(&out.steps[0].kind, StepKind::Hyperplane { alpha, pivot: 1, w } if *alpha == vec![-1, 1] && *w == int(10)));
        assert!(out.steps[0].identity_holds);
        assert!((out.volume_inflation - 0.2).abs() < 1e-15);
    }

    #[test]
    fn reduction_no_op_and_zero() {
        let q = sym(&[1, 10], &[2, 2]);
        let out = rank_reduce(&q, &[int(1), int(10)], &[pt(&[1, 0]), pt(&[0, 1])]).unwrap();
        assert_eq!(out.gap, q);
        assert!(out.steps.is_empty());
        let out = rank_reduce(&q, &[int(0)], &[pt(&[0, 0])]).unwrap();
        assert_eq!(out.gap.rank(), 0);
        assert_eq!(out.gap.enumerate().unwrap(), vec![int(0)]);
    }

    #[test]
    fn reduction_restores_properness() {
        // Eliminating along (1,-1,2) leaves generators (-4, 8), which collide.
        let q = sym(&[1, 3, 10], &[1, 1, 1]);
        assert!(q.is_proper().unwrap());
        let witnesses = [pt(&[-1, -1, 0]), pt(&[-1, 1, 1])];
        let values: Vec<Rational> = witnesses.iter().map(|w| q.evaluate(w).unwrap()).collect();
        let out = rank_reduce(&q, &values, &witnesses).unwrap();
        assert!(out.gap.is_proper().unwrap());
        assert!(out.gap.spans(&out.witnesses).unwrap());
        for (v, w) in values.iter().zip(&out.witnesses) {
            assert_eq!(out.gap.evaluate(w).unwrap(), *v);
        }
        assert_eq!(out.gap, sym(&[-4], &[3]));
        assert!(out.steps.iter().any(|s| matches!(s.kind, StepKind::Substitution { .. })));
        assert!(out.steps.iter().all(|s| s.identity_holds));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(rank_reduce(&sym(&[1, 3], &[2, 2]), &[], &[]), Err(GapError::NotProper));
        let shifted = Gap::new(int(1), vec![int(1)], vec![-1], vec![1]).unwrap();
        assert_eq!(rank_reduce(&shifted, &[], &[]), Err(GapError::NotSymmetric));
        let q = sym(&[1, 10], &[2, 2]);
        assert_eq!(rank_reduce(&q, &[int(12)], &[pt(&[1, 1])]), Err(GapError::WitnessMismatch { index: 0 }));
    }

    #[test]
    fn literal_round_trip() {
        let q: Gap = "gap{g0=0; g=[1,10]; K=[-2,-2]; K'=[2,2]}".parse().unwrap();
        assert_eq!(q, sym(&[1, 10], &[2, 2]));
        assert_eq!(q.to_string().parse::<Gap>().unwrap(), q);
        let r: Gap = "gap{g=[1/2*sqrt(2), 3*sqrt(2)]; K'=[1,1]}".parse().unwrap();
        assert_eq!(r.unit, Unit::Sqrt(2));
        assert_eq!(r.to_string().parse::<Gap>().unwrap(), r);
        assert_eq!("gap{g=[sqrt(2), sqrt(3)]; K'=[1,1]}".parse::<Gap>(), Err(GapError::MixedUnits));
        assert_eq!("gap{g=[1, sqrt(3)]; K'=[1,1]}".parse::<Gap>(), Err(GapError::MixedUnits));
    }

    #[test]
    fn irrational_unit_closeness() {
        let r: Gap = "gap{g=[sqrt(2)]; K'=[3]}".parse().unwrap();
        // 2*sqrt(2) = 2.8284...
        assert_eq!(r.beta_close(&rational(283, 100), &rational(1, 100)).unwrap(), Some(pt(&[2])));
        assert_eq!(r.beta_close(&rational(283, 100), &rational(1, 1000)).unwrap(), None);
    }
}
