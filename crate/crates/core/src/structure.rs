//! Structural side of the inverse Littlewood-Offord theory: the row matrix
//! `R`, the bipartition mask `A_U`, the decoupling inequality, and a bounded
//! rank <= 2 search for a GAP covering the coefficients of a linear form.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::eigen::{singular_values, EigenError};
use crate::exact::det_i64;
use crate::gap::{Gap, GapError, LatticePoint, Unit};
use crate::laws::{difference_law, AtomicLaw};
use crate::matrix::Matrix;
use crate::scalar::{Rational, Scalar};
use crate::smallball::{bilinear_law, linear_small_ball_exact, quadratic_small_ball_exact, window_mass, window_sup, LinearForm, QuadraticForm, SmallBallError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructureError {
    #[error("index {0} lies in both I and I0")]
    Overlap(usize),
    #[error("invalid row matrix spec: {0}")]
    InvalidSpec(String),
    #[error("entry {entry} exceeds the declared bound {bound}")]
    BoundExceeded { entry: i64, bound: f64 },
    #[error(transparent)]
    SmallBall(#[from] SmallBallError),
    #[error(transparent)]
    Gap(#[from] GapError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// Fields of the row matrix `R`; indices are 1-based. `coeffs[t][s]` is the
/// entry for the `t`-th index of `I` and the `s`-th index of `I0p ++ I0pp`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RowMatrixSpec {
    pub n: usize,
    #[serde(rename = "I")]
    pub rows: Vec<usize>,
    #[serde(rename = "I0p")]
    pub cols_plus: Vec<usize>,
    #[serde(rename = "I0pp", default)]
    pub cols_minus: Vec<usize>,
    pub k: i64,
    pub coeffs: Vec<Vec<i64>>,
    /// Entries must satisfy `|entry| <= n^C` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_exponent: Option<f64>,
}

/// `R_ii = k` on `I`, `1` elsewhere on the diagonal, `R_ij = k_ij` for
/// `j in I0'` and `-k_ij` for `j in I0''`, zero otherwise.
pub fn build_row_matrix(spec: &RowMatrixSpec) -> Result<Matrix<i64>, StructureError> {
    let n = spec.n;
    let all = spec.rows.iter().chain(&spec.cols_plus).chain(&spec.cols_minus);
    if let Some(&bad) = all.clone().find(|&&i| i == 0 || i > n) {
        return Err(StructureError::InvalidSpec(format!("index {bad} outside 1..={n}")));
    }
    let cols: Vec<usize> = spec.cols_plus.iter().chain(&spec.cols_minus).copied().collect();
    if let Some(&i) = spec.rows.iter().find(|i| cols.contains(i)) {
        return Err(StructureError::Overlap(i));
    }
    let distinct = |v: &[usize]| v.iter().collect::<BTreeSet<_>>().len() == v.len();
    if !distinct(&spec.rows) || !distinct(&cols) {
        return Err(StructureError::InvalidSpec("repeated index".into()));
    }
    if spec.k == 0 {
        return Err(StructureError::InvalidSpec("k must be nonzero".into()));
    }
    if spec.coeffs.len() != spec.rows.len() || spec.coeffs.iter().any(|r| r.len() != cols.len()) {
        return Err(StructureError::InvalidSpec(format!("coeffs must be {} x {}", spec.rows.len(), cols.len())));
    }
    if let Some(c) = spec.bound_exponent {
        let bound = (n as f64).powf(c);
        if let Some(&entry) = spec.coeffs.iter().flatten().chain([&spec.k]).find(|e| e.abs() as f64 > bound) {
            return Err(StructureError::BoundExceeded { entry, bound });
        }
    }
    let mut r = Matrix::<i64>::from_fn(n, n, |i, j| i64::from(i == j));
    for (t, &i) in spec.rows.iter().enumerate() {
        r.set(i - 1, i - 1, spec.k);
        for (s, &j) in cols.iter().enumerate() {
            let sign = if s < spec.cols_plus.len() { 1 } else { -1 };
            r.set(i - 1, j - 1, sign * spec.coeffs[t][s]);
        }
    }
    Ok(r)
}

/// `|det R|` and `|k|^|I|`, exactly.
pub fn row_matrix_determinant(spec: &RowMatrixSpec) -> Result<(BigInt, BigInt), StructureError> {
    let r = build_row_matrix(spec)?;
    let expected = num_traits::pow(BigInt::from(spec.k).abs(), spec.rows.len());
    Ok((det_i64(&r).abs(), expected))
}

/// Whether every singular value of `r` lies in `[n^-c, n^c]`.
pub fn conditioning_check(r: &Matrix<i64>, c: f64) -> Result<bool, StructureError> {
    let n = r.rows() as f64;
    let s = singular_values(&r.map(|&x| x as f64))?;
    let (lo, hi) = (n.powf(-c), n.powf(c));
    Ok(s.iter().all(|&x| x >= lo && x <= hi))
}

/// The index set `U` of a bipartition, as a membership mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    pub members: Vec<bool>,
}

impl Bipartition {
    /// From 0-based member indices.
    pub fn from_indices(n: usize, u: &[usize]) -> Bipartition {
        let mut members = vec![false; n];
        for &i in u {
            members[i] = true;
        }
        Bipartition { members }
    }

    /// Each index joins `U` independently with probability 1/2.
    pub fn random(n: usize, rng: &mut dyn RngCore) -> Bipartition {
        Bipartition { members: (0..n).map(|_| rng.random::<bool>()).collect() }
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }
}

/// `a` restricted to the two off-diagonal blocks `U x U^c` and `U^c x U`.
pub fn bipartition_matrix<T: Scalar>(a: &Matrix<T>, u: &Bipartition) -> Matrix<T> {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| if u.members[i] != u.members[j] { a.get(i, j).clone() } else { T::zero() })
}

/// `(2π)^{7/2} e^{4π}`.
pub fn decoupling_constant() -> f64 {
    (2.0 * PI).powf(3.5) * (4.0 * PI).exp()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecouplingRecord {
    pub rho_quad: f64,
    /// `rho_quad^8 / ((2π)^{7/2} e^{4π})`.
    pub lhs: f64,
    /// Bilinear small-ball of `A_U` under `v, w ~ ξ - ξ'` at `radius`.
    pub rhs: f64,
    /// Mass of the same bilinear form in `[-radius, radius]`.
    pub rhs_centered: f64,
    pub radius: f64,
    pub radius_constant: f64,
    pub holds: bool,
}

struct DecouplingSides<T> {
    rho_quad: T,
    bilinear: AtomicLaw<T>,
    beta: f64,
    n: usize,
}

fn decoupling_sides<T: Scalar>(form: &QuadraticForm<T>, law: &AtomicLaw<T>, beta: &T, u: &Bipartition) -> Result<DecouplingSides<T>, StructureError> {
    let rho_quad = quadratic_small_ball_exact(form, law, beta)?.rho;
    let masked = QuadraticForm::unshifted(bipartition_matrix(&form.a, u))?;
    let diff = difference_law(law);
    let bilinear = bilinear_law(&masked, &diff, &diff)?;
    Ok(DecouplingSides { rho_quad, bilinear, beta: beta.to_f64(), n: form.n() })
}

impl<T: Scalar> DecouplingSides<T> {
    fn record(&self, radius_constant: f64) -> DecouplingRecord {
        let radius = radius_constant * self.beta * (self.n as f64).ln().sqrt();
        let r = T::from_f64(radius).unwrap_or_else(T::zero);
        let rhs = window_sup(&self.bilinear, &r).rho.to_f64();
        let rhs_centered = window_mass(&self.bilinear, &T::zero(), &r).to_f64();
        let rho = self.rho_quad.to_f64();
        let lhs = rho.powi(8) / decoupling_constant();
        DecouplingRecord { rho_quad: rho, lhs, rhs, rhs_centered, radius, radius_constant, holds: rhs >= lhs }
    }
}

/// Both sides of the decoupling inequality by exact enumeration.
pub fn verify_decoupling<T: Scalar>(form: &QuadraticForm<T>, law: &AtomicLaw<T>, beta: &T, u: &Bipartition, radius_constant: f64) -> Result<DecouplingRecord, StructureError> {
    Ok(decoupling_sides(form, law, beta, u)?.record(radius_constant))
}

pub const RADIUS_CONSTANTS: [f64; 3] = [1.0, 2.0, 4.0];

/// The record at the smallest radius constant in [`RADIUS_CONSTANTS`] for which
/// the inequality holds, or the record at the largest one if none does.
pub fn decoupling_scan<T: Scalar>(form: &QuadraticForm<T>, law: &AtomicLaw<T>, beta: &T, u: &Bipartition) -> Result<DecouplingRecord, StructureError> {
    let sides = decoupling_sides(form, law, beta, u)?;
    let mut last = None;
    for rc in RADIUS_CONSTANTS {
        let rec = sides.record(rc);
        if rec.holds {
            return Ok(rec);
        }
        last = Some(rec);
    }
    Ok(last.expect("at least one radius constant"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseSearchParams {
    /// 1 or 2.
    pub rank_cap: usize,
    /// Coefficients allowed to stay uncovered (`n'`).
    pub closeness_budget: usize,
    /// Largest admissible GAP volume.
    pub size_cap: u128,
    /// Distinct coefficient magnitudes tried as base generators.
    pub max_pivots: usize,
}

impl Default for InverseSearchParams {
    fn default() -> Self {
        InverseSearchParams { rank_cap: 2, closeness_budget: 0, size_cap: 1000, max_pivots: 24 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseSearchResult {
    pub gap: Option<Gap>,
    /// Lattice point of each coefficient that is β-close to the GAP.
    pub assignments: Vec<Option<LatticePoint>>,
    pub coverage: usize,
    pub required: usize,
    pub candidates: usize,
}

#[derive(Clone, Debug)]
struct Candidate {
    volume: u128,
    generators: Vec<Rational>,
    bounds: Vec<i64>,
}

/// Convergent denominators of `x` up to `qmax`.
fn convergent_denominators(x: f64, qmax: u64) -> Vec<u64> {
    let (mut q0, mut q1) = (0u64, 1u64);
    let mut out = vec![1];
    let mut r = x.abs();
    for _ in 0..64 {
        let a = r.floor();
        let frac = r - a;
        if frac < 1e-12 {
            break;
        }
        r = 1.0 / frac;
        let a = r.floor();
        if a > qmax as f64 {
            break;
        }
        let q2 = (a as u64).saturating_mul(q1).saturating_add(q0);
        if q2 > qmax {
            break;
        }
        out.push(q2);
        (q0, q1) = (q1, q2);
    }
    out
}

/// Simplest rational in the closed interval `[lo, hi]`, `0 < lo <= hi`.
fn simplest_between(lo: &Rational, hi: &Rational) -> Rational {
    let fl = lo.floor();
    if *lo == fl {
        return fl;
    }
    let up = &fl + Rational::one();
    if up <= *hi {
        return up;
    }
    let inner = simplest_between(&(hi - &fl).recip(), &(lo - &fl).recip());
    fl + inner.recip()
}

fn snap(g: f64, tol: f64) -> Rational {
    let exact = Rational::from_float(g).expect("finite generator");
    if tol <= 0.0 || tol >= g {
        return exact;
    }
    let lo = Rational::from_float(g - tol).expect("finite");
    let hi = Rational::from_float(g + tol).expect("finite");
    simplest_between(&lo, &hi)
}

fn close(a: f64, v: f64, beta: f64) -> bool {
    (a - v).abs() <= beta + 1e-12 * a.abs().max(1.0)
}

/// Covering bound: the `required`-th smallest entry of `needs`.
fn bound_for(mut needs: Vec<i64>, required: usize) -> Option<i64> {
    if needs.len() < required {
        return None;
    }
    needs.sort_unstable();
    Some(if required == 0 { 0 } else { needs[required - 1] })
}

/// Searches for a proper symmetric GAP of rank at most `rank_cap` and volume at
/// most `size_cap` to which all but `closeness_budget` coefficients are
/// β-close. Generators are `|a_p| / q` for pivot coefficients `a_p` and
/// continued-fraction denominators `q <= sqrt(n')`, snapped to the simplest
/// nearby rational.
pub fn inverse_lo_search(form: &LinearForm<f64>, beta: f64, params: &InverseSearchParams) -> InverseSearchResult {
    let a = &form.coeffs;
    let n = a.len();
    let required = n.saturating_sub(params.closeness_budget);
    let qmax = ((params.closeness_budget as f64).sqrt().floor() as u64).max(1);

    let mut pivots: Vec<f64> = a.iter().map(|x| x.abs()).filter(|x| *x > 0.0).collect();
    pivots.sort_by(f64::total_cmp);
    pivots.dedup();
    pivots.truncate(params.max_pivots);

    let mut denominators = BTreeSet::new();
    for &p in &pivots {
        for &x in a {
            denominators.extend(convergent_denominators(x / p, qmax));
        }
    }
    let snap_tol = beta / (2.0 * params.size_cap as f64);
    let mut generators: Vec<Rational> = pivots.iter().flat_map(|&p| denominators.iter().map(move |&q| snap(p / q as f64, snap_tol))).collect();
    generators.sort();
    generators.dedup();

    let gens_f: Vec<f64> = generators.iter().map(Scalar::to_f64).collect();
    let mut candidates: Vec<Candidate> = (0..generators.len())
        .into_par_iter()
        .filter_map(|gi| {
            let g = gens_f[gi];
            let needs: Vec<i64> = a.iter().filter_map(|&x| {
                let k = (x / g).round();
                (close(x, k * g, beta) && k.abs() < 1e15).then_some(k.abs() as i64)
            }).collect();
            let k = bound_for(needs, required)?;
            let volume = (2 * k as u128) + 1;
            (volume <= params.size_cap).then(|| Candidate { volume, generators: vec![generators[gi].clone()], bounds: vec![k] })
        })
        .collect();

    if params.rank_cap >= 2 {
        let k2_max = ((params.size_cap / 3).saturating_sub(1) / 2) as i64;
        let pairs: Vec<(usize, usize)> = (0..generators.len()).flat_map(|i| (i + 1..generators.len()).map(move |j| (i, j))).collect();
        let rank2: Vec<Candidate> = pairs
            .par_iter()
            .filter_map(|&(i, j)| {
                let (g1, g2) = (gens_f[i], gens_f[j]);
                let mut best: Option<Candidate> = None;
                for k2 in 1..=k2_max {
                    let needs: Vec<i64> = a.iter().filter_map(|&x| {
                        (-k2..=k2).filter_map(|m| {
                            let k1 = ((x - m as f64 * g2) / g1).round();
                            (close(x, k1 * g1 + m as f64 * g2, beta) && k1.abs() < 1e15).then_some(k1.abs() as i64)
                        }).min()
                    }).collect();
                    let Some(k1) = bound_for(needs, required) else { continue };
                    if k1 == 0 {
                        continue;
                    }
                    let volume = (2 * k1 as u128 + 1) * (2 * k2 as u128 + 1);
                    if volume <= params.size_cap && best.as_ref().is_none_or(|b| volume < b.volume) {
                        best = Some(Candidate { volume, generators: vec![generators[i].clone(), generators[j].clone()], bounds: vec![k1, k2] });
                    }
                }
                best
            })
            .collect();
        candidates.extend(rank2);
    }

    candidates.sort_by(|x, y| x.volume.cmp(&y.volume).then_with(|| x.generators.cmp(&y.generators)));
    let total = candidates.len();
    let exact_a: Vec<Rational> = a.iter().map(|&x| Rational::from_float(x).expect("finite coefficient")).collect();
    let exact_beta = Rational::from_float(beta).expect("finite radius");
    for cand in candidates {
        let Ok(gap) = Gap::symmetric(cand.generators, cand.bounds) else { continue };
        if !gap.is_proper().unwrap_or(false) {
            continue;
        }
        let assignments: Vec<Option<LatticePoint>> = exact_a.iter().map(|x| gap.beta_close(x, &exact_beta).ok().flatten()).collect();
        let coverage = assignments.iter().filter(|p| p.is_some()).count();
        if coverage >= required {
            return InverseSearchResult { gap: Some(gap), assignments, coverage, required, candidates: total };
        }
    }
    InverseSearchResult { gap: None, assignments: vec![None; n], coverage: 0, required, candidates: total }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardBound {
    /// Exact small-ball at radius 0 of the GAP-rounded coefficients.
    pub rho_lower: Rational,
    /// Radius at which `rho_lower` bounds the original form: `β n max|ξ|`.
    pub radius: Rational,
    pub rounded: Vec<Rational>,
}

/// If every coefficient is within `β` of its GAP element, the original form
/// lands within `β n max|ξ|` of the rounded form's mode at least as often as
/// the rounded form hits it exactly.
pub fn forward_lo_bound(q: &Gap, assignments: &[LatticePoint], law: &AtomicLaw<Rational>, beta: &Rational) -> Result<ForwardBound, StructureError> {
    if assignments.is_empty() {
        return Ok(ForwardBound { rho_lower: Rational::one(), radius: Rational::zero(), rounded: Vec::new() });
    }
    if q.unit != Unit::One {
        // Scaling by the unit does not change the radius-0 small-ball value.
        let rational = Gap { unit: Unit::One, ..q.clone() };
        let mut b = forward_lo_bound(&rational, assignments, law, beta)?;
        b.rounded = b.rounded.iter().map(|c| c * Rational::from_float(q.unit.to_f64()).unwrap_or_else(Rational::one)).collect();
        return Ok(b);
    }
    let rounded = assignments.iter().map(|p| q.evaluate(p)).collect::<Result<Vec<_>, _>>()?;
    let form = LinearForm::unshifted(rounded.clone())?;
    let rho_lower = linear_small_ball_exact(&form, law, &Rational::zero())?.rho;
    let n = Rational::from_integer(BigInt::from(assignments.len()));
    Ok(ForwardBound { rho_lower, radius: beta * n * law.max_abs(), rounded })
}
