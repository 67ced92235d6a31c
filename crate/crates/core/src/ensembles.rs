//! Random symmetric matrices `M = F + X` and the measurements taken on them.
//!
//! Exact samples hold rational entries and support ranks, cofactors and
//! bordering; floating samples feed the eigensolvers.

use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use rand::{Rng, RngCore};
use serde::Serialize;

use crate::eigen::{jacobi, symmetric_eigenvalues, EigenError};
use crate::exact::{cofactor_matrix, rank_i64, rank_rational, Determinant, IntEchelon};
use crate::laws::{AtomicLaw, Sampler};
use crate::matrix::Matrix;
use crate::rng::par_trials;
use crate::scalar::{Rational, Scalar};
use crate::stats::binomial_se;

/// Float rank counts eigenvalues above `RANK_TOL · σ₁ · n`.
pub const RANK_TOL: f64 = 1e-8;
/// Attempts at drawing `k` independent sign vectors before giving up.
const SPAN_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnsembleError {
    #[error("fixed part entry ({i},{j}) = {value} exceeds n^gamma = {bound}")]
    BoundViolation { i: usize, j: usize, value: f64, bound: f64 },
    #[error("fixed part is not a symmetric {0}x{0} matrix")]
    NotSymmetric(usize),
    #[error("rank {rank} of the {n}x{n} matrix violates the precondition")]
    RankPrecondition { rank: usize, n: usize },
    #[error("no symmetric removal keeps rank >= n-2")]
    NoPivot,
    #[error("law atoms must be rational with a common denominator fitting in i64")]
    NonIntegralLaw,
    #[error("could not draw {k} independent sign vectors in dimension {n}")]
    SpanFailure { n: usize, k: usize },
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// `M = F + X` with `X` symmetric and iid on and above the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricSample<T> {
    pub f: Matrix<T>,
    pub x: Matrix<T>,
    pub m: Matrix<T>,
    /// Declared exponent in `|f_ij| <= n^gamma`.
    pub gamma: f64,
}

impl<T: Scalar> SymmetricSample<T> {
    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn is_exact(&self) -> bool {
        T::EXACT
    }
}

fn check_fixed<T: Scalar>(f: &Matrix<T>, n: usize, gamma: f64) -> Result<(), EnsembleError> {
    if f.rows() != n || f.cols() != n || !f.is_symmetric() {
        return Err(EnsembleError::NotSymmetric(n));
    }
    let bound = (n as f64).powf(gamma);
    for i in 0..n {
        for j in 0..n {
            let value = f.get(i, j).abs().to_f64();
            if value > bound {
                return Err(EnsembleError::BoundViolation { i, j, value, bound });
            }
        }
    }
    Ok(())
}

fn assemble<T: Scalar>(f: Option<&Matrix<T>>, n: usize, gamma: f64, mut draw: impl FnMut() -> T) -> Result<SymmetricSample<T>, EnsembleError> {
    let f = match f {
        Some(f) => {
            check_fixed(f, n, gamma)?;
            f.clone()
        }
        None => Matrix::zeros(n, n),
    };
    let mut x = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = draw();
            x.set(j, i, v.clone());
            x.set(i, j, v);
        }
    }
    let m = f.add(&x);
    Ok(SymmetricSample { f, x, m, gamma })
}

/// Exact sample. Draws run over the upper triangle row by row, diagonal
/// included, so the result is a function of the rng state alone.
pub fn sample_symmetric_exact(
    law: &AtomicLaw<Rational>,
    f: Option<&Matrix<Rational>>,
    n: usize,
    gamma: f64,
    rng: &mut dyn RngCore,
) -> Result<SymmetricSample<Rational>, EnsembleError> {
    let sampler = law.sampler();
    assemble(f, n, gamma, || law.atoms()[sampler.sample_index(rng)].0.clone())
}

/// Floating sample, same draw order as [`sample_symmetric_exact`].
pub fn sample_symmetric_float(
    sampler: &dyn Sampler,
    f: Option<&Matrix<f64>>,
    n: usize,
    gamma: f64,
    rng: &mut dyn RngCore,
) -> Result<SymmetricSample<f64>, EnsembleError> {
    assemble(f, n, gamma, || sampler.sample(rng))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralSummary {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub sigma_1: f64,
    pub sigma_n: f64,
    /// Infinite when `sigma_n = 0`.
    pub kappa: f64,
    /// `-inf` when some eigenvalue is exactly zero.
    pub log_abs_det: f64,
    pub corank: Option<usize>,
}

impl SpectralSummary {
    pub fn from_eigenvalues(eigenvalues: Vec<f64>) -> Self {
        let sigma_1 = eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.abs()));
        let sigma_n = eigenvalues.iter().fold(f64::INFINITY, |acc, l| acc.min(l.abs()));
        let sigma_n = if eigenvalues.is_empty() { 0.0 } else { sigma_n };
        let kappa = if sigma_n > 0.0 { sigma_1 / sigma_n } else { f64::INFINITY };
        let log_abs_det = eigenvalues.iter().map(|l| l.abs().ln()).sum();
        SpectralSummary { eigenvalues, sigma_1, sigma_n, kappa, log_abs_det, corank: None }
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues above `1e-8 · σ₁ · n` in absolute value.
    pub fn float_rank(&self) -> usize {
        let tol = RANK_TOL * self.sigma_1 * self.n() as f64;
        self.eigenvalues.iter().filter(|l| l.abs() > tol).count()
    }
}

pub fn spectral_summary(m: &Matrix<f64>) -> Result<SpectralSummary, EigenError> {
    if !m.is_symmetric() {
        return Err(EigenError::NotSymmetric);
    }
    Ok(SpectralSummary::from_eigenvalues(symmetric_eigenvalues(m)?))
}

/// Summary of an exact sample, with its exact corank filled in.
pub fn exact_spectral_summary(m: &Matrix<Rational>) -> Result<SpectralSummary, EigenError> {
    let mut s = spectral_summary(&m.to_f64())?;
    s.corank = Some(m.rows() - exact_rank(m));
    Ok(s)
}

fn as_i64_rows(m: &Matrix<Rational>) -> Option<Vec<Vec<i64>>> {
    (0..m.rows()).map(|i| m.row(i).iter().map(|x| if x.is_integer() { x.to_integer().to_i64() } else { None }).collect()).collect()
}

/// Rank over the rationals. Integer matrices take the `i128` Bareiss path.
pub fn exact_rank(m: &Matrix<Rational>) -> usize {
    match as_i64_rows(m) {
        Some(rows) => rank_i64(&rows),
        None => rank_rational(m),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CofactorIdentity<T> {
    pub lhs: T,
    pub rhs: T,
    pub equal: bool,
}

/// Checks `det(M) = m₁₁·det(A) − xᵀ·adj(A)·x`, where `A` drops the first row
/// and column and `x = (m₁₂, …, m₁ₙ)`.
pub fn cofactor_expansion_check<T: Determinant>(m: &Matrix<T>) -> CofactorIdentity<T> {
    let n = m.rows();
    let lhs = T::determinant(m);
    let m11 = m.get(0, 0).clone();
    let rhs = if n == 1 {
        m11
    } else {
        let a = m.minor(0, 0);
        let x: Vec<T> = m.row(0)[1..].to_vec();
        let adj = cofactor_matrix(&a).transpose();
        let adj_x = adj.mul_vec(&x);
        let quad = x.iter().zip(&adj_x).fold(T::zero(), |acc, (u, v)| acc + u.clone() * v.clone());
        m11 * T::determinant(&a) - quad
    };
    let equal = if T::EXACT {
        lhs == rhs
    } else {
        let scale = lhs.abs().to_f64().max(rhs.abs().to_f64()).max(1.0);
        (lhs.clone() - rhs.clone()).abs().to_f64() <= 1e-9 * scale
    };
    CofactorIdentity { lhs, rhs, equal }
}

/// Audit of the chain from a small singular value to large cofactors of the
/// principal minor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CofactorAudit {
    pub sigma_n: f64,
    /// `σ_n <= n^{-A}`.
    pub hypothesis: bool,
    /// Row of `M` moved to the front before removing it.
    pub row: usize,
    /// `∑_j c_1j(M)² >= n^{2A-1} det(M)²`.
    pub row_cofactors_large: bool,
    /// `c_1j(M) = −∑_i m_i1 c_ij(M')` for `j >= 2` and
    /// `c_11(M) = ∑_i m_i2 c_i2(M')`, exactly.
    pub expansions_exact: bool,
    /// `c_1j(M)² <= n^{2B+2γ+3} ∑_i c_ij(M')²` for `j >= 2`.
    pub off_diagonal_bound: bool,
    /// `c_11(M)² <= n^{2B+2γ+3} ∑_i c_i2(M')²`.
    pub diagonal_bound: bool,
    /// `∑ c_ij(M')² >= n^{2A-2B-2γ-4} det(M)²`.
    pub conclusion: bool,
    /// Vacuously true when the hypothesis fails.
    pub holds: bool,
}

/// Relative slack for the floating comparisons below.
const AUDIT_SLACK: f64 = 1e-9;

fn log_le(lhs: f64, rhs: f64) -> bool {
    lhs == f64::NEG_INFINITY || lhs <= rhs + AUDIT_SLACK * rhs.abs().max(1.0)
}

fn sum_sq<T: Scalar>(xs: impl Iterator<Item = T>) -> T {
    xs.fold(T::zero(), |acc, x| acc + x.clone() * x)
}

fn scalar_le<T: Scalar>(a: &T, b: &T) -> bool {
    if T::EXACT {
        a <= b
    } else {
        a.to_f64() <= b.to_f64() * (1.0 + AUDIT_SLACK) + f64::MIN_POSITIVE
    }
}

fn identity_holds<T: Scalar>(a: &T, b: &T) -> bool {
    if T::EXACT {
        a == b
    } else {
        (a.to_f64() - b.to_f64()).abs() <= AUDIT_SLACK * a.to_f64().abs().max(1.0)
    }
}

/// Evaluates every cofactor and checks each link of the chain
///
/// `∑_j c_1j(M)² >= n^{2A-1} det²`, `c_1j(M)² <= n^{2B+2γ+3} ∑_i c_ij(M')²`,
/// `c_11(M)² <= n^{2B+2γ+3} ∑_i c_i2(M')²`, hence
/// `∑ c_ij(M')² >= n^{2A-2B-2γ-4} det²`,
///
/// where `M'` removes row and column 1. Row 1 is chosen as the row of the
/// cofactor matrix with the largest norm (the first such). The entry bound
/// `|m_ij| <= n^{B+1+γ}` is assumed, not checked. Comparisons against powers
/// of `n` are made in log space.
pub fn cofactor_inequality_check<T: Determinant>(m: &Matrix<T>, a_exp: f64, b_exp: f64, gamma: f64) -> Result<CofactorAudit, EigenError> {
    let n = m.rows();
    let sigma_n = spectral_summary(&m.to_f64())?.sigma_n;
    let nf = n as f64;
    let ln_n = nf.ln();
    let hypothesis = sigma_n <= nf.powf(-a_exp);
    if n < 2 {
        return Ok(CofactorAudit {
            sigma_n,
            hypothesis,
            row: 0,
            row_cofactors_large: true,
            expansions_exact: true,
            off_diagonal_bound: true,
            diagonal_bound: true,
            conclusion: true,
            holds: true,
        });
    }
    let c = cofactor_matrix(m);
    let row_norms: Vec<T> = (0..n).map(|i| sum_sq(c.row(i).iter().cloned())).collect();
    let mut row = 0;
    for i in 1..n {
        if row_norms[i] > row_norms[row] {
            row = i;
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.swap(0, row);
    let mp = m.permute_symmetric(&perm);
    let cm = cofactor_matrix(&mp);
    let minor = mp.minor(0, 0);
    let cp = cofactor_matrix(&minor);
    let det = T::determinant(&mp);
    let ln_det_sq = 2.0 * det.abs().to_f64().ln();

    let first_row = sum_sq(cm.row(0).iter().cloned());
    let row_cofactors_large = log_le((2.0 * a_exp - 1.0) * ln_n + ln_det_sq, first_row.to_f64().ln());

    // Indices into M' are shifted by one: M' entry (i-1, j-1) is M entry (i, j).
    let col_sq = |j: usize| sum_sq((0..n - 1).map(|i| cp.get(i, j).clone()));
    let col_entries_sq = sum_sq((1..n).map(|i| mp.get(i, 0).clone()));
    let growth = (2.0 * b_exp + 2.0 * gamma + 3.0) * ln_n;
    let mut expansions_exact = true;
    let mut off_diagonal_bound = true;
    for j in 1..n {
        let expansion = (1..n).fold(T::zero(), |acc, i| acc + mp.get(i, 0).clone() * cp.get(i - 1, j - 1).clone());
        let c1j = cm.get(0, j).clone();
        expansions_exact &= identity_holds(&c1j, &-expansion);
        let sq = c1j.clone() * c1j;
        let col = col_sq(j - 1);
        // Cauchy–Schwarz, then the entry bound.
        off_diagonal_bound &= scalar_le(&sq, &(col_entries_sq.clone() * col.clone())) && log_le(sq.to_f64().ln(), growth + col.to_f64().ln());
    }
    let c11 = cm.get(0, 0).clone();
    let diagonal_bound = if n == 2 {
        // M' is 1×1: c_11(M) = m_22 and the column sum is c_22(M')² = 1.
        log_le((c11.clone() * c11.clone()).to_f64().ln(), growth)
    } else {
        let expansion = (1..n).fold(T::zero(), |acc, i| acc + mp.get(i, 1).clone() * cp.get(i - 1, 0).clone());
        expansions_exact &= identity_holds(&c11, &expansion);
        let col = col_sq(0);
        let entries = sum_sq((1..n).map(|i| mp.get(i, 1).clone()));
        let sq = c11.clone() * c11;
        scalar_le(&sq, &(entries * col.clone())) && log_le(sq.to_f64().ln(), growth + col.to_f64().ln())
    };
    let total = sum_sq(cp.as_slice().iter().cloned());
    let conclusion = log_le((2.0 * a_exp - 2.0 * b_exp - 2.0 * gamma - 4.0) * ln_n + ln_det_sq, total.to_f64().ln());
    let holds = !hypothesis || (row_cofactors_large && expansions_exact && off_diagonal_bound && diagonal_bound && conclusion);
    Ok(CofactorAudit { sigma_n, hypothesis, row, row_cofactors_large, expansions_exact, off_diagonal_bound, diagonal_bound, conclusion, holds })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthStep {
    /// Size after bordering.
    pub size: usize,
    pub rank: usize,
    pub jumped_by_2: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Growth {
    pub start_rank: usize,
    pub steps: Vec<GrowthStep>,
    pub matrix: Matrix<Rational>,
}

/// Borders `m` with a fresh first row and column `steps` times, recording the
/// exact rank after each step. The new diagonal entry is drawn first, then
/// the off-diagonal entries top to bottom, all iid from `law`.
pub fn grow_and_track(m: &Matrix<Rational>, law: &AtomicLaw<Rational>, steps: usize, rng: &mut dyn RngCore) -> Result<Growth, EnsembleError> {
    let n = m.rows();
    if !m.is_symmetric() {
        return Err(EnsembleError::NotSymmetric(n));
    }
    let start_rank = exact_rank(m);
    if start_rank + 2 > n {
        return Err(EnsembleError::RankPrecondition { rank: start_rank, n });
    }
    let sampler = law.sampler();
    let mut current = m.clone();
    let mut rank = start_rank;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let size = current.rows() + 1;
        let border: Vec<Rational> = (0..size).map(|_| law.atoms()[sampler.sample_index(rng)].0.clone()).collect();
        current = Matrix::from_fn(size, size, |i, j| match (i, j) {
            (0, _) => border[j].clone(),
            (_, 0) => border[i].clone(),
            _ => current.get(i - 1, j - 1).clone(),
        });
        let new_rank = exact_rank(&current);
        out.push(GrowthStep { size, rank: new_rank, jumped_by_2: new_rank == rank + 2 });
        rank = new_rank;
    }
    Ok(Growth { start_rank, steps: out, matrix: current })
}

/// First index (0-based) whose symmetric removal leaves rank at least `n-2`.
/// Requires rank exactly `n-1`.
pub fn remove_pivot_row(m: &Matrix<Rational>) -> Result<usize, EnsembleError> {
    let n = m.rows();
    let rank = exact_rank(m);
    if n == 0 || rank + 1 != n {
        return Err(EnsembleError::RankPrecondition { rank, n });
    }
    (0..n).find(|&i| exact_rank(&m.remove_index(i)) + 2 >= n).ok_or(EnsembleError::NoPivot)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NearKernel {
    /// Unit eigenvector of the eigenvalue of smallest modulus.
    pub u: Vec<f64>,
    pub lambda: f64,
    /// `|⟨u, row_i⟩|`, descending.
    pub residuals: Vec<f64>,
    /// Largest residual once the `row_budget` worst rows are set aside.
    pub residual_within_budget: f64,
}

pub fn near_kernel_vector(m: &Matrix<f64>, row_budget: usize) -> Result<NearKernel, EigenError> {
    if !m.is_symmetric() {
        return Err(EigenError::NotSymmetric);
    }
    let n = m.rows();
    let dec = jacobi(m)?;
    let k = (0..n).min_by(|&a, &b| dec.eigenvalues[a].abs().total_cmp(&dec.eigenvalues[b].abs())).unwrap_or(0);
    let u: Vec<f64> = (0..n).map(|i| *dec.eigenvectors.get(i, k)).collect();
    let mut residuals: Vec<f64> = m.mul_vec(&u).into_iter().map(f64::abs).collect();
    residuals.sort_by(|a, b| b.total_cmp(a));
    let residual_within_budget = residuals.get(row_budget).copied().unwrap_or(0.0);
    Ok(NearKernel { u, lambda: dec.eigenvalues.get(k).copied().unwrap_or(0.0), residuals, residual_within_budget })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdlyzkoRecord {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub hits: usize,
    pub frequency: f64,
    pub se: f64,
    /// `(1 - c3)^{(n-k)/2}`.
    pub bound: f64,
    /// `frequency <= bound + 3·se`.
    pub holds: bool,
}

/// Integer rescaling of the atoms; membership in a subspace is scale free.
fn integral_atoms(law: &AtomicLaw<Rational>) -> Result<Vec<i64>, EnsembleError> {
    let lcm = law.values().fold(num_bigint::BigInt::one(), |acc, v| acc.lcm(v.denom()));
    law.values().map(|v| (v.numer() * (&lcm / v.denom())).to_i64().ok_or(EnsembleError::NonIntegralLaw)).collect()
}

/// Per trial: a fresh `k`-dimensional subspace spanned by random sign
/// vectors (redrawn until independent) and a random vector with iid entries
/// from `law`; counts how often the vector lies in the subspace.
pub fn odlyzko_membership(law: &AtomicLaw<Rational>, c3: f64, n: usize, k: usize, trials: usize, seed: u64) -> Result<OdlyzkoRecord, EnsembleError> {
    let values = integral_atoms(law)?;
    let sampler = law.sampler();
    let hits = par_trials(trials, seed, |_, rng| {
        let mut span = None;
        for _ in 0..SPAN_ATTEMPTS {
            let gens: Vec<Vec<i64>> = (0..k).map(|_| (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()).collect();
            let basis = IntEchelon::new(&gens);
            if basis.dim() == k {
                span = Some(basis);
                break;
            }
        }
        let span = span.ok_or(EnsembleError::SpanFailure { n, k })?;
        let v: Vec<i64> = (0..n).map(|_| values[sampler.sample_index(rng)]).collect();
        Ok::<_, EnsembleError>(span.contains(&v))
    })?
    .into_iter()
    .filter(|&h| h)
    .count();
    let frequency = hits as f64 / trials as f64;
    let se = binomial_se(hits, trials);
    let bound = (1.0 - c3).powf((n - k) as f64 / 2.0);
    Ok(OdlyzkoRecord { n, k, trials, hits, frequency, se, bound, holds: frequency <= bound + 3.0 * se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::scalar::{int, rational};

    fn ints(rows: &[&[i64]]) -> Matrix<Rational> {
        Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect()).unwrap()
    }

    #[test]
    fn one_by_one_and_structure() {
        let law = AtomicLaw::bernoulli();
        let f = ints(&[&[-1]]);
        let s = sample_symmetric_exact(&law, Some(&f), 1, 3.0, &mut stream(1, 0)).unwrap();
        assert_eq!(s.m.get(0, 0), &(int(-1) + s.x.get(0, 0)));
        let s = sample_symmetric_exact(&law, None, 3, 0.0, &mut stream(4, 0)).unwrap();
        assert!(s.m.is_symmetric());
        assert!(s.m.as_slice().iter().all(|v| v.abs() == int(1)));
        let again = sample_symmetric_exact(&law, None, 3, 0.0, &mut stream(4, 0)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn bound_violation() {
        let n = 4usize;
        let gamma = 1.0;
        let mut f = Matrix::<Rational>::zeros(n, n);
        f.set(0, 1, int(5));
        f.set(1, 0, int(5));
        let err = sample_symmetric_exact(&AtomicLaw::bernoulli(), Some(&f), n, gamma, &mut stream(0, 0)).unwrap_err();
        assert!(matches!(err, EnsembleError::BoundViolation { i: 0, j: 1, .. }));
    }

    #[test]
    fn small_summaries() {
        let s = spectral_summary(&Matrix::diagonal(&[3.0, -1.0])).unwrap();
        assert_eq!((s.sigma_1, s.sigma_n, s.kappa), (3.0, 1.0, 3.0));
        assert!((s.log_abs_det - 3f64.ln()).abs() < 1e-15);
        let s = spectral_summary(&Matrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        assert!((s.sigma_n - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ranks() {
        assert_eq!(exact_rank(&ints(&[&[1, 1, 1], &[1, 1, 1], &[1, 1, 1]])), 1);
        assert_eq!(exact_rank(&ints(&[&[0, 1], &[1, 0]])), 2);
        let half = Matrix::from_rows(vec![vec![rational(1, 2), int(1)], vec![int(1), int(2)]]).unwrap();
        assert_eq!(exact_rank(&half), 1);
    }

    #[test]
    fn cofactor_two_by_two() {
        let r = cofactor_expansion_check(&ints(&[&[3, 2], &[2, 5]]));
        assert_eq!((r.lhs.clone(), r.equal), (int(11), true));
        assert_eq!(r.rhs, int(11));
        let r = cofactor_expansion_check(&ints(&[&[2, 0, 0], &[0, -3, 0], &[0, 0, 7]]));
        assert_eq!(r.lhs, int(-42));
        assert!(r.equal);
    }

    #[test]
    fn audit_vacuous_and_float_variant() {
        let audit = cofactor_inequality_check(&ints(&[&[4, 1], &[1, 4]]), 1.0, 1.0, 0.0).unwrap();
        assert!(!audit.hypothesis && audit.holds);
        let m = Matrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0 + 1e-6]]).unwrap();
        let audit = cofactor_inequality_check(&m, 20.0, 1.0, 0.0).unwrap();
        assert!((audit.sigma_n - 5e-7).abs() < 1e-9);
        assert!(audit.hypothesis && audit.holds, "{audit:?}");
    }

    #[test]
    fn expansion_signs_three_by_three() {
        let m = ints(&[&[2, -1, 3], &[-1, 4, 5], &[3, 5, -6]]);
        let audit = cofactor_inequality_check(&m, 0.0, 0.0, 0.0).unwrap();
        assert!(audit.expansions_exact);
    }

    #[test]
    fn growth_rejects_full_rank() {
        let err = grow_and_track(&ints(&[&[1, 0], &[0, 1]]), &AtomicLaw::bernoulli(), 1, &mut stream(0, 0)).unwrap_err();
        assert_eq!(err, EnsembleError::RankPrecondition { rank: 2, n: 2 });
    }

    #[test]
    fn pivot_examples() {
        assert_eq!(remove_pivot_row(&ints(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 0]])).unwrap(), 0);
        assert_eq!(remove_pivot_row(&ints(&[&[1, 1], &[1, 1]])).unwrap(), 0);
        assert!(remove_pivot_row(&ints(&[&[1, 0], &[0, 1]])).is_err());
    }

    #[test]
    fn near_kernel_of_diagonal() {
        let nk = near_kernel_vector(&Matrix::diagonal(&[5.0, 1e-8]), 0).unwrap();
        assert!((nk.u[1].abs() - 1.0).abs() < 1e-15 && nk.u[0] == 0.0);
        assert_eq!(nk.residuals, vec![1e-8, 0.0]);
        let nk = near_kernel_vector(&Matrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(), 0).unwrap();
        assert!(nk.residuals.iter().all(|r| *r < 1e-15));
    }

    #[test]
    fn odlyzko_full_dimension_is_certain() {
        let law = AtomicLaw::bernoulli();
        let r = odlyzko_membership(&law, 0.5, 4, 4, 50, 3).unwrap();
        assert_eq!(r.hits, 50);
        let r = odlyzko_membership(&law, 0.5, 6, 1, 2000, 3).unwrap();
        // A line through a sign vector holds exactly two of the 64 sign vectors.
        assert!((r.frequency - 2.0 / 64.0).abs() < 0.02);
    }
}
