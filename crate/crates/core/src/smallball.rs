//! Small-ball probabilities `sup_a P(|S - a| <= β)` of linear, bilinear and
//! quadratic forms in iid entries.
//!
//! Exact routines build the full atomic law of `S` and scan closed windows of
//! width `2β` over its sorted atoms; the best window can always be taken with
//! its left edge on an atom, so the scan is exhaustive. Monte Carlo routines
//! do the same scan over sorted samples.

use num_bigint::BigInt;
use num_traits::One;
use rayon::prelude::*;

use crate::laws::{AtomicLaw, Sampler};
use crate::matrix::Matrix;
use crate::rng::{stream, StreamRng};
use crate::scalar::{Rational, Scalar};
use crate::stats::dkw_halfwidth;

/// Default cap on atoms of an exact sum law and on enumerated outcomes.
pub const ATOM_CAP: usize = 10_000_000;

/// Failure probability for the DKW interval of Monte Carlo estimates.
pub const MC_DELTA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SmallBallError {
    #[error("exact sum law has {atoms} atoms, over the cap of {cap}")]
    AtomBlowup { atoms: usize, cap: usize },
    #[error("exact enumeration needs {outcomes} outcomes, over the cap of {cap}")]
    EnumerationTooLarge { outcomes: f64, cap: usize },
    #[error("invalid form: {0}")]
    InvalidForm(String),
    #[error("radius must be non-negative")]
    NegativeRadius,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearForm<T> {
    pub coeffs: Vec<T>,
    pub shifts: Vec<T>,
}

impl<T: Scalar> LinearForm<T> {
    pub fn new(coeffs: Vec<T>, shifts: Vec<T>) -> Result<Self, SmallBallError> {
        if coeffs.is_empty() || coeffs.len() != shifts.len() {
            return Err(SmallBallError::InvalidForm(format!("{} coefficients, {} shifts", coeffs.len(), shifts.len())));
        }
        if coeffs.iter().chain(&shifts).any(|x| !x.to_f64().is_finite()) {
            return Err(SmallBallError::InvalidForm("non-finite entry".into()));
        }
        Ok(LinearForm { coeffs, shifts })
    }

    pub fn unshifted(coeffs: Vec<T>) -> Result<Self, SmallBallError> {
        let shifts = vec![T::zero(); coeffs.len()];
        Self::new(coeffs, shifts)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn evaluate(&self, x: &[T]) -> T {
        self.coeffs.iter().zip(&self.shifts).zip(x).fold(T::zero(), |acc, ((a, f), x)| acc + a.clone() * (x.clone() + f.clone()))
    }
}

/// `sum_ij a_ij (x_i + f_i)(x_j + f_j)` with `a` symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm<T> {
    pub a: Matrix<T>,
    pub shifts: Vec<T>,
}

impl<T: Scalar> QuadraticForm<T> {
    pub fn new(a: Matrix<T>, shifts: Vec<T>) -> Result<Self, SmallBallError> {
        if !a.is_square() || a.rows() != shifts.len() || a.rows() == 0 {
            return Err(SmallBallError::InvalidForm("matrix must be square and match the shifts".into()));
        }
        if !a.is_symmetric() {
            return Err(SmallBallError::InvalidForm("matrix is not symmetric".into()));
        }
        Ok(QuadraticForm { a, shifts })
    }

    pub fn unshifted(a: Matrix<T>) -> Result<Self, SmallBallError> {
        let n = a.rows();
        Self::new(a, vec![T::zero(); n])
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// `sum a_ij^2 = 1` within `1e-12`.
    pub fn is_normalized(&self) -> bool {
        (self.a.frobenius_sq().to_f64() - 1.0).abs() <= 1e-12
    }

    pub fn evaluate(&self, x: &[T]) -> T {
        let y: Vec<T> = x.iter().zip(&self.shifts).map(|(x, f)| x.clone() + f.clone()).collect();
        self.bilinear(&y, &y)
    }

    /// `sum a_ij y_i z_j` for already shifted vectors.
    pub fn bilinear(&self, y: &[T], z: &[T]) -> T {
        let n = self.n();
        let mut acc = T::zero();
        for i in 0..n {
            if y[i].is_zero() {
                continue;
            }
            let row = self.a.row(i).iter().zip(z).fold(T::zero(), |s, (a, z)| s + a.clone() * z.clone());
            acc = acc + y[i].clone() * row;
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmallBallEstimate {
    pub rho: f64,
    pub beta: f64,
    pub method: Method,
    pub ci_halfwidth: f64,
    pub witness_center: f64,
}

/// An exact small-ball value with the center attaining it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSmallBall<T> {
    pub rho: T,
    pub beta: T,
    pub center: T,
}

impl<T: Scalar> ExactSmallBall<T> {
    pub fn estimate(&self) -> SmallBallEstimate {
        SmallBallEstimate { rho: self.rho.to_f64(), beta: self.beta.to_f64(), method: Method::Exact, ci_halfwidth: 0.0, witness_center: self.center.to_f64() }
    }
}

/// Maximum mass of a closed window of width `2β` over the atoms of `law`.
/// The first maximal window wins; its center is the midpoint of the extreme
/// atoms it covers.
pub fn window_sup<T: Scalar>(law: &AtomicLaw<T>, beta: &T) -> ExactSmallBall<T> {
    let atoms = law.atoms();
    let width = beta.clone() + beta.clone();
    let scale = law.max_abs();
    let mut best = (T::zero(), 0usize, 0usize);
    let mut mass = T::zero();
    let mut j = 0;
    for i in 0..atoms.len() {
        if j < i {
            j = i;
            mass = T::zero();
        }
        while j < atoms.len() && T::fits(&(atoms[j].0.clone() - atoms[i].0.clone()), &width, &scale) {
            mass = mass + atoms[j].1.clone();
            j += 1;
        }
        if mass > best.0 {
            best = (mass.clone(), i, j - 1);
        }
        mass = mass - atoms[i].1.clone();
    }
    let (rho, lo, hi) = best;
    let center = (atoms[lo].0.clone() + atoms[hi].0.clone()) * T::half();
    // Exact masses are sums of the atom masses; floats may drift past 1.
    let rho = if T::EXACT { rho } else { T::from_f64(rho.to_f64().min(1.0)).unwrap_or(rho) };
    ExactSmallBall { rho, beta: beta.clone(), center }
}

/// `P(|S - center| <= β)` for `S ~ law`.
pub fn window_mass<T: Scalar>(law: &AtomicLaw<T>, center: &T, beta: &T) -> T {
    let scale = law.max_abs();
    law.mass_where(|v| T::fits(&(v.clone() - center.clone()).abs(), beta, &scale))
}

/// Exact law of `sum a_i (x_i + f_i)` for iid `x_i ~ law`.
pub fn linear_law<T: Scalar>(form: &LinearForm<T>, law: &AtomicLaw<T>, cap: usize) -> Result<AtomicLaw<T>, SmallBallError> {
    let offset = form.coeffs.iter().zip(&form.shifts).fold(T::zero(), |acc, (a, f)| acc + a.clone() * f.clone());
    let mut sum = AtomicLaw::point(offset);
    for a in &form.coeffs {
        if a.is_zero() {
            continue;
        }
        let term = law.map_values(|x| a.clone() * x.clone());
        let bound = sum.len().saturating_mul(term.len());
        if bound > cap.saturating_mul(4) {
            return Err(SmallBallError::AtomBlowup { atoms: bound, cap });
        }
        sum = sum.convolve(&term);
        if sum.len() > cap {
            return Err(SmallBallError::AtomBlowup { atoms: sum.len(), cap });
        }
    }
    Ok(sum)
}

pub fn linear_small_ball_exact<T: Scalar>(form: &LinearForm<T>, law: &AtomicLaw<T>, beta: &T) -> Result<ExactSmallBall<T>, SmallBallError> {
    if beta.is_negative() {
        return Err(SmallBallError::NegativeRadius);
    }
    Ok(window_sup(&linear_law(form, law, ATOM_CAP)?, beta))
}

/// Sliding-window maximum over Monte Carlo samples.
pub fn samples_small_ball(mut samples: Vec<f64>, beta: f64) -> SmallBallEstimate {
    let trials = samples.len();
    samples.sort_by(f64::total_cmp);
    let scale = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let width = 2.0 * beta;
    let (mut best, mut lo, mut hi) = (0usize, 0usize, 0usize);
    let mut j = 0;
    for i in 0..trials {
        j = j.max(i);
        while j < trials && f64::fits(&(samples[j] - samples[i]), &width, &scale) {
            j += 1;
        }
        if j - i > best {
            (best, lo, hi) = (j - i, i, j - 1);
        }
    }
    let witness_center = if trials == 0 { 0.0 } else { (samples[lo] + samples[hi]) / 2.0 };
    SmallBallEstimate {
        rho: if trials == 0 { 0.0 } else { best as f64 / trials as f64 },
        beta,
        method: Method::MonteCarlo,
        ci_halfwidth: dkw_halfwidth(trials.max(1), MC_DELTA),
        witness_center,
    }
}

/// Draws `trials` values of `f`, each from the stream keyed by `(seed, trial)`.
pub fn mc_samples(trials: usize, seed: u64, f: impl Fn(&mut StreamRng) -> f64 + Sync) -> Vec<f64> {
    (0..trials as u64).into_par_iter().map(|t| f(&mut stream(seed, t))).collect()
}

pub fn linear_small_ball_mc(form: &LinearForm<f64>, sampler: &dyn Sampler, beta: f64, trials: usize, seed: u64) -> SmallBallEstimate {
    let samples = mc_samples(trials, seed, |rng| form.coeffs.iter().zip(&form.shifts).map(|(a, f)| a * (sampler.sample(rng) + f)).sum());
    samples_small_ball(samples, beta)
}

fn outcome_count(atoms: usize, n: usize) -> f64 {
    (atoms as f64).powi(n as i32)
}

/// Visits every outcome vector of `n` iid draws from `law` with its mass.
fn for_each_outcome<T: Scalar>(law: &AtomicLaw<T>, n: usize, mut f: impl FnMut(&[T], &T)) {
    let atoms = law.atoms();
    let mut idx = vec![0usize; n];
    let mut x: Vec<T> = vec![atoms[0].0.clone(); n];
    loop {
        let mass = idx.iter().fold(T::one(), |acc, &i| acc * atoms[i].1.clone());
        f(&x, &mass);
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if idx[k] + 1 < atoms.len() {
                idx[k] += 1;
                x[k] = atoms[idx[k]].0.clone();
                break;
            }
            idx[k] = 0;
            x[k] = atoms[0].0.clone();
        }
    }
}

/// Exact law of the quadratic form by full enumeration.
pub fn quadratic_law<T: Scalar>(form: &QuadraticForm<T>, law: &AtomicLaw<T>) -> Result<AtomicLaw<T>, SmallBallError> {
    let outcomes = outcome_count(law.len(), form.n());
    if outcomes > ATOM_CAP as f64 {
        return Err(SmallBallError::EnumerationTooLarge { outcomes, cap: ATOM_CAP });
    }
    let mut atoms = Vec::with_capacity(outcomes as usize);
    for_each_outcome(law, form.n(), |x, p| atoms.push((form.evaluate(x), p.clone())));
    Ok(AtomicLaw::canonical(atoms, "quadratic".into()))
}

pub fn quadratic_small_ball_exact<T: Scalar>(form: &QuadraticForm<T>, law: &AtomicLaw<T>, beta: &T) -> Result<ExactSmallBall<T>, SmallBallError> {
    if beta.is_negative() {
        return Err(SmallBallError::NegativeRadius);
    }
    Ok(window_sup(&quadratic_law(form, law)?, beta))
}

/// Exact law of `sum a_ij (x_i + f_i)(y_j + f_j)` with independent `x`, `y`.
/// For each outcome of `x` the law in `y` is a linear convolution.
pub fn bilinear_law<T: Scalar>(form: &QuadraticForm<T>, law_x: &AtomicLaw<T>, law_y: &AtomicLaw<T>) -> Result<AtomicLaw<T>, SmallBallError> {
    let n = form.n();
    let outcomes = outcome_count(law_x.len(), n) * outcome_count(law_y.len(), n);
    if outcomes > ATOM_CAP as f64 {
        return Err(SmallBallError::EnumerationTooLarge { outcomes, cap: ATOM_CAP });
    }
    let mut atoms = Vec::new();
    let mut failure = None;
    for_each_outcome(law_x, n, |x, px| {
        if failure.is_some() {
            return;
        }
        let y: Vec<T> = x.iter().zip(&form.shifts).map(|(x, f)| x.clone() + f.clone()).collect();
        let coeffs: Vec<T> = (0..n).map(|j| (0..n).fold(T::zero(), |s, i| s + form.a.get(i, j).clone() * y[i].clone())).collect();
        let linear = LinearForm { coeffs, shifts: form.shifts.clone() };
        match linear_law(&linear, law_y, ATOM_CAP) {
            Ok(l) => atoms.extend(l.atoms().iter().map(|(v, p)| (v.clone(), p.clone() * px.clone()))),
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(AtomicLaw::canonical(atoms, "bilinear".into()))
}

pub fn bilinear_small_ball_exact<T: Scalar>(form: &QuadraticForm<T>, law_x: &AtomicLaw<T>, law_y: &AtomicLaw<T>, beta: &T) -> Result<ExactSmallBall<T>, SmallBallError> {
    if beta.is_negative() {
        return Err(SmallBallError::NegativeRadius);
    }
    Ok(window_sup(&bilinear_law(form, law_x, law_y)?, beta))
}

pub fn bilinear_small_ball_mc(form: &QuadraticForm<f64>, law_x: &dyn Sampler, law_y: &dyn Sampler, beta: f64, trials: usize, seed: u64) -> SmallBallEstimate {
    let n = form.n();
    let samples = mc_samples(trials, seed, |rng| {
        let y: Vec<f64> = (0..n).map(|i| law_x.sample(rng) + form.shifts[i]).collect();
        let z: Vec<f64> = (0..n).map(|i| law_y.sample(rng) + form.shifts[i]).collect();
        form.bilinear(&y, &z)
    });
    samples_small_ball(samples, beta)
}

/// `prod_{i=1..n0} rho_β(u_i x_i + ... + u_n0 x_n0)`.
pub fn truncated_product_bound<T: Scalar>(u: &[T], law: &AtomicLaw<T>, beta: &T, n0: usize) -> Result<T, SmallBallError> {
    if n0 == 0 || n0 > u.len() {
        return Err(SmallBallError::InvalidForm(format!("n0 = {n0} outside 1..={}", u.len())));
    }
    let mut product = T::one();
    for i in 0..n0 {
        let form = LinearForm::unshifted(u[i..n0].to_vec())?;
        product = product * linear_small_ball_exact(&form, law, beta)?.rho;
    }
    Ok(product)
}

/// `C(n, n/2) / 2^n`, the largest atom of a sum of `n` signs (`n` even).
pub fn central_binomial_mass(n: u64) -> Rational {
    let k = n / 2;
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    Rational::new(c, BigInt::one() << n as usize)
}
