//! Spectral cutoffs, eigenvalue window counts and the Monte Carlo
//! determinant-concentration and singular-value tail experiments.

use serde::Serialize;

use crate::eigen::EigenError;
use crate::ensembles::{sample_symmetric_float, spectral_summary, EnsembleError, SpectralSummary};
use crate::laws::{verify_spacing, verify_spacing_continuous, ContinuousLaw, LawError, LawSpec, SpacingCertificate};
use crate::matrix::Matrix;
use crate::rng::{derive, par_trials};
use crate::stats::{loglog_fit, mean, std_dev, wilson};

/// Smallest trial count accepted by [`concentration_experiment`].
pub const MIN_TRIALS: usize = 30;
/// Multiples of the deviation threshold at which the empirical survival
/// function is reported.
pub const SURVIVAL_MULTIPLES: [f64; 5] = [0.125, 0.25, 0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetConcError {
    #[error("log of a zero eigenvalue below the cutoff")]
    DegenerateSpectrum,
    #[error("{0} trials requested, at least {MIN_TRIALS} needed")]
    TooFewTrials(usize),
    #[error("law {0} is not bounded")]
    UnboundedLaw(String),
    #[error("no spacing certificate verifies for law {0}")]
    SpacingUnverified(String),
    #[error("cutoff parameters invalid: {0}")]
    InvalidCutoff(String),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Law(#[from] LawError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// `log(max(ε, x))` for [`Sign::Plus`], `log(max(ε, −x))` for [`Sign::Minus`].
/// Both are `1/ε`-Lipschitz.
pub fn cutoff_log(x: f64, epsilon: f64, sign: Sign) -> f64 {
    let y = match sign {
        Sign::Plus => x,
        Sign::Minus => -x,
    };
    epsilon.max(y).ln()
}

/// Parameters of the concentration inequality applied to a cutoff function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CutoffSpec {
    pub epsilon: f64,
    pub delta: f64,
    pub lipschitz_bound: f64,
}

impl CutoffSpec {
    /// Requires `δ >= δ₀ = 16·C·√π·(1/ε)/n`.
    pub fn new(epsilon: f64, delta: f64, c: f64, n: usize) -> Result<Self, DetConcError> {
        if !(epsilon > 0.0 && delta > 0.0) {
            return Err(DetConcError::InvalidCutoff("epsilon and delta must be positive".into()));
        }
        let spec = CutoffSpec { epsilon, delta, lipschitz_bound: 1.0 / epsilon };
        let delta0 = spec.delta0(c, n);
        if delta < delta0 {
            return Err(DetConcError::InvalidCutoff(format!("delta {delta} below delta0 {delta0}")));
        }
        Ok(spec)
    }

    pub fn delta0(&self, c: f64, n: usize) -> f64 {
        16.0 * c * std::f64::consts::PI.sqrt() * self.lipschitz_bound / n as f64
    }
}

/// Number of eigenvalues in `[lo, hi)`. Half-open so that a partition of
/// the line into intervals counts every eigenvalue once.
pub fn spectral_window_count(summary: &SpectralSummary, lo: f64, hi: f64) -> usize {
    if !(hi > lo) {
        return 0;
    }
    let ev = &summary.eigenvalues;
    ev.partition_point(|&l| l < hi) - ev.partition_point(|&l| l < lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncatedLogDet {
    /// `∑ log|λ|` over `|λ| > ε`.
    pub kept_sum: f64,
    /// `#{|λ| <= ε}`.
    pub dropped_count: usize,
    /// `dropped_count · log(min |λ|)`, a lower bound for the dropped part.
    pub small_product_bound: f64,
}

pub fn truncated_log_det(summary: &SpectralSummary, epsilon: f64) -> Result<TruncatedLogDet, DetConcError> {
    let mut kept_sum = 0.0;
    let mut dropped_count = 0;
    for l in &summary.eigenvalues {
        if l.abs() > epsilon {
            kept_sum += l.abs().ln();
        } else {
            dropped_count += 1;
        }
    }
    let small_product_bound = if dropped_count == 0 {
        0.0
    } else if summary.sigma_n == 0.0 {
        return Err(DetConcError::DegenerateSpectrum);
    } else {
        dropped_count as f64 * summary.sigma_n.ln()
    };
    Ok(TruncatedLogDet { kept_sum, dropped_count, small_product_bound })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetConcRow {
    pub n: usize,
    pub trial: u64,
    /// Seed of the stream family for this `n`.
    pub seed: u64,
    pub log_abs_det: f64,
    pub kept_sum: f64,
    pub dropped_count: usize,
    pub sigma_n: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetConcSummary {
    pub n: usize,
    pub trials: usize,
    pub epsilon: f64,
    pub mean_log_abs_det: f64,
    pub std_log_abs_det: f64,
    pub mean_kept: f64,
    pub std_kept: f64,
    /// `n^{1/3} log n`.
    pub scale: f64,
    /// `std_kept / scale`.
    pub ratio: f64,
    pub mean_dropped: f64,
    /// `δ = 2 log n / (ε n)`, so that `δn = 2 log n / ε`.
    pub delta: f64,
    pub deviation_threshold: f64,
    /// Fraction of trials with `|U| >= δn`, `U` the kept sum minus its mean.
    pub deviation_frequency: f64,
    /// `exp(−log² n)`, the shape of the predicted tail.
    pub predicted_tail: f64,
    /// `(multiple, P(|U| >= multiple · δn))`.
    pub survival: Vec<(f64, f64)>,
    /// `2 log n / ε`, the log of the additive term, kept apart from the
    /// multiplicative spread.
    pub additive_log_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetConcReport {
    pub rows: Vec<DetConcRow>,
    pub per_n: Vec<DetConcSummary>,
    /// Log-log slope of `std_kept` against `n`.
    pub fitted_exponent: Option<f64>,
}

fn check_trials(trials: usize) -> Result<(), DetConcError> {
    if trials < MIN_TRIALS {
        return Err(DetConcError::TooFewTrials(trials));
    }
    Ok(())
}

/// Samples `trials` matrices for each `n` with `F = 0` and measures `log|det|`
/// and the truncated sum at `ε = n^{−1/6}` (or the override).
pub fn concentration_experiment(law: &LawSpec, n_list: &[usize], trials: usize, seed: u64, epsilon: Option<f64>) -> Result<DetConcReport, DetConcError> {
    check_trials(trials)?;
    if !law.is_atomic() {
        return Err(DetConcError::UnboundedLaw(law.to_string()));
    }
    if epsilon.is_some_and(|e| !(e > 0.0)) {
        return Err(DetConcError::InvalidCutoff("epsilon must be positive".into()));
    }
    let sampler = law.sampler()?;
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    for &n in n_list {
        let nf = n as f64;
        let eps = epsilon.unwrap_or_else(|| nf.powf(-1.0 / 6.0));
        let n_seed = derive(seed, n as u64);
        let block = par_trials(trials, n_seed, |trial, rng| {
            let sample = sample_symmetric_float(sampler.as_ref(), None, n, 0.0, rng)?;
            let s = spectral_summary(&sample.m)?;
            let t = truncated_log_det(&s, eps)?;
            Ok::<_, DetConcError>(DetConcRow {
                n,
                trial,
                seed: n_seed,
                log_abs_det: s.log_abs_det,
                kept_sum: t.kept_sum,
                dropped_count: t.dropped_count,
                sigma_n: s.sigma_n,
                kappa: s.kappa,
            })
        })?;
        per_n.push(summarize(n, eps, &block));
        rows.extend(block);
    }
    let points: Vec<(f64, f64)> = per_n.iter().filter(|s| s.std_kept > 0.0).map(|s| (s.n as f64, s.std_kept)).collect();
    let fitted_exponent = loglog_fit(&points).map(|(slope, _)| slope);
    Ok(DetConcReport { rows, per_n, fitted_exponent })
}

fn summarize(n: usize, eps: f64, rows: &[DetConcRow]) -> DetConcSummary {
    let nf = n as f64;
    let ln_n = nf.ln();
    let log_dets: Vec<f64> = rows.iter().map(|r| r.log_abs_det).collect();
    let kept: Vec<f64> = rows.iter().map(|r| r.kept_sum).collect();
    let mean_kept = mean(&kept);
    let std_kept = std_dev(&kept);
    let scale = nf.cbrt() * ln_n;
    let deviation_threshold = 2.0 * ln_n / eps;
    let exceed = |t: f64| kept.iter().filter(|k| (*k - mean_kept).abs() >= t).count() as f64 / kept.len() as f64;
    DetConcSummary {
        n,
        trials: rows.len(),
        epsilon: eps,
        mean_log_abs_det: mean(&log_dets),
        std_log_abs_det: std_dev(&log_dets),
        mean_kept,
        std_kept,
        scale,
        ratio: std_kept / scale,
        mean_dropped: rows.iter().map(|r| r.dropped_count as f64).sum::<f64>() / rows.len() as f64,
        delta: deviation_threshold / nf,
        deviation_threshold,
        deviation_frequency: exceed(deviation_threshold),
        predicted_tail: (-ln_n * ln_n).exp(),
        survival: SURVIVAL_MULTIPLES.iter().map(|&m| (m, exceed(m * deviation_threshold))).collect(),
        additive_log_scale: deviation_threshold,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub n: usize,
    pub trial: u64,
    pub seed: u64,
    pub sigma_n: f64,
    pub kappa: f64,
    pub log_abs_det: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailSummary {
    pub n: usize,
    pub trials: usize,
    /// `n^{−A}`.
    pub sigma_threshold: f64,
    pub sigma_hits: usize,
    pub sigma_frequency: f64,
    pub sigma_interval: (f64, f64),
    /// `n^{A}`.
    pub kappa_threshold: f64,
    pub kappa_hits: usize,
    pub kappa_frequency: f64,
    pub kappa_interval: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    pub per_n: Vec<TailSummary>,
    /// `(slope, intercept)` of log frequency against log n over the sizes
    /// with a nonzero frequency.
    pub sigma_fit: Option<(f64, f64)>,
    pub kappa_fit: Option<(f64, f64)>,
}

/// Checks the spacing condition for `law` with `cert`, or with the law's
/// default certificate when none is given.
pub fn spacing_verified(law: &LawSpec, cert: Option<&SpacingCertificate<f64>>) -> bool {
    let Some(cert) = cert.cloned().or_else(|| law.default_certificate()) else {
        return false;
    };
    match law {
        LawSpec::Gaussian => verify_spacing_continuous(&ContinuousLaw::Gaussian, &cert),
        _ => law.atomic().map(|l| verify_spacing(&l.to_f64(), &cert)).unwrap_or(false),
    }
}

/// Frequencies of `σ_n <= n^{−A}` and `κ >= n^{A}` for `M = F + X`.
#[allow(clippy::too_many_arguments)]
pub fn tail_experiment(
    law: &LawSpec,
    f: Option<&Matrix<f64>>,
    gamma: f64,
    n_list: &[usize],
    a_exp: f64,
    trials: usize,
    seed: u64,
    cert: Option<&SpacingCertificate<f64>>,
) -> Result<TailReport, DetConcError> {
    if !spacing_verified(law, cert) {
        return Err(DetConcError::SpacingUnverified(law.to_string()));
    }
    let sampler = law.sampler()?;
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    for &n in n_list {
        let nf = n as f64;
        let n_seed = derive(seed, n as u64);
        // A fixed part is only meaningful at its own size.
        let fixed = f.filter(|f| f.rows() == n);
        let block = par_trials(trials, n_seed, |trial, rng| {
            let sample = sample_symmetric_float(sampler.as_ref(), fixed, n, gamma, rng)?;
            let s = spectral_summary(&sample.m)?;
            Ok::<_, DetConcError>(TailRow { n, trial, seed: n_seed, sigma_n: s.sigma_n, kappa: s.kappa, log_abs_det: s.log_abs_det })
        })?;
        let sigma_threshold = nf.powf(-a_exp);
        let kappa_threshold = nf.powf(a_exp);
        let sigma_hits = block.iter().filter(|r| r.sigma_n <= sigma_threshold).count();
        let kappa_hits = block.iter().filter(|r| r.kappa >= kappa_threshold).count();
        per_n.push(TailSummary {
            n,
            trials,
            sigma_threshold,
            sigma_hits,
            sigma_frequency: sigma_hits as f64 / trials as f64,
            sigma_interval: wilson(sigma_hits, trials),
            kappa_threshold,
            kappa_hits,
            kappa_frequency: kappa_hits as f64 / trials as f64,
            kappa_interval: wilson(kappa_hits, trials),
        });
        rows.extend(block);
    }
    let fit = |freq: &dyn Fn(&TailSummary) -> f64| {
        let points: Vec<(f64, f64)> = per_n.iter().filter(|s| freq(s) > 0.0).map(|s| (s.n as f64, freq(s))).collect();
        if points.len() >= 2 {
            loglog_fit(&points)
        } else {
            None
        }
    };
    let sigma_fit = fit(&|s| s.sigma_frequency);
    let kappa_fit = fit(&|s| s.kappa_frequency);
    Ok(TailReport { rows, per_n, sigma_fit, kappa_fit })
}
