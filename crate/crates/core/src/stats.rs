//! Small statistical helpers for the Monte Carlo harness.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Binomial standard error `sqrt(p(1-p)/n)` at the empirical frequency.
pub fn binomial_se(successes: usize, trials: usize) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let p = successes as f64 / trials as f64;
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Wilson score interval at 95%.
pub fn wilson(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// DKW half-width `sqrt(ln(2/delta) / (2 trials))`.
pub fn dkw_halfwidth(trials: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * trials as f64)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Verdict for an upper bound on a probability estimated by `(lo, hi)`.
    pub fn upper_bound(lo: f64, hi: f64, bound: f64) -> Verdict {
        if hi <= bound {
            Verdict::Pass
        } else if lo > bound {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    /// Verdict for a lower bound on a probability estimated by `(lo, hi)`.
    pub fn lower_bound(lo: f64, hi: f64, bound: f64) -> Verdict {
        if lo >= bound {
            Verdict::Pass
        } else if hi < bound {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    /// The worst of a collection: any fail wins, then any inconclusive.
    pub fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Pass;
        for v in verdicts {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::Pass => {}
            }
        }
        out
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Least-squares slope and intercept of `ln y` against `ln x`, over points with
/// `y > 0`. `None` with fewer than two usable points.
pub fn loglog_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson(30, 100);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson(0, 10_000);
        assert_eq!(lo, 0.0);
        assert!(hi < 5e-4);
    }

    #[test]
    fn dkw_matches_formula() {
        assert!((dkw_halfwidth(1_000_000, 0.05) - 0.001358).abs() < 1e-6);
    }

    #[test]
    fn fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(-1.5))).collect();
        let (slope, icpt) = loglog_fit(&pts).unwrap();
        assert!((slope + 1.5).abs() < 1e-12);
        assert!((icpt - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn verdicts() {
        assert_eq!(Verdict::upper_bound(0.0, 0.005, 0.01), Verdict::Pass);
        assert_eq!(Verdict::upper_bound(0.005, 0.02, 0.01), Verdict::Inconclusive);
        assert_eq!(Verdict::upper_bound(0.02, 0.03, 0.01), Verdict::Fail);
        assert_eq!(Verdict::combine([Verdict::Pass, Verdict::Inconclusive]), Verdict::Inconclusive);
    }
}
