//! The seven experiments. Each turns a config into string rows, a JSON
//! summary and a list of checks.

use anticonc::detconc::{concentration_experiment, tail_experiment};
use anticonc::ensembles::{grow_and_track, odlyzko_membership};
use anticonc::gap::{rank_reduce, Gap, LatticePoint, StepKind};
use anticonc::laws::AtomicLaw;
use anticonc::matrix::read_text;
use anticonc::rng::{derive, par_trials};
use anticonc::scalar::{int, parse_rational};
use anticonc::smallball::{linear_small_ball_exact, linear_small_ball_mc, LinearForm, QuadraticForm, SmallBallError};
use anticonc::stats::{dkw_halfwidth, wilson, Verdict};
use anticonc::structure::{decoupling_scan, Bipartition};
use anticonc::{Matrix, Rational, Scalar};
use num_traits::Zero;
use rand::{Rng, RngCore};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Failure probability for the DKW band used in small-ball verdicts.
pub const VERDICT_DELTA: f64 = 1e-3;
/// Largest spread allowed between the normalised deviations at different
/// sizes in `detconc`.
pub const RATIO_SPREAD: f64 = 1.5;
/// Default bound on the frequency of large deviations in `detconc`.
pub const DEVIATION_BOUND: f64 = 0.05;
/// Default bound on the tail frequencies in `tail`.
pub const TAIL_BOUND: f64 = 0.01;
/// Upper end of the entry range in random `decoupling` forms.
const DECOUPLING_ENTRY: i64 = 3;
/// Volume cap for planted `gapreduce` instances.
const PLANTED_VOLUME: u128 = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, verdict: Verdict, detail: impl Into<String>) -> Self {
        Check { name: name.into(), verdict, detail: detail.into() }
    }

    fn exact(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Check::new(name, if ok { Verdict::Pass } else { Verdict::Fail }, detail)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Value,
    pub checks: Vec<Check>,
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::InvalidConfig { field: field.to_string(), message: message.into() }
}

fn rational_field(field: &str, s: &str) -> Result<Rational, CliError> {
    parse_rational(s).ok_or_else(|| invalid(field, format!("`{s}` is not a rational")))
}

fn beta(cfg: &ExperimentConfig, default: &str) -> Result<Rational, CliError> {
    let b = rational_field("beta", cfg.beta.as_deref().unwrap_or(default))?;
    if b < Rational::zero() {
        return Err(invalid("beta", "must be non-negative"));
    }
    Ok(b)
}

fn atomic_law(cfg: &ExperimentConfig) -> Result<AtomicLaw<Rational>, CliError> {
    cfg.law.atomic().map_err(|e| invalid("law", e.to_string()))
}

fn spacing_c3(cfg: &ExperimentConfig) -> Result<f64, CliError> {
    cfg.law.default_certificate().map(|c| c.c3).ok_or_else(|| invalid("law", format!("no spacing certificate for {}", cfg.law)))
}

fn positive_trials(cfg: &ExperimentConfig) -> Result<usize, CliError> {
    if cfg.trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    Ok(cfg.trials)
}

pub fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match cfg.experiment.as_str() {
        "smallball" => smallball(cfg),
        "tail" => tail(cfg),
        "detconc" => detconc(cfg),
        "decoupling" => decoupling(cfg),
        "gapreduce" => gapreduce(cfg),
        "rankgrow" => rankgrow(cfg),
        "odlyzko" => odlyzko(cfg),
        other => Err(CliError::UnknownExperiment(other.to_string())),
    }
}

/// Exact and Monte Carlo small-ball probabilities of `∑ a_i ξ_i`, with
/// `a` from `coeffs` or all ones at each size.
fn smallball(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let trials = positive_trials(cfg)?;
    let beta = beta(cfg, "0")?;
    let sampler = cfg.law.sampler()?;
    let instances: Vec<Vec<Rational>> = if cfg.coeffs.is_empty() {
        cfg.sizes(&[10]).into_iter().map(|n| vec![int(1); n]).collect()
    } else {
        vec![cfg.coeffs.iter().map(|c| rational_field("coeffs", c)).collect::<Result<_, _>>()?]
    };
    let law = if cfg.law.is_atomic() { Some(atomic_law(cfg)?) } else { None };
    let band = dkw_halfwidth(trials, VERDICT_DELTA);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (idx, coeffs) in instances.iter().enumerate() {
        let n = coeffs.len();
        let exact = match &law {
            Some(law) => match linear_small_ball_exact(&LinearForm::unshifted(coeffs.clone())?, law, &beta) {
                Ok(r) => Some(r.rho.to_f64()),
                Err(SmallBallError::AtomBlowup { .. } | SmallBallError::EnumerationTooLarge { .. }) => None,
                Err(e) => return Err(e.into()),
            },
            None => None,
        };
        let form = LinearForm::unshifted(coeffs.iter().map(Scalar::to_f64).collect())?;
        let mc = linear_small_ball_mc(&form, sampler.as_ref(), beta.to_f64(), trials, derive(cfg.seed, idx as u64));
        let sqrt_n = (n as f64).sqrt();
        match exact {
            Some(rho) => {
                let gap = (mc.rho - rho).abs();
                checks.push(Check::exact(format!("mc_matches_exact_n{n}"), gap <= band, format!("|{} - {rho}| = {gap} vs band {band}", mc.rho)));
            }
            None => checks.push(Check::new(format!("mc_matches_exact_n{n}"), Verdict::Inconclusive, "exact enumeration out of reach")),
        }
        rows.push(vec![
            n.to_string(),
            exact.map(|r| r.to_string()).unwrap_or_default(),
            mc.rho.to_string(),
            mc.ci_halfwidth.to_string(),
            (exact.unwrap_or(mc.rho) * sqrt_n).to_string(),
        ]);
    }
    Ok(Outcome {
        header: header(&["n", "rho_exact", "rho_mc", "ci_halfwidth", "rho_sqrt_n"]),
        rows,
        summary: json!({ "beta": beta.to_string(), "law": cfg.law.to_string(), "band": band }),
        checks,
    })
}

fn fixed_part(cfg: &ExperimentConfig) -> Result<Option<Matrix<f64>>, CliError> {
    let Some(path) = &cfg.f_file else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    read_text(&text).map(Some).map_err(|e| invalid("f_file", e.to_string()))
}

fn tail(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let trials = positive_trials(cfg)?;
    let a_exp = cfg.a_exp.unwrap_or(3.0);
    let bound = cfg.bound.unwrap_or(TAIL_BOUND);
    let f = fixed_part(cfg)?;
    let report = tail_experiment(&cfg.law, f.as_ref(), cfg.gamma, &cfg.sizes(&[20, 40]), a_exp, trials, cfg.seed, None)?;
    let rows = report
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), r.trial.to_string(), r.seed.to_string(), r.sigma_n.to_string(), r.kappa.to_string(), r.log_abs_det.to_string()])
        .collect();
    let mut checks = Vec::new();
    for s in &report.per_n {
        let (lo, hi) = s.sigma_interval;
        checks.push(Check::new(format!("sigma_tail_n{}", s.n), Verdict::upper_bound(lo, hi, bound), format!("frequency {} in [{lo}, {hi}] vs {bound}", s.sigma_frequency)));
        let (lo, hi) = s.kappa_interval;
        checks.push(Check::new(format!("kappa_tail_n{}", s.n), Verdict::upper_bound(lo, hi, bound), format!("frequency {} in [{lo}, {hi}] vs {bound}", s.kappa_frequency)));
    }
    Ok(Outcome {
        header: header(&["n", "trial", "seed", "sigma_n", "kappa", "log_abs_det"]),
        rows,
        summary: json!({ "a_exp": a_exp, "bound": bound, "per_n": report.per_n, "sigma_fit": report.sigma_fit, "kappa_fit": report.kappa_fit }),
        checks,
    })
}

fn detconc(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let bound = cfg.bound.unwrap_or(DEVIATION_BOUND);
    let report = concentration_experiment(&cfg.law, &cfg.sizes(&[50, 100, 200]), cfg.trials, cfg.seed, cfg.epsilon)?;
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                r.log_abs_det.to_string(),
                r.kept_sum.to_string(),
                r.dropped_count.to_string(),
                r.sigma_n.to_string(),
                r.kappa.to_string(),
            ]
        })
        .collect();
    let mut checks = Vec::new();
    let ratios: Vec<f64> = report.per_n.iter().map(|s| s.ratio).collect();
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    if ratios.len() >= 2 {
        checks.push(Check::exact("ratio_bounded", max <= RATIO_SPREAD * min, format!("max ratio {max} vs {RATIO_SPREAD} x min ratio {min}")));
    }
    for s in &report.per_n {
        let hits = (s.deviation_frequency * s.trials as f64).round() as usize;
        let (lo, hi) = wilson(hits, s.trials);
        checks.push(Check::new(format!("deviations_n{}", s.n), Verdict::upper_bound(lo, hi, bound), format!("{hits}/{} beyond {} (interval [{lo}, {hi}]) vs {bound}", s.trials, s.deviation_threshold)));
    }
    Ok(Outcome {
        header: header(&["n", "trial", "seed", "log_abs_det", "kept_sum", "dropped_count", "sigma_n", "kappa"]),
        rows,
        summary: json!({ "per_n": report.per_n, "fitted_exponent": report.fitted_exponent, "max_ratio": max, "min_ratio": min }),
        checks,
    })
}

/// Random symmetric form with zero diagonal and entries in `[-3, 3]`.
pub fn random_zero_diagonal_form(n: usize, rng: &mut dyn RngCore) -> Matrix<Rational> {
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = int(rng.random_range(-DECOUPLING_ENTRY..=DECOUPLING_ENTRY));
            a.set(i, j, v.clone());
            a.set(j, i, v);
        }
    }
    a
}

fn decoupling(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let trials = positive_trials(cfg)?;
    let max_n = cfg.n.unwrap_or(6);
    if max_n < 2 {
        return Err(invalid("n", "decoupling needs n >= 2"));
    }
    let law = atomic_law(cfg)?;
    let beta = beta(cfg, "1")?;
    let records = par_trials(trials, cfg.seed, |_, rng| {
        let n = rng.random_range(2..=max_n);
        let a = random_zero_diagonal_form(n, rng);
        let u = Bipartition::random(n, rng);
        let form = QuadraticForm::unshifted(a)?;
        Ok::<_, CliError>((n, decoupling_scan(&form, &law, &beta, &u)?))
    })?;
    let holds = records.iter().filter(|(_, r)| r.holds).count();
    let rows = records
        .iter()
        .enumerate()
        .map(|(t, (n, r))| {
            vec![t.to_string(), n.to_string(), r.rho_quad.to_string(), r.lhs.to_string(), r.rhs.to_string(), r.rhs_centered.to_string(), r.radius_constant.to_string(), r.holds.to_string()]
        })
        .collect();
    Ok(Outcome {
        header: header(&["trial", "n", "rho_quad", "lhs", "rhs", "rhs_centered", "radius_constant", "holds"]),
        rows,
        summary: json!({ "instances": trials, "holds": holds, "beta": beta.to_string() }),
        checks: vec![Check::exact("decoupling_holds", holds == trials, format!("{holds}/{trials} instances"))],
    })
}

fn step_label(kind: &StepKind) -> String {
    let list = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
    match kind {
        StepKind::Hyperplane { alpha, pivot, w } => format!("hyperplane alpha=({}) pivot={pivot} w={w}", list(alpha)),
        StepKind::Substitution { relation, pivot } => format!("substitution relation=({}) pivot={pivot}", list(relation)),
        StepKind::Collapse { generator } => format!("collapse generator={generator}"),
        StepKind::DropZero { removed } => format!("drop_zero removed=({})", removed.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")),
    }
}

/// Outcome of reducing one instance, with the properties the reduction must
/// preserve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapAudit {
    pub rank_in: usize,
    pub rank_out: usize,
    pub volume_in: u128,
    pub volume_out: u128,
    pub contains_all: bool,
    pub rank_nonincreasing: bool,
    pub spans: bool,
    pub proper: bool,
    pub output: String,
}

impl GapAudit {
    pub fn ok(&self) -> bool {
        self.contains_all && self.rank_nonincreasing && self.spans && self.proper
    }
}

pub fn audit_reduction(q: &Gap, values: &[Rational], witnesses: &[LatticePoint]) -> Result<(GapAudit, Vec<anticonc::gap::ReductionStep>), CliError> {
    let red = rank_reduce(q, values, witnesses)?;
    let out = &red.gap;
    let mut contains_all = true;
    for (v, w) in values.iter().zip(&red.witnesses) {
        contains_all &= out.evaluate(w)? == *v && out.beta_close(v, &Rational::zero())?.is_some();
    }
    let mut prev = q.rank();
    let mut rank_nonincreasing = true;
    for s in &red.steps {
        rank_nonincreasing &= s.rank_after <= prev && s.identity_holds;
        prev = s.rank_after;
    }
    let audit = GapAudit {
        rank_in: q.rank(),
        rank_out: out.rank(),
        volume_in: q.volume(),
        volume_out: out.volume(),
        contains_all,
        rank_nonincreasing,
        spans: out.spans(&red.witnesses)?,
        proper: out.is_proper()?,
        output: out.to_string(),
    };
    Ok((audit, red.steps))
}

/// A random proper symmetric GAP of rank at most 3 and volume at most `10⁴`,
/// with a handful of points confined to a proper sublattice of its box.
pub fn planted_gap_instance(rng: &mut dyn RngCore) -> (Gap, Vec<Rational>, Vec<LatticePoint>) {
    loop {
        let r = rng.random_range(1..=3usize);
        let max_k: i64 = match r {
            1 => 4999,
            2 => 49,
            _ => 10,
        };
        let bounds: Vec<i64> = (0..r).map(|_| rng.random_range(1..=max_k)).collect();
        let generators: Vec<Rational> = (0..r)
            .map(|_| {
                let mut g = 0;
                while g == 0 {
                    g = rng.random_range(-60..=60i64);
                }
                anticonc::scalar::rational(g, rng.random_range(1..=3))
            })
            .collect();
        let Ok(q) = Gap::symmetric(generators, bounds.clone()) else { continue };
        if q.volume() > PLANTED_VOLUME || !q.is_proper().unwrap_or(false) {
            continue;
        }
        // Points in the span of d < r small integer directions.
        let d = rng.random_range(0..r);
        let directions: Vec<Vec<i64>> = (0..d).map(|_| (0..r).map(|_| rng.random_range(-1..=1)).collect()).collect();
        let count = rng.random_range(1..=4);
        let mut witnesses = Vec::with_capacity(count);
        while witnesses.len() < count {
            let mut p = vec![0i64; r];
            for dir in &directions {
                let c = rng.random_range(-2..=2i64);
                for (x, y) in p.iter_mut().zip(dir) {
                    *x += c * y;
                }
            }
            if p.iter().zip(&bounds).all(|(x, k)| x.abs() <= *k) {
                witnesses.push(LatticePoint(p));
            }
        }
        let values = witnesses.iter().map(|w| q.evaluate(w).expect("planted point lies in the box")).collect();
        return (q, values, witnesses);
    }
}

fn gapreduce(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    if cfg.planted {
        let trials = positive_trials(cfg)?;
        let audits = par_trials(trials, cfg.seed, |_, rng| {
            let (q, values, witnesses) = planted_gap_instance(rng);
            audit_reduction(&q, &values, &witnesses).map(|(a, steps)| (a, steps.len()))
        })?;
        let ok = audits.iter().filter(|(a, _)| a.ok()).count();
        let rows = audits
            .iter()
            .enumerate()
            .map(|(t, (a, steps))| {
                vec![
                    t.to_string(),
                    a.rank_in.to_string(),
                    a.rank_out.to_string(),
                    a.volume_in.to_string(),
                    a.volume_out.to_string(),
                    steps.to_string(),
                    a.contains_all.to_string(),
                    a.rank_nonincreasing.to_string(),
                    a.spans.to_string(),
                    a.proper.to_string(),
                ]
            })
            .collect();
        return Ok(Outcome {
            header: header(&["trial", "rank_in", "rank_out", "volume_in", "volume_out", "steps", "contains_all", "rank_nonincreasing", "spans", "proper"]),
            rows,
            summary: json!({ "instances": trials, "ok": ok }),
            checks: vec![Check::exact("reductions_valid", ok == trials, format!("{ok}/{trials} instances"))],
        });
    }
    let (generators, bounds, values) = if cfg.generators.is_empty() {
        (vec![int(1), int(10)], vec![2, 2], vec![int(11), int(22)])
    } else {
        if cfg.bounds.len() != cfg.generators.len() {
            return Err(invalid("bounds", "one bound per generator is required"));
        }
        let g = cfg.generators.iter().map(|s| rational_field("generators", s)).collect::<Result<_, _>>()?;
        let v = cfg.values.iter().map(|s| rational_field("values", s)).collect::<Result<_, _>>()?;
        (g, cfg.bounds.clone(), v)
    };
    let q = Gap::symmetric(generators, bounds)?;
    let mut witnesses = Vec::new();
    for v in &values {
        let w = q.beta_close(v, &Rational::zero())?.ok_or_else(|| invalid("values", format!("{v} is not an element of {q}")))?;
        witnesses.push(w);
    }
    let (audit, steps) = audit_reduction(&q, &values, &witnesses)?;
    let rows = steps
        .iter()
        .enumerate()
        .map(|(i, s)| vec![i.to_string(), step_label(&s.kind), s.rank_after.to_string(), s.volume_after.to_string(), s.identity_holds.to_string()])
        .collect();
    let checks = vec![
        Check::exact("contains_all", audit.contains_all, audit.output.clone()),
        Check::exact("rank_nonincreasing", audit.rank_nonincreasing, format!("{} -> {}", audit.rank_in, audit.rank_out)),
        Check::exact("spans", audit.spans, ""),
        Check::exact("proper", audit.proper, ""),
    ];
    Ok(Outcome {
        header: header(&["step", "kind", "rank_after", "volume_after", "identity_holds"]),
        rows,
        summary: json!({ "input": q.to_string(), "values": values.iter().map(|v| v.to_string()).collect::<Vec<_>>(), "audit": audit }),
        checks,
    })
}

fn rankgrow(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let trials = positive_trials(cfg)?;
    let n = cfg.n.unwrap_or(4);
    if n < 2 {
        return Err(invalid("n", "rankgrow needs a start size of at least 2"));
    }
    let steps = cfg.steps.unwrap_or(n - 1);
    if steps == 0 {
        return Err(invalid("steps", "must be positive"));
    }
    let law = atomic_law(cfg)?;
    let c3 = spacing_c3(cfg)?;
    let start = Matrix::<Rational>::zeros(n, n);
    let runs = par_trials(trials, cfg.seed, |_, rng| Ok::<_, CliError>(grow_and_track(&start, &law, steps, rng)?))?;
    let lemma = 1.0 - (1.0 - c3).powf(n as f64 / 2.0);
    let first_jumps = runs.iter().filter(|g| g.steps[0].jumped_by_2).count();
    let corank = |g: &anticonc::ensembles::Growth| g.steps.last().map(|s| s.size - s.rank).unwrap_or(n);
    let reached = runs.iter().filter(|g| corank(g) <= 1).count();
    let chained: Vec<_> = runs.iter().filter(|g| g.steps.iter().all(|s| s.jumped_by_2)).collect();
    // Every step jumping leaves size n + s and rank 2s.
    let chained_ok = chained.iter().filter(|g| corank(g) + steps == n).count();
    let rows = runs
        .iter()
        .enumerate()
        .map(|(t, g)| {
            let last = g.steps.last().expect("at least one step");
            vec![t.to_string(), g.steps[0].rank.to_string(), g.steps[0].jumped_by_2.to_string(), last.size.to_string(), last.rank.to_string(), corank(g).to_string(), g.steps.iter().all(|s| s.jumped_by_2).to_string()]
        })
        .collect();
    let (lo, hi) = wilson(first_jumps, trials);
    let (rlo, rhi) = wilson(reached, trials);
    let checks = vec![
        Check::new("first_step_jump", Verdict::lower_bound(lo, hi, lemma), format!("{first_jumps}/{trials} in [{lo}, {hi}] vs {lemma}")),
        Check::new("reaches_corank_one", Verdict::lower_bound(rlo, rhi, 0.5), format!("{reached}/{trials} in [{rlo}, {rhi}] vs 0.5")),
        Check::exact("chained_corank", chained_ok == chained.len(), format!("{chained_ok}/{} fully jumping runs end at the predicted corank", chained.len())),
    ];
    Ok(Outcome {
        header: header(&["trial", "step1_rank", "step1_jump", "final_size", "final_rank", "final_corank", "all_jumped"]),
        rows,
        summary: json!({ "start": n, "steps": steps, "c3": c3, "lemma_bound": lemma, "first_jumps": first_jumps, "reached_corank_one": reached, "fully_jumping": chained.len() }),
        checks,
    })
}

fn odlyzko(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let trials = positive_trials(cfg)?;
    let law = atomic_law(cfg)?;
    let c3 = spacing_c3(cfg)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut records = Vec::new();
    for n in cfg.sizes(&[8, 12]) {
        let ks: Vec<usize> = match cfg.k {
            Some(k) if k >= 1 && k < n => vec![k],
            Some(k) => return Err(invalid("k", format!("{k} not in 1..{n}"))),
            None => (1..n).collect(),
        };
        for k in ks {
            let tag = (n as u64) << 32 | k as u64;
            let r = odlyzko_membership(&law, c3, n, k, trials, derive(cfg.seed, tag))?;
            let (lo, hi) = wilson(r.hits, r.trials);
            checks.push(Check::new(format!("membership_n{n}_k{k}"), Verdict::upper_bound(lo, hi, r.bound), format!("{}/{} in [{lo}, {hi}] vs {}", r.hits, r.trials, r.bound)));
            rows.push(vec![n.to_string(), k.to_string(), r.trials.to_string(), r.hits.to_string(), r.frequency.to_string(), r.se.to_string(), r.bound.to_string()]);
            records.push(r);
        }
    }
    Ok(Outcome {
        header: header(&["n", "k", "trials", "hits", "frequency", "se", "bound"]),
        rows,
        summary: json!({ "c3": c3, "records": records }),
        checks,
    })
}
