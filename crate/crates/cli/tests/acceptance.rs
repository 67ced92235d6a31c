//! Acceptance suite: twelve criteria, one line each. Run with
//! `cargo test -p anticonc-cli --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use anticonc::ensembles::{cofactor_expansion_check, grow_and_track, odlyzko_membership, sample_symmetric_exact, sample_symmetric_float, spectral_summary};
use anticonc::gap::{rank_reduce, Gap, LatticePoint};
use anticonc::laws::{AtomicLaw, LawSpec};
use anticonc::rng::{derive, stream};
use anticonc::scalar::{int, rational};
use anticonc::smallball::{central_binomial_mass, linear_small_ball_exact, LinearForm};
use anticonc::stats::Verdict;
use anticonc::structure::{build_row_matrix, conditioning_check, decoupling_scan, Bipartition, RowMatrixSpec};
use anticonc::{Matrix, Rational, Scalar};
use anticonc_cli::experiments::{audit_reduction, planted_gap_instance, random_zero_diagonal_form};
use anticonc_cli::{run, ExperimentConfig, ResultRecord};
use num_traits::{One, Zero};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

const SEED: u64 = 7;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn experiment(text: &str) -> Result<ResultRecord, String> {
    let cfg = ExperimentConfig::parse(&format!("{text}\nseed={SEED}")).map_err(|e| e.to_string())?;
    run(&cfg).map_err(|e| e.to_string())
}

fn column(rec: &ResultRecord, name: &str) -> usize {
    rec.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

/// Common denominator of every coefficient, shift and radius drawn below.
const SCALE: i64 = 24;

/// Brute force over the support of `law^n` for a law with equally likely
/// integer atoms: with everything scaled by [`SCALE`] the values are
/// integers, and the small-ball value is the largest count in a closed window
/// of width `2β` (one can start at an attained value) over `|atoms|^n`.
fn brute_small_ball(coeffs: &[(i64, i64)], shifts: &[(i64, i64)], atoms: &[i64], beta_scaled: i64) -> Rational {
    let scaled = |(p, q): (i64, i64)| p * (SCALE / q);
    let mut values = vec![0i64];
    for (&a, &f) in coeffs.iter().zip(shifts) {
        let (a, f) = (scaled(a), scaled(f));
        values = values.iter().flat_map(|v| atoms.iter().map(move |x| v + a * (x * SCALE + f))).collect();
    }
    // Each term is now scaled by SCALE².
    values.sort_unstable();
    let width = 2 * beta_scaled * SCALE;
    let best = values.iter().map(|&v| values.partition_point(|&u| u <= v + width) - values.partition_point(|&u| u < v)).max().unwrap();
    Rational::new((best as i64).into(), (values.len() as i64).into())
}

/// Determinant by plain rational Gaussian elimination.
fn gauss_det(m: &Matrix<Rational>) -> Rational {
    let n = m.rows();
    let mut a = m.to_rows();
    let mut det = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else { return Rational::zero() };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c].clone();
        for r in c + 1..n {
            let f = &a[r][c] / &a[c][c];
            for k in c..n {
                let sub = &f * &a[c][k];
                a[r][k] -= sub;
            }
        }
    }
    det
}

fn c1_small_ball_oracle() -> Outcome {
    let laws = [(AtomicLaw::bernoulli(), vec![-1i64, 1]), (AtomicLaw::uniform3(), vec![-1, 0, 1])];
    let betas = [0i64, 6, 12, 24, 36, 48];
    let mismatches: Vec<String> = (0..200u64)
        .into_par_iter()
        .filter_map(|t| {
            let mut rng = stream(derive(SEED, 1), t);
            let (law, atoms) = &laws[(t % 2) as usize];
            let n = rng.random_range(1..=10);
            let coeffs: Vec<(i64, i64)> = (0..n).map(|_| (rng.random_range(-6..=6), rng.random_range(1..=4))).collect();
            let shifts: Vec<(i64, i64)> = (0..n).map(|_| (rng.random_range(-2..=2), rng.random_range(1..=2))).collect();
            let beta_scaled = *betas.choose(&mut rng).unwrap();
            let as_rational = |v: &[(i64, i64)]| v.iter().map(|&(p, q)| rational(p, q)).collect();
            let form = LinearForm::new(as_rational(&coeffs), as_rational(&shifts)).unwrap();
            let exact = linear_small_ball_exact(&form, law, &rational(beta_scaled, SCALE)).unwrap().rho;
            let brute = brute_small_ball(&coeffs, &shifts, atoms, beta_scaled);
            (exact != brute).then(|| format!("instance {t}: {exact} vs {brute}"))
        })
        .collect();
    ensure(mismatches.is_empty(), format!("{} of 200 instances differ {:?}", mismatches.len(), mismatches.first()))
}

fn c2_central_binomial() -> Outcome {
    let law = AtomicLaw::bernoulli();
    for n in (16..=40usize).step_by(2) {
        let form = LinearForm::unshifted(vec![int(1); n]).unwrap();
        if linear_small_ball_exact(&form, &law, &int(0)).unwrap().rho != central_binomial_mass(n as u64) {
            return Err(format!("convolution and central binomial disagree at n={n}"));
        }
    }
    let scaled: Vec<(u64, f64)> = (16..=2000u64).step_by(2).map(|n| (n, central_binomial_mass(n).to_f64() * (n as f64).sqrt())).collect();
    let bad: Vec<_> = scaled.iter().filter(|(_, s)| !(0.6..=0.8).contains(s)).collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0f64), |(lo, hi), (_, s)| (lo.min(*s), hi.max(*s)));
    ensure(bad.is_empty(), format!("rho*sqrt(n) in [{lo:.5}, {hi:.5}] over {} even n", scaled.len()))
}

fn c3_odlyzko() -> Outcome {
    let law = AtomicLaw::bernoulli();
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for n in [8usize, 12] {
        for k in 1..n {
            let r = odlyzko_membership(&law, 0.5, n, k, 100_000, derive(SEED, (n as u64) << 32 | k as u64)).map_err(|e| e.to_string())?;
            let limit = 0.5f64.sqrt().powi((n - k) as i32) + 3.0 * r.se;
            worst = worst.max(r.frequency - limit);
            if r.frequency > limit {
                failures.push(format!("n={n} k={k}: {} > {limit}", r.frequency));
            }
        }
    }
    ensure(failures.is_empty(), format!("18 (n, k) pairs, max frequency minus limit {worst:.4} {failures:?}"))
}

fn c4_rank_growth() -> Outcome {
    let law = AtomicLaw::bernoulli();
    let trials = 10_000u64;
    let start = Matrix::<Rational>::zeros(4, 4);
    let runs: Vec<(bool, usize)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let g = grow_and_track(&start, &law, 3, &mut stream(derive(SEED, 4), t)).unwrap();
            let last = g.steps.last().unwrap();
            (g.steps[0].jumped_by_2, last.size - last.rank)
        })
        .collect();
    let p = runs.iter().filter(|r| r.0).count() as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    let bound = 1.0 - 0.5f64.sqrt().powi(4) - 3.0 * se;
    let reached = runs.iter().filter(|r| r.1 <= 1).count() as f64 / trials as f64;
    ensure(p >= bound && reached >= 0.5, format!("P(jump) = {p:.4} vs {bound:.4}; corank <= 1 in {:.1}% of runs", 100.0 * reached))
}

fn c5_decoupling() -> Outcome {
    let masses = [rational(1, 4), rational(1, 3), rational(1, 2), rational(2, 3), rational(3, 4)];
    let results: Vec<(bool, f64)> = (0..100u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(derive(SEED, 5), t);
            let lo = rng.random_range(-3..=2i64);
            let hi = rng.random_range(lo + 1..=3);
            let p = masses.choose(&mut rng).unwrap().clone();
            let law = AtomicLaw::new(vec![(int(lo), p.clone()), (int(hi), Rational::one() - p)], "two-point").unwrap();
            let n = rng.random_range(2..=6);
            let form = anticonc::smallball::QuadraticForm::unshifted(random_zero_diagonal_form(n, &mut rng)).unwrap();
            let u = Bipartition::random(n, &mut rng);
            let rec = decoupling_scan(&form, &law, &int(1), &u).unwrap();
            (rec.holds && rec.radius_constant <= 4.0, rec.radius_constant)
        })
        .collect();
    let holds = results.iter().filter(|r| r.0).count();
    let max_rc = results.iter().map(|r| r.1).fold(0.0, f64::max);
    ensure(holds == 100, format!("{holds}/100 instances hold, largest radius constant used {max_rc}"))
}

fn c6_gap_reduction() -> Outcome {
    let audits: Vec<bool> = (0..500u64)
        .into_par_iter()
        .map(|t| {
            let (q, values, witnesses) = planted_gap_instance(&mut stream(derive(SEED, 6), t));
            audit_reduction(&q, &values, &witnesses).map(|(a, _)| a.ok() && a.rank_out <= a.rank_in && a.volume_in <= 10_000 && a.rank_in <= 3).unwrap_or(false)
        })
        .collect();
    let ok = audits.iter().filter(|&&a| a).count();
    let q = Gap::symmetric(vec![int(1), int(10)], vec![2, 2]).unwrap();
    let worked = rank_reduce(&q, &[int(11), int(22)], &[LatticePoint(vec![1, 1]), LatticePoint(vec![2, 2])]).map_err(|e| e.to_string())?;
    let exact = worked.gap.generators == vec![int(11)] && worked.gap.offset.is_zero();
    ensure(ok == 500 && exact, format!("{ok}/500 planted reductions valid; worked instance -> {}", worked.gap))
}

fn c7_cofactor_identity() -> Outcome {
    let bad = (0..500u64)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = stream(derive(SEED, 7), t);
            let n = rng.random_range(1..=8);
            let mut m = Matrix::from_fn(n, n, |_, _| int(0));
            for i in 0..n {
                for j in i..n {
                    let v = int(rng.random_range(-9..=9));
                    m.set(i, j, v.clone());
                    m.set(j, i, v);
                }
            }
            let id = cofactor_expansion_check(&m);
            !(id.equal && id.lhs == id.rhs && id.lhs == gauss_det(&m))
        })
        .count();
    ensure(bad == 0, format!("{} of 500 identities exact", 500 - bad))
}

fn random_row_spec(rng: &mut impl Rng) -> RowMatrixSpec {
    let n = rng.random_range(1..=12usize);
    let mut idx: Vec<usize> = (1..=n).collect();
    idx.shuffle(rng);
    let a = rng.random_range(0..=n);
    let rest = idx[a..].to_vec();
    let b = rng.random_range(0..=rest.len());
    let c = rng.random_range(0..=rest.len() - b);
    // Valid specs keep every entry within n^C; C = 1 here.
    let e = n.min(3) as i64;
    let k = rng.random_range(1..=e) * if rng.random() { 1 } else { -1 };
    let coeffs = (0..a).map(|_| (0..b + c).map(|_| rng.random_range(-e..=e)).collect()).collect();
    RowMatrixSpec { n, rows: idx[..a].to_vec(), cols_plus: rest[..b].to_vec(), cols_minus: rest[b..b + c].to_vec(), k, coeffs, bound_exponent: Some(1.0) }
}

fn c8_row_matrix() -> Outcome {
    let mut rng = stream(derive(SEED, 8), 0);
    let mut failures = Vec::new();
    for t in 0..200 {
        let spec = random_row_spec(&mut rng);
        let r = build_row_matrix(&spec).map_err(|e| e.to_string())?;
        let det = gauss_det(&r.map(|&x| int(x)));
        let expected = (0..spec.rows.len()).fold(Rational::one(), |acc, _| acc * int(spec.k.abs()));
        let conditioned = conditioning_check(&r, 2.0).map_err(|e| e.to_string())?;
        if num_traits::Signed::abs(&det) != expected || !conditioned {
            failures.push(t);
        }
    }
    ensure(failures.is_empty(), format!("{} of 200 specs exact and conditioned {failures:?}", 200 - failures.len()))
}

fn c9_sigma_tail() -> Outcome {
    let rec = experiment("experiment=tail\nlaw=bernoulli\nn_list=20,40,80\na_exp=3\ntrials=10000")?;
    let (n_col, s_col) = (column(&rec, "n"), column(&rec, "sigma_n"));
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [20usize, 40, 80] {
        let threshold = (n as f64).powf(-3.0);
        let rows: Vec<_> = rec.rows.iter().filter(|r| r[n_col] == n.to_string()).collect();
        let hits = rows.iter().filter(|r| r[s_col].parse::<f64>().unwrap() <= threshold).count();
        let freq = hits as f64 / rows.len() as f64;
        let verdict = rec.checks.iter().find(|c| c.name == format!("sigma_tail_n{n}")).map(|c| c.verdict).unwrap_or(Verdict::Fail);
        ok &= rows.len() == 10_000 && (freq <= 0.01 && verdict == Verdict::Pass || verdict == Verdict::Inconclusive);
        parts.push(format!("n={n}: {hits}/10000 ({})", verdict.as_str()));
    }
    ensure(ok, parts.join(", "))
}

fn c10_detconc() -> Outcome {
    let rec = experiment("experiment=detconc\nlaw=bernoulli\nn_list=50,100,200\ntrials=200")?;
    let per_n = rec.summary["per_n"].as_array().ok_or("missing per_n")?;
    let ratios: Vec<f64> = per_n.iter().map(|s| s["ratio"].as_f64().unwrap()).collect();
    let deviations: Vec<f64> = per_n.iter().map(|s| s["deviation_frequency"].as_f64().unwrap()).collect();
    let epsilons_ok = per_n.iter().all(|s| {
        let n = s["n"].as_f64().unwrap();
        (s["epsilon"].as_f64().unwrap() - n.powf(-1.0 / 6.0)).abs() < 1e-12
    });
    let (max, min) = (ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max), ratios.iter().cloned().fold(f64::INFINITY, f64::min));
    let bounded = max <= 1.5 * min;
    let rare = deviations.iter().all(|&d| d <= 0.05);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/");
    ensure(
        bounded && rare && epsilons_ok && rec.rows.len() == 600,
        format!("ratios {} (max/min {:.3}, limit 1.5); deviation frequencies {}", fmt(&ratios), max / min, fmt(&deviations)),
    )
}

fn c11_eigen_oracle() -> Outcome {
    let gaussian = LawSpec::Gaussian.sampler().unwrap();
    let bernoulli = LawSpec::Bernoulli.sampler().unwrap();
    let worst: Vec<(f64, f64)> = (0..1000u64)
        .into_par_iter()
        .map(|t| {
            let n = 1 + (t as usize * 37) % 200;
            let sampler = if t % 2 == 0 { gaussian.as_ref() } else { bernoulli.as_ref() };
            let m = sample_symmetric_float(sampler, None, n, 0.0, &mut stream(derive(SEED, 11), t)).unwrap().m;
            let s = spectral_summary(&m).unwrap();
            let sum: f64 = s.eigenvalues.iter().sum();
            let sq: f64 = s.eigenvalues.iter().map(|l| l * l).sum();
            let fro = m.frobenius_sq();
            // Relative to the Frobenius norm: the trace itself can vanish.
            ((sum - m.trace()).abs() / fro.sqrt().max(f64::MIN_POSITIVE), (sq - fro).abs() / fro.max(f64::MIN_POSITIVE))
        })
        .collect();
    let (tr, fr) = worst.iter().fold((0f64, 0f64), |(a, b), (x, y)| (a.max(*x), b.max(*y)));
    let law = AtomicLaw::uniform3();
    let mut det_err = 0f64;
    let mut compared = 0;
    for t in 0..500u64 {
        let n = 1 + (t % 10) as usize;
        let m = sample_symmetric_exact(&law, None, n, 0.0, &mut stream(derive(SEED, 111), t)).unwrap().m;
        let det = gauss_det(&m).to_f64().abs();
        if det == 0.0 {
            continue;
        }
        let s = spectral_summary(&m.to_f64()).map_err(|e| e.to_string())?;
        det_err = det_err.max((s.log_abs_det.exp() - det).abs() / det);
        compared += 1;
    }
    ensure(tr <= 1e-9 && fr <= 1e-9 && det_err <= 1e-6, format!("trace rel {tr:.2e}, Frobenius rel {fr:.2e} over 1000 matrices; det rel {det_err:.2e} over {compared} exact matrices"))
}

fn c12_determinism() -> Outcome {
    let configs = [
        "experiment=smallball\nn_list=10,20\ntrials=2000\nbeta=1",
        "experiment=tail\nn_list=20,40\ntrials=300",
        "experiment=detconc\nn_list=20,40\ntrials=60",
        "experiment=decoupling\nn=5\ntrials=30",
        "experiment=gapreduce\nplanted=true\ntrials=100",
        "experiment=gapreduce",
        "experiment=rankgrow\ntrials=500",
        "experiment=odlyzko\nn_list=8\ntrials=1000",
    ];
    let mut differing = Vec::new();
    for text in configs {
        let base = experiment(&format!("{text}\nworkers=1"))?;
        let csv = base.to_csv().map_err(|e| e.to_string())?;
        for workers in [2, 3, 8] {
            let other = experiment(&format!("{text}\nworkers={workers}"))?;
            if other.rows != base.rows || other.to_csv().map_err(|e| e.to_string())? != csv || other.config_hash != base.config_hash {
                differing.push(format!("{} at {workers} workers", base.experiment));
            }
        }
    }
    ensure(differing.is_empty(), format!("{} configs x 4 worker counts, differing: {differing:?}", configs.len()))
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { name: "exact small-ball equals brute force", limit: secs(10), check: c1_small_ball_oracle },
        Criterion { name: "central binomial scaling", limit: secs(5), check: c2_central_binomial },
        Criterion { name: "subspace membership bound", limit: secs(60), check: c3_odlyzko },
        Criterion { name: "rank growth under bordering", limit: secs(60), check: c4_rank_growth },
        Criterion { name: "decoupling inequality", limit: secs(120), check: c5_decoupling },
        Criterion { name: "GAP rank reduction", limit: secs(30), check: c6_gap_reduction },
        Criterion { name: "cofactor expansion identity", limit: secs(30), check: c7_cofactor_identity },
        Criterion { name: "row matrix determinant", limit: secs(10), check: c8_row_matrix },
        Criterion { name: "least singular value tail", limit: secs(600), check: c9_sigma_tail },
        Criterion { name: "log-determinant concentration", limit: secs(900), check: c10_detconc },
        Criterion { name: "eigensolver identities", limit: secs(60), check: c11_eigen_oracle },
        Criterion { name: "determinism across worker counts", limit: None, check: c12_determinism },
    ];
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = (c.check)();
        let elapsed = start.elapsed();
        let slow = c.limit.is_some_and(|l| elapsed > l);
        let (status, detail) = match (&result, slow) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {}s limit", c.limit.unwrap().as_secs())),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        failed += usize::from(status == "FAIL");
        let limit = c.limit.map(|l| format!("/{}s", l.as_secs())).unwrap_or_default();
        println!("criterion {:>2} {status} {} ({:.2}s{limit}): {detail}", i + 1, c.name, elapsed.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
