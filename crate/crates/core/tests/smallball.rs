use anticonc::laws::{difference_law, standardize, AtomicLaw, LawSpec};
use anticonc::rng::stream;
use anticonc::scalar::{int, rational};
use anticonc::smallball::{bilinear_small_ball_exact, central_binomial_mass, linear_small_ball_exact, linear_small_ball_mc, quadratic_small_ball_exact, truncated_product_bound, LinearForm, QuadraticForm};
use anticonc::{Matrix, Rational};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::Rng;

/// All values of `f(x)` over the support of `law^n`, with masses.
fn enumerate<F: Fn(&[Rational]) -> Rational>(law: &AtomicLaw<Rational>, n: usize, f: F) -> Vec<(Rational, Rational)> {
    let atoms = law.atoms();
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let x: Vec<Rational> = idx.iter().map(|&i| atoms[i].0.clone()).collect();
        let p = idx.iter().fold(Rational::one(), |acc, &i| acc * &atoms[i].1);
        out.push((f(&x), p));
        let mut pos = 0;
        while pos < n {
            idx[pos] += 1;
            if idx[pos] < atoms.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == n {
            return out;
        }
    }
}

/// Max over left endpoints `v` of the mass in `[v, v + 2β]`; some optimal
/// window always starts at an attained value.
fn brute_sup(mut values: Vec<(Rational, Rational)>, beta: &Rational) -> Rational {
    values.sort_by(|a, b| a.0.cmp(&b.0));
    let width = beta * int(2);
    let mut best = Rational::zero();
    for (v, _) in &values {
        let hi = v + &width;
        let mass = values.iter().filter(|(u, _)| u >= v && *u <= hi).fold(Rational::zero(), |acc, (_, p)| acc + p);
        if mass > best {
            best = mass;
        }
    }
    best
}

fn random_form(rng: &mut impl Rng, n: usize) -> LinearForm<Rational> {
    let coeffs = (0..n).map(|_| rational(rng.random_range(-6..=6), rng.random_range(1..=3))).collect();
    let shifts = (0..n).map(|_| rational(rng.random_range(-2..=2), rng.random_range(1..=2))).collect();
    LinearForm::new(coeffs, shifts).unwrap()
}

#[test]
fn linear_exact_matches_enumeration() {
    for (law, key) in [(AtomicLaw::bernoulli(), 1u64), (AtomicLaw::uniform3(), 2)] {
        let mut rng = stream(17, key);
        for _ in 0..30 {
            let n = rng.random_range(1..=7);
            let form = random_form(&mut rng, n);
            let beta = rational(rng.random_range(0..=4), 2);
            let exact = linear_small_ball_exact(&form, &law, &beta).unwrap();
            let brute = brute_sup(enumerate(&law, n, |x| form.evaluate(x)), &beta);
            assert_eq!(exact.rho, brute, "form {:?} beta {beta}", form.coeffs);
            // The reported center attains the value.
            let at_center = enumerate(&law, n, |x| form.evaluate(x))
                .into_iter()
                .filter(|(v, _)| (v - &exact.center).abs() <= beta)
                .fold(Rational::zero(), |acc, (_, p)| acc + p);
            assert_eq!(at_center, exact.rho);
        }
    }
}

#[test]
fn quadratic_and_bilinear_match_enumeration() {
    let law = AtomicLaw::bernoulli();
    let mut rng = stream(23, 0);
    for _ in 0..10 {
        let n = rng.random_range(2..=5);
        let mut a = Matrix::from_fn(n, n, |_, _| int(0));
        for i in 0..n {
            for j in i..n {
                let v = int(rng.random_range(-3..=3));
                a.set(i, j, v.clone());
                a.set(j, i, v);
            }
        }
        let form = QuadraticForm::unshifted(a.clone()).unwrap();
        let beta = int(rng.random_range(0..=2));
        let quad = quadratic_small_ball_exact(&form, &law, &beta).unwrap();
        assert_eq!(quad.rho, brute_sup(enumerate(&law, n, |x| form.evaluate(x)), &beta));

        let bil = bilinear_small_ball_exact(&form, &law, &law, &beta).unwrap();
        let pairs = enumerate(&law, 2 * n, |x| form.bilinear(&x[..n], &x[n..]));
        assert_eq!(bil.rho, brute_sup(pairs, &beta));
    }
}

#[test]
fn central_binomial_scaling() {
    let law = AtomicLaw::bernoulli();
    for n in [2usize, 4, 10, 16] {
        let form = LinearForm::unshifted(vec![int(1); n]).unwrap();
        assert_eq!(linear_small_ball_exact(&form, &law, &int(0)).unwrap().rho, central_binomial_mass(n as u64));
    }
    for n in (16..=400u64).step_by(2) {
        let scaled = anticonc::Scalar::to_f64(&central_binomial_mass(n)) * (n as f64).sqrt();
        assert!((0.6..=0.8).contains(&scaled), "n={n}: {scaled}");
    }
}

#[test]
fn monte_carlo_agrees_with_exact_within_band() {
    let law = AtomicLaw::bernoulli();
    let form = LinearForm::unshifted(vec![int(1); 12]).unwrap();
    let exact = linear_small_ball_exact(&form, &law, &int(1)).unwrap();
    let form_f = LinearForm::unshifted(vec![1.0; 12]).unwrap();
    let mc = linear_small_ball_mc(&form_f, LawSpec::Bernoulli.sampler().unwrap().as_ref(), 1.0, 20_000, 5);
    assert!((mc.rho - anticonc::Scalar::to_f64(&exact.rho)).abs() <= mc.ci_halfwidth, "{mc:?} vs {}", exact.rho);
}

#[test]
fn gaussian_sum_small_ball() {
    // Sum of 4 standard normals is N(0, 4); P(|S| <= 1) = erf(1 / (2 sqrt 2)).
    let form = LinearForm::unshifted(vec![1.0; 4]).unwrap();
    let mc = linear_small_ball_mc(&form, LawSpec::Gaussian.sampler().unwrap().as_ref(), 1.0, 40_000, 9);
    let truth = 0.382_924_922_548_026;
    assert!(mc.rho >= truth - mc.ci_halfwidth, "{mc:?}");
    assert!(mc.rho <= truth + 0.02, "{mc:?}");
}

#[test]
fn truncated_product_bounds_last_factor() {
    let law = AtomicLaw::bernoulli();
    let u = vec![int(1), int(2), int(3), int(5)];
    let p = truncated_product_bound(&u, &law, &int(0), 4).unwrap();
    // Last factor alone is rho_0(5 x) = 1/2; the others are at most 1.
    assert!(p <= rational(1, 2));
    assert!(p > Rational::zero());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rho_is_monotone_in_beta(coeffs in proptest::collection::vec(-5i64..=5, 1..7), b1 in 0i64..6, b2 in 0i64..6) {
        let law = AtomicLaw::uniform3();
        let form = LinearForm::unshifted(coeffs.into_iter().map(int).collect()).unwrap();
        let (lo, hi) = (b1.min(b2), b1.max(b2));
        let r_lo = linear_small_ball_exact(&form, &law, &rational(lo, 2)).unwrap().rho;
        let r_hi = linear_small_ball_exact(&form, &law, &rational(hi, 2)).unwrap().rho;
        prop_assert!(r_lo <= r_hi);
        prop_assert!(r_hi <= Rational::one());
    }

    #[test]
    fn rho_is_invariant_under_shift_and_sign(coeffs in proptest::collection::vec(-5i64..=5, 1..7), shift in -3i64..=3, beta in 0i64..4) {
        let law = AtomicLaw::bernoulli();
        let n = coeffs.len();
        let plain = LinearForm::unshifted(coeffs.iter().map(|&c| int(c)).collect()).unwrap();
        let shifted = LinearForm::new(coeffs.iter().map(|&c| int(-c)).collect(), vec![int(shift); n]).unwrap();
        let beta = int(beta);
        prop_assert_eq!(linear_small_ball_exact(&plain, &law, &beta).unwrap().rho, linear_small_ball_exact(&shifted, &law, &beta).unwrap().rho);
    }

    #[test]
    fn difference_laws_are_symmetric(values in proptest::collection::vec(-4i64..=4, 1..5), weights in proptest::collection::vec(1i64..=5, 4)) {
        let total: i64 = weights[..values.len()].iter().sum();
        let atoms = values.iter().zip(&weights).map(|(&v, &w)| (int(v), rational(w, total))).collect();
        let law = AtomicLaw::new(atoms, "custom").unwrap();
        let diff = difference_law(&law);
        for (v, p) in diff.atoms() {
            prop_assert_eq!(&diff.mass_of(&-v.clone()), p);
        }
        prop_assert!(diff.mean().is_zero());
        prop_assert_eq!(diff.variance(), law.variance() * int(2));
    }

    #[test]
    fn standardize_is_idempotent(values in proptest::collection::vec(-6i64..=6, 2..5)) {
        let p = rational(1, values.len() as i64);
        let law = AtomicLaw::new(values.iter().map(|&v| (int(v), p.clone())).collect(), "u").unwrap().to_f64();
        prop_assume!(law.variance() > 1e-9);
        let once = standardize(&law).unwrap();
        let twice = standardize(&once).unwrap();
        prop_assert!(once.mean().abs() < 1e-12);
        prop_assert!((once.variance() - 1.0).abs() < 1e-12);
        for (a, b) in once.atoms().iter().zip(twice.atoms()) {
            prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }
}
