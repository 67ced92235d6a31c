//! Scalar types shared by the exact and floating code paths.
//!
//! Every exact routine in the crate is generic over [`Scalar`]. With
//! [`Rational`] the computation is exact; with `f64` atoms and windows are
//! compared with a `1e-12` relative tolerance against the scale of the data.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Arbitrary precision rational number.
pub type Rational = BigRational;

/// Relative tolerance used when merging floating atoms.
pub const FLOAT_MERGE_TOL: f64 = 1e-12;

pub trait Scalar: Clone + PartialOrd + fmt::Debug + fmt::Display + Send + Sync + Signed + 'static {
    /// `true` when arithmetic on this type is exact.
    const EXACT: bool;

    /// Whether two atom positions should be treated as one. `scale` is the
    /// largest magnitude present in the support being canonicalized.
    fn same_atom(a: &Self, b: &Self, scale: &Self) -> bool;

    /// `span <= width`, with the floating tolerance applied relative to `scale`.
    fn fits(span: &Self, width: &Self, scale: &Self) -> bool;

    fn to_f64(&self) -> f64;

    /// Exact conversion for rationals (every finite double is a dyadic rational).
    fn from_f64(x: f64) -> Option<Self>;

    fn from_i64(x: i64) -> Self;

    /// Square root if it is representable in `Self`.
    fn sqrt(&self) -> Option<Self>;

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn same_atom(a: &f64, b: &f64, scale: &f64) -> bool {
        let s = scale.abs().max(a.abs()).max(b.abs());
        (a - b).abs() <= FLOAT_MERGE_TOL * s
    }

    fn fits(span: &f64, width: &f64, scale: &f64) -> bool {
        *span <= *width + FLOAT_MERGE_TOL * scale.abs().max(width.abs())
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_f64(x: f64) -> Option<f64> {
        x.is_finite().then_some(x)
    }

    fn from_i64(x: i64) -> f64 {
        x as f64
    }

    fn sqrt(&self) -> Option<f64> {
        (*self >= 0.0).then(|| f64::sqrt(*self))
    }

    fn half() -> f64 {
        0.5
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn same_atom(a: &Rational, b: &Rational, _scale: &Rational) -> bool {
        a == b
    }

    fn fits(span: &Rational, width: &Rational, _scale: &Rational) -> bool {
        span <= width
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            // ToPrimitive gives up on huge numerators/denominators; go through logs.
            let sign = if self.is_negative() { -1.0 } else { 1.0 };
            let ln = bigint_ln(self.numer().abs()) - bigint_ln(self.denom().clone());
            sign * ln.exp()
        })
    }

    fn from_f64(x: f64) -> Option<Rational> {
        BigRational::from_float(x)
    }

    fn from_i64(x: i64) -> Rational {
        Rational::from_integer(BigInt::from(x))
    }

    fn sqrt(&self) -> Option<Rational> {
        if self.is_negative() {
            return None;
        }
        let n = self.numer().sqrt();
        let d = self.denom().sqrt();
        (&n * &n == *self.numer() && &d * &d == *self.denom()).then(|| Rational::new(n, d))
    }
}

fn bigint_ln(x: BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map_or(f64::NAN, f64::ln);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(x: i64) -> Rational {
    Rational::from_integer(BigInt::from(x))
}

/// Parses `p/q`, integers, decimals (`-2.45`) and scientific notation
/// (`1e-3`, `2.5E4`) into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).ok()?;
        let q = BigInt::from_str(q.trim()).ok()?;
        return (!q.is_zero()).then(|| Rational::new(p, q));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(BigInt::from_str(if all.is_empty() { "0" } else { &all }).ok()?);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    if scale >= 0 {
        value *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Positive gcd of a set of rationals: the largest `h > 0` with every input an
/// integer multiple of `h`. Zeros are ignored; `None` if all inputs are zero.
pub fn rational_gcd<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Option<Rational> {
    let mut num_gcd = BigInt::zero();
    let mut den_lcm = BigInt::one();
    let mut any = false;
    for v in values {
        if v.is_zero() {
            continue;
        }
        any = true;
        num_gcd = num_gcd.gcd(v.numer());
        den_lcm = den_lcm.lcm(v.denom());
    }
    any.then(|| Rational::new(num_gcd, den_lcm))
}

/// Exact rational from a `u64` count, used for empirical frequencies.
pub fn from_usize(x: usize) -> Rational {
    Rational::from_integer(BigInt::from_usize(x).expect("usize fits BigInt"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("2.4"), Some(rational(12, 5)));
        assert_eq!(parse_rational("-0.05"), Some(rational(-1, 20)));
        assert_eq!(parse_rational("1e-3"), Some(rational(1, 1000)));
        assert_eq!(parse_rational("3/6"), Some(rational(1, 2)));
        assert_eq!(parse_rational("7"), Some(int(7)));
        assert_eq!(parse_rational(".5"), Some(rational(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn rational_sqrt_only_when_perfect() {
        assert_eq!(Scalar::sqrt(&rational(9, 4)), Some(rational(3, 2)));
        assert_eq!(Scalar::sqrt(&rational(1, 2)), None);
        assert_eq!(Scalar::sqrt(&int(-1)), None);
    }

    #[test]
    fn gcd_of_rationals() {
        let v = [rational(1, 2), rational(3, 4), int(0)];
        assert_eq!(rational_gcd(v.iter()), Some(rational(1, 4)));
        assert_eq!(rational_gcd([int(0)].iter()), None);
    }

    #[test]
    fn huge_rational_to_f64() {
        let big = Rational::new(num_traits::pow(BigInt::from(3), 2000), num_traits::pow(BigInt::from(2), 3170));
        let expected = (2000.0 * 3f64.ln() - 3170.0 * 2f64.ln()).exp();
        assert!((Scalar::to_f64(&big) / expected - 1.0).abs() < 1e-9);
    }
}
