//! Exact linear algebra over the integers and rationals.
//!
//! Ranks and determinants use fraction-free (Bareiss) elimination. Small
//! integer problems run in `i128` with checked arithmetic and fall back to
//! `BigInt` on overflow, which keeps the Monte Carlo rank checks cheap.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::matrix::Matrix;
use crate::scalar::{Rational, Scalar};

trait BareissRing: Clone + PartialEq + Sized {
    fn ring_zero() -> Self;
    fn ring_one() -> Self;
    fn ring_is_zero(&self) -> bool;
    fn neg(&self) -> Self;
    /// `(a*b - c*d) / prev`, exact by Sylvester's identity.
    fn step(a: &Self, b: &Self, c: &Self, d: &Self, prev: &Self) -> Option<Self>;
}

impl BareissRing for i128 {
    fn ring_zero() -> Self {
        0
    }
    fn ring_one() -> Self {
        1
    }
    fn ring_is_zero(&self) -> bool {
        *self == 0
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn step(a: &i128, b: &i128, c: &i128, d: &i128, prev: &i128) -> Option<i128> {
        let num = a.checked_mul(*b)?.checked_sub(c.checked_mul(*d)?)?;
        debug_assert_eq!(num % prev, 0, "Bareiss division must be exact");
        Some(num / prev)
    }
}

impl BareissRing for BigInt {
    fn ring_zero() -> Self {
        Zero::zero()
    }
    fn ring_one() -> Self {
        One::one()
    }
    fn ring_is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn step(a: &BigInt, b: &BigInt, c: &BigInt, d: &BigInt, prev: &BigInt) -> Option<BigInt> {
        let num = a * b - c * d;
        let (q, r) = num.div_rem(prev);
        debug_assert!(Zero::is_zero(&r), "Bareiss division must be exact");
        Some(q)
    }
}

struct Reduced<I> {
    rank: usize,
    /// Determinant when the input is square (zero if singular).
    det: Option<I>,
}

fn bareiss<I: BareissRing>(mut a: Vec<Vec<I>>, cols: usize) -> Option<Reduced<I>> {
    let m = a.len();
    let mut prev = I::ring_one();
    let mut rank = 0;
    let mut negate = false;
    for col in 0..cols {
        if rank == m {
            break;
        }
        let Some(p) = (rank..m).find(|&r| !a[r][col].ring_is_zero()) else {
            continue;
        };
        if p != rank {
            a.swap(p, rank);
            negate = !negate;
        }
        let (top, bottom) = a.split_at_mut(rank + 1);
        let pivot_row = &top[rank];
        let pivot = pivot_row[col].clone();
        for row in bottom.iter_mut() {
            let lead = row[col].clone();
            for j in col + 1..cols {
                row[j] = I::step(&pivot, &row[j], &lead, &pivot_row[j], &prev)?;
            }
            row[col] = I::ring_zero();
        }
        prev = pivot;
        rank += 1;
    }
    let det = (m == cols).then(|| {
        if rank < m {
            I::ring_zero()
        } else if m == 0 {
            I::ring_one()
        } else if negate {
            prev.neg()
        } else {
            prev
        }
    });
    Some(Reduced { rank, det })
}

fn reduce_int(rows: &[Vec<BigInt>], cols: usize) -> Reduced<BigInt> {
    let small: Option<Vec<Vec<i128>>> = rows
        .iter()
        .map(|r| r.iter().map(|x| x.to_i64().map(i128::from)).collect())
        .collect();
    if let Some(reduced) = small.and_then(|s| bareiss(s, cols)) {
        return Reduced { rank: reduced.rank, det: reduced.det.map(BigInt::from) };
    }
    bareiss(rows.to_vec(), cols).expect("BigInt elimination cannot overflow")
}

/// Rank over the rationals of an integer matrix given by rows.
pub fn rank_int(rows: &[Vec<BigInt>]) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    reduce_int(rows, cols).rank
}

pub fn rank_i64(rows: &[Vec<i64>]) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let small: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| i128::from(x)).collect()).collect();
    match bareiss(small, cols) {
        Some(r) => r.rank,
        None => rank_int(&rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect::<Vec<_>>()),
    }
}

/// Clears denominators row by row. Returns the integer rows and the product
/// of the row multipliers.
fn integerize(m: &Matrix<Rational>) -> (Vec<Vec<BigInt>>, BigInt) {
    let mut scale = BigInt::one();
    let rows = (0..m.rows())
        .map(|i| {
            let lcm = m.row(i).iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            scale *= &lcm;
            m.row(i).iter().map(|x| x.numer() * (&lcm / x.denom())).collect()
        })
        .collect();
    (rows, scale)
}

pub fn rank_rational(m: &Matrix<Rational>) -> usize {
    let (rows, _) = integerize(m);
    reduce_int(&rows, m.cols()).rank
}

pub fn det_rational(m: &Matrix<Rational>) -> Rational {
    assert!(m.is_square(), "determinant of a non-square matrix");
    let (rows, scale) = integerize(m);
    let det = reduce_int(&rows, m.cols()).det.expect("square");
    Rational::new(det, scale)
}

pub fn det_i64(m: &Matrix<i64>) -> BigInt {
    assert!(m.is_square(), "determinant of a non-square matrix");
    let rows: Vec<Vec<BigInt>> = m.to_rows().into_iter().map(|r| r.into_iter().map(BigInt::from).collect()).collect();
    reduce_int(&rows, m.cols()).det.expect("square")
}

/// LU with partial pivoting.
pub fn det_f64(m: &Matrix<f64>) -> f64 {
    assert!(m.is_square(), "determinant of a non-square matrix");
    let n = m.rows();
    let mut a = m.to_rows();
    let mut det = 1.0;
    for col in 0..n {
        let p = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty range");
        if a[p][col] == 0.0 {
            return 0.0;
        }
        if p != col {
            a.swap(p, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    det
}

/// Determinants and ranks dispatched on the scalar type: Bareiss for
/// rationals, pivoted LU for floats.
pub trait Determinant: Scalar {
    fn determinant(m: &Matrix<Self>) -> Self;
}

impl Determinant for Rational {
    fn determinant(m: &Matrix<Rational>) -> Rational {
        det_rational(m)
    }
}

impl Determinant for f64 {
    fn determinant(m: &Matrix<f64>) -> f64 {
        det_f64(m)
    }
}

/// Signed cofactors `c_ij = (-1)^{i+j} det(M without row i, column j)`.
/// The cofactors of a 1×1 matrix are `[[1]]`.
pub fn cofactor_matrix<T: Determinant>(m: &Matrix<T>) -> Matrix<T> {
    assert!(m.is_square());
    let n = m.rows();
    Matrix::from_fn(n, n, |i, j| {
        let d = if n == 1 { T::one() } else { T::determinant(&m.minor(i, j)) };
        if (i + j) % 2 == 0 {
            d
        } else {
            -d
        }
    })
}

/// `adj(M) = C(M)ᵀ`, so that `M · adj(M) = det(M) I`.
pub fn adjugate<T: Determinant>(m: &Matrix<T>) -> Matrix<T> {
    cofactor_matrix(m).transpose()
}

/// Basis of `{x : A x = 0}` from the reduced row echelon form of `A`.
/// One basis vector per free column, in increasing column order.
pub fn rational_kernel(rows: &[Vec<Rational>], cols: usize) -> Vec<Vec<Rational>> {
    let mut a: Vec<Vec<Rational>> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..cols {
        let Some(p) = (r..a.len()).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        let inv = a[r][col].recip();
        for x in a[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..a.len() {
            if i != r && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for j in 0..cols {
                    let delta = &f * &a[r][j];
                    a[i][j] -= delta;
                }
            }
        }
        pivots.push(col);
        r += 1;
        if r == a.len() {
            break;
        }
    }
    (0..cols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![Rational::zero(); cols];
            v[free] = Rational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[row][free].clone();
            }
            v
        })
        .collect()
}

/// Scales a rational vector to a primitive integer vector (gcd 1).
pub fn primitive_integer(v: &[Rational]) -> Vec<BigInt> {
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return ints;
    }
    ints.into_iter().map(|x| x / &g).collect()
}

/// Integer echelon basis of a row space, for repeated membership queries.
#[derive(Clone, Debug)]
pub struct IntEchelon {
    rows: Vec<(usize, Vec<i128>)>,
    generators: Vec<Vec<i64>>,
    /// Set when `i128` reduction overflowed; queries then use exact ranks.
    overflowed: bool,
}

impl IntEchelon {
    pub fn new(generators: &[Vec<i64>]) -> Self {
        let mut basis = IntEchelon { rows: Vec::new(), generators: generators.to_vec(), overflowed: false };
        for g in generators {
            match basis.reduce(g.iter().map(|&x| i128::from(x)).collect()) {
                Some(reduced) => {
                    if let Some(p) = reduced.iter().position(|&x| x != 0) {
                        basis.rows.push((p, reduced));
                        basis.rows.sort_by_key(|(p, _)| *p);
                    }
                }
                None => {
                    basis.overflowed = true;
                    basis.rows.clear();
                    break;
                }
            }
        }
        basis
    }

    pub fn dim(&self) -> usize {
        if self.overflowed {
            rank_i64(&self.generators)
        } else {
            self.rows.len()
        }
    }

    /// Reduces `v` against the basis; `None` on overflow.
    fn reduce(&self, mut v: Vec<i128>) -> Option<Vec<i128>> {
        for (p, row) in &self.rows {
            if v[*p] == 0 {
                continue;
            }
            let (a, b) = (row[*p], v[*p]);
            let g = a.gcd(&b);
            let (ma, mb) = (a / g, b / g);
            for (x, r) in v.iter_mut().zip(row) {
                *x = x.checked_mul(ma)?.checked_sub(r.checked_mul(mb)?)?;
            }
            let g = v.iter().fold(0i128, |acc, x| acc.gcd(x));
            if g > 1 {
                v.iter_mut().for_each(|x| *x /= g);
            }
        }
        Some(v)
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        if !self.overflowed {
            if let Some(r) = self.reduce(v.iter().map(|&x| i128::from(x)).collect()) {
                return r.iter().all(|&x| x == 0);
            }
        }
        let mut rows = self.generators.clone();
        let before = rank_i64(&rows);
        rows.push(v.to_vec());
        rank_i64(&rows) == before
    }
}

/// Exact rank of the rows `generators ∪ {v}` equals that of `generators`.
pub fn in_row_space(generators: &[Vec<i64>], v: &[i64]) -> bool {
    IntEchelon::new(generators).contains(v)
}

pub fn bigint_to_i64(v: &[BigInt]) -> Option<Vec<i64>> {
    v.iter().map(ToPrimitive::to_i64).collect()
}

pub fn is_negative(x: &BigInt) -> bool {
    x.is_negative()
}
