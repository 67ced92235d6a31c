//! Dense row-major matrices and their text/binary encodings.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use crate::scalar::{parse_rational, Rational, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Matrix<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Option<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return None;
        }
        Some(Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    /// Principal submatrix with index `skip` removed from rows and columns.
    pub fn remove_index(&self, skip: usize) -> Self {
        self.minor(skip, skip)
    }

    /// Matrix with row `r` and column `c` deleted.
    pub fn minor(&self, r: usize, c: usize) -> Self {
        let rows = (0..self.rows).filter(|&i| i != r);
        let data = rows
            .flat_map(|i| (0..self.cols).filter(move |&j| j != c).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j).clone())
            .collect();
        Matrix { rows: self.rows.saturating_sub(1), cols: self.cols.saturating_sub(1), data }
    }

    /// Symmetric permutation `P M Pᵀ` with `perm[new] = old`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(perm[i], perm[j]).clone())
    }
}

impl<T: Clone + PartialEq> Matrix<T> {
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::from_fn(rows, cols, |_, _| T::zero())
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Matrix::from_fn(n, n, |i, j| if i == j { diag[i].clone() } else { T::zero() })
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        Matrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).fold(T::zero(), |acc, k| acc + self.get(i, k).clone() * other.get(k, j).clone())
        })
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone()))
            .collect()
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self.get(i, i).clone())
    }

    pub fn frobenius_sq(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, a| acc + a.clone() * a.clone())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, a| if a.abs() > m { a.abs() } else { m })
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        self.map(Scalar::to_f64)
    }
}

impl Matrix<f64> {
    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MatrixIoError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: cannot parse entry {token:?}")]
    Parse { line: usize, token: String },
    #[error("rows have inconsistent lengths")]
    Ragged,
    #[error("binary record truncated or malformed")]
    Binary,
}

/// Whitespace-separated text, one row per line. Blank lines and `#` comments
/// are skipped.
pub fn read_text(input: &str) -> Result<Matrix<f64>, MatrixIoError> {
    parse_rows(input, |t| t.parse::<f64>().ok())
}

/// Same layout as [`read_text`], entries as exact fraction strings (`p/q`,
/// integers or decimals).
pub fn read_text_exact(input: &str) -> Result<Matrix<Rational>, MatrixIoError> {
    parse_rows(input, parse_rational)
}

fn parse_rows<T: Clone>(input: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Matrix<T>, MatrixIoError> {
    let mut rows = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| parse(t).ok_or_else(|| MatrixIoError::Parse { line: idx + 1, token: t.to_string() }))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Matrix::from_rows(rows).ok_or(MatrixIoError::Ragged)
}

/// Text rendering. Floats use the shortest round-trip representation and
/// rationals render as `p/q`.
pub fn write_text<T: Clone + std::fmt::Display>(m: &Matrix<T>) -> String {
    let mut out = String::new();
    for i in 0..m.rows {
        let line: Vec<String> = m.row(i).iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// Binary record: `n` as little-endian u64 followed by `n*n` row-major
/// little-endian f64 entries.
pub fn write_binary(m: &Matrix<f64>, mut w: impl Write) -> Result<(), MatrixIoError> {
    if !m.is_square() {
        return Err(MatrixIoError::Binary);
    }
    w.write_all(&(m.rows as u64).to_le_bytes())?;
    for x in &m.data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary(mut r: impl Read) -> Result<Matrix<f64>, MatrixIoError> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word).map_err(|_| MatrixIoError::Binary)?;
    let n = usize::try_from(u64::from_le_bytes(word)).map_err(|_| MatrixIoError::Binary)?;
    let len = n.checked_mul(n).ok_or(MatrixIoError::Binary)?;
    let mut data = Vec::with_capacity(len.min(1 << 24));
    for _ in 0..len {
        r.read_exact(&mut word).map_err(|_| MatrixIoError::Binary)?;
        data.push(f64::from_le_bytes(word));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(MatrixIoError::Binary);
    }
    Ok(Matrix { rows: n, cols: n, data })
}
