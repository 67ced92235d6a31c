//! Dense symmetric eigensolvers.
//!
//! [`symmetric_eigenvalues`] reduces to tridiagonal form with Householder
//! reflections and finishes with implicit QL; it is the fast path for the
//! spectral experiments. [`jacobi`] is a cyclic Jacobi sweep solver that also
//! returns eigenvectors. The two share no code and are cross-checked in tests.

use crate::matrix::Matrix;

/// Cyclic Jacobi stops once the off-diagonal Frobenius norm drops below this
/// fraction of `‖M‖_F`.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// QL iterations allowed per eigenvalue.
pub const QL_MAX_ITER: usize = 60;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EigenError {
    #[error("eigensolver did not converge within {0} iterations")]
    ConvergenceFailure(usize),
    #[error("matrix is not square and symmetric")]
    NotSymmetric,
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn symmetric_eigenvalues(m: &Matrix<f64>) -> Result<Vec<f64>, EigenError> {
    if !m.is_square() {
        return Err(EigenError::NotSymmetric);
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (mut d, mut e) = tridiagonalize(m);
    tql(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Householder reduction to tridiagonal form. Returns the diagonal `d` and the
/// sub-diagonal `e` (`e[i]` couples `d[i]` and `d[i+1]`, `e[n-1] = 0`).
fn tridiagonalize(m: &Matrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = m.rows();
    let mut a = m.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let col_norm = (k + 1..n).map(|i| a[i * n + k] * a[i * n + k]).sum::<f64>().sqrt();
        d[k] = a[k * n + k];
        if col_norm == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let alpha = if x0 > 0.0 { -col_norm } else { col_norm };
        for i in k + 1..n {
            v[i] = a[i * n + k];
        }
        v[k + 1] -= alpha;
        let vnorm = (k + 1..n).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            e[k] = x0;
            continue;
        }
        for i in k + 1..n {
            v[i] /= vnorm;
        }
        // A' = A - 2 v qᵀ - 2 q vᵀ with p = A v and q = p - (vᵀp) v.
        for i in k + 1..n {
            p[i] = (k + 1..n).map(|j| a[i * n + j] * v[j]).sum();
        }
        let vp: f64 = (k + 1..n).map(|i| v[i] * p[i]).sum();
        for i in k + 1..n {
            p[i] -= vp * v[i];
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i * n + j] -= 2.0 * (v[i] * p[j] + p[i] * v[j]);
            }
        }
        e[k] = alpha;
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2];
        e[n - 2] = a[(n - 1) * n + n - 2];
    }
    d[n - 1] = a[(n - 1) * n + n - 1];
    e[n - 1] = 0.0;
    (d, e)
}

/// Implicit QL with Wilkinson-style shifts on a symmetric tridiagonal matrix.
fn tql(d: &mut [f64], e: &mut [f64]) -> Result<(), EigenError> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(EigenError::ConvergenceFailure(QL_MAX_ITER));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigen-decomposition by cyclic Jacobi rotations.
#[derive(Clone, Debug)]
pub struct JacobiDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: Matrix<f64>,
    pub sweeps: usize,
}

pub fn jacobi(m: &Matrix<f64>) -> Result<JacobiDecomposition, EigenError> {
    if !m.is_square() {
        return Err(EigenError::NotSymmetric);
    }
    let n = m.rows();
    let mut a = m.to_rows();
    let mut v = Matrix::<f64>::identity(n).to_rows();
    let scale = m.frobenius();
    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off.sqrt() <= JACOBI_TOL * scale {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(EigenError::ConvergenceFailure(JACOBI_MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x][x].total_cmp(&a[y][y]));
    let eigenvalues = order.iter().map(|&k| a[k][k]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |i, j| v[i][order[j]]);
    Ok(JacobiDecomposition { eigenvalues, eigenvectors, sweeps })
}

/// Singular values (descending) of an arbitrary square matrix, from the
/// eigenvalues of `MᵀM`.
pub fn singular_values(m: &Matrix<f64>) -> Result<Vec<f64>, EigenError> {
    let gram = m.transpose().mul(m);
    let mut s: Vec<f64> = symmetric_eigenvalues(&gram)?.into_iter().map(|x| x.max(0.0).sqrt()).collect();
    s.reverse();
    Ok(s)
}
