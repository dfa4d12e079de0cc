//! Small dense linear algebra over [`Real`] scalars.
//!
//! Everything here is sized for desk-scale problems (a few hundred unknowns at
//! most). Matrices are stored column-major, matching the flat variable layout
//! used by the matrix problems.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::scalar::Real;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm_sq<T: Real>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[inline]
pub fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    dist_sq(a, b).sqrt()
}

/// `a - b`.
pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// `y += s * x`.
pub fn axpy<T: Real>(s: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn all_finite<T: Real>(a: &[T]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Wraps a column-major buffer.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_len("matrix buffer", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Builds from row slices; every row must have the same length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            check_len("matrix row", c, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.cols, rhs.rows);
        let mut out = Self::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            for k in 0..self.cols {
                let b = rhs[(k, j)];
                if b == T::zero() {
                    continue;
                }
                let col = &self.data[k * self.rows..(k + 1) * self.rows];
                let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
                for (d, &a) in dst.iter_mut().zip(col) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self^T * rhs`.
    pub fn tr_matmul(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.rows, rhs.rows);
        Self::from_fn(self.cols, rhs.cols, |i, j| {
            dot(
                &self.data[i * self.rows..(i + 1) * self.rows],
                &rhs.data[j * rhs.rows..(j + 1) * rhs.rows],
            )
        })
    }

    /// `self * rhs^T`.
    pub fn matmul_tr(&self, rhs: &Self) -> Self {
        self.matmul(&rhs.transpose())
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        for (j, &vj) in v.iter().enumerate().take(self.cols) {
            axpy(vj, &self.data[j * self.rows..(j + 1) * self.rows], &mut out);
        }
        out
    }

    pub fn scale(mut self, s: T) -> Self {
        self.data.iter_mut().for_each(|v| *v *= s);
        self
    }

    pub fn plus(mut self, rhs: &Self) -> Self {
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        self
    }

    pub fn minus(mut self, rhs: &Self) -> Self {
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
        self
    }

    /// Frobenius inner product.
    pub fn inner(&self, rhs: &Self) -> T {
        dot(&self.data, &rhs.data)
    }

    pub fn frobenius(&self) -> T {
        norm(&self.data)
    }

    pub fn frobenius_sq(&self) -> T {
        norm_sq(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[j * self.rows + i]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[j * self.rows + i]
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// Only the lower triangle is trusted; the input is symmetrized first.
pub fn symmetric_eigenvalues<T: Real>(a: &Mat<T>) -> Vec<T> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "eigenvalues need a square matrix");
    let mut m = Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)]) * T::lit(0.5));
    let eps = T::epsilon();
    let half = T::lit(0.5);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: T = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= eps * eps * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) * half / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    eigs
}

/// Determinant by LU factorization with partial pivoting.
pub fn determinant<T: Real>(a: &Mat<T>) -> T {
    let n = a.rows();
    assert_eq!(n, a.cols(), "determinant needs a square matrix");
    let mut m = a.clone();
    let mut det = T::one();
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, m[(i, k)].abs()))
            .fold((k, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax == T::zero() {
            return T::zero();
        }
        if piv != k {
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            det = -det;
        }
        let pivot = m[(k, k)];
        det *= pivot;
        for i in (k + 1)..n {
            let factor = m[(i, k)] / pivot;
            if factor == T::zero() {
                continue;
            }
            for j in (k + 1)..n {
                let v = m[(k, j)];
                m[(i, j)] -= factor * v;
            }
        }
    }
    det
}

/// Singular values of a 2x2 matrix `[[a, b], [c, d]]`, largest first.
pub fn singular_values_2x2<T: Real>(a: T, b: T, c: T, d: T) -> (T, T) {
    // Eigenvalues of M^T M via trace/determinant.
    let p = a * a + c * c;
    let q = a * b + c * d;
    let r = b * b + d * d;
    let half = T::lit(0.5);
    let mean = (p + r) * half;
    let rad = (((p - r) * half).powi(2) + q * q).sqrt();
    let smax = (mean + rad).max(T::zero()).sqrt();
    // |det| = smax * smin avoids cancellation in mean - rad.
    let det = (a * d - b * c).abs();
    let smin = if smax > T::zero() { det / smax } else { T::zero() };
    (smax, smin)
}

/// Extreme eigenvalues of a symmetric operator by Lanczos with full
/// reorthogonalization. Returns `(min, max)` Ritz values.
pub fn lanczos_extremes<T: Real>(
    apply: impl Fn(&[T]) -> Vec<T>,
    dim: usize,
    steps: usize,
    start: &[T],
) -> (T, T) {
    let steps = steps.min(dim).max(1);
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(steps);
    let mut alphas = Vec::with_capacity(steps);
    let mut betas: Vec<T> = Vec::with_capacity(steps);
    let n0 = norm(start);
    let mut q: Vec<T> = start.iter().map(|&v| v / n0).collect();
    for j in 0..steps {
        let mut w = apply(&q);
        let a = dot(&w, &q);
        alphas.push(a);
        basis.push(q.clone());
        for _ in 0..2 {
            for b in &basis {
                let proj = dot(&w, b);
                axpy(-proj, b, &mut w);
            }
        }
        let beta = norm(&w);
        if j + 1 == steps || beta <= T::epsilon() * (T::one() + a.abs()) {
            break;
        }
        betas.push(beta);
        q = w.into_iter().map(|v| v / beta).collect();
    }
    let k = alphas.len();
    let mut tri = Mat::zeros(k, k);
    for i in 0..k {
        tri[(i, i)] = alphas[i];
        if i + 1 < k {
            tri[(i, i + 1)] = betas[i];
            tri[(i + 1, i)] = betas[i];
        }
    }
    let eigs = symmetric_eigenvalues(&tri);
    (eigs[0], eigs[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_of_permutation_has_sign() {
        let p = Mat::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(determinant(&p), -1.0);
        let a = Mat::from_rows(&[[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]]).unwrap();
        // 2(12-1) - 1(4-0) = 18
        assert!((determinant(&a) - 18.0f64).abs() < 1e-12);
    }

    #[test]
    fn jacobi_on_diagonal_and_rotated() {
        let a = Mat::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = symmetric_eigenvalues(&a);
        assert!((e[0] - 1.0f64).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_values_of_companion_eigenbasis() {
        // [[1, 0.5], [1, 1]]: det = 0.5
        let (smax, smin) = singular_values_2x2(1.0f64, 0.5, 1.0, 1.0);
        assert!((smax * smin - 0.5).abs() < 1e-14);
        assert!((smax * smax + smin * smin - 3.25).abs() < 1e-13);
    }

    #[test]
    fn matmul_variants_agree() {
        let a = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let b = Mat::from_rows(&[[1.0, 0.0, 2.0], [0.0, 1.0, 1.0]]).unwrap();
        let ab = a.matmul(&b);
        assert_eq!(ab[(2, 2)], 16.0);
        let at_a = a.tr_matmul(&a);
        assert_eq!(at_a, a.transpose().matmul(&a));
        assert_eq!(a.matmul_tr(&a), a.matmul(&a.transpose()));
    }

    #[test]
    fn lanczos_recovers_extremes() {
        let d = [-3.0, -1.0, 0.5, 2.0, 7.0];
        let apply = |v: &[f64]| v.iter().zip(&d).map(|(a, b)| a * b).collect::<Vec<_>>();
        let (lo, hi) = lanczos_extremes(apply, 5, 5, &[1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!((lo + 3.0).abs() < 1e-10 && (hi - 7.0).abs() < 1e-10);
    }
}
