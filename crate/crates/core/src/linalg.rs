//! Small dense linear-algebra kernels.
//!
//! Every matrix in this crate is tiny (dimension <= a few dozen), so the
//! kernels below are plain row-major loops: Cholesky for SPD inversion,
//! partial-pivot Gauss for general solves, modified Gram-Schmidt for the
//! reorthonormalized exponent estimates, and cyclic Jacobi sweeps for
//! symmetric eigenvalues.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
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

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[T]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    pub fn transpose(&self) -> Mat<T> {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![T::zero(); self.rows];
        for i in 0..self.rows {
            let mut acc = T::zero();
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn scale(&self, s: T) -> Mat<T> {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        out
    }

    pub fn sub(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= *b;
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Mat<T>) -> T {
        self.sub(other).max_abs()
    }

    /// Symmetrizes in place: `A <- (A + A^T) / 2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let h = crate::scalar::half::<T>();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let m = (self[(i, j)] + self[(j, i)]) * h;
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
    }

    /// Cholesky factor `L` with `A = L L^T`. Fails on non-SPD input.
    pub fn cholesky(&self) -> Result<Mat<T>> {
        assert!(self.is_square());
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if sum <= T::zero() {
                        return Err(Error::DegenerateMetric {
                            pivot: sum.to_f64().unwrap_or(f64::NAN),
                        });
                    }
                    l[(i, j)] = sum.sqrt();
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Ok(l)
    }

    /// Inverse of an SPD matrix through its Cholesky factor.
    pub fn spd_inverse(&self) -> Result<Mat<T>> {
        let l = self.cholesky()?;
        let n = self.rows;
        let mut inv = Mat::zeros(n, n);
        for col in 0..n {
            let mut e = vec![T::zero(); n];
            e[col] = T::one();
            let x = l.solve_cholesky(&e);
            inv.set_column(col, &x);
        }
        Ok(inv)
    }

    /// Solves `L L^T x = b` where `self` is the Cholesky factor `L`.
    fn solve_cholesky(&self, b: &[T]) -> Vec<T> {
        let n = self.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let lik = self[(i, k)];
                y[i] = y[i] - lik * y[k];
            }
            y[i] = y[i] / self[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let lki = self[(k, i)];
                y[i] = y[i] - lki * y[k];
            }
            y[i] = y[i] / self[(i, i)];
        }
        y
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        assert!(self.is_square());
        assert_eq!(b.len(), self.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let mut piv = k;
            let mut best = a[(k, k)].abs();
            for i in (k + 1)..n {
                if a[(i, k)].abs() > best {
                    best = a[(i, k)].abs();
                    piv = i;
                }
            }
            if best == T::zero() {
                return Err(Error::Integration("singular linear system".into()));
            }
            if piv != k {
                for j in 0..n {
                    let t = a[(k, j)];
                    a[(k, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                x.swap(k, piv);
            }
            for i in (k + 1)..n {
                let f = a[(i, k)] / a[(k, k)];
                if f == T::zero() {
                    continue;
                }
                for j in k..n {
                    let akj = a[(k, j)];
                    a[(i, j)] = a[(i, j)] - f * akj;
                }
                x[i] = x[i] - f * x[k];
            }
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc = acc - a[(i, j)] * x[j];
            }
            x[i] = acc / a[(i, i)];
        }
        Ok(x)
    }

    /// In-place modified Gram-Schmidt; returns the diagonal of `R`.
    ///
    /// Columns are replaced by the orthonormal `Q`; the returned values are
    /// the column norms after removing earlier components (positive for a
    /// full-rank input).
    pub fn mgs_qr(&mut self) -> Vec<T> {
        let (n, m) = (self.rows, self.cols);
        let mut diag = vec![T::zero(); m];
        for j in 0..m {
            let mut col = self.column(j);
            for k in 0..j {
                let qk = self.column(k);
                let mut dot = T::zero();
                for i in 0..n {
                    dot += qk[i] * col[i];
                }
                for i in 0..n {
                    col[i] = col[i] - dot * qk[i];
                }
            }
            let mut norm = T::zero();
            for v in &col {
                norm += *v * *v;
            }
            let norm = norm.sqrt();
            diag[j] = norm;
            if norm > T::zero() {
                for v in &mut col {
                    *v = *v / norm;
                }
            }
            self.set_column(j, &col);
        }
        diag
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<T> {
        self.sym_eigen().0
    }

    /// Eigenvalues (ascending) and matching orthonormal eigenvector columns
    /// of a symmetric matrix.
    pub fn sym_eigen(&self) -> (Vec<T>, Mat<T>) {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        a.symmetrize();
        let mut v = Mat::identity(n);
        let tol = T::epsilon() * crate::scalar::c::<T>(64.0);
        for _sweep in 0..64 {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off.max(a[(i, j)].abs());
                }
            }
            if off <= tol * a.max_abs().max(T::one()) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= tol {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (two::<T>() * apq);
                    let t = {
                        let s = if theta >= T::zero() { T::one() } else { -T::one() };
                        s / (theta.abs() + (theta * theta + T::one()).sqrt())
                    };
                    let cos = T::one() / (t * t + T::one()).sqrt();
                    let sin = t * cos;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = cos * akp - sin * akq;
                        a[(k, q)] = sin * akp + cos * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = cos * apk - sin * aqk;
                        a[(q, k)] = sin * apk + cos * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = cos * vkp - sin * vkq;
                        v[(k, q)] = sin * vkp + cos * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
        let ev: Vec<T> = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vecs = Mat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vecs.set_column(dst, &v.column(src));
        }
        (ev, vecs)
    }
}

fn two<T: Real>() -> T {
    crate::scalar::two()
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Euclidean inner product.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

/// Euclidean norm.
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Least-squares slope of `y` against `x`, with the fit's r-squared.
pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> Result<(T, T)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::FitWindow(format!("need >= 2 points, got {}", x.len())));
    }
    let n = crate::scalar::c::<T>(x.len() as f64);
    let mx = x.iter().fold(T::zero(), |a, v| a + *v) / n;
    let my = y.iter().fold(T::zero(), |a, v| a + *v) / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for (xi, yi) in x.iter().zip(y) {
        let dx = *xi - mx;
        let dy = *yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == T::zero() {
        return Err(Error::FitWindow("zero variance in abscissa".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == T::zero() { T::one() } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn cholesky_inverts_spd() {
        let a = mat(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]);
        let inv = a.spd_inverse().unwrap();
        let prod = a.matmul(&inv);
        assert!(prod.max_abs_diff(&Mat::identity(3)) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = mat(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(a.cholesky(), Err(Error::DegenerateMetric { .. })));
    }

    #[test]
    fn gauss_solve_matches_known_solution() {
        let a = mat(&[&[0.0, 2.0, 1.0], &[1.0, -1.0, 0.0], &[3.0, 0.0, -1.0]]);
        let x = vec![1.0, -2.0, 3.0];
        let b = a.matvec(&x);
        let sol = a.solve(&b).unwrap();
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn mgs_qr_orthonormalizes() {
        let mut a = mat(&[&[1.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let d = a.mgs_qr();
        assert!(d.iter().all(|v| *v > 0.0));
        let g = a.transpose().matmul(&a);
        assert!(g.max_abs_diff(&Mat::identity(2)) < 1e-14);
    }

    #[test]
    fn jacobi_eigenvalues_of_symmetric_matrix() {
        let a = mat(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 1.0], &[0.0, 1.0, 2.0]]);
        let ev = a.sym_eigenvalues();
        let sqrt2 = 2.0f64.sqrt();
        let expected = [2.0 - sqrt2, 2.0, 2.0 + sqrt2];
        for (got, want) in ev.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn jacobi_eigenvectors_diagonalize() {
        let a = mat(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 1.0], &[0.0, 1.0, 2.0]]);
        let (ev, v) = a.sym_eigen();
        // V^T A V should be diag(ev).
        let d = v.transpose().matmul(&a).matmul(&v);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { ev[i] } else { 0.0 };
                assert!((d[(i, j)] - want).abs() < 1e-12);
            }
        }
        assert!(v.transpose().matmul(&v).max_abs_diff(&Mat::identity(3)) < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_slope() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.5 * v - 1.0).collect();
        let (slope, r2) = linear_fit(&x, &y).unwrap();
        assert!((slope - 3.5).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
