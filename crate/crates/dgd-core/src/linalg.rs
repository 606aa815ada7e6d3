//! Dense row-major matrices plus the two factorizations the toolkit needs:
//! cyclic Jacobi eigenvalues for symmetric matrices and an SPD Cholesky solve.
//!
//! Problem sizes here are a few hundred at most, so simple `O(n^3)` dense
//! kernels are both fast enough and easy to audit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Tolerances;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric: max |a_ij - a_ji| = {max_asymmetry:e}")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("jacobi eigensolver stalled: off-diagonal norm {offdiag:e} after {sweeps} sweeps")]
    JacobiStalled { offdiag: f64, sweeps: usize },
    #[error("matrix is not positive definite: pivot {pivot:e} at column {index}")]
    NotPositiveDefinite { pivot: f64, index: usize },
    #[error("rank-deficient system: condition estimate {condition:e} exceeds the limit")]
    RankDeficient { condition: f64 },
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::DimensionMismatch("ragged row lengths".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `out = A x`.
    pub fn matvec_into(&self, x: &[T], out: &mut [T]) {
        assert_eq!(x.len(), self.cols, "matvec dimension");
        assert_eq!(out.len(), self.rows, "matvec output dimension");
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// `out = A^T x`.
    pub fn matvec_transpose_into(&self, x: &[T], out: &mut [T]) {
        assert_eq!(x.len(), self.rows, "transpose matvec dimension");
        assert_eq!(out.len(), self.cols, "transpose matvec output dimension");
        for o in out.iter_mut() {
            *o = T::zero();
        }
        for (i, &xi) in x.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self[(i, j)] * xi;
            }
        }
    }

    pub fn matvec_transpose(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        self.matvec_transpose_into(x, &mut out);
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Self::zeros(self.rows, other.cols);
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

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Gram matrix `A^T A`.
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in i..self.cols {
                let mut s = T::zero();
                for k in 0..self.rows {
                    s += self[(k, i)] * self[(k, j)];
                }
                g[(i, j)] = s;
                g[(j, i)] = s;
            }
        }
        g
    }

    /// Outer Gram matrix `A A^T` (the smaller of the two for wide matrices).
    pub fn outer_gram(&self) -> Self {
        let mut g = Self::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let s = dot(self.row(i), self.row(j));
                g[(i, j)] = s;
                g[(j, i)] = s;
            }
        }
        g
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add dimension");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub dimension");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric_within(&self, tol: T) -> bool {
        self.rows == self.cols && self.max_asymmetry() <= tol * T::one().max(self.max_abs())
    }

    /// Spectral norm of A, i.e. the largest singular value, computed through
    /// the eigenvalues of the smaller Gram matrix.
    pub fn spectral_norm(&self, tol: &Tolerances) -> Result<T, LinalgError> {
        let gram = if self.rows <= self.cols { self.outer_gram() } else { self.gram() };
        let eigs = symmetric_eigenvalues(&gram, tol)?;
        Ok(eigs[0].max(T::zero()).sqrt())
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm_inf<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
}

pub fn norm_l1<T: Real>(a: &[T]) -> T {
    a.iter().map(|&v| v.abs()).sum()
}

pub fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// `y += c * x`.
pub fn axpy<T: Real>(y: &mut [T], c: T, x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

fn offdiag_frobenius<T: Real>(a: &DenseMatrix<T>) -> T {
    let n = a.rows();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// All eigenvalues of a symmetric matrix, sorted nonincreasing, via cyclic
/// Jacobi rotations. Rejects input whose asymmetry exceeds the configured
/// tolerance.
pub fn symmetric_eigenvalues<T: Real>(
    m: &DenseMatrix<T>,
    tol: &Tolerances,
) -> Result<Vec<T>, LinalgError> {
    if m.rows() != m.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let sym_tol = T::of(tol.symmetry) * T::one().max(m.max_abs());
    let asym = m.max_asymmetry();
    if asym > sym_tol {
        return Err(LinalgError::NotSymmetric { max_asymmetry: asym.as_f64() });
    }

    let n = m.rows();
    let mut a = m.clone();
    // Work on the exactly symmetric part so rotations stay consistent.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (a[(i, j)] + a[(j, i)]) * T::of(0.5);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }

    let scale = a.frobenius_norm();
    let threshold = T::of(tol.jacobi_offdiag) * scale;
    let mut converged = scale == T::zero();
    let mut sweeps = 0;
    while !converged && sweeps < tol.jacobi_max_sweeps {
        if offdiag_frobenius(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                rotate_out(&mut a, p, q);
            }
        }
        sweeps += 1;
    }
    if !converged && offdiag_frobenius(&a) > threshold {
        return Err(LinalgError::JacobiStalled {
            offdiag: offdiag_frobenius(&a).as_f64(),
            sweeps,
        });
    }

    let mut eigs: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(|x, y| y.partial_cmp(x).expect("eigenvalues are finite"));
    Ok(eigs)
}

/// One Jacobi rotation annihilating `a[(p, q)]`, applied symmetrically.
fn rotate_out<T: Real>(a: &mut DenseMatrix<T>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == T::zero() {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (T::of(2.0) * apq);
    // Smaller-angle root of t^2 + 2 t theta - 1 = 0, in the stable form.
    let t = {
        let denom = theta.abs() + (theta * theta + T::one()).sqrt();
        if theta >= T::zero() {
            T::one() / denom
        } else {
            -T::one() / denom
        }
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;

    let n = a.rows();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[(k, p)] = new_kp;
        a[(p, k)] = new_kp;
        a[(k, q)] = new_kq;
        a[(q, k)] = new_kq;
    }
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = T::zero();
    a[(q, p)] = T::zero();
}

/// Spectral norm of a symmetric matrix: the largest eigenvalue magnitude.
pub fn symmetric_spectral_norm<T: Real>(
    m: &DenseMatrix<T>,
    tol: &Tolerances,
) -> Result<T, LinalgError> {
    let eigs = symmetric_eigenvalues(m, tol)?;
    Ok(eigs
        .iter()
        .fold(T::zero(), |acc, &v| acc.max(v.abs())))
}

/// Lower-triangular Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: DenseMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self, LinalgError> {
        if a.rows() != a.cols() {
            return Err(LinalgError::DimensionMismatch(format!(
                "cholesky needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= T::zero() {
                return Err(LinalgError::NotPositiveDefinite {
                    pivot: d.as_f64(),
                    index: j,
                });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    /// Solves `A x = b` given the factorization `A = L L^T`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.rows();
        assert_eq!(b.len(), n, "cholesky solve dimension");
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let upd = self.l[(i, k)] * y[k];
                y[i] -= upd;
            }
            y[i] /= self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let upd = self.l[(k, i)] * y[k];
                y[i] -= upd;
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }
}
