//! Minimal dense linear algebra over a generic scalar.
//!
//! The workloads here are tall-skinny products (`n x p` panels with
//! `p` up to ~1e5 against `n <= 512`) and full symmetric eigensystems of
//! small `n x n` Gram matrices. Row-major storage keeps the hot products
//! (`A Bᵀ`, Gram matrices) as contiguous dot products; the eigensolver is
//! a cyclic Jacobi iteration, which is plenty at these sizes and gives the
//! smallest eigenvalue to full accuracy (needed as a diagnostic, not just
//! for solving).
//!
//! Parallelism: large row-partitioned products use rayon. Each output
//! element is accumulated sequentially, so results are bitwise identical
//! regardless of thread count.

use rayon::prelude::*;

use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Work threshold (in multiply-adds) above which products go parallel.
const PAR_FLOP_THRESHOLD: usize = 1 << 22;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    // Four-lane accumulation; keeps the loop auto-vectorizable.
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = T::zero();
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm2_sq<T: Real>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match dimensions");
        Mat { rows, cols, data }
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
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
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

    /// `self * rhs`. Accumulates along rows of `rhs` (axpy form) so the
    /// inner loops stay contiguous in row-major storage.
    pub fn matmul(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.rows, "matmul: inner dimensions differ");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        let work = self.rows * self.cols * rhs.cols;
        let body = |(i, out_row): (usize, &mut [T])| {
            let a_row = self.row(i);
            for (k, &aik) in a_row.iter().enumerate() {
                if aik != T::zero() {
                    axpy(aik, rhs.row(k), out_row);
                }
            }
        };
        if work >= PAR_FLOP_THRESHOLD {
            out.data
                .par_chunks_mut(rhs.cols)
                .enumerate()
                .for_each(body);
        } else {
            out.data.chunks_mut(rhs.cols).enumerate().for_each(body);
        }
        out
    }

    /// `self * rhsᵀ` via row-row dot products.
    pub fn matmul_nt(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.cols, "matmul_nt: inner dimensions differ");
        let mut out = Mat::zeros(self.rows, rhs.rows);
        let work = self.rows * self.cols * rhs.rows;
        let body = |(i, out_row): (usize, &mut [T])| {
            let a_row = self.row(i);
            for (j, out_ij) in out_row.iter_mut().enumerate() {
                *out_ij = dot(a_row, rhs.row(j));
            }
        };
        if work >= PAR_FLOP_THRESHOLD {
            out.data
                .par_chunks_mut(rhs.rows)
                .enumerate()
                .for_each(body);
        } else {
            out.data.chunks_mut(rhs.rows).enumerate().for_each(body);
        }
        out
    }

    /// `selfᵀ * rhs` without materializing the transpose.
    pub fn matmul_tn(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.rows, rhs.rows, "matmul_tn: inner dimensions differ");
        let mut out = Mat::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = rhs.row(k);
            for (i, &aki) in a_row.iter().enumerate() {
                if aki != T::zero() {
                    axpy(aki, b_row, out.row_mut(i));
                }
            }
        }
        out
    }

    /// `scale * self * selfᵀ`, exploiting symmetry.
    pub fn gram_nt(&self, scale: T) -> Mat<T> {
        let n = self.rows;
        let mut out = Mat::zeros(n, n);
        let work = n * n * self.cols / 2;
        let body = |(i, out_row): (usize, &mut [T])| {
            let a_row = self.row(i);
            for (j, out_ij) in out_row.iter_mut().enumerate().take(i + 1) {
                *out_ij = scale * dot(a_row, self.row(j));
            }
        };
        if work >= PAR_FLOP_THRESHOLD {
            out.data.par_chunks_mut(n).enumerate().for_each(body);
        } else {
            out.data.chunks_mut(n).enumerate().for_each(body);
        }
        for i in 0..n {
            for j in i + 1..n {
                out[(i, j)] = out[(j, i)];
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mat_vec: dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ v` as a single pass over rows.
    pub fn t_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "t_vec: dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != T::zero() {
                axpy(vi, self.row(i), &mut out);
            }
        }
        out
    }

    /// In-place scaled sum `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: T, other: &Mat<T>) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        axpy(alpha, &other.data, &mut self.data);
    }

    pub fn add_diag(&mut self, alpha: T) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            self[(i, i)] += alpha;
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    /// Column scaling `self * diag(d)`.
    pub fn scale_cols(&self, d: &[T]) -> Mat<T> {
        assert_eq!(self.cols, d.len());
        let mut out = self.clone();
        for i in 0..self.rows {
            for (x, &di) in out.row_mut(i).iter_mut().zip(d) {
                *x *= di;
            }
        }
        out
    }

    pub fn frob_norm_sq(&self) -> T {
        norm2_sq(&self.data)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Mat<T>) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    /// Submatrix of the given column range.
    pub fn columns(&self, start: usize, end: usize) -> Mat<T> {
        assert!(start <= end && end <= self.cols);
        let mut out = Mat::zeros(self.rows, end - start);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[start..end]);
        }
        out
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigendecomposition of a symmetric matrix: `A = V diag(values) Vᵀ`,
/// eigenvalues ascending, eigenvectors in the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEig<T> {
    pub values: Vec<T>,
    pub vectors: Mat<T>,
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Quadratically convergent once off-diagonal mass is small; at the
/// n <= 512 sizes used here it is exact to machine precision within a
/// handful of sweeps. Deterministic (no pivot randomness).
pub fn sym_eig<T: Real>(a: &Mat<T>) -> SymEig<T> {
    assert_eq!(a.rows(), a.cols(), "sym_eig: matrix must be square");
    let n = a.rows();
    let mut b = a.clone();
    let mut v = Mat::identity(n);
    if n == 0 {
        return SymEig { values: vec![], vectors: v };
    }

    let anorm = b.frob_norm_sq().sqrt();
    let tol = T::epsilon() * anorm.max(T::one());
    let max_sweeps = 64;

    for _ in 0..max_sweeps {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(b[(i, j)].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = b[(p, q)];
                if apq.abs() <= tol * T::of(1e-3) {
                    continue;
                }
                let app = b[(p, p)];
                let aqq = b[(q, q)];
                let tau = (aqq - app) / (T::of(2.0) * apq);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    if i != p && i != q {
                        let aip = b[(i, p)];
                        let aiq = b[(i, q)];
                        let new_p = c * aip - s * aiq;
                        let new_q = s * aip + c * aiq;
                        b[(i, p)] = new_p;
                        b[(p, i)] = new_p;
                        b[(i, q)] = new_q;
                        b[(q, i)] = new_q;
                    }
                }
                b[(p, p)] = app - t * apq;
                b[(q, q)] = aqq + t * apq;
                b[(p, q)] = T::zero();
                b[(q, p)] = T::zero();

                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| b[(i, i)].partial_cmp(&b[(j, j)]).expect("finite eigenvalues"));
    let values: Vec<T> = order.iter().map(|&i| b[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new_j)] = v[(i, old_j)];
        }
    }
    SymEig { values, vectors }
}

impl<T: Real> SymEig<T> {
    pub fn min_eig(&self) -> T {
        self.values[0]
    }

    pub fn max_eig(&self) -> T {
        *self.values.last().expect("non-empty spectrum")
    }

    /// Largest |eigenvalue| (spectral norm of the symmetric matrix).
    pub fn op_norm(&self) -> T {
        self.min_eig().abs().max(self.max_eig().abs())
    }

    /// `Vᵀ x`.
    pub fn to_eigenbasis(&self, x: &[T]) -> Vec<T> {
        self.vectors.t_vec(x)
    }

    /// Applies `V f(D) Vᵀ` to a vector.
    pub fn apply_fn_vec(&self, x: &[T], f: impl Fn(T) -> T) -> Vec<T> {
        let mut c = self.to_eigenbasis(x);
        for (ci, &d) in c.iter_mut().zip(&self.values) {
            *ci *= f(d);
        }
        self.vectors.mat_vec(&c)
    }

    /// Applies `A⁻¹ = V D⁻¹ Vᵀ`, zeroing modes with `d <= rel_tol * d_max`
    /// (pseudo-inverse when the matrix is numerically rank deficient).
    pub fn apply_inv_vec(&self, x: &[T], rel_tol: T) -> Vec<T> {
        let cut = rel_tol * self.max_eig().abs();
        self.apply_fn_vec(x, |d| if d > cut { T::one() / d } else { T::zero() })
    }

    /// `A⁻¹ B` column by column, same thresholding as [`Self::apply_inv_vec`].
    pub fn apply_inv_mat(&self, b: &Mat<T>, rel_tol: T) -> Mat<T> {
        let cut = rel_tol * self.max_eig().abs();
        let inv_d: Vec<T> = self
            .values
            .iter()
            .map(|&d| if d > cut { T::one() / d } else { T::zero() })
            .collect();
        // A⁻¹B = V diag(1/d) (Vᵀ B)
        let vt_b = self.vectors.matmul_tn(b);
        let mut scaled = vt_b;
        for (k, &w) in inv_d.iter().enumerate() {
            for x in scaled.row_mut(k) {
                *x *= w;
            }
        }
        self.vectors.matmul(&scaled)
    }

    /// Number of eigenvalues above `rel_tol * d_max`.
    pub fn numeric_rank(&self, rel_tol: T) -> usize {
        let cut = rel_tol * self.max_eig().abs();
        self.values.iter().filter(|&&d| d > cut).count()
    }
}
