//! Dense matrix kernels shared by every module.
//!
//! All matrices are stored row-major in a flat `Vec<f64>`; that storage order
//! is fixed crate-wide. Kronecker products and the column-stacking `vec`
//! operator follow the usual conventions, so that
//! `kron(&phi.transpose(), &Mat::identity(n)) * vec_cols(&m)` equals `m * phi`
//! for any conformable `phi`.

mod eigen;
mod factor;
mod gemm;

pub use eigen::SymEig;
pub use gemm::dgemm_into;

use std::fmt;
use std::ops::{Index, IndexMut};

/// Absolute pivot floor for Cholesky factorization.
pub const TOL_PD: f64 = 1e-12;

/// Errors raised by the matrix kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum MatError {
    /// Input matrix is not symmetric within the accepted tolerance.
    NotSymmetric { asym: f64, tol: f64 },
    /// A Cholesky pivot fell below the positive-definiteness floor.
    NotPositiveDefinite { pivot: usize },
    /// The eigenvalue iteration did not converge within its budget.
    NoConvergence,
    /// Operand shapes are inconsistent.
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
}

impl fmt::Display for MatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatError::NotSymmetric { asym, tol } => {
                write!(f, "matrix is not symmetric: asymmetry {asym:.3e} exceeds {tol:.3e}")
            }
            MatError::NotPositiveDefinite { pivot } => {
                write!(f, "matrix is not positive definite (pivot {pivot})")
            }
            MatError::NoConvergence => write!(f, "eigenvalue iteration did not converge"),
            MatError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected:?}, got {got:?}")
            }
        }
    }
}

impl std::error::Error for MatError {}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from a row-major flat buffer.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length must equal rows*cols");
        Mat { rows, cols, data }
    }

    /// Build from nested row slices.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    /// Column vector from a slice.
    pub fn col_vec(v: &[f64]) -> Self {
        Mat { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    /// Row vector from a slice.
    pub fn row_vec(v: &[f64]) -> Self {
        Mat { rows: 1, cols: v.len(), data: v.to_vec() }
    }

    /// Diagonal matrix from a slice.
    pub fn diag(v: &[f64]) -> Self {
        let mut m = Mat::zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m.data[i * v.len() + i] = x;
        }
        m
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    /// All entries finite?
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|a| a * s).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    /// `self += s * other`, in place.
    pub fn axpy(&mut self, s: f64, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Matrix product via the blocked dgemm kernel.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut c = Mat::zeros(self.rows, other.cols);
        dgemm_into(
            self.rows,
            self.cols,
            other.cols,
            1.0,
            &self.data,
            self.cols as isize,
            1,
            &other.data,
            other.cols as isize,
            1,
            0.0,
            &mut c.data,
            other.cols as isize,
            1,
        );
        c
    }

    /// `alpha * op(a) * op(b) + beta * self`, writing into `self`.
    /// Transposition is expressed through strides, so no copies are made.
    pub fn gemm(&mut self, alpha: f64, a: &Mat, ta: bool, b: &Mat, tb: bool, beta: f64) {
        let (am, ak) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
        let (bk, bn) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
        assert_eq!(ak, bk, "gemm inner dimension mismatch");
        assert_eq!((self.rows, self.cols), (am, bn), "gemm output shape mismatch");
        let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
        let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
        dgemm_into(
            am, ak, bn, alpha, &a.data, rsa, csa, &b.data, rsb, csb, beta, &mut self.data,
            self.cols as isize, 1,
        );
    }

    /// Matrix-vector product (y = self * x).
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[r] = acc;
        }
        y
    }

    /// Quadratic form xᵀ S x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let y = self.matvec(x);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest |S − Sᵀ| entry.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r + 1..n {
                worst = worst.max((self.data[r * n + c] - self.data[c * n + r]).abs());
            }
        }
        worst
    }

    /// (S + Sᵀ)/2.
    pub fn symmetrize(&self) -> Mat {
        assert!(self.is_square());
        let n = self.rows;
        let mut m = self.clone();
        for r in 0..n {
            for c in r + 1..n {
                let v = 0.5 * (self.data[r * n + c] + self.data[c * n + r]);
                m.data[r * n + c] = v;
                m.data[c * n + r] = v;
            }
        }
        m
    }

    /// Horizontal concatenation [self other].
    pub fn hconcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "hconcat row mismatch");
        let mut m = Mat::zeros(self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            m.data[r * m.cols..r * m.cols + self.cols]
                .copy_from_slice(&self.data[r * self.cols..(r + 1) * self.cols]);
            m.data[r * m.cols + self.cols..(r + 1) * m.cols]
                .copy_from_slice(&other.data[r * other.cols..(r + 1) * other.cols]);
        }
        m
    }

    /// Copy `block` into `self` with its (0,0) entry at (r0, c0).
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Mat) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols, "block overflow");
        for r in 0..block.rows {
            let src = &block.data[r * block.cols..(r + 1) * block.cols];
            let dst0 = (r0 + r) * self.cols + c0;
            self.data[dst0..dst0 + block.cols].copy_from_slice(src);
        }
    }

    /// Add `s * block` into `self` at (r0, c0).
    pub fn add_block(&mut self, r0: usize, c0: usize, s: f64, block: &Mat) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols, "block overflow");
        for r in 0..block.rows {
            let src = &block.data[r * block.cols..(r + 1) * block.cols];
            let dst0 = (r0 + r) * self.cols + c0;
            for (d, s_) in self.data[dst0..dst0 + block.cols].iter_mut().zip(src) {
                *d += s * s_;
            }
        }
    }

    /// Extract the block of shape (rows, cols) anchored at (r0, c0).
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block overflow");
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            let src0 = (r0 + r) * self.cols + c0;
            m.data[r * cols..(r + 1) * cols].copy_from_slice(&self.data[src0..src0 + cols]);
        }
        m
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Kronecker product a ⊗ b: block (i,j) equals a[i,j]·b.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let mut m = Mat::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let s = a.data[i * a.cols + j];
            if s == 0.0 {
                continue;
            }
            for p in 0..b.rows {
                let dst0 = (i * b.rows + p) * m.cols + j * b.cols;
                let src = &b.data[p * b.cols..(p + 1) * b.cols];
                for (q, &v) in src.iter().enumerate() {
                    m.data[dst0 + q] = s * v;
                }
            }
        }
    }
    m
}

/// Column-stacking vectorization: stacks the columns of `m` into one column.
pub fn vec_cols(m: &Mat) -> Mat {
    let mut v = Vec::with_capacity(m.rows * m.cols);
    for c in 0..m.cols {
        for r in 0..m.rows {
            v.push(m.data[r * m.cols + c]);
        }
    }
    Mat { rows: m.rows * m.cols, cols: 1, data: v }
}

/// Inverse of `vec_cols`: reshape a stacked column back into rows × cols.
pub fn unvec_cols(v: &Mat, rows: usize, cols: usize) -> Mat {
    assert_eq!(v.cols, 1, "unvec_cols expects a column vector");
    assert_eq!(v.rows, rows * cols, "unvec_cols length mismatch");
    let mut m = Mat::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m.data[r * cols + c] = v.data[c * rows + r];
        }
    }
    m
}

/// Symmetry acceptance tolerance: 1e−9 · ‖s‖_F.
pub fn sym_tol(s: &Mat) -> f64 {
    1e-9 * s.frobenius_norm()
}

pub use eigen::{is_psd, min_eig, sym_eig};
pub use factor::{chol_upper, solve_spd, solve_upper_right_many, solve_upper_t_many};
