//! Small dense linear-algebra kernel used by every filter.
//!
//! State dimensions in this crate are tiny (at most a few dozen), so a
//! row-major `Vec<f64>` with straightforward loops is all that is needed.
//! Vectors are plain `[f64]` slices.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is singular")]
    Singular,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// Builds a matrix from row-major entries. Rejects wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::DimensionMismatch("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// `v·vᵀ` scaled by `w`, accumulated into `self`.
    pub fn add_outer(&mut self, w: f64, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for i in 0..self.rows {
            let wa = w * a[i];
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, &bj) in row.iter_mut().zip(b) {
                *r += wa * bj;
            }
        }
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub fn matmul_t(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_t: inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out[(i, j)] = dot(self.row(i), other.row(j));
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec: dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Matrix { data, ..*self }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix { data, ..*self }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            data: self.data.iter().map(|v| v * s).collect(),
            ..*self
        }
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry of `self - selfᵀ`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Replaces the matrix with `(A + Aᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        debug_assert!(self.is_square());
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `y += a·x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

const SYMMETRY_TOL: f64 = 1e-9;
const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-6;

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if a.asymmetry() > SYMMETRY_TOL * a.max_abs().max(1.0) {
        return Err(LinalgError::NotSymmetric);
    }
    Ok(())
}

/// Plain Cholesky of `A + jitter·I`; `None` when a pivot is not positive.
fn cholesky_raw(a: &Matrix, jitter: f64) -> Option<Matrix> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = 0.5 * (a[(i, j)] + a[(j, i)]);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = A`.
///
/// When a pivot fails the factorization is retried with diagonal jitter
/// `1e-12·tr(A)/n`, growing tenfold per attempt up to `1e-6·tr(A)/n`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    check_symmetric(a)?;
    let n = a.rows;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    if let Some(l) = cholesky_raw(a, 0.0) {
        return Ok(l);
    }
    let base = a.trace() / n as f64;
    if base <= 0.0 || !base.is_finite() {
        return Err(LinalgError::NotPositiveDefinite);
    }
    let mut scale = JITTER_START;
    while scale <= JITTER_MAX * (1.0 + 1e-9) {
        if let Some(l) = cholesky_raw(a, scale * base) {
            return Ok(l);
        }
        scale *= 10.0;
    }
    Err(LinalgError::NotPositiveDefinite)
}

/// Cholesky-like factor of a positive *semi*-definite matrix.
///
/// Pivots that are zero up to round-off produce a zero column instead of a
/// failure, so `L·Lᵀ = A` still holds for singular covariances such as a
/// process noise with deterministic components. Used for noise sampling.
pub fn psd_sqrt(a: &Matrix) -> Result<Matrix> {
    check_symmetric(a)?;
    let n = a.rows;
    let tol = 1e-14 * a.max_abs().max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -tol * (n as f64) * 16.0 {
            return Err(LinalgError::NotPositiveDefinite);
        }
        if d <= tol {
            continue;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L·Lᵀ·X = B` for every column of `B` given the Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows;
    assert_eq!(b.rows, n, "cholesky_solve: dimension mismatch");
    let mut x = b.clone();
    for c in 0..b.cols {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves the symmetric positive-definite system `A·X = B` (with jitter).
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let l = cholesky(a)?;
    Ok(cholesky_solve(&l, b))
}

/// Solves `A·x = b` by LU factorization with partial pivoting.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() || b.len() != a.rows {
        return Err(LinalgError::DimensionMismatch(format!(
            "solve: {}x{} system with rhs of length {}",
            a.rows,
            a.cols,
            b.len()
        )));
    }
    let n = a.rows;
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return Err(LinalgError::Singular);
    }
    let tiny = scale * f64::EPSILON * n as f64;
    for col in 0..n {
        let (pivot, pmax) =
            (col..n)
                .map(|r| (r, m[(r, col)].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pmax <= tiny {
            return Err(LinalgError::Singular);
        }
        if pivot != col {
            for j in 0..n {
                m.data.swap(col * n + j, pivot * n + j);
            }
            x.swap(col, pivot);
        }
        let p = m[(col, col)];
        for r in (col + 1)..n {
            let factor = m[(r, col)] / p;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                m[(r, j)] -= factor * m[(col, j)];
            }
            x[r] -= factor * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).frobenius_norm() / b.frobenius_norm().max(1e-300)
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        assert_eq!(cholesky(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let a = Matrix::from_rows(&[&[4.0, 0.0], &[0.0, 9.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        assert_eq!(l, Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 3.0]]).unwrap());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert_eq!(cholesky(&a), Err(LinalgError::NotPositiveDefinite));
    }

    #[test]
    fn cholesky_jitter_rescues_rank_deficient_covariance() {
        // rank-1 sample covariance
        let v = [1.0, 2.0, 3.0];
        let mut a = Matrix::zeros(3, 3);
        a.add_outer(1.0, &v, &v);
        let l = cholesky(&a).unwrap();
        assert!(rel_frobenius(&l.matmul_t(&l), &a) < 1e-5);
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let a = Matrix::from_rows(&[&[2.0, 1.0], &[0.0, 2.0]]).unwrap();
        assert_eq!(cholesky(&a), Err(LinalgError::NotSymmetric));
    }

    #[test]
    fn psd_sqrt_handles_zero_variance() {
        let a = Matrix::from_diag(&[0.0, 4.0, 1e-12]);
        let l = psd_sqrt(&a).unwrap();
        assert_eq!(l.diag(), vec![0.0, 2.0, 1e-6]);
        let zero = psd_sqrt(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(zero, Matrix::zeros(2, 2));
    }

    #[test]
    fn solve_examples() {
        assert_eq!(
            solve(&Matrix::identity(2), &[3.0, 7.0]).unwrap(),
            vec![3.0, 7.0]
        );
        let a = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]).unwrap();
        assert_eq!(solve(&a, &[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(
            solve(&Matrix::zeros(2, 2), &[1.0, 0.0]),
            Err(LinalgError::Singular)
        );
    }

    #[test]
    fn solve_needs_pivoting() {
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(solve(&a, &[5.0, 6.0]).unwrap(), vec![6.0, 5.0]);
    }

    #[test]
    fn new_rejects_non_finite() {
        assert_eq!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(LinalgError::NonFinite)
        );
        assert!(matches!(
            Matrix::new(2, 2, vec![1.0]),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }

    fn matrix_strategy(n: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-1.0f64..1.0, n * n)
            .prop_map(move |d| Matrix::new(n, n, d).unwrap())
    }

    proptest! {
        #[test]
        fn cholesky_reconstructs_spd(b in (1usize..7).prop_flat_map(matrix_strategy)) {
            let n = b.rows();
            let a = b.transpose().matmul(&b).add(&Matrix::identity(n).scale(1e-3));
            let l = cholesky(&a).unwrap();
            prop_assert!(rel_frobenius(&l.matmul_t(&l), &a) < 1e-10);
            for i in 0..n {
                for j in (i + 1)..n {
                    prop_assert_eq!(l[(i, j)], 0.0);
                }
            }
        }

        #[test]
        fn solve_recovers_x(
            b in (1usize..7).prop_flat_map(matrix_strategy),
            x in proptest::collection::vec(-10.0f64..10.0, 6),
        ) {
            let n = b.rows();
            // diagonally dominant => well conditioned
            let a = b.add(&Matrix::identity(n).scale(n as f64 + 1.0));
            let x = &x[..n];
            let rhs = a.mul_vec(x);
            let got = solve(&a, &rhs).unwrap();
            let err = norm(&sub(&got, x)) / norm(x).max(1.0);
            prop_assert!(err < 1e-8);
            let resid = norm(&sub(&a.mul_vec(&got), &rhs));
            prop_assert!(resid <= 1e-9 * (1.0 + norm(&rhs)));
        }
    }
}
