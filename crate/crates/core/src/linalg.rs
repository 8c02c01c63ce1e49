//! Small dense linear algebra: row-major matrices, singular values, solves.
//!
//! Everything here is sized for Jacobians (`c×d` with single-digit sides) and
//! for the weight matrices of a modest network. Batched products go through
//! `matrixmultiply`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut, Sub};

use crate::error::{check_len, Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero `rows × cols` matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Wraps row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len("matrix row", cols, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Consumes the matrix, returning its row-major entries.
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Row `r` as a slice.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Transposed copy.
    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    /// `self · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("matrix-vector product", self.cols, x.len())?;
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// Euclidean norm of the row-concatenated entries.
    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest singular value, i.e. the `ℓ2 → ℓ2` operator norm.
    pub fn operator_norm(&self) -> f64 {
        singular_values(self).first().copied().unwrap_or(0.0)
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix shapes differ");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Frobenius norm of a `c×d` matrix.
pub fn frobenius(m: &Matrix) -> f64 {
    m.frobenius()
}

/// Inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Squared Euclidean distance, summed in coordinate order.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            t * t
        })
        .sum()
}

/// Singular values in descending order (one-sided Jacobi).
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    // Work on the orientation with fewer columns; columns are contiguous rows of `cols`.
    let (n_vec, len, mut cols) = if m.cols <= m.rows {
        let t = m.transpose();
        (m.cols, m.rows, t.data)
    } else {
        (m.rows, m.cols, m.data.clone())
    };
    if n_vec == 0 {
        return Vec::new();
    }
    const TOL: f64 = 1e-15;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n_vec {
            for q in p + 1..n_vec {
                let (a, b) = cols.split_at_mut(q * len);
                let cp = &mut a[p * len..(p + 1) * len];
                let cq = &mut b[..len];
                let alpha = dot(cp, cp);
                let beta = dot(cq, cq);
                let gamma = dot(cp, cq);
                if gamma == 0.0 || libm::fabs(gamma) <= TOL * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.chunks(len).map(norm).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows;
    check_len("square system", n, a.cols)?;
    check_len("right-hand side", n, b.len())?;
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(libm::fabs(*v)));
    if scale == 0.0 {
        return Err(Error::SingularMatrix);
    }
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| libm::fabs(m[i * n + k]).total_cmp(&libm::fabs(m[j * n + k])))
            .unwrap();
        if libm::fabs(m[piv * n + k]) <= 1e-14 * scale {
            return Err(Error::SingularMatrix);
        }
        if piv != k {
            for c in 0..n {
                m.swap(k * n + c, piv * n + c);
            }
            x.swap(k, piv);
        }
        for i in k + 1..n {
            let f = m[i * n + k] / m[k * n + k];
            if f == 0.0 {
                continue;
            }
            for c in k..n {
                m[i * n + c] -= f * m[k * n + c];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in k + 1..n {
            s -= m[k * n + c] * x[c];
        }
        x[k] = s / m[k * n + k];
    }
    Ok(x)
}

/// Strided matrix operand for [`gemm`]: data plus (row stride, column stride).
#[derive(Clone, Copy)]
pub(crate) struct Strided<'a> {
    pub data: &'a [f64],
    pub rs: usize,
    pub cs: usize,
}

impl<'a> Strided<'a> {
    pub fn row_major(data: &'a [f64], cols: usize) -> Self {
        Self { data, rs: cols, cs: 1 }
    }

    /// Transposed view of a row-major `rows × cols` buffer.
    pub fn transposed(data: &'a [f64], cols: usize) -> Self {
        Self { data, rs: 1, cs: cols }
    }

    fn fits(&self, rows: usize, cols: usize) -> bool {
        rows == 0 || cols == 0 || (rows - 1) * self.rs + (cols - 1) * self.cs < self.data.len()
    }
}

/// `out (m×n, row-major) = a (m×k) · b (k×n) + beta · out`.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: Strided<'_>, b: Strided<'_>, beta: f64, out: &mut [f64]) {
    assert!(a.fits(m, k) && b.fits(k, n) && out.len() >= m * n, "gemm operand out of bounds");
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the assertion above guarantees every strided access stays inside
    // the borrowed slices, and `out` does not alias `a` or `b` (it is &mut).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_norm_of_diagonal() {
        let m = Matrix::from_rows(&[[3.0, 0.0], [0.0, -4.0]]).unwrap();
        assert!((m.operator_norm() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn singular_values_of_rank_one_row() {
        let m = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        let sv = singular_values(&m);
        assert_eq!(sv.len(), 1);
        assert!((sv[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let m = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let sv = singular_values(&m);
        assert!((sv[0] - 3.0).abs() < 1e-13 && (sv[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = Matrix::from_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]]).unwrap();
        let x = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x).unwrap();
        let got = solve(&a, &b).unwrap();
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-13);
        }
    }

    #[test]
    fn solve_rejects_singular() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(solve(&a, &[1.0, 1.0]), Err(Error::SingularMatrix));
    }

    #[test]
    fn gemm_with_transposed_operand() {
        // a (2×3) · bᵀ where b is 2×3 row-major.
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let mut out = [0.0; 4];
        gemm(2, 3, 2, Strided::row_major(&a, 3), Strided::transposed(&b, 3), 0.0, &mut out);
        assert_eq!(out, [4.0, 2.0, 10.0, 5.0]);
    }
}
