//! Small linear-algebra layer over `nalgebra`: a compressed-row sparse
//! matrix for the network-sized operators and a few dense helpers.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value threshold used for every numerical rank decision.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in row_of.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero `(col, value)` pairs of one row, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.cols);
        Vector::from_iterator(
            self.rows,
            (0..self.rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()),
        )
    }

    pub fn tr_mul_vec(&self, y: &Vector) -> Vector {
        assert_eq!(y.len(), self.rows);
        let mut out = Vector::zeros(self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[c] += v * y[r];
            }
        }
        out
    }

    /// `self * rhs` for a dense right-hand side.
    pub fn mul_dense(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(rhs.nrows(), self.cols);
        let mut out = Matrix::zeros(self.rows, rhs.ncols());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                for j in 0..rhs.ncols() {
                    out[(r, j)] += v * rhs[(c, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        SparseMatrix::from_triplets(self.cols, self.rows, t)
    }

    /// Sparse product `self * rhs`.
    pub fn mul_sparse(&self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.cols, rhs.rows);
        let mut t = Vec::new();
        let mut acc = vec![0.0; rhs.cols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    if acc[c] == 0.0 {
                        touched.push(c);
                    }
                    acc[c] += a * b;
                    if acc[c] == 0.0 {
                        // keep the slot tracked even if it cancels exactly
                        acc[c] = -0.0;
                    }
                }
            }
            for &c in &touched {
                t.push((r, c, acc[c]));
                acc[c] = 0.0;
            }
            touched.clear();
        }
        SparseMatrix::from_triplets(self.rows, rhs.cols, t)
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> SparseMatrix {
        let mut map = vec![usize::MAX; self.cols];
        for (new, &old) in columns.iter().enumerate() {
            map[old] = new;
        }
        let mut t = Vec::new();
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                if map[c] != usize::MAX {
                    t.push((r, map[c], v));
                }
            }
        }
        SparseMatrix::from_triplets(self.rows, columns.len(), t)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Numerical rank after scaling every column to unit max-norm.
pub fn numeric_rank(m: &Matrix) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let scaled = scale_columns(m);
    let sv = singular_values(&scaled);
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * smax).count()
}

/// Dimension of the numerical null space, `cols - rank`.
pub fn nullity(m: &Matrix) -> usize {
    m.ncols() - numeric_rank(m)
}

fn scale_columns(m: &Matrix) -> Matrix {
    let mut s = m.clone();
    for j in 0..s.ncols() {
        let mx = s.column(j).iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if mx > 0.0 {
            s.column_mut(j).scale_mut(1.0 / mx);
        }
    }
    s
}

fn singular_values(m: &Matrix) -> Vec<f64> {
    // the SVD of the smaller Gram side is enough for rank decisions, but it
    // squares the condition number, so decompose the matrix itself
    let sv = if m.nrows() >= m.ncols() {
        m.clone().svd(false, false).singular_values
    } else {
        m.transpose().svd(false, false).singular_values
    };
    sv.iter().copied().collect()
}

/// Right singular vector of the smallest singular value (column-scaled).
pub fn weakest_direction(m: &Matrix) -> Vector {
    let scaled = scale_columns(m);
    let tall = if scaled.nrows() < scaled.ncols() {
        let mut padded = Matrix::zeros(scaled.ncols(), scaled.ncols());
        padded.view_mut((0, 0), scaled.shape()).copy_from(&scaled);
        padded
    } else {
        scaled
    };
    let gram = tall.transpose() * &tall;
    let eig = SymmetricEigen::new(gram);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    eig.eigenvectors.column(imin).into_owned()
}

pub fn cholesky(m: &Matrix, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    Ok(cholesky(m, what)?.inverse())
}

/// Smallest and largest eigenvalue of a symmetric matrix after symmetric
/// diagonal (Jacobi) scaling.
pub fn scaled_eigen_range(m: &Matrix) -> (f64, f64) {
    let n = m.nrows();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let v = m[(i, i)];
            if v > 0.0 {
                1.0 / libm::sqrt(v)
            } else {
                1.0
            }
        })
        .collect();
    let scaled = Matrix::from_fn(n, n, |i, j| m[(i, j)] * d[i] * d[j]);
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let lo = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = eig.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    (lo, hi)
}

pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_roundtrip_and_products() {
        let s = SparseMatrix::from_triplets(
            3,
            4,
            vec![(0, 1, 2.0), (2, 3, -1.0), (0, 1, 1.0), (1, 0, 0.0), (2, 0, 4.0)],
        );
        assert_eq!(s.nnz(), 3);
        assert_eq!(s.get(0, 1), 3.0);
        let d = s.to_dense();
        let x = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mul_vec(&x), &d * &x);
        let y = Vector::from_vec(vec![1.0, -1.0, 0.5]);
        assert_eq!(s.tr_mul_vec(&y), d.transpose() * &y);
        assert_eq!(s.transpose().to_dense(), d.transpose());
        let p = s.mul_sparse(&s.transpose());
        assert_eq!(p.to_dense(), &d * d.transpose());
        assert_eq!(s.select_columns(&[3, 1]).to_dense().column(0), d.column(3));
    }

    #[test]
    fn rank_ignores_column_scale() {
        let m = Matrix::from_row_slice(3, 3, &[1.0, 1e6, 2.0, 0.0, 2e6, 4.0, 1.0, 3e6, 6.0]);
        assert_eq!(numeric_rank(&m), 2);
        assert_eq!(nullity(&m), 1);
        let w = weakest_direction(&m);
        let scaled = scale_columns(&m);
        assert!((scaled * w).norm() < 1e-9);
    }
}
