//! Dense integer matrices plus the fraction-free elimination routines shared
//! by the exact checkers.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::Zero;

/// Row-major dense `i64` matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
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

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(<[i64]>::to_vec).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    /// Submatrix picking the given (0-based) rows and columns in order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }

    /// Principal submatrix with (0-based) row and column `k` removed.
    pub fn delete_row_col(&self, k: usize) -> Self {
        let keep: Vec<usize> = (0..self.rows).filter(|&i| i != k).collect();
        self.select(&keep, &keep)
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] as f64)
    }

    pub fn to_bigint_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| BigInt::from(self[(i, j)])).collect()).collect()
    }
}

impl Index<(usize, usize)> for IntMatrix {
    type Output = i64;
    fn index(&self, (i, j): (usize, usize)) -> &i64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

/// Exact rank by Bareiss fraction-free elimination with row pivoting.
pub fn bareiss_rank(mut m: Vec<Vec<BigInt>>) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut prev = BigInt::from(1);
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(pivot) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                let v = (&m[rank][col] * &m[r][c] - &m[r][col] * &m[rank][c]) / &prev;
                m[r][c] = v;
            }
            m[r][col] = BigInt::zero();
        }
        prev = m[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Exact determinant by Bareiss elimination (row pivoting, sign tracked).
pub fn bareiss_det(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::from(1);
    }
    let mut sign = 1;
    let mut prev = BigInt::from(1);
    for k in 0..n {
        let Some(pivot) = (k..n).find(|&r| !m[r][k].is_zero()) else {
            return BigInt::zero();
        };
        if pivot != k {
            m.swap(k, pivot);
            sign = -sign;
        }
        for r in k + 1..n {
            for c in k + 1..n {
                let v = (&m[k][k] * &m[r][c] - &m[r][k] * &m[k][c]) / &prev;
                m[r][c] = v;
            }
        }
        prev = m[k][k].clone();
    }
    prev * sign
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(rows: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
        IntMatrix::from_rows(rows).to_bigint_rows()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(bareiss_rank(big(&[vec![1, 2], vec![2, 4]])), 1);
        assert_eq!(bareiss_rank(big(&[vec![0, 1], vec![1, 0]])), 2);
        assert_eq!(bareiss_rank(big(&[vec![0, 0, 0]])), 0);
        assert_eq!(bareiss_rank(big(&[vec![1, 0, 1], vec![0, 1, 1], vec![1, 1, 2]])), 2);
    }

    #[test]
    fn det_examples() {
        assert_eq!(bareiss_det(big(&[vec![2, 1], vec![1, 3]])), BigInt::from(5));
        assert_eq!(bareiss_det(big(&[vec![0, 1], vec![1, 0]])), BigInt::from(-1));
        assert_eq!(bareiss_det(big(&[vec![1, -1], vec![-1, 1]])), BigInt::zero());
        assert_eq!(bareiss_det(Vec::new()), BigInt::from(1));
    }

    #[test]
    fn select_and_delete() {
        let m = IntMatrix::from_rows(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]);
        assert_eq!(m.delete_row_col(1).to_rows(), vec![vec![1, 3], vec![7, 9]]);
        assert_eq!(m.select(&[2], &[0, 1]).to_rows(), vec![vec![7, 8]]);
        assert!(!m.is_symmetric());
    }
}
