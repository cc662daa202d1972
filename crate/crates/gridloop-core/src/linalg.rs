//! Small dense linear algebra: row-major matrices and LU solves.
//!
//! Problems in this crate are desk scale (tens of unknowns), so a dense
//! partial-pivot LU is all that is needed. No BLAS, no platform variance.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("matrix is singular to working precision")]
pub struct SingularMatrix;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.at(r, c) * v[c]).sum())
            .collect()
    }
}

/// Solves `a x = b` by LU decomposition with partial pivoting.
///
/// `a` is consumed as a working copy; inputs are untouched.
pub fn solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>, SingularMatrix> {
    assert_eq!(a.rows, a.cols, "solve requires a square matrix");
    assert_eq!(b.len(), a.rows);
    let n = a.rows;
    let mut m = a.clone();
    let mut x = b.to_vec();

    for col in 0..n {
        // pivot: largest magnitude in the column at or below the diagonal
        let mut pivot_row = col;
        let mut pivot_val = m.at(col, col).abs();
        for r in col + 1..n {
            let v = m.at(r, col).abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val < 1e-12 {
            return Err(SingularMatrix);
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = m.at(col, c);
                *m.at_mut(col, c) = m.at(pivot_row, c);
                *m.at_mut(pivot_row, c) = tmp;
            }
            x.swap(col, pivot_row);
        }
        let diag = m.at(col, col);
        for r in col + 1..n {
            let factor = m.at(r, col) / diag;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                let v = m.at(col, c);
                *m.at_mut(r, c) -= factor * v;
            }
            x[r] -= factor * x[col];
        }
    }

    for col in (0..n).rev() {
        let mut acc = x[col];
        for c in col + 1..n {
            acc -= m.at(col, c) * x[c];
        }
        x[col] = acc / m.at(col, col);
    }
    Ok(x)
}
