//! Dense real matrices and the read-only oracle interface the samplers use.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::linalg;

/// An `m x n` real matrix with finite entries.
///
/// Thin wrapper over [`nalgebra::DMatrix`] that enforces the shape and
/// finiteness invariants at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::dims(format!(
                "matrix must be non-empty, got {}x{}",
                inner.nrows(),
                inner.ncols()
            )));
        }
        // nalgebra stores column-major, so report the first offender by position.
        if let Some(k) = inner.iter().position(|v| !v.is_finite()) {
            let rows = inner.nrows();
            return Err(Error::NonFinite {
                row: k % rows,
                col: k / rows,
            });
        }
        Ok(DenseMatrix(inner))
    }

    /// Builds a matrix from entries listed row by row.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::dims(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows.saturating_mul(cols),
                data.len()
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::dims(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be non-empty");
        DenseMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "matrix must be non-empty");
        DenseMatrix(DMatrix::identity(n, n))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    /// `||self - other||_F`.
    pub fn distance(&self, other: &DenseMatrix) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok((&self.0 - &other.0).norm())
    }

    /// `||self - other||_F / ||self||_F`, with `self` taken as ground truth.
    pub fn relative_error(&self, other: &DenseMatrix) -> Result<f64> {
        let denom = self.frobenius_norm();
        if denom == 0.0 {
            return Err(Error::degenerate("relative error against a zero matrix"));
        }
        Ok(self.distance(other)? / denom)
    }

    /// Number of singular values strictly above `rel_tol * sigma_1`.
    pub fn numerical_rank(&self, rel_tol: f64) -> Result<usize> {
        let sv = linalg::singular_values(&self.0)?;
        Ok(linalg::numerical_rank(&sv, rel_tol))
    }

    fn check_same_shape(&self, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dims(format!(
                "shape {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

impl TryFrom<DMatrix<f64>> for DenseMatrix {
    type Error = Error;

    fn try_from(value: DMatrix<f64>) -> Result<Self> {
        DenseMatrix::new(value)
    }
}

impl AsRef<DMatrix<f64>> for DenseMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Read access to an unknown matrix, one column, row or entry at a time.
///
/// The samplers only touch the parts of the matrix they observe through
/// this trait, which keeps the observation model explicit.
pub trait MatrixOracle {
    fn shape(&self) -> (usize, usize);
    fn column(&self, j: usize) -> DVector<f64>;
    fn row(&self, i: usize) -> RowDVector<f64>;
    fn entry(&self, i: usize, j: usize) -> f64;
}

impl MatrixOracle for DenseMatrix {
    fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    fn column(&self, j: usize) -> DVector<f64> {
        self.0.column(j).into_owned()
    }

    fn row(&self, i: usize) -> RowDVector<f64> {
        self.0.row(i).into_owned()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        let err = DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, f64::NAN, 4.0]).unwrap_err();
        assert_eq!(err, Error::NonFinite { row: 1, col: 0 });
        assert!(DenseMatrix::from_row_major(2, 2, &[1.0; 3]).is_err());
        assert!(DenseMatrix::from_row_major(0, 2, &[]).is_err());
    }

    #[test]
    fn row_major_round_trip() {
        let data = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = DenseMatrix::from_row_major(2, 3, &data).unwrap();
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.to_row_major(), data);
    }

    #[test]
    fn rank_of_outer_product() {
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let v = DVector::from_vec(vec![3.0, 1.0, 4.0, 1.0]);
        let m = DenseMatrix::new(&u * v.transpose()).unwrap();
        assert_eq!(m.numerical_rank(1e-9).unwrap(), 1);
        assert_eq!(DenseMatrix::zeros(3, 3).numerical_rank(1e-9).unwrap(), 0);
    }
}
