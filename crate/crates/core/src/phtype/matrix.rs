//! Dense matrices and the Kronecker algebra used by the matrix path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-major view over a dense `f64` matrix.
///
/// Storage and the LU factorisation come from `nalgebra`; the Kronecker
/// operations are implemented here.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    inner: DMatrix<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix must have at least one row and column".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self { inner: DMatrix::from_row_slice(rows, cols, entries) })
    }

    /// Convenience constructor from nested rows; panics on ragged input.
    pub fn from_nested<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let flat: Vec<f64> = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.as_ref().len(), cols, "ragged matrix rows");
                r.as_ref().iter().copied()
            })
            .collect();
        Self::from_rows(rows.len(), cols, &flat).expect("non-empty rectangular input")
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: DMatrix::identity(n, n) }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { inner: DMatrix::zeros(rows, cols) }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self { inner: DMatrix::from_diagonal(&DVector::from_column_slice(values)) }
    }

    pub(crate) fn from_inner(inner: DMatrix<f64>) -> Self {
        Self { inner }
    }

    pub(crate) fn inner(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.inner[(row, col)] = value;
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.inner.row_iter().map(|r| r.sum()).collect()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.inner.transpose().as_slice().to_vec()
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|x| x.is_finite())
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols() != rhs.rows() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self { inner: &self.inner * &rhs.inner })
    }

    pub fn scale(&self, factor: f64) -> DenseMatrix {
        Self { inner: &self.inner * factor }
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows(), self.cols()), (other.rows(), other.cols()));
        self.inner
            .iter()
            .zip(other.inner.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn require_square(&self, what: &str) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows())
        } else {
            Err(Error::Dimension(format!(
                "{what} requires a square matrix, got {}x{}",
                self.rows(),
                self.cols()
            )))
        }
    }
}

/// Kronecker product with block layout `m1[i][j] * m2`.
pub fn kron_product(m1: &DenseMatrix, m2: &DenseMatrix) -> DenseMatrix {
    let (r1, c1) = (m1.rows(), m1.cols());
    let (r2, c2) = (m2.rows(), m2.cols());
    let mut out = DMatrix::zeros(r1 * r2, c1 * c2);
    for i in 0..r1 {
        for j in 0..c1 {
            let a = m1.get(i, j);
            if a == 0.0 {
                continue;
            }
            for k in 0..r2 {
                for l in 0..c2 {
                    out[(i * r2 + k, j * c2 + l)] = a * m2.get(k, l);
                }
            }
        }
    }
    DenseMatrix::from_inner(out)
}

/// Kronecker sum `m1 ⊗ I_m + I_n ⊗ m2` of two square matrices.
pub fn kron_sum(m1: &DenseMatrix, m2: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m1.require_square("kronecker sum")?;
    let m = m2.require_square("kronecker sum")?;
    let left = kron_product(m1, &DenseMatrix::identity(m));
    let right = kron_product(&DenseMatrix::identity(n), m2);
    Ok(DenseMatrix::from_inner(left.inner + right.inner))
}

/// Dimension `p^n`, saturating instead of overflowing.
pub(crate) fn power_dimension(p: usize, n: usize) -> u128 {
    let mut dim: u128 = 1;
    for _ in 0..n {
        dim = dim.saturating_mul(p as u128);
    }
    dim
}

pub(crate) fn check_cap(p: usize, n: usize, cap: usize) -> Result<()> {
    let requested = power_dimension(p, n);
    if requested > cap as u128 {
        Err(Error::Capacity { requested, cap })
    } else {
        Ok(())
    }
}

/// `n`-fold Kronecker sum of `m` with itself, as a left fold.
pub fn kron_power_sum(m: &DenseMatrix, n: usize, cap: usize) -> Result<DenseMatrix> {
    let p = m.require_square("kronecker power sum")?;
    if n == 0 {
        return Err(Error::Validation("kronecker power requires n >= 1".into()));
    }
    check_cap(p, n, cap)?;
    let mut acc = m.clone();
    for _ in 1..n {
        acc = kron_sum(&acc, m)?;
    }
    Ok(acc)
}

/// `n`-fold Kronecker product of a row vector with itself.
pub fn kron_power_vector(v: &[f64], n: usize, cap: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Validation("kronecker power requires n >= 1".into()));
    }
    check_cap(v.len(), n, cap)?;
    let mut acc = v.to_vec();
    for _ in 1..n {
        acc = acc.iter().flat_map(|&a| v.iter().map(move |&b| a * b)).collect();
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAP: usize = 4096;

    #[test]
    fn identity_kron_identity() {
        let i2 = DenseMatrix::identity(2);
        assert_eq!(kron_product(&i2, &i2), DenseMatrix::identity(4));
    }

    #[test]
    fn scalar_kron() {
        let a = DenseMatrix::from_nested(&[[2.0]]);
        let b = DenseMatrix::from_nested(&[[3.0]]);
        assert_eq!(kron_product(&a, &b), DenseMatrix::from_nested(&[[6.0]]));
    }

    #[test]
    fn swap_kron_gives_block_anti_diagonal() {
        let swap = DenseMatrix::from_nested(&[[0.0, 1.0], [1.0, 0.0]]);
        let block = DenseMatrix::from_nested(&[[1.0, 2.0], [3.0, 4.0]]);
        let expected = DenseMatrix::from_nested(&[
            [0.0, 0.0, 1.0, 2.0],
            [0.0, 0.0, 3.0, 4.0],
            [1.0, 2.0, 0.0, 0.0],
            [3.0, 4.0, 0.0, 0.0],
        ]);
        assert_eq!(kron_product(&swap, &block), expected);
    }

    #[test]
    fn kron_product_matches_nalgebra() {
        let a = DenseMatrix::from_nested(&[[1.0, -2.0, 0.5], [0.0, 3.0, 1.0]]);
        let b = DenseMatrix::from_nested(&[[0.25, 1.0], [2.0, -1.0], [4.0, 0.0]]);
        let ours = kron_product(&a, &b);
        let theirs = a.inner().kronecker(b.inner());
        assert_eq!(ours.inner(), &theirs);
    }

    #[test]
    fn kron_sum_scalars_add() {
        let a = DenseMatrix::from_nested(&[[1.5]]);
        let b = DenseMatrix::from_nested(&[[-4.0]]);
        assert_eq!(kron_sum(&a, &b).unwrap(), DenseMatrix::from_nested(&[[-2.5]]));
    }

    #[test]
    fn kron_sum_with_zero_scalar_is_identity_map() {
        let m = DenseMatrix::from_nested(&[[-1.0, 1.0], [0.5, -2.0]]);
        let zero = DenseMatrix::zeros(1, 1);
        assert_eq!(kron_sum(&m, &zero).unwrap(), m);
    }

    #[test]
    fn kron_sum_of_two_phase_generator() {
        let (lambda_e, rate) = (0.2, 0.4);
        let t = DenseMatrix::from_nested(&[[-lambda_e, lambda_e], [0.0, -rate]]);
        let s = kron_sum(&t, &t).unwrap();
        assert_eq!(s.rows(), 4);
        let diag: Vec<f64> = (0..4).map(|i| s.get(i, i)).collect();
        let expected = [-2.0 * lambda_e, -lambda_e - rate, -lambda_e - rate, -2.0 * rate];
        for (d, e) in diag.iter().zip(expected) {
            assert!((d - e).abs() < 1e-15);
        }
        assert!(s.row_sums().iter().all(|&r| r <= 1e-15));
    }

    #[test]
    fn kron_sum_rejects_rectangular() {
        let rect = DenseMatrix::zeros(2, 3);
        let sq = DenseMatrix::identity(2);
        assert!(matches!(kron_sum(&rect, &sq), Err(Error::Dimension(_))));
        assert!(matches!(kron_sum(&sq, &rect), Err(Error::Dimension(_))));
    }

    #[test]
    fn power_sum_basics() {
        let m = DenseMatrix::from_nested(&[[-1.0, 1.0], [0.0, -3.0]]);
        assert_eq!(kron_power_sum(&m, 1, CAP).unwrap(), m);
        let scalar = DenseMatrix::from_nested(&[[-1.0]]);
        assert_eq!(kron_power_sum(&scalar, 3, CAP).unwrap(), DenseMatrix::from_nested(&[[-3.0]]));
    }

    #[test]
    fn power_sum_large_fold() {
        let t = DenseMatrix::from_nested(&[[-0.2, 0.2], [0.0, -0.4]]);
        let big = kron_power_sum(&t, 10, CAP).unwrap();
        assert_eq!((big.rows(), big.cols()), (1024, 1024));
        assert!((big.get(0, 0) - 10.0 * -0.2).abs() < 1e-12);
    }

    #[test]
    fn power_sum_respects_cap() {
        let t = DenseMatrix::from_nested(&[[-0.2, 0.2], [0.0, -0.4]]);
        match kron_power_sum(&t, 13, CAP) {
            Err(Error::Capacity { requested, cap }) => {
                assert_eq!(requested, 8192);
                assert_eq!(cap, CAP);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
        assert!(kron_power_vector(&[0.5, 0.5], 13, CAP).is_err());
    }

    #[test]
    fn power_vector_layout() {
        let v = kron_power_vector(&[0.25, 0.75], 2, CAP).unwrap();
        assert_eq!(v, vec![0.0625, 0.1875, 0.1875, 0.5625]);
    }
}
