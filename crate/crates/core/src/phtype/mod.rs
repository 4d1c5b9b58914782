//! Phase-type distributions and the explicit Kronecker machinery for their
//! order statistics.
//!
//! The matrix path here is exponential in the number of copies and exists to
//! cross-check the scalar formulas in [`crate::retrieval`] at small sizes.

mod expm;
mod matrix;
mod order_stats;

pub use expm::{exp_action_row, matrix_exp, UNIFORMIZATION_TOLERANCE};
pub use matrix::{kron_power_sum, kron_power_vector, kron_product, kron_sum, DenseMatrix};
pub use order_stats::{order_stat_cdf_matrix, order_stat_moment, OrderStatistics};

use crate::error::{Error, Result};

/// Default bound on `p^n` for any Kronecker-expanded state space.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Absorption time of a finite CTMC with initial vector `alpha` over the
/// transient states and sub-generator `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseType {
    alpha: Vec<f64>,
    t: DenseMatrix,
}

impl PhaseType {
    pub fn new(alpha: Vec<f64>, t: DenseMatrix) -> Result<Self> {
        if !t.is_square() {
            return Err(Error::Dimension(format!(
                "sub-generator must be square, got {}x{}",
                t.rows(),
                t.cols()
            )));
        }
        if alpha.len() != t.rows() {
            return Err(Error::Dimension(format!(
                "initial vector has {} entries for {} phases",
                alpha.len(),
                t.rows()
            )));
        }
        if alpha.iter().any(|&a| !(a.is_finite() && a >= 0.0)) {
            return Err(Error::Validation("initial probabilities must be finite and >= 0".into()));
        }
        let mass: f64 = alpha.iter().sum();
        if mass > 1.0 + 1e-12 {
            return Err(Error::Validation(format!("initial probabilities sum to {mass} > 1")));
        }
        if !t.is_finite() {
            return Err(Error::Numeric("sub-generator has non-finite entries".into()));
        }
        let p = t.rows();
        let scale = (0..p).map(|i| t.get(i, i).abs()).fold(0.0, f64::max);
        let row_sums = t.row_sums();
        for i in 0..p {
            if t.get(i, i) >= 0.0 {
                return Err(Error::Validation(format!("diagonal entry {i} must be negative")));
            }
            if (0..p).any(|j| j != i && t.get(i, j) < 0.0) {
                return Err(Error::Validation(format!("row {i} has a negative off-diagonal rate")));
            }
            if row_sums[i] > 1e-12 * scale {
                return Err(Error::Validation(format!("row {i} has positive row sum")));
            }
        }
        if !row_sums.iter().any(|&r| r < -1e-12 * scale) {
            return Err(Error::Validation("no phase has an exit to absorption".into()));
        }
        Ok(Self { alpha, t })
    }

    /// Single-phase representation of an exponential with the given rate.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(vec![1.0], DenseMatrix::from_rows(1, 1, &[-rate])?)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn sub_generator(&self) -> &DenseMatrix {
        &self.t
    }

    pub fn phases(&self) -> usize {
        self.alpha.len()
    }

    /// `P(X > t) = alpha · exp(T t) · 1`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        let v = exp_action_row(&self.alpha, &self.t, t)?;
        Ok(v.iter().sum::<f64>().clamp(0.0, 1.0))
    }

    /// `P(X <= t)`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.survival(t)?)
    }

    /// `E[X^k] = k! · alpha · (-T)^{-k} · 1`.
    pub fn moment(&self, k: u32) -> Result<f64> {
        order_stat_moment(self, 1, 1, k)
    }
}

/// CDF of a phase-type distribution at `t`.
pub fn pht_cdf(d: &PhaseType, t: f64) -> Result<f64> {
    d.cdf(t)
}
