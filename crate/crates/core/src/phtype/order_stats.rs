//! Order statistics of i.i.d. phase-type variables through explicit
//! Kronecker-sum representations.
//!
//! The minimum of `m` i.i.d. copies of `(alpha, T)` is phase-type with
//! representation `(alpha^{⊗m}, T^{⊕m})`; everything else is inclusion–
//! exclusion over minima.

use std::collections::BTreeMap;

use super::expm::exp_action_row;
use super::matrix::{check_cap, kron_power_vector, kron_sum, DenseMatrix};
use super::{PhaseType, DEFAULT_DIMENSION_CAP};
use crate::error::{Error, Result};
use crate::numeric::{binomial, CompensatedSum};

/// Order statistics of `n` i.i.d. copies of a phase-type distribution.
#[derive(Debug, Clone)]
pub struct OrderStatistics<'a> {
    dist: &'a PhaseType,
    n: usize,
    cap: usize,
}

/// Representation of the minimum of `m` copies.
struct MinimumRep {
    alpha: Vec<f64>,
    generator: DenseMatrix,
}

impl<'a> OrderStatistics<'a> {
    pub fn new(dist: &'a PhaseType, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("need at least one copy".into()));
        }
        Ok(Self { dist, n, cap: DEFAULT_DIMENSION_CAP })
    }

    /// Overrides the dimension cap on `p^n`.
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    fn check_rank(&self, s: usize) -> Result<()> {
        if s == 0 || s > self.n {
            return Err(Error::Validation(format!(
                "rank s = {s} must satisfy 1 <= s <= {}",
                self.n
            )));
        }
        check_cap(self.dist.phases(), self.n, self.cap)
    }

    /// Minimum representations for every copy count in `counts`, built with a
    /// single left fold of Kronecker sums.
    fn minima(&self, counts: impl IntoIterator<Item = usize>) -> Result<BTreeMap<usize, MinimumRep>> {
        let wanted: Vec<usize> = counts.into_iter().collect();
        let Some(&largest) = wanted.iter().max() else {
            return Ok(BTreeMap::new());
        };
        let t = self.dist.sub_generator();
        let mut out = BTreeMap::new();
        let mut generator = t.clone();
        for m in 1..=largest {
            if m > 1 {
                generator = kron_sum(&generator, t)?;
            }
            if wanted.contains(&m) {
                out.insert(
                    m,
                    MinimumRep {
                        alpha: kron_power_vector(self.dist.alpha(), m, self.cap)?,
                        generator: generator.clone(),
                    },
                );
            }
        }
        Ok(out)
    }

    /// `P(X_{(s)} <= t)` by inclusion–exclusion over minima.
    pub fn cdf(&self, s: usize, t: f64) -> Result<f64> {
        self.check_rank(s)?;
        let n = self.n;
        // Copy counts n - k for k = 0..s-1.
        let minima = self.minima((0..s).map(|k| n - k))?;
        let mut min_survival = BTreeMap::new();
        for (&m, rep) in &minima {
            let v = exp_action_row(&rep.alpha, &rep.generator, t)?;
            min_survival.insert(m, v.iter().sum::<f64>());
        }
        let mut acc = CompensatedSum::new();
        for j in 0..s {
            let outer = binomial(n as u64, j as u64);
            for k in 0..=j {
                let sign = if (j - k) % 2 == 0 { 1.0 } else { -1.0 };
                acc.add(outer * binomial(j as u64, k as u64) * sign * min_survival[&(n - k)]);
            }
        }
        Ok((1.0 - acc.value()).clamp(0.0, 1.0))
    }

    /// `k`-th moment of the minimum of `m` copies, via `k` LU solves with
    /// `-T^{⊕m}`. The inverse is never formed.
    fn minimum_moment(rep: &MinimumRep, k: u32) -> Result<f64> {
        let neg = -rep.generator.inner();
        let lu = neg.lu();
        let mut y = nalgebra::DVector::from_element(rep.alpha.len(), 1.0);
        for _ in 0..k {
            y = lu
                .solve(&y)
                .ok_or_else(|| Error::Numeric("singular Kronecker-sum generator".into()))?;
        }
        let factorial: f64 = (1..=k).map(f64::from).product();
        let value = factorial * rep.alpha.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>();
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Numeric("moment evaluation overflowed".into()))
        }
    }

    /// `E[X_{(s)}^k]` by the recursion
    /// `m_s = m_{s-1} + sum_{j=1}^{s} (-1)^{j-1} C(n-s+j, j-1) L_{n-s+j}`
    /// with `L_j = C(n, j) E[min of j copies ^ k]` and `m_0 = 0`.
    pub fn moment(&self, s: usize, k: u32) -> Result<f64> {
        self.check_rank(s)?;
        if k == 0 {
            return Err(Error::Validation("moment order must be >= 1".into()));
        }
        let n = self.n;
        let minima = self.minima((n + 1 - s)..=n)?;
        let mut l = BTreeMap::new();
        for (&j, rep) in &minima {
            l.insert(j, binomial(n as u64, j as u64) * Self::minimum_moment(rep, k)?);
        }
        let mut m_prev = 0.0;
        for rank in 1..=s {
            let mut acc = CompensatedSum::new();
            acc.add(m_prev);
            for j in 1..=rank {
                let sign = if (j - 1) % 2 == 0 { 1.0 } else { -1.0 };
                let idx = n - rank + j;
                acc.add(sign * binomial(idx as u64, (j - 1) as u64) * l[&idx]);
            }
            m_prev = acc.value();
        }
        Ok(m_prev)
    }
}

/// CDF of the `s`-th order statistic of `n` i.i.d. copies of `d`.
pub fn order_stat_cdf_matrix(d: &PhaseType, n: usize, s: usize, t: f64) -> Result<f64> {
    OrderStatistics::new(d, n)?.cdf(s, t)
}

/// `k`-th moment of the `s`-th order statistic of `n` i.i.d. copies of `d`.
pub fn order_stat_moment(d: &PhaseType, n: usize, s: usize, k: u32) -> Result<f64> {
    OrderStatistics::new(d, n)?.moment(s, k)
}
