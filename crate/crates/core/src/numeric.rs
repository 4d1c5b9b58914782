//! Small numeric helpers shared by the analytic routines.

/// Largest `n` for which binomials are evaluated with exact integer arithmetic.
pub const EXACT_BINOMIAL_MAX_N: u64 = 60;

/// Exact binomial coefficient in 128-bit arithmetic.
///
/// Returns `None` on overflow, which cannot happen for `n <= 60`.
pub fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Natural log of the binomial coefficient.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k)
        .map(|i| (((n - k + i) as f64) / (i as f64)).ln())
        .sum()
}

/// Binomial coefficient as `f64`: exact through `n = 60`, log-space beyond.
pub fn binomial(n: u64, k: u64) -> f64 {
    if n <= EXACT_BINOMIAL_MAX_N {
        binomial_exact(n, k).expect("exact binomial fits in u128 for n <= 60") as f64
    } else {
        ln_binomial(n, k).exp()
    }
}

/// Compensated (Kahan–Babuška/Neumaier) running sum.
///
/// Also tracks the sum of absolute values so callers can estimate how much
/// cancellation the result went through.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
    abs_sum: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs_sum += x.abs();
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    /// Sum of the magnitudes of every added term.
    pub fn abs_sum(&self) -> f64 {
        self.abs_sum
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_binomials() {
        assert_eq!(binomial_exact(5, 2), Some(10));
        assert_eq!(binomial_exact(10, 0), Some(1));
        assert_eq!(binomial_exact(3, 4), Some(0));
        assert_eq!(binomial_exact(60, 30), Some(118_264_581_564_861_424));
    }

    #[test]
    fn log_binomial_matches_exact() {
        for n in [10u64, 33, 60] {
            for k in 0..=n {
                let exact = binomial_exact(n, k).unwrap() as f64;
                let approx = ln_binomial(n, k).exp();
                assert!((approx - exact).abs() <= 1e-12 * exact, "C({n},{k})");
            }
        }
        // Past the exact range the log route stays finite.
        assert!((binomial(200, 2) - 19_900.0).abs() < 1e-8);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..10 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-15).abs() < 1e-28);
        assert!((acc.abs_sum() - (2.0 + 1e-15)).abs() < 1e-12);
    }
}
