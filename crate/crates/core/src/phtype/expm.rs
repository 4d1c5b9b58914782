//! Matrix exponentials of sub-generators by uniformization.
//!
//! With `q >= max |m_ii|`, `P = I + m/q` is non-negative and sub-stochastic,
//! and `exp(m t) = sum_k Poisson(k; q t) P^k`. Every partial sum is
//! entrywise non-negative, so truncation only ever removes probability mass.

use nalgebra::{DMatrix, DVector};

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Relative truncation tolerance for the Poisson series.
pub const UNIFORMIZATION_TOLERANCE: f64 = 1e-12;

/// Smallest per-step tolerance used when scaling and squaring.
const TOLERANCE_FLOOR: f64 = 1e-18;

fn validate_sub_generator(m: &DenseMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "matrix exponential requires a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let scale = (0..m.rows()).map(|i| m.get(i, i).abs()).fold(0.0, f64::max).max(1.0);
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if i != j && m.get(i, j) < 0.0 {
                return Err(Error::Validation(format!(
                    "off-diagonal entry ({i},{j}) = {} is negative; not a sub-generator",
                    m.get(i, j)
                )));
            }
        }
    }
    for (i, r) in m.row_sums().into_iter().enumerate() {
        if r > 1e-12 * scale {
            return Err(Error::Validation(format!(
                "row {i} sums to {r} > 0; not a sub-generator"
            )));
        }
    }
    Ok(())
}

fn uniformization_rate(m: &DenseMatrix) -> f64 {
    (0..m.rows()).map(|i| -m.get(i, i)).fold(0.0, f64::max)
}

/// Log-space Poisson weights `w_0..w_K` for mean `x`, truncated once the
/// remaining tail mass is provably below `tol`.
fn poisson_weights(x: f64, tol: f64) -> Vec<f64> {
    let mut weights = Vec::new();
    if x == 0.0 {
        weights.push(1.0);
        return weights;
    }
    let ln_x = x.ln();
    let mut ln_w = -x;
    let mut k: u64 = 0;
    loop {
        let w = ln_w.exp();
        weights.push(w);
        let next = (k + 1) as f64;
        if next > x {
            // Tail after k is at most w_k * sum_i (x / (k+1))^i.
            let ratio = x / next;
            let tail = w * ratio / (1.0 - ratio);
            if tail <= tol {
                break;
            }
        }
        ln_w += ln_x - next.ln();
        k += 1;
    }
    weights
}

/// `exp(m t)` for a sub-generator `m` and `t >= 0`.
pub fn matrix_exp(m: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    validate_sub_generator(m)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Validation(format!("time must be finite and >= 0, got {t}")));
    }
    let n = m.rows();
    let q = uniformization_rate(m);
    if q == 0.0 || t == 0.0 {
        return Ok(DenseMatrix::identity(n));
    }

    // Scale so each step has Poisson mean <= 1, then square back up.
    let qt = q * t;
    let squarings = if qt > 1.0 { qt.log2().ceil() as u32 } else { 0 };
    let step_mean = qt / 2f64.powi(squarings as i32);
    let tol = (UNIFORMIZATION_TOLERANCE / 2f64.powi(squarings as i32)).max(TOLERANCE_FLOOR);

    let p = DMatrix::identity(n, n) + m.inner() / q;
    let weights = poisson_weights(step_mean, tol);
    let mut power = DMatrix::identity(n, n);
    let mut acc = &power * weights[0];
    for &w in &weights[1..] {
        power = &power * &p;
        acc += &power * w;
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    let out = DenseMatrix::from_inner(acc);
    if !out.is_finite() {
        return Err(Error::Numeric("matrix exponential produced non-finite entries".into()));
    }
    Ok(out)
}

/// Row-vector action `alpha · exp(m t)` without forming the exponential.
pub fn exp_action_row(alpha: &[f64], m: &DenseMatrix, t: f64) -> Result<Vec<f64>> {
    validate_sub_generator(m)?;
    if alpha.len() != m.rows() {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot act on a {}x{} matrix",
            alpha.len(),
            m.rows(),
            m.cols()
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Validation(format!("time must be finite and >= 0, got {t}")));
    }
    let q = uniformization_rate(m);
    if q == 0.0 || t == 0.0 {
        return Ok(alpha.to_vec());
    }
    // Work with column vectors: (alpha P)^T = P^T alpha^T.
    let n = m.rows();
    let p_t = (DMatrix::identity(n, n) + m.inner() / q).transpose();
    let weights = poisson_weights(q * t, UNIFORMIZATION_TOLERANCE);
    let mut v = DVector::from_column_slice(alpha);
    let mut acc = &v * weights[0];
    for &w in &weights[1..] {
        v = &p_t * &v;
        if w > 0.0 {
            acc.axpy(w, &v, 1.0);
        }
    }
    if acc.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("exponential action produced non-finite entries".into()));
    }
    Ok(acc.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_gives_identity() {
        let z = DenseMatrix::zeros(3, 3);
        assert_eq!(matrix_exp(&z, 2.5).unwrap(), DenseMatrix::identity(3));
    }

    #[test]
    fn diagonal_case() {
        let d = DenseMatrix::diagonal(&[-1.0, -2.0]);
        let e = matrix_exp(&d, 1.0).unwrap();
        assert!((e.get(0, 0) - (-1f64).exp()).abs() < 1e-13);
        assert!((e.get(1, 1) - (-2f64).exp()).abs() < 1e-13);
        assert_eq!(e.get(0, 1), 0.0);
        assert_eq!(e.get(1, 0), 0.0);
    }

    #[test]
    fn two_phase_triangular_closed_form() {
        // exp of [[-a, a], [0, -b]]: diagonal e^{-a t}, e^{-b t}, and
        // off-diagonal a (e^{-a t} - e^{-b t}) / (b - a).
        let (a, b, t) = (0.2, 0.4, 1.0);
        let m = DenseMatrix::from_nested(&[[-a, a], [0.0, -b]]);
        let e = matrix_exp(&m, t).unwrap();
        let off = a * ((-a * t).exp() - (-b * t).exp()) / (b - a);
        assert!((e.get(0, 0) - (-a * t).exp()).abs() < 1e-13);
        assert!((e.get(1, 1) - (-b * t).exp()).abs() < 1e-13);
        assert!((e.get(0, 1) - off).abs() < 1e-13);
        assert!(e.get(1, 0).abs() < 1e-15);
    }

    #[test]
    fn long_horizon_stays_accurate() {
        let (a, b, t) = (3.0, 0.5, 40.0);
        let m = DenseMatrix::from_nested(&[[-a, a], [0.0, -b]]);
        let e = matrix_exp(&m, t).unwrap();
        let off = a * ((-a * t).exp() - (-b * t).exp()) / (b - a);
        assert!((e.get(0, 1) - off).abs() < 1e-12 * off.abs().max(1e-300) + 1e-20);
        assert!((e.get(1, 1) - (-b * t).exp()).abs() < 1e-12 * (-b * t).exp());
    }

    #[test]
    fn action_matches_full_exponential() {
        let m = DenseMatrix::from_nested(&[
            [-1.3, 0.4, 0.2],
            [0.1, -0.7, 0.5],
            [0.0, 0.3, -2.0],
        ]);
        let alpha = [0.2, 0.5, 0.3];
        for t in [0.0, 0.3, 2.0, 25.0] {
            let full = matrix_exp(&m, t).unwrap();
            let act = exp_action_row(&alpha, &m, t).unwrap();
            for j in 0..3 {
                let expected: f64 = (0..3).map(|i| alpha[i] * full.get(i, j)).sum();
                assert!((act[j] - expected).abs() < 1e-12, "t={t} j={j}");
            }
        }
    }

    #[test]
    fn rejects_non_generators_and_bad_time() {
        let up = DenseMatrix::from_nested(&[[-1.0, 2.0], [0.0, -1.0]]);
        assert!(matches!(matrix_exp(&up, 1.0), Err(Error::Validation(_))));
        let nan = DenseMatrix::from_nested(&[[f64::NAN]]);
        assert!(matches!(matrix_exp(&nan, 1.0), Err(Error::Numeric(_))));
        let ok = DenseMatrix::from_nested(&[[-1.0]]);
        assert!(matrix_exp(&ok, -1.0).is_err());
        assert!(matches!(
            matrix_exp(&DenseMatrix::zeros(2, 3), 1.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn poisson_weights_sum_to_one() {
        for x in [0.0, 0.5, 1.0, 30.0, 900.0] {
            let s: f64 = poisson_weights(x, 1e-12).iter().sum();
            assert!((s - 1.0).abs() < 1e-11, "x={x} sum={s}");
        }
    }
}
