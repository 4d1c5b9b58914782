//! Globally adaptive Gauss–Kronrod (7/15) integration over a set of panels.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Segment { a, b, value: kronrod * half, error: ((kronrod - gauss) * half).abs() }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, refining the segment with
/// the largest error estimate until the total estimate is below
/// `max(abs_tol, rel_tol · |I|)`.
pub(crate) fn integrate<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<(f64, f64)> {
    let mut segments: Vec<Segment> =
        breaks.windows(2).map(|w| gauss_kronrod(&f, w[0], w[1])).collect();
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::Numeric("integrand produced non-finite values".into()));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok((value, error));
        }
        if segments.len() >= max_segments {
            return Err(Error::Numeric(format!(
                "quadrature did not converge: achieved relative error estimate {:.3e} \
                 (target {rel_tol:.1e}) after {} segments",
                error / value.abs().max(f64::MIN_POSITIVE),
                segments.len()
            )));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        segments.push(gauss_kronrod(&f, seg.a, mid));
        segments.push(gauss_kronrod(&f, mid, seg.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate(|x| x.powi(5) - 2.0 * x, &[0.0, 2.0], 1e-12, 0.0, 100).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn exponential_over_panels() {
        let breaks: Vec<f64> = (0..12).map(|i| if i == 0 { 0.0 } else { 0.1 * 2f64.powi(i) }).collect();
        let (v, _) = integrate(|x| (-0.3 * x).exp(), &breaks, 1e-12, 0.0, 1000).unwrap();
        let exact = (1.0 - (-0.3 * breaks[11]).exp()) / 0.3;
        assert!((v - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn reports_non_convergence() {
        let err = integrate(|x: f64| (1.0 / x).sin(), &[1e-6, 1.0], 1e-14, 0.0, 4).unwrap_err();
        assert!(matches!(err, Error::Numeric(msg) if msg.contains("achieved")));
    }
}
