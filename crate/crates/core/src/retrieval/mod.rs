//! Law and mean of the retrieval time `W_s`, the `s`-th order statistic of
//! `N` i.i.d. copies of the single-sensor waiting time `W`.
//!
//! Everything here is polynomial in `N` and works from the scalar
//! [`SurvivalForm`]; the Kronecker path in [`crate::phtype`] is the
//! exponential-cost cross-check.

mod quadrature;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{survival_form, ModelParams, SurvivalForm};
use crate::numeric::{binomial, binomial_exact, ln_binomial, CompensatedSum, EXACT_BINOMIAL_MAX_N};

/// Cancellation factor `Σ|terms| / |sum|` above which the direct closed form
/// is considered unreliable and the mean is recomputed by quadrature.
pub const CLOSED_FORM_CONDITION_LIMIT: f64 = 1e6;

/// Relative tolerance of [`expected_time_quadrature`].
pub const QUADRATURE_REL_TOL: f64 = 1e-10;

/// A network plus the number of distinct measurements a client needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetrievalQuery {
    pub params: ModelParams,
    pub samples_needed: usize,
}

impl RetrievalQuery {
    pub fn new(params: ModelParams, samples_needed: usize) -> Result<Self> {
        params.validate()?;
        if samples_needed == 0 || samples_needed > params.n_sensors {
            return Err(Error::Validation(format!(
                "samples needed s = {samples_needed} must satisfy 1 <= s <= N = {}",
                params.n_sensors
            )));
        }
        Ok(Self { params, samples_needed })
    }

    fn n(&self) -> usize {
        self.params.n_sensors
    }
}

/// `C(n, j) f^j g^{n-j}` without overflow for large `n`.
fn binomial_term(n: usize, j: usize, f: f64, g: f64) -> f64 {
    if n as u64 <= EXACT_BINOMIAL_MAX_N {
        return binomial(n as u64, j as u64) * f.powi(j as i32) * g.powi((n - j) as i32);
    }
    if (j > 0 && f == 0.0) || (j < n && g == 0.0) {
        return 0.0;
    }
    let ln_f = if j > 0 { j as f64 * f.ln() } else { 0.0 };
    let ln_g = if j < n { (n - j) as f64 * g.ln() } else { 0.0 };
    (ln_binomial(n as u64, j as u64) + ln_f + ln_g).exp()
}

fn ws_tail_sums(form: &SurvivalForm, n: usize, s: usize, t: f64) -> (f64, f64) {
    let surv = form.survival(t);
    let cdf = form.cdf(t);
    let below: CompensatedSum = (0..s).map(|j| binomial_term(n, j, cdf, surv)).collect();
    let above: CompensatedSum = (s..=n).map(|j| binomial_term(n, j, cdf, surv)).collect();
    (below.value(), above.value())
}

/// `P(W_s <= t) = Σ_{j=s}^{N} C(N,j) P(W<=t)^j P(W>t)^{N-j}`.
pub fn ws_cdf(q: &RetrievalQuery, t: f64) -> f64 {
    let form = survival_form(&q.params);
    ws_tail_sums(&form, q.n(), q.samples_needed, t).1.clamp(0.0, 1.0)
}

/// `P(W_s > t) = Σ_{j=0}^{s-1} C(N,j) P(W<=t)^j P(W>t)^{N-j}`.
pub fn ws_survival(q: &RetrievalQuery, t: f64) -> f64 {
    let form = survival_form(&q.params);
    ws_tail_sums(&form, q.n(), q.samples_needed, t).0.clamp(0.0, 1.0)
}

/// Exponent of the alternating sign in the closed form.
///
/// Expanding `(1 - S)^j S^{N-j}` gives `(-1)^{j-k}`, which is the only
/// correct choice; the `N - k` variant exists as a negative control for the
/// validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum AlternatingSign {
    #[default]
    JMinusK,
    NMinusK,
}

impl AlternatingSign {
    fn sign(self, n: usize, j: usize, k: usize) -> f64 {
        let exponent = match self {
            AlternatingSign::JMinusK => j - k,
            AlternatingSign::NMinusK => n - k,
        };
        if exponent % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// How [`closed_form_evaluation`] obtained its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClosedFormRoute {
    /// The triple binomial sum in `ω`.
    Direct,
    /// The same sum with the inner integral replaced by its `λ_e = μ/N` limit.
    EqualRateLimit,
    /// The direct sum cancelled too badly; value recomputed by quadrature.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormEvaluation {
    pub value: f64,
    pub route: ClosedFormRoute,
    /// `Σ|terms| / |value|` of the sum that was evaluated.
    pub condition: f64,
}

/// `∫ S(t)^m dt` in the equal-rate regime, `S(t) = e^{-at}(1 + ν_0 a t)`:
/// `Σ_v C(m,v) v! ν_0^v / (m^{v+1} a)`, all terms positive.
fn equal_rate_power_integral(m: usize, nu0: f64, a: f64) -> f64 {
    let mf = m as f64;
    let mut term = 1.0 / (mf * a);
    let mut acc = CompensatedSum::new();
    acc.add(term);
    for v in 1..=m {
        term *= (m - v + 1) as f64 * nu0 / mf;
        if term == 0.0 {
            break;
        }
        acc.add(term);
    }
    acc.value()
}

/// Signed log-magnitude accumulator for the large-`N` route.
fn signed_exp(ln_mag: f64, sign: f64) -> f64 {
    sign * ln_mag.exp()
}

fn ln_abs_pow(x: f64, e: usize) -> (f64, f64) {
    if e == 0 {
        (0.0, 1.0)
    } else {
        let sign = if x < 0.0 && e % 2 == 1 { -1.0 } else { 1.0 };
        (e as f64 * x.abs().ln(), sign)
    }
}

fn direct_closed_form(q: &RetrievalQuery, form: &SurvivalForm, omega: f64, sign: AlternatingSign) -> CompensatedSum {
    let n = q.n();
    let s = q.samples_needed;
    let a = form.rate_broadcast;
    let b = form.rate_harvest;
    let exact = n as u64 <= EXACT_BINOMIAL_MAX_N;
    let mut acc = CompensatedSum::new();
    for j in 0..s {
        for k in 0..=j {
            let alt = sign.sign(n, j, k);
            let m = n - k;
            for v in 0..=m {
                let denom = b * (m - v) as f64 + a * v as f64;
                let term = if exact {
                    let c = binomial_exact(n as u64, j as u64).unwrap() as f64
                        * binomial_exact(j as u64, k as u64).unwrap() as f64
                        * binomial_exact(m as u64, v as u64).unwrap() as f64;
                    alt * c * omega.powi(v as i32) * (1.0 - omega).powi((m - v) as i32) / denom
                } else {
                    let (ln_w, sg_w) = ln_abs_pow(omega, v);
                    let (ln_c, sg_c) = ln_abs_pow(1.0 - omega, m - v);
                    let ln_mag = ln_binomial(n as u64, j as u64)
                        + ln_binomial(j as u64, k as u64)
                        + ln_binomial(m as u64, v as u64)
                        + ln_w
                        + ln_c
                        - denom.ln();
                    signed_exp(ln_mag, alt * sg_w * sg_c)
                };
                acc.add(term);
            }
        }
    }
    acc
}

fn equal_rate_closed_form(q: &RetrievalQuery, form: &SurvivalForm, sign: AlternatingSign) -> CompensatedSum {
    let n = q.n();
    let mut acc = CompensatedSum::new();
    for j in 0..q.samples_needed {
        for k in 0..=j {
            let c = binomial(n as u64, j as u64) * binomial(j as u64, k as u64);
            let integral = equal_rate_power_integral(n - k, form.nu0, form.rate_broadcast);
            acc.add(sign.sign(n, j, k) * c * integral);
        }
    }
    acc
}

/// Closed-form `E[W_s]` with a chosen alternating-sign convention, reporting
/// which route produced the value.
pub fn closed_form_evaluation_with(q: &RetrievalQuery, sign: AlternatingSign) -> Result<ClosedFormEvaluation> {
    let form = survival_form(&q.params);
    let (acc, route) = match form.weight_fast {
        Some(omega) => (direct_closed_form(q, &form, omega, sign), ClosedFormRoute::Direct),
        None => (equal_rate_closed_form(q, &form, sign), ClosedFormRoute::EqualRateLimit),
    };
    let value = acc.value();
    let condition = acc.abs_sum() / value.abs();
    if !(value.is_finite() && condition.is_finite()) || condition > CLOSED_FORM_CONDITION_LIMIT {
        let value = expected_time_quadrature(q)?;
        return Ok(ClosedFormEvaluation { value, route: ClosedFormRoute::Quadrature, condition });
    }
    Ok(ClosedFormEvaluation { value, route, condition })
}

/// Closed-form `E[W_s]`:
/// `Σ_{j<s} C(N,j) Σ_{k<=j} C(j,k) (-1)^{j-k} Σ_{v<=N-k} C(N-k,v) ω^v (1-ω)^{N-k-v} / (λ_e(N-k-v) + (μ/N) v)`.
pub fn closed_form_evaluation(q: &RetrievalQuery) -> Result<ClosedFormEvaluation> {
    closed_form_evaluation_with(q, AlternatingSign::JMinusK)
}

/// Expected retrieval time from the closed form.
pub fn expected_time_closed_form(q: &RetrievalQuery) -> Result<f64> {
    Ok(closed_form_evaluation(q)?.value)
}

/// Upper integration limit `50 · max(N/μ, 1/λ_e)`.
pub fn quadrature_horizon(p: &ModelParams) -> f64 {
    50.0 * (1.0 / p.per_sensor_broadcast_rate()).max(1.0 / p.harvest_rate)
}

/// `E[W_s] = ∫_0^∞ P(W_s > t) dt` by adaptive quadrature, with the tail past
/// the horizon closed by the slowest exponential.
pub fn expected_time_quadrature(q: &RetrievalQuery) -> Result<f64> {
    let form = survival_form(&q.params);
    let n = q.n();
    let s = q.samples_needed;
    let horizon = quadrature_horizon(&q.params);
    let fastest = form.rate_broadcast.max(form.rate_harvest);
    let slowest = form.rate_broadcast.min(form.rate_harvest);

    // Doubling panels from the fastest time scale out to the horizon.
    let mut breaks = vec![0.0];
    let mut edge = 0.1 / (n as f64 * fastest);
    while edge < horizon {
        breaks.push(edge);
        edge *= 2.0;
    }
    breaks.push(horizon);

    let integrand = |t: f64| ws_tail_sums(&form, n, s, t).0;
    let (body, _) = quadrature::integrate(integrand, &breaks, QUADRATURE_REL_TOL, 0.0, 20_000)?;
    let tail = integrand(horizon) / ((n - s + 1) as f64 * slowest);
    Ok(body + tail)
}

/// Exact rational value of `C(n,k) Σ_{v=0}^{k} C(k,v) (-1)^{k-v} (n-k)/(n-v)`,
/// which equals one for every `0 <= k < n`.
pub fn identity_check(n: u64, k: u64) -> Result<BigRational> {
    if k >= n {
        return Err(Error::Validation(format!("identity needs 0 <= k < n, got k = {k}, n = {n}")));
    }
    let big_binomial = |n: u64, k: u64| -> BigInt {
        let mut acc = BigInt::one();
        for i in 0..k {
            acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
        }
        acc
    };
    let mut sum = BigRational::zero();
    for v in 0..=k {
        let term = BigRational::new(big_binomial(k, v) * BigInt::from(n - k), BigInt::from(n - v));
        if (k - v).is_multiple_of(2) {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(sum * BigRational::from_integer(big_binomial(n, k)))
}

fn check_rank(n: usize, s: usize) -> Result<()> {
    if n == 0 || s == 0 || s > n {
        return Err(Error::Validation(format!("need 1 <= s <= N, got s = {s}, N = {n}")));
    }
    Ok(())
}

fn check_rate(name: &str, rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be > 0, got {rate}")))
    }
}

/// Limit of `E[W_s]` as `λ_e → ∞`: `Σ_{j<s} 1 / (μ (1 - j/N))`.
pub fn asymptotic_harvest(n: usize, s: usize, mu: f64) -> Result<f64> {
    check_rank(n, s)?;
    check_rate("broadcast rate", mu)?;
    let nf = n as f64;
    Ok((0..s).map(|j| 1.0 / (mu * (1.0 - j as f64 / nf))).sum())
}

/// Limit of `E[W_s]` as `B → ∞`: `Σ_{j<s} 1/(λ_e (N-j))` when `λ_e < μ/N`,
/// otherwise `Σ_{j<s} 1/((μ/N)(N-j))`.
pub fn asymptotic_battery(n: usize, s: usize, lambda_e: f64, mu: f64) -> Result<f64> {
    check_rank(n, s)?;
    check_rate("harvest rate", lambda_e)?;
    check_rate("broadcast rate", mu)?;
    let per_sensor = mu / n as f64;
    let rate = if lambda_e < per_sensor { lambda_e } else { per_sensor };
    Ok((0..s).map(|j| 1.0 / (rate * (n - j) as f64)).sum())
}

/// Limit of `E[W_s]` as `N → ∞`: `s/μ`.
pub fn asymptotic_network(s: usize, mu: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::Validation("need s >= 1".into()));
    }
    check_rate("broadcast rate", mu)?;
    Ok(s as f64 / mu)
}
