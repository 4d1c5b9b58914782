//! Network parameters, the stationary battery law, and the single-sensor
//! waiting time `W`.
//!
//! Each sensor's battery is a birth–death chain on `{0, ..., B}` with births
//! at `λ_e` and deaths at `μ/N`. Starting from stationarity, the time `W` to
//! the sensor's next broadcast is phase-type on two transient phases: "empty"
//! (left by harvesting at `λ_e`) and "has energy" (left by broadcasting at
//! `μ/N`), the latter pooling battery levels `1..=B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::phtype::{DenseMatrix, PhaseType};

/// Relative gap below which `λ_e` and `μ/N` are treated as equal.
pub const EQUAL_RATE_EPSILON: f64 = 1e-9;

/// Parameters `(N, B, λ_e, μ, λ_a)` of the sensor network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_sensors: usize,
    pub battery_cap: usize,
    pub harvest_rate: f64,
    pub broadcast_rate: f64,
    /// Client arrival rate. Never enters the law of `W_s`; only the
    /// simulator's Poisson arrival mode reads it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_arrival_rate: Option<f64>,
}

impl ModelParams {
    pub fn new(n_sensors: usize, battery_cap: usize, harvest_rate: f64, broadcast_rate: f64) -> Result<Self> {
        let p = Self { n_sensors, battery_cap, harvest_rate, broadcast_rate, client_arrival_rate: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_arrival_rate(mut self, rate: f64) -> Result<Self> {
        self.client_arrival_rate = Some(rate);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sensors == 0 {
            return Err(Error::Validation("network needs at least one sensor (N >= 1)".into()));
        }
        if self.battery_cap == 0 {
            return Err(Error::Validation("battery capacity must be at least 1 (B >= 1)".into()));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.harvest_rate) {
            return Err(Error::Validation(format!("harvest rate must be > 0, got {}", self.harvest_rate)));
        }
        if !positive(self.broadcast_rate) {
            return Err(Error::Validation(format!(
                "broadcast rate must be > 0, got {}",
                self.broadcast_rate
            )));
        }
        if let Some(rate) = self.client_arrival_rate {
            if !positive(rate) {
                return Err(Error::Validation(format!("client arrival rate must be > 0, got {rate}")));
            }
        }
        Ok(())
    }

    /// Per-sensor broadcast rate `μ/N`.
    pub fn per_sensor_broadcast_rate(&self) -> f64 {
        self.broadcast_rate / self.n_sensors as f64
    }

    /// Birth/death ratio `λ_e N / μ` of the battery chain.
    pub fn load_ratio(&self) -> f64 {
        self.harvest_rate / self.per_sensor_broadcast_rate()
    }

    /// True when `|λ_e - μ/N| <= ε · max(λ_e, μ/N)`.
    pub fn is_equal_rate(&self) -> bool {
        let a = self.per_sensor_broadcast_rate();
        let b = self.harvest_rate;
        (a - b).abs() <= EQUAL_RATE_EPSILON * a.max(b)
    }
}

/// Noise variance and reliability threshold of the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationSpec {
    pub noise_variance: f64,
    pub reliability_threshold: f64,
}

impl EstimationSpec {
    pub fn new(noise_variance: f64, reliability_threshold: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(noise_variance) || !ok(reliability_threshold) {
            return Err(Error::Validation(format!(
                "noise variance and threshold must be > 0, got {noise_variance} and {reliability_threshold}"
            )));
        }
        Ok(Self { noise_variance, reliability_threshold })
    }
}

/// Distinct measurements needed for the sample mean to have variance below
/// the threshold: `s = ⌈σ²/H⌉`, at least 1.
pub fn required_samples(e: &EstimationSpec) -> usize {
    let ratio = e.noise_variance / e.reliability_threshold;
    let nearest = ratio.round();
    // Absorb floating-point noise such as 1.1 / 0.1 = 11.000000000000002.
    let s = if (ratio - nearest).abs() <= 1e-12 * nearest.max(1.0) { nearest } else { ratio.ceil() };
    (s as usize).max(1)
}

/// [`required_samples`], rejecting `s > N`.
pub fn required_samples_for(e: &EstimationSpec, p: &ModelParams) -> Result<usize> {
    let s = required_samples(e);
    if s > p.n_sensors {
        return Err(Error::Validation(format!(
            "reliable estimate needs s = {s} distinct sensors but the network has N = {}",
            p.n_sensors
        )));
    }
    Ok(s)
}

/// Stationary battery distribution `ν(0..=B)` of a single sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub probs: Vec<f64>,
}

impl SteadyState {
    /// Probability that the battery is empty.
    pub fn nu0(&self) -> f64 {
        self.probs[0]
    }

    pub fn levels(&self) -> usize {
        self.probs.len()
    }

    /// Total-variation distance `½ Σ |p_i - q_i|`.
    pub fn tv_distance(&self, other: &SteadyState) -> Result<f64> {
        if self.probs.len() != other.probs.len() {
            return Err(Error::Dimension(format!(
                "distributions over {} and {} levels",
                self.probs.len(),
                other.probs.len()
            )));
        }
        Ok(0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }
}

/// `ν(i) = ν_0 (λ_e N/μ)^i`, normalised.
///
/// Weights are scaled relative to the most likely level so that large
/// ratios and large `B` neither overflow nor underflow.
pub fn steady_state(p: &ModelParams) -> SteadyState {
    let levels = p.battery_cap + 1;
    if p.is_equal_rate() {
        return SteadyState { probs: vec![1.0 / levels as f64; levels] };
    }
    let r = p.load_ratio();
    let weights: Vec<f64> = if r < 1.0 {
        (0..levels).map(|i| r.powi(i as i32)).collect()
    } else {
        let inv = 1.0 / r;
        (0..levels).map(|i| inv.powi((p.battery_cap - i) as i32)).collect()
    };
    let total: CompensatedSum = weights.iter().copied().collect();
    let total = total.value();
    SteadyState { probs: weights.into_iter().map(|w| w / total).collect() }
}

/// Two-phase representation `(α, T)` of `W`.
pub fn w_phase_type(p: &ModelParams) -> PhaseType {
    let nu0 = steady_state(p).nu0();
    let harvest = p.harvest_rate;
    let broadcast = p.per_sensor_broadcast_rate();
    let t = DenseMatrix::from_nested(&[[-harvest, harvest], [0.0, -broadcast]]);
    PhaseType::new(vec![nu0, 1.0 - nu0], t).expect("validated parameters give a valid representation")
}

/// `P(W > t)` written as `ω e^{-(μ/N) t} + (1 - ω) e^{-λ_e t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalForm {
    /// Mixture weight `ω = 1 - ν_0 (μ/N) / (μ/N - λ_e)`; a signed weight,
    /// never clamped. `None` in the equal-rate regime where it is undefined.
    pub weight_fast: Option<f64>,
    /// `μ/N`.
    pub rate_broadcast: f64,
    /// `λ_e`.
    pub rate_harvest: f64,
    pub equal_rate: bool,
    /// Empty-battery probability `ν_0`, needed by the equal-rate limit.
    pub nu0: f64,
}

/// `φ(x) = (1 - e^{-x}) / x` with `φ(0) = 1`.
fn one_minus_exp_over(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

impl SurvivalForm {
    /// `P(W > t)`.
    ///
    /// Evaluated as `e^{-at} + ν_0 a t e^{-min(a,b) t} φ(|a-b| t)` with
    /// `a = μ/N`, `b = λ_e`, which is algebraically the two-exponential form
    /// but does not cancel when `a ≈ b`. In the equal-rate regime this is
    /// `e^{-at} (1 + ν_0 a t)`.
    pub fn survival(&self, t: f64) -> f64 {
        let a = self.rate_broadcast;
        if self.equal_rate {
            return (-a * t).exp() * (1.0 + self.nu0 * a * t);
        }
        let b = self.rate_harvest;
        let lo = a.min(b);
        (-a * t).exp() + self.nu0 * a * t * (-lo * t).exp() * one_minus_exp_over((a - b).abs() * t)
    }

    /// `P(W <= t)`, accurate for small `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        let a = self.rate_broadcast;
        let hazard = if self.equal_rate {
            self.nu0 * a * t * (-a * t).exp()
        } else {
            let lo = a.min(self.rate_harvest);
            self.nu0 * a * t * (-lo * t).exp() * one_minus_exp_over((a - self.rate_harvest).abs() * t)
        };
        (-(-a * t).exp_m1() - hazard).clamp(0.0, 1.0)
    }

    /// Mean of `W`: `N/μ + ν_0/λ_e`.
    pub fn mean(&self) -> f64 {
        1.0 / self.rate_broadcast + self.nu0 / self.rate_harvest
    }
}

pub fn survival_form(p: &ModelParams) -> SurvivalForm {
    let nu0 = steady_state(p).nu0();
    let a = p.per_sensor_broadcast_rate();
    let b = p.harvest_rate;
    let equal_rate = p.is_equal_rate();
    let weight_fast = (!equal_rate).then(|| 1.0 - nu0 * a / (a - b));
    SurvivalForm { weight_fast, rate_broadcast: a, rate_harvest: b, equal_rate, nu0 }
}

/// `P(W > t)` for a sensor observed in steady state.
pub fn w_survival(p: &ModelParams, t: f64) -> f64 {
    survival_form(p).survival(t)
}
