//! Discrete-event Monte Carlo simulation of the sensor network.
//!
//! Every sensor carries two exponential clocks: harvesting at `λ_e` while its
//! battery is below `B`, and broadcasting at `μ/N` while it holds energy.
//! Clocks live on a binary-heap event queue. A harvest clock is only armed
//! while the battery has room; by memorylessness this has the same law as a
//! clock that keeps ticking and whose harvests at a full battery are
//! discarded. Exact-time ties are broken by insertion order.
//!
//! Each replication is an independent trajectory driven by its own ChaCha8
//! stream, selected by replicate index, so results do not depend on how the
//! replications are scheduled across threads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{steady_state, ModelParams, SteadyState};
use crate::retrieval::{ws_cdf, RetrievalQuery};

/// Stream index reserved for occupancy runs, disjoint from replicate streams
/// in practice.
const OCCUPANCY_STREAM: u64 = u64::MAX;

/// `z` for a two-sided 95% normal interval.
const Z_95: f64 = 1.959_963_984_540_054;

/// How the client enters the network after warm-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalMode {
    /// Inject the client at the end of warm-up.
    #[default]
    PastaInject,
    /// Inject at the first arrival of a Poisson(λ_a) process started at the
    /// end of warm-up.
    PoissonArrivals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub samples_needed: usize,
    pub replications: usize,
    pub warmup_time: f64,
    pub seed: u64,
    pub arrival_mode: ArrivalMode,
}

/// Default warm-up `100 · max(N/μ, 1/λ_e)`.
pub fn default_warmup(p: &ModelParams) -> f64 {
    100.0 * (1.0 / p.per_sensor_broadcast_rate()).max(1.0 / p.harvest_rate)
}

impl SimConfig {
    /// Config with the default warm-up and PASTA injection.
    pub fn new(params: ModelParams, samples_needed: usize, replications: usize, seed: u64) -> Result<Self> {
        let c = Self {
            params,
            samples_needed,
            replications,
            warmup_time: default_warmup(&params),
            seed,
            arrival_mode: ArrivalMode::PastaInject,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_arrival_mode(mut self, mode: ArrivalMode) -> Result<Self> {
        self.arrival_mode = mode;
        self.validate()?;
        Ok(self)
    }

    pub fn with_warmup(mut self, warmup_time: f64) -> Result<Self> {
        self.warmup_time = warmup_time;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.samples_needed == 0 || self.samples_needed > self.params.n_sensors {
            return Err(Error::Validation(format!(
                "samples needed s = {} must satisfy 1 <= s <= N = {}",
                self.samples_needed, self.params.n_sensors
            )));
        }
        if self.replications == 0 {
            return Err(Error::Validation("need at least one replication".into()));
        }
        if !(self.warmup_time.is_finite() && self.warmup_time >= 0.0) {
            return Err(Error::Validation(format!("warm-up must be >= 0, got {}", self.warmup_time)));
        }
        if self.arrival_mode == ArrivalMode::PoissonArrivals && self.params.client_arrival_rate.is_none() {
            return Err(Error::Validation("Poisson arrivals need a client arrival rate".into()));
        }
        Ok(())
    }
}

/// Battery levels of every sensor and the simulation clock.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub batteries: Vec<u32>,
    pub clock: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Harvest,
    Broadcast,
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    seq: u64,
    sensor: u32,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed so the max-heap pops the earliest event, then the earliest
    // inserted among equal times.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Network {
    state: NetworkState,
    capacity: u32,
    harvest_rate: f64,
    broadcast_rate: f64,
    queue: BinaryHeap<Scheduled>,
    next_seq: u64,
    rng: ChaCha8Rng,
}

impl Network {
    /// All batteries start empty.
    fn new(p: &ModelParams, rng: ChaCha8Rng) -> Self {
        let mut net = Self {
            state: NetworkState { batteries: vec![0; p.n_sensors], clock: 0.0 },
            capacity: p.battery_cap as u32,
            harvest_rate: p.harvest_rate,
            broadcast_rate: p.per_sensor_broadcast_rate(),
            queue: BinaryHeap::with_capacity(2 * p.n_sensors),
            next_seq: 0,
            rng,
        };
        for sensor in 0..p.n_sensors as u32 {
            net.schedule(sensor, EventKind::Harvest);
        }
        net
    }

    fn schedule(&mut self, sensor: u32, kind: EventKind) {
        let rate = match kind {
            EventKind::Harvest => self.harvest_rate,
            EventKind::Broadcast => self.broadcast_rate,
        };
        let delay: f64 = self.rng.sample::<f64, _>(Exp1) / rate;
        self.queue.push(Scheduled { time: self.state.clock + delay, seq: self.next_seq, sensor, kind });
        self.next_seq += 1;
    }

    fn next_time(&self) -> f64 {
        self.queue.peek().map_or(f64::INFINITY, |e| e.time)
    }

    /// Fires the next event and returns it.
    fn step(&mut self) -> Scheduled {
        let ev = self.queue.pop().expect("every sensor always has an armed clock");
        self.state.clock = ev.time;
        let idx = ev.sensor as usize;
        let level = self.state.batteries[idx];
        match ev.kind {
            EventKind::Harvest => {
                let level = level + 1;
                self.state.batteries[idx] = level;
                if level == 1 {
                    self.schedule(ev.sensor, EventKind::Broadcast);
                }
                if level < self.capacity {
                    self.schedule(ev.sensor, EventKind::Harvest);
                }
            }
            EventKind::Broadcast => {
                assert!(level > 0, "broadcast from an empty battery");
                let level = level - 1;
                self.state.batteries[idx] = level;
                if level + 1 == self.capacity {
                    self.schedule(ev.sensor, EventKind::Harvest);
                }
                if level > 0 {
                    self.schedule(ev.sensor, EventKind::Broadcast);
                }
            }
        }
        assert!(self.state.batteries[idx] <= self.capacity, "battery above capacity");
        ev
    }

    /// Processes every event up to `t` and sets the clock to `t`.
    fn advance_to(&mut self, t: f64) {
        while self.next_time() <= t {
            self.step();
        }
        self.state.clock = t;
    }
}

fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Time from injection until `s` distinct sensors have broadcast.
fn run_replication(c: &SimConfig, index: u64) -> f64 {
    let mut rng = replicate_rng(c.seed, index);
    let delay = match c.arrival_mode {
        ArrivalMode::PastaInject => 0.0,
        ArrivalMode::PoissonArrivals => {
            let rate = c.params.client_arrival_rate.expect("validated");
            rng.sample::<f64, _>(Exp1) / rate
        }
    };
    let mut net = Network::new(&c.params, rng);
    let inject = c.warmup_time + delay;
    net.advance_to(inject);

    let mut heard = vec![false; c.params.n_sensors];
    let mut distinct = 0;
    loop {
        let ev = net.step();
        if ev.kind == EventKind::Broadcast && !heard[ev.sensor as usize] {
            heard[ev.sensor as usize] = true;
            distinct += 1;
            if distinct == c.samples_needed {
                return ev.time - inject;
            }
        }
    }
}

/// Sorted sample with the right-continuous step CDF.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let below = self.sorted.partition_point(|&x| x <= t);
        below as f64 / self.sorted.len() as f64
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

/// Replicate retrieval times and their summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub config: SimConfig,
    /// Retrieval times indexed by replicate.
    pub ws_samples: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    /// Normal-approximation half-width `1.96 · sd / √n`.
    pub ci_halfwidth_95: f64,
    pub empirical_cdf: EmpiricalCdf,
    pub seed_used: u64,
    pub replications: usize,
}

/// JSON-friendly summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub ci_halfwidth_95: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub replications: usize,
    pub config: SimConfig,
}

impl SimResult {
    /// Summarises an arbitrary sample as if produced under `config`.
    pub fn from_samples(config: SimConfig, ws_samples: Vec<f64>) -> Result<Self> {
        if ws_samples.is_empty() {
            return Err(Error::Validation("no samples".into()));
        }
        if ws_samples.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::Validation("retrieval times must be finite and >= 0".into()));
        }
        let n = ws_samples.len() as f64;
        let mean = ws_samples.iter().sum::<f64>() / n;
        let var = if ws_samples.len() > 1 {
            ws_samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        Ok(Self {
            config,
            mean,
            std_dev,
            ci_halfwidth_95: Z_95 * std_dev / n.sqrt(),
            empirical_cdf: EmpiricalCdf::new(ws_samples.clone()),
            seed_used: config.seed,
            replications: ws_samples.len(),
            ws_samples,
        })
    }

    pub fn ci_95(&self) -> (f64, f64) {
        (self.mean - self.ci_halfwidth_95, self.mean + self.ci_halfwidth_95)
    }

    pub fn ci_contains(&self, value: f64) -> bool {
        let (lo, hi) = self.ci_95();
        lo <= value && value <= hi
    }

    pub fn summary(&self) -> SimSummary {
        let (ci_low, ci_high) = self.ci_95();
        SimSummary {
            mean: self.mean,
            std_dev: self.std_dev,
            ci_halfwidth_95: self.ci_halfwidth_95,
            ci_low,
            ci_high,
            seed: self.seed_used,
            replications: self.replications,
            config: self.config,
        }
    }

    /// One `replicate_index,ws_time` row per replicate, after a header.
    pub fn write_replicates_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "replicate_index,ws_time")?;
        for (i, t) in self.ws_samples.iter().enumerate() {
            writeln!(out, "{i},{t}")?;
        }
        Ok(())
    }
}

/// Runs `c.replications` independent replications.
pub fn simulate(c: &SimConfig) -> Result<SimResult> {
    c.validate()?;
    let samples: Vec<f64> = (0..c.replications as u64)
        .into_par_iter()
        .map(|i| run_replication(c, i))
        .collect();
    SimResult::from_samples(*c, samples)
}

/// Kolmogorov–Smirnov statistic of a sorted sample against `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// KS distance between a simulated sample and the analytic law of `W_s`.
///
/// The network parameters must match; `q.samples_needed` is the hypothesis
/// under test and may differ from the simulated one.
pub fn empirical_cdf_distance(r: &SimResult, q: &RetrievalQuery) -> Result<f64> {
    let a = &r.config.params;
    let b = &q.params;
    let same = a.n_sensors == b.n_sensors
        && a.battery_cap == b.battery_cap
        && a.harvest_rate == b.harvest_rate
        && a.broadcast_rate == b.broadcast_rate;
    if !same {
        return Err(Error::Validation(format!(
            "simulation parameters {a:?} do not match query parameters {b:?}"
        )));
    }
    Ok(ks_statistic(r.empirical_cdf.sorted(), |t| ws_cdf(q, t)))
}

/// Time-averaged battery occupancy of a tagged sensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalOccupancy {
    pub state: SteadyState,
    /// Total-variation distance to the analytic stationary law.
    pub tv_distance: f64,
    pub horizon: f64,
}

/// Fraction of `[warmup, warmup + horizon]` that sensor 0 spends at each
/// battery level.
pub fn steady_state_empirical(c: &SimConfig, horizon: f64) -> Result<EmpiricalOccupancy> {
    c.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Validation(format!("horizon must be > 0, got {horizon}")));
    }
    let mut net = Network::new(&c.params, replicate_rng(c.seed, OCCUPANCY_STREAM));
    net.advance_to(c.warmup_time);
    let end = c.warmup_time + horizon;
    let mut occupancy = vec![0.0; c.params.battery_cap + 1];
    let mut last = net.state.clock;
    while net.next_time() <= end {
        let level = net.state.batteries[0] as usize;
        let ev = net.step();
        occupancy[level] += ev.time - last;
        last = ev.time;
    }
    occupancy[net.state.batteries[0] as usize] += end - last;
    let state = SteadyState { probs: occupancy.into_iter().map(|x| x / horizon).collect() };
    let tv_distance = state.tv_distance(&steady_state(&c.params))?;
    Ok(EmpiricalOccupancy { state, tv_distance, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, b: usize, lambda_e: f64, mu: f64, s: usize, reps: usize) -> SimConfig {
        SimConfig::new(ModelParams::new(n, b, lambda_e, mu).unwrap(), s, reps, 7).unwrap()
    }

    #[test]
    fn queue_orders_by_time_then_insertion() {
        let mut heap = BinaryHeap::new();
        let ev = |time, seq| Scheduled { time, seq, sensor: 0, kind: EventKind::Harvest };
        heap.push(ev(2.0, 0));
        heap.push(ev(1.0, 2));
        heap.push(ev(1.0, 1));
        let order: Vec<u64> = std::iter::from_fn(|| heap.pop()).map(|e| e.seq).collect();
        assert_eq!(order, vec![1, 2, 0]);
    }

    #[test]
    fn batteries_stay_in_bounds() {
        let p = ModelParams::new(4, 2, 0.5, 0.4).unwrap();
        let mut net = Network::new(&p, replicate_rng(1, 0));
        for _ in 0..20_000 {
            net.step();
            assert!(net.state.batteries.iter().all(|&b| b <= 2));
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let c = config(5, 2, 0.1, 0.4, 3, 200);
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        assert_eq!(a.ws_samples, b.ws_samples);
        let other = SimConfig { seed: 8, ..c };
        assert_ne!(simulate(&other).unwrap().ws_samples, a.ws_samples);
    }

    #[test]
    fn validation_errors() {
        let p = ModelParams::new(3, 1, 0.2, 0.4).unwrap();
        assert!(SimConfig::new(p, 4, 10, 0).is_err());
        assert!(SimConfig::new(p, 0, 10, 0).is_err());
        assert!(SimConfig::new(p, 1, 0, 0).is_err());
        let c = SimConfig::new(p, 1, 10, 0).unwrap();
        assert!(c.with_arrival_mode(ArrivalMode::PoissonArrivals).is_err());
        assert!(c.with_warmup(-1.0).is_err());
        assert!(steady_state_empirical(&c, 0.0).is_err());
    }

    #[test]
    fn summary_statistics() {
        let c = config(2, 1, 0.2, 0.4, 1, 1);
        let r = SimResult::from_samples(c, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_eq!(r.mean, 3.0);
        assert!((r.std_dev - (14.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((r.ci_halfwidth_95 - Z_95 * r.std_dev / 2.0).abs() < 1e-15);
        assert_eq!(r.empirical_cdf.eval(2.5), 0.5);
        assert_eq!(r.empirical_cdf.eval(6.0), 1.0);
        assert!(SimResult::from_samples(c, vec![-1.0]).is_err());
        let mut csv = Vec::new();
        r.write_replicates_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "replicate_index,ws_time\n0,1\n1,2\n2,3\n3,6\n");
    }

    #[test]
    fn ks_of_perfect_grid() {
        let sorted: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_statistic(&sorted, |x| x.clamp(0.0, 1.0)) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn parameter_mismatch_is_rejected() {
        let c = config(4, 1, 0.2, 0.4, 2, 50);
        let r = simulate(&c).unwrap();
        let q = RetrievalQuery::new(ModelParams::new(4, 2, 0.2, 0.4).unwrap(), 2).unwrap();
        assert!(matches!(empirical_cdf_distance(&r, &q), Err(Error::Validation(_))));
    }
}
