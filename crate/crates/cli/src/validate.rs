//! The cross-check suite behind `ewsn validate`.

use std::time::Instant;

use ewsn::model::{steady_state, survival_form, w_phase_type, w_survival, ModelParams};
use ewsn::phtype::{order_stat_cdf_matrix, order_stat_moment, pht_cdf};
use ewsn::retrieval::{
    asymptotic_battery, asymptotic_harvest, asymptotic_network, closed_form_evaluation_with,
    expected_time_quadrature, identity_check, ws_cdf, AlternatingSign, RetrievalQuery,
};
use ewsn::sim::{empirical_cdf_distance, simulate, steady_state_empirical, ArrivalMode, SimConfig, SimResult};
use num_rational::BigRational;
use num_traits::One;

use crate::format::format_sig;

/// Replications for every simulation check.
pub const VALIDATE_REPS: usize = 100_000;
/// Horizon of the battery-occupancy check.
pub const OCCUPANCY_HORIZON: f64 = 2.0e5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    /// Skip the simulation checks.
    pub quick: bool,
    pub seed: u64,
    /// Sign convention used by the closed form (a wrong one is the
    /// negative control).
    pub sign: AlternatingSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {:<24} {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

type CheckResult = Result<String, String>;

fn e3(x: f64) -> String {
    format_sig(x, 3)
}

fn params(n: usize, b: usize, lambda_e: f64, mu: f64) -> Result<ModelParams, String> {
    ModelParams::new(n, b, lambda_e, mu).map_err(|e| e.to_string())
}

fn query(n: usize, b: usize, lambda_e: f64, mu: f64, s: usize) -> Result<RetrievalQuery, String> {
    RetrievalQuery::new(params(n, b, lambda_e, mu)?, s).map_err(|e| e.to_string())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ensure(ok: bool, detail: String) -> CheckResult {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Suite {
    opts: ValidateOptions,
}

impl Suite {
    fn closed(&self, q: &RetrievalQuery) -> Result<f64, String> {
        closed_form_evaluation_with(q, self.opts.sign).map(|ev| ev.value).map_err(|e| e.to_string())
    }

    fn steady_state(&self) -> CheckResult {
        let nu = steady_state(&params(1, 1, 0.2, 0.4)?);
        let two_state = (nu.probs[0] - 2.0 / 3.0).abs().max((nu.probs[1] - 1.0 / 3.0).abs());
        let uniform = steady_state(&params(10, 3, 0.04, 0.4)?);
        let flat = uniform.probs.iter().map(|x| (x - 0.25).abs()).fold(0.0, f64::max);
        let mut balance: f64 = 0.0;
        for (n, b, l) in [(5, 6, 0.03), (10, 4, 0.2), (20, 12, 0.05)] {
            let p = params(n, b, l, 0.4)?;
            let nu = steady_state(&p);
            for i in 0..b {
                let up = nu.probs[i] * l;
                let down = nu.probs[i + 1] * p.per_sensor_broadcast_rate();
                balance = balance.max(rel(up, down));
            }
        }
        let worst = two_state.max(flat).max(balance);
        ensure(worst < 1e-12, format!("max deviation {}", e3(worst)))
    }

    fn single_sensor_law(&self) -> CheckResult {
        let mut worst: f64 = 0.0;
        for n in 1..=6 {
            for b in [1, 3] {
                for l in [0.03, 0.2] {
                    let p = params(n, b, l, 0.4)?;
                    let d = w_phase_type(&p);
                    for t in [0.5, 2.0, 10.0, 50.0] {
                        let matrix = pht_cdf(&d, t).map_err(|e| e.to_string())?;
                        worst = worst.max((1.0 - w_survival(&p, t) - matrix).abs());
                    }
                }
            }
        }
        let mean = survival_form(&params(1, 1, 0.2, 0.4)?).mean();
        let mean_err = (mean - 35.0 / 6.0).abs();
        ensure(
            worst < 1e-10 && mean_err < 1e-12,
            format!("scalar vs matrix {}, mean error {}", e3(worst), e3(mean_err)),
        )
    }

    fn order_statistic_cdf(&self) -> CheckResult {
        let mut worst: f64 = 0.0;
        for n in 1..=6 {
            for s in 1..=n {
                let q = query(n, 2, 0.1, 0.4, s)?;
                let d = w_phase_type(&q.params);
                for t in [1.0, 5.0, 20.0] {
                    let matrix = order_stat_cdf_matrix(&d, n, s, t).map_err(|e| e.to_string())?;
                    worst = worst.max((ws_cdf(&q, t) - matrix).abs());
                }
            }
        }
        ensure(worst < 1e-9, format!("binomial tail vs Kronecker {}", e3(worst)))
    }

    fn oracle_triangle(&self) -> CheckResult {
        let mut worst: f64 = 0.0;
        let mut points = 0;
        for n in [2, 4, 6] {
            let mut ranks = vec![1, 2, n];
            ranks.dedup();
            for s in ranks {
                for b in [1, 3] {
                    for l in [0.03, 0.2] {
                        let q = query(n, b, l, 0.4, s)?;
                        let closed = self.closed(&q)?;
                        let quad = expected_time_quadrature(&q).map_err(|e| e.to_string())?;
                        let matrix =
                            order_stat_moment(&w_phase_type(&q.params), n, s, 1).map_err(|e| e.to_string())?;
                        worst = worst.max(rel(closed, quad)).max(rel(closed, matrix)).max(rel(quad, matrix));
                        points += 1;
                    }
                }
            }
        }
        ensure(worst < 1e-7, format!("max pairwise rel diff {} over {points} points", e3(worst)))
    }

    fn identity(&self) -> CheckResult {
        let one = BigRational::one();
        let mut cases = 0;
        for n in 1..=30u64 {
            for k in 0..n {
                if identity_check(n, k).map_err(|e| e.to_string())? != one {
                    return Err(format!("fails at n={n} k={k}"));
                }
                cases += 1;
            }
        }
        Ok(format!("{cases} cases exact"))
    }

    /// Relative errors toward `target` must shrink and end below `tol`.
    fn converges(values: &[f64], target: f64, tol: f64) -> CheckResult {
        let errors: Vec<f64> = values.iter().map(|&v| rel(v, target)).collect();
        let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
        let last = *errors.last().expect("non-empty");
        ensure(
            monotone && last < tol,
            format!("target {}, final rel error {}, monotone {monotone}", format_sig(target, 6), e3(last)),
        )
    }

    fn asymptotic_harvest(&self) -> CheckResult {
        let values = [1.0, 10.0, 100.0]
            .iter()
            .map(|&l| self.closed(&query(10, 4, l, 0.4, 2)?))
            .collect::<Result<Vec<_>, _>>()?;
        let target = asymptotic_harvest(10, 2, 0.4).map_err(|e| e.to_string())?;
        Self::converges(&values, target, 0.01)
    }

    fn asymptotic_battery(&self) -> CheckResult {
        let mut details = Vec::new();
        for l in [0.03, 0.2] {
            let values = (1..=64)
                .map(|b| self.closed(&query(10, b, l, 0.4, 2)?))
                .collect::<Result<Vec<_>, _>>()?;
            let target = asymptotic_battery(10, 2, l, 0.4).map_err(|e| e.to_string())?;
            details.push(Self::converges(&values, target, 0.01)?);
        }
        Ok(details.join("; "))
    }

    fn asymptotic_network(&self) -> CheckResult {
        let values = [20, 50, 100, 200]
            .iter()
            .map(|&n| expected_time_quadrature(&query(n, 4, 0.2, 0.4, 2)?).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        let target = asymptotic_network(2, 0.4).map_err(|e| e.to_string())?;
        Self::converges(&values, target, 0.02)
    }

    fn equal_rate_continuity(&self) -> CheckResult {
        let lambda = 0.4 / 10.0;
        let centre = expected_time_quadrature(&query(10, 4, lambda, 0.4, 2)?).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for factor in [1.0 - 1e-6, 1.0 + 1e-6] {
            let q = query(10, 4, lambda * factor, 0.4, 2)?;
            worst = worst.max(rel(expected_time_quadrature(&q).map_err(|e| e.to_string())?, centre));
        }
        ensure(worst < 1e-4, format!("max rel diff {}", e3(worst)))
    }

    fn run_sim(&self, p: ModelParams, mode: ArrivalMode) -> Result<SimResult, String> {
        let c = SimConfig::new(p, 2, VALIDATE_REPS, self.opts.seed)
            .and_then(|c| c.with_arrival_mode(mode))
            .map_err(|e| e.to_string())?;
        simulate(&c).map_err(|e| e.to_string())
    }

    fn sim_concordance(&self, r: &SimResult) -> CheckResult {
        let q = RetrievalQuery::new(r.config.params, r.config.samples_needed).map_err(|e| e.to_string())?;
        let exact = self.closed(&q)?;
        let ks = empirical_cdf_distance(r, &q).map_err(|e| e.to_string())?;
        let crit = 1.63 / (r.replications as f64).sqrt();
        ensure(
            r.ci_contains(exact) && ks < crit,
            format!(
                "mean {} ± {} vs {}, KS {} (crit {})",
                format_sig(r.mean, 6),
                e3(r.ci_halfwidth_95),
                format_sig(exact, 6),
                e3(ks),
                e3(crit)
            ),
        )
    }

    fn occupancy(&self) -> CheckResult {
        let c = SimConfig::new(params(1, 1, 0.2, 0.4)?, 1, 1, self.opts.seed).map_err(|e| e.to_string())?;
        let occ = steady_state_empirical(&c, OCCUPANCY_HORIZON).map_err(|e| e.to_string())?;
        ensure(
            occ.tv_distance <= 0.01,
            format!(
                "empirical ({}, {}) TV {}",
                format_sig(occ.state.probs[0], 4),
                format_sig(occ.state.probs[1], 4),
                e3(occ.tv_distance)
            ),
        )
    }

    fn pasta(&self, inject: &SimResult) -> CheckResult {
        let p = inject.config.params.with_arrival_rate(1.0).map_err(|e| e.to_string())?;
        let poisson = self.run_sim(p, ArrivalMode::PoissonArrivals)?;
        let (a_lo, a_hi) = inject.ci_95();
        let (b_lo, b_hi) = poisson.ci_95();
        ensure(
            a_lo <= b_hi && b_lo <= a_hi,
            format!("inject [{}, {}] vs poisson [{}, {}]", e3(a_lo), e3(a_hi), e3(b_lo), e3(b_hi)),
        )
    }

    fn determinism(&self) -> CheckResult {
        let c = SimConfig::new(params(6, 2, 0.1, 0.4)?, 2, 2000, self.opts.seed).map_err(|e| e.to_string())?;
        let a = simulate(&c).map_err(|e| e.to_string())?;
        let b = simulate(&c).map_err(|e| e.to_string())?;
        ensure(a.ws_samples == b.ws_samples, format!("{} replicates compared", a.replications))
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> CheckResult) -> CheckOutcome {
    let start = Instant::now();
    let result = f();
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(detail) => CheckOutcome { name, passed: true, detail, seconds },
        Err(detail) => CheckOutcome { name, passed: false, detail, seconds },
    }
}

/// Runs every check, calling `report` as each one finishes.
pub fn run_checks(opts: ValidateOptions, mut report: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    let suite = Suite { opts };
    let mut outcomes = Vec::new();
    let mut push = |o: CheckOutcome| {
        report(&o);
        outcomes.push(o);
    };
    push(timed("steady_state", || suite.steady_state()));
    push(timed("single_sensor_law", || suite.single_sensor_law()));
    push(timed("order_statistic_cdf", || suite.order_statistic_cdf()));
    push(timed("oracle_triangle", || suite.oracle_triangle()));
    push(timed("identity", || suite.identity()));
    push(timed("asymptotic_harvest", || suite.asymptotic_harvest()));
    push(timed("asymptotic_battery", || suite.asymptotic_battery()));
    push(timed("asymptotic_network", || suite.asymptotic_network()));
    push(timed("equal_rate_continuity", || suite.equal_rate_continuity()));
    if opts.quick {
        return outcomes;
    }
    let mut first = None;
    push(timed("sim_concordance_high", || {
        let r = suite.run_sim(params(10, 4, 0.2, 0.4)?, ArrivalMode::PastaInject)?;
        let detail = suite.sim_concordance(&r);
        first = Some(r);
        detail
    }));
    push(timed("sim_concordance_low", || {
        let r = suite.run_sim(params(10, 2, 0.03, 0.4)?, ArrivalMode::PastaInject)?;
        suite.sim_concordance(&r)
    }));
    push(timed("occupancy", || suite.occupancy()));
    push(timed("pasta", || match &first {
        Some(r) => suite.pasta(r),
        None => Err("needs the sim_concordance_high run".into()),
    }));
    push(timed("determinism", || suite.determinism()));
    outcomes
}
