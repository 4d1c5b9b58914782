//! Parameter sweeps and the figure presets.

use std::io::Write;
use std::str::FromStr;

use clap::ValueEnum;
use ewsn::model::ModelParams;
use ewsn::phtype::DEFAULT_DIMENSION_CAP;
use ewsn::retrieval::{AlternatingSign, RetrievalQuery};
use ewsn::sim::{simulate, SimConfig};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::format::{sig, sig_opt};
use crate::methods::{evaluate, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    NSensors,
    BatteryCap,
    HarvestRate,
    BroadcastRate,
    SamplesNeeded,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::NSensors => "n_sensors",
            SweepParam::BatteryCap => "battery_cap",
            SweepParam::HarvestRate => "harvest_rate",
            SweepParam::BroadcastRate => "broadcast_rate",
            SweepParam::SamplesNeeded => "samples_needed",
        }
    }
}

impl FromStr for SweepParam {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "n" | "n_sensors" => Ok(SweepParam::NSensors),
            "b" | "battery_cap" => Ok(SweepParam::BatteryCap),
            "lambda_e" | "harvest_rate" => Ok(SweepParam::HarvestRate),
            "mu" | "broadcast_rate" => Ok(SweepParam::BroadcastRate),
            "s" | "samples_needed" => Ok(SweepParam::SamplesNeeded),
            other => Err(CliError::Usage(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
}

/// One series: a base point and the values of the swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub base: ModelParams,
    pub samples_needed: usize,
    pub methods: Vec<Method>,
}

impl SweepSpec {
    pub fn new(
        param: SweepParam,
        values: Vec<f64>,
        base: ModelParams,
        samples_needed: usize,
        methods: Vec<Method>,
    ) -> CliResult<Self> {
        if values.is_empty() {
            return Err(CliError::Usage("sweep needs at least one value".into()));
        }
        if methods.is_empty() {
            return Err(CliError::Usage("sweep needs at least one method".into()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Usage("sweep values must be strictly increasing".into()));
        }
        let spec = Self { param, values, base, samples_needed, methods };
        for &v in &spec.values {
            let q = spec.point(v)?;
            let n = q.params.n_sensors;
            if spec.methods.contains(&Method::Matrix) && (n >= 64 || 1u64 << n > DEFAULT_DIMENSION_CAP as u64) {
                return Err(CliError::Capacity(format!(
                    "matrix method needs 2^N <= {DEFAULT_DIMENSION_CAP}, got N = {}",
                    n
                )));
            }
        }
        Ok(spec)
    }

    /// The query at one value of the swept parameter.
    pub fn point(&self, value: f64) -> CliResult<RetrievalQuery> {
        let as_count = || -> CliResult<usize> {
            if value.fract() != 0.0 || value < 1.0 || value > u32::MAX as f64 {
                return Err(CliError::Usage(format!(
                    "{} takes positive integers, got {value}",
                    self.param.name()
                )));
            }
            Ok(value as usize)
        };
        let b = &self.base;
        let (mut n, mut cap, mut harvest, mut broadcast, mut s) =
            (b.n_sensors, b.battery_cap, b.harvest_rate, b.broadcast_rate, self.samples_needed);
        match self.param {
            SweepParam::NSensors => n = as_count()?,
            SweepParam::BatteryCap => cap = as_count()?,
            SweepParam::SamplesNeeded => s = as_count()?,
            SweepParam::HarvestRate => harvest = value,
            SweepParam::BroadcastRate => broadcast = value,
        }
        let mut params = ModelParams::new(n, cap, harvest, broadcast)?;
        params.client_arrival_rate = b.client_arrival_rate;
        Ok(RetrievalQuery::new(params, s)?)
    }
}

/// Simulation settings shared by every point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub reps: usize,
    pub seed: u64,
    pub warmup: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimColumns {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: SweepParam,
    pub param_value: f64,
    pub query: RetrievalQuery,
    pub ew_closed_form: Option<f64>,
    pub ew_quadrature: Option<f64>,
    pub ew_matrix: Option<f64>,
    pub sim: Option<SimColumns>,
}

pub const CSV_HEADER: [&str; 15] = [
    "param",
    "param_value",
    "n_sensors",
    "battery_cap",
    "harvest_rate",
    "broadcast_rate",
    "samples_needed",
    "ew_closed_form",
    "ew_quadrature",
    "ew_matrix",
    "ew_sim_mean",
    "ew_sim_ci_low",
    "ew_sim_ci_high",
    "n_reps",
    "seed",
];

fn evaluate_point(spec: &SweepSpec, value: f64, sim: &SimSettings) -> CliResult<SweepRow> {
    let q = spec.point(value)?;
    let analytic = |m: Method| -> CliResult<Option<f64>> {
        if spec.methods.contains(&m) {
            Ok(Some(evaluate(&q, m, AlternatingSign::default())?.value))
        } else {
            Ok(None)
        }
    };
    let sim_columns = if spec.methods.contains(&Method::Simulate) {
        let mut c = SimConfig::new(q.params, q.samples_needed, sim.reps, sim.seed)?;
        if let Some(w) = sim.warmup {
            c = c.with_warmup(w)?;
        }
        let r = simulate(&c)?;
        let (ci_low, ci_high) = r.ci_95();
        Some(SimColumns { mean: r.mean, ci_low, ci_high, n_reps: r.replications, seed: r.seed_used })
    } else {
        None
    };
    Ok(SweepRow {
        param: spec.param,
        param_value: value,
        query: q,
        ew_closed_form: analytic(Method::Closed)?,
        ew_quadrature: analytic(Method::Quadrature)?,
        ew_matrix: analytic(Method::Matrix)?,
        sim: sim_columns,
    })
}

/// Evaluates every point of every series; rows come back in spec order.
pub fn run_sweep(specs: &[SweepSpec], sim: &SimSettings) -> CliResult<Vec<SweepRow>> {
    let points: Vec<(&SweepSpec, f64)> =
        specs.iter().flat_map(|s| s.values.iter().map(move |&v| (s, v))).collect();
    points.par_iter().map(|&(spec, v)| evaluate_point(spec, v, sim)).collect()
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        let p = &row.query.params;
        let sim = row.sim;
        w.write_record([
            row.param.name().to_string(),
            sig(row.param_value),
            p.n_sensors.to_string(),
            p.battery_cap.to_string(),
            sig(p.harvest_rate),
            sig(p.broadcast_rate),
            row.query.samples_needed.to_string(),
            sig_opt(row.ew_closed_form),
            sig_opt(row.ew_quadrature),
            sig_opt(row.ew_matrix),
            sig_opt(sim.map(|s| s.mean)),
            sig_opt(sim.map(|s| s.ci_low)),
            sig_opt(sim.map(|s| s.ci_high)),
            sim.map(|s| s.n_reps.to_string()).unwrap_or_default(),
            sim.map(|s| s.seed.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const PRESET_N_RANGE: (usize, usize) = (2, 50);
pub const PRESET_B_RANGE: (usize, usize) = (1, 20);
pub const FIG4_HARVEST_RATES: [f64; 4] = [0.02, 0.03, 0.1, 0.2];

/// Series for a figure preset. Fig. 2 and 3 take the battery capacity from
/// `battery_cap`; every other parameter is fixed by the preset.
pub fn preset_specs(preset: Preset, battery_cap: usize, methods: Vec<Method>) -> CliResult<Vec<SweepSpec>> {
    let range = |(lo, hi): (usize, usize)| (lo..=hi).map(|v| v as f64).collect::<Vec<_>>();
    let by_n = |harvest| -> CliResult<Vec<SweepSpec>> {
        let base = ModelParams::new(PRESET_N_RANGE.0, battery_cap, harvest, 0.4)?;
        Ok(vec![SweepSpec::new(SweepParam::NSensors, range(PRESET_N_RANGE), base, 2, methods.clone())?])
    };
    match preset {
        Preset::Fig2 => by_n(0.2),
        Preset::Fig3 => by_n(0.03),
        Preset::Fig4 => FIG4_HARVEST_RATES
            .iter()
            .map(|&harvest| {
                let base = ModelParams::new(10, PRESET_B_RANGE.0, harvest, 0.4)?;
                SweepSpec::new(SweepParam::BatteryCap, range(PRESET_B_RANGE), base, 2, methods.clone())
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn methods() -> Vec<Method> {
        vec![Method::Closed, Method::Quadrature]
    }

    #[test]
    fn rejects_bad_values() {
        let base = ModelParams::new(4, 2, 0.2, 0.4).unwrap();
        let new = |param, values| SweepSpec::new(param, values, base, 2, methods());
        assert!(matches!(new(SweepParam::BatteryCap, vec![]), Err(CliError::Usage(_))));
        assert!(matches!(new(SweepParam::BatteryCap, vec![2.0, 2.0]), Err(CliError::Usage(_))));
        assert!(matches!(new(SweepParam::BatteryCap, vec![1.5]), Err(CliError::Usage(_))));
        assert!(matches!(new(SweepParam::NSensors, vec![1.0, 2.0]), Err(CliError::Usage(_))));
        assert!(new(SweepParam::HarvestRate, vec![0.01, 0.5]).is_ok());
    }

    #[test]
    fn matrix_respects_capacity() {
        let base = ModelParams::new(4, 2, 0.2, 0.4).unwrap();
        let ok = SweepSpec::new(SweepParam::NSensors, vec![2.0, 12.0], base, 2, vec![Method::Matrix]);
        assert!(ok.is_ok());
        let big = SweepSpec::new(SweepParam::NSensors, vec![2.0, 13.0], base, 2, vec![Method::Matrix]);
        assert!(matches!(big, Err(CliError::Capacity(_))));
        let huge = SweepSpec::new(SweepParam::NSensors, vec![200.0], base, 2, vec![Method::Matrix]);
        assert!(matches!(huge, Err(CliError::Capacity(_))));
    }

    #[test]
    fn rows_follow_spec_order_and_leave_unused_columns_empty() {
        let base = ModelParams::new(4, 2, 0.2, 0.4).unwrap();
        let spec = SweepSpec::new(SweepParam::BatteryCap, vec![1.0, 2.0, 3.0], base, 2, vec![Method::Closed]).unwrap();
        let rows = run_sweep(&[spec], &SimSettings { reps: 10, seed: 1, warmup: None }).unwrap();
        assert_eq!(rows.iter().map(|r| r.query.params.battery_cap).collect::<Vec<_>>(), [1, 2, 3]);
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().nth(1).unwrap();
        assert!(first.starts_with("battery_cap,1,4,1,0.2,0.4,2,"));
        assert!(first.ends_with(",,,,,,,"));
    }

    #[test]
    fn fig4_has_four_series() {
        let specs = preset_specs(Preset::Fig4, 4, methods()).unwrap();
        assert_eq!(specs.len(), 4);
        assert!(specs.iter().all(|s| s.values.len() == 20 && s.base.n_sensors == 10));
    }
}
