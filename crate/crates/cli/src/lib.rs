//! Command-line front end for `ewsn`.

pub mod args;
pub mod config;
pub mod error;
pub mod format;
pub mod methods;
pub mod sweep;
pub mod validate;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ewsn::phtype::order_stat_cdf_matrix;
use ewsn::model::w_phase_type;
use ewsn::retrieval::{expected_time_closed_form, ws_cdf, AlternatingSign};
use ewsn::sim::{empirical_cdf_distance, simulate, ArrivalMode, SimConfig, SimSummary};
use serde::Serialize;

use crate::args::{Cli, Command};
use crate::config::{resolve, Resolved};
use crate::error::{CliError, CliResult};
use crate::format::sig;
use crate::methods::{evaluate, parse_methods, Method};
use crate::sweep::{preset_specs, run_sweep, write_csv, SimSettings, SweepParam, SweepSpec};
use crate::validate::{run_checks, ValidateOptions};

/// Runs one parsed invocation, writing the report to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let res = resolve(&cli.common.layer(), cli.common.config.as_deref())?;
    let out = cli.common.out.as_deref();
    match &cli.command {
        Command::Expected => cmd_expected(&res, stdout),
        Command::Cdf { t_max, steps } => cmd_cdf(&res, *t_max, *steps, out, stdout),
        Command::Simulate => cmd_simulate(&res, out, stdout),
        Command::Sweep { preset, param, values } => {
            let specs = match (preset, param) {
                (Some(p), _) => preset_specs(*p, res.params.battery_cap, sweep_methods(&res)?)?,
                (None, Some(name)) => vec![SweepSpec::new(
                    name.parse::<SweepParam>()?,
                    values.clone(),
                    res.params,
                    res.samples_needed,
                    sweep_methods(&res)?,
                )?],
                (None, None) => return Err(CliError::Usage("sweep needs --preset or --param/--values".into())),
            };
            let label = match preset {
                Some(p) => format!("{p:?}").to_lowercase(),
                None => "custom".into(),
            };
            cmd_sweep(&res, &label, &specs, out, stdout)
        }
        Command::Validate { quick, inject_sign_flip } => {
            let sign = if *inject_sign_flip { AlternatingSign::NMinusK } else { AlternatingSign::JMinusK };
            cmd_validate(&res, ValidateOptions { quick: *quick, seed: res.seed, sign }, stdout)
        }
    }
}

fn write_out(stdout: &mut dyn Write, text: &str) -> CliResult<()> {
    stdout.write_all(text.as_bytes()).map_err(|e| CliError::io("stdout", e))
}

/// Output target opened up front, so an unwritable path fails before any
/// computation.
enum Output {
    File(std::path::PathBuf, BufWriter<File>),
    Stdout,
}

impl Output {
    fn open(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => {
                let file = File::create(p).map_err(|e| CliError::io(p.display(), e))?;
                Ok(Output::File(p.to_path_buf(), BufWriter::new(file)))
            }
            None => Ok(Output::Stdout),
        }
    }

    fn write(
        self,
        stdout: &mut dyn Write,
        write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> CliResult<()> {
        match self {
            Output::File(p, mut w) => {
                write(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(p.display(), e))
            }
            Output::Stdout => write(stdout).map_err(|e| CliError::io("stdout", e)),
        }
    }
}

fn out_label(path: Option<&Path>) -> String {
    path.map_or("stdout".into(), |p| p.display().to_string())
}

fn analytic_method(res: &Resolved) -> CliResult<Method> {
    let m: Method = res.method.as_deref().unwrap_or("closed").parse()?;
    if m == Method::Simulate {
        return Err(CliError::Usage("use the simulate subcommand for Monte Carlo estimates".into()));
    }
    Ok(m)
}

fn sweep_methods(res: &Resolved) -> CliResult<Vec<Method>> {
    parse_methods(res.method.as_deref().unwrap_or("closed,quadrature"))
}

pub fn cmd_expected(res: &Resolved, stdout: &mut dyn Write) -> CliResult<()> {
    let method = analytic_method(res)?;
    let ev = evaluate(&res.query(), method, AlternatingSign::default())?;
    let mut text = res.header("expected", &[("method", method.to_string())]);
    text.push_str(&format!("expected_time = {}\nroute = {}\n", sig(ev.value), ev.route));
    write_out(stdout, &text)
}

pub fn cmd_cdf(
    res: &Resolved,
    t_max: Option<f64>,
    steps: usize,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    let method = analytic_method(res)?;
    if steps == 0 {
        return Err(CliError::Usage("steps must be at least 1".into()));
    }
    let q = res.query();
    let t_max = match t_max {
        Some(t) if t.is_finite() && t > 0.0 => t,
        Some(t) => return Err(CliError::Usage(format!("t-max must be > 0, got {t}"))),
        None => (5.0 * expected_time_closed_form(&q)?).ceil(),
    };
    let target = Output::open(out)?;
    let d = w_phase_type(&q.params);
    let grid: Vec<f64> = (0..=steps).map(|i| t_max * i as f64 / steps as f64).collect();
    let values = grid
        .iter()
        .map(|&t| match method {
            Method::Matrix => Ok(order_stat_cdf_matrix(&d, q.params.n_sensors, q.samples_needed, t)?),
            _ => Ok(ws_cdf(&q, t)),
        })
        .collect::<CliResult<Vec<f64>>>()?;
    let cdf_route = if method == Method::Matrix { "matrix" } else { "scalar" };
    let header = res.header(
        "cdf",
        &[
            ("method", cdf_route.into()),
            ("t_max", sig(t_max)),
            ("steps", steps.to_string()),
            ("out", out_label(out)),
        ],
    );
    write_out(stdout, &header)?;
    target.write(stdout, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["t", "cdf"])?;
        for (t, f) in grid.iter().zip(&values) {
            csv.write_record([sig(*t), sig(*f)])?;
        }
        csv.flush()
    })
}

#[derive(Serialize)]
struct SimulateReport {
    #[serde(flatten)]
    summary: SimSummary,
    analytic_mean: f64,
    ks_distance: f64,
    ks_critical_1pct: f64,
}

pub fn cmd_simulate(res: &Resolved, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    let mode = if res.params.client_arrival_rate.is_some() {
        ArrivalMode::PoissonArrivals
    } else {
        ArrivalMode::PastaInject
    };
    let target = out.map(|p| Output::open(Some(p))).transpose()?;
    let config = SimConfig::new(res.params, res.samples_needed, res.reps, res.seed)?
        .with_warmup(res.effective_warmup())?
        .with_arrival_mode(mode)?;
    let r = simulate(&config)?;
    let q = res.query();
    let report = SimulateReport {
        summary: r.summary(),
        analytic_mean: expected_time_closed_form(&q)?,
        ks_distance: empirical_cdf_distance(&r, &q)?,
        ks_critical_1pct: 1.63 / (r.replications as f64).sqrt(),
    };
    let mode_name = match mode {
        ArrivalMode::PastaInject => "pasta_inject",
        ArrivalMode::PoissonArrivals => "poisson_arrivals",
    };
    let mut text = res.header("simulate", &[("arrival_mode", mode_name.into()), ("out", out.map_or("none".into(), |p| p.display().to_string()))]);
    text.push_str(&serde_json::to_string_pretty(&report).expect("plain data serializes"));
    text.push('\n');
    write_out(stdout, &text)?;
    if let Some(target) = target {
        target.write(stdout, |w| r.write_replicates_csv(w))?;
    }
    Ok(())
}

pub fn cmd_sweep(
    res: &Resolved,
    label: &str,
    specs: &[SweepSpec],
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    let methods: Vec<String> = specs[0].methods.iter().map(|m| m.to_string()).collect();
    let target = Output::open(out)?;
    let settings = SimSettings { reps: res.reps, seed: res.seed, warmup: res.warmup };
    let rows = run_sweep(specs, &settings)?;
    let mut extra = vec![("sweep", label.to_string()), ("methods", methods.join(","))];
    for (i, spec) in specs.iter().enumerate() {
        let b = &spec.base;
        extra.push((
            "series",
            format!(
                "{i}: {} over {}..{} ({} values), n_sensors={} battery_cap={} harvest_rate={} broadcast_rate={} samples_needed={}",
                spec.param.name(),
                sig(spec.values[0]),
                sig(*spec.values.last().expect("non-empty")),
                spec.values.len(),
                b.n_sensors,
                b.battery_cap,
                sig(b.harvest_rate),
                sig(b.broadcast_rate),
                spec.samples_needed
            ),
        ));
    }
    extra.push(("rows", rows.len().to_string()));
    extra.push(("out", out_label(out)));
    write_out(stdout, &res.header("sweep", &extra))?;
    target.write(stdout, |w| write_csv(&rows, w).map_err(std::io::Error::other))
}

pub fn cmd_validate(res: &Resolved, opts: ValidateOptions, stdout: &mut dyn Write) -> CliResult<()> {
    let extra = [
        ("quick", opts.quick.to_string()),
        ("sign_convention", format!("{:?}", opts.sign)),
        ("sim_reps", if opts.quick { "skipped".into() } else { validate::VALIDATE_REPS.to_string() }),
    ];
    write_out(stdout, &res.header("validate", &extra))?;
    let mut io_error = None;
    let outcomes = run_checks(opts, |o| {
        if let Err(e) = writeln!(stdout, "{}", o.line()).and_then(|_| stdout.flush()) {
            io_error.get_or_insert(e);
        }
    });
    if let Some(e) = io_error {
        return Err(CliError::io("stdout", e));
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    write_out(stdout, &format!("{}/{} checks passed\n", outcomes.len() - failed.len(), outcomes.len()))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("validation checks failed: {}", failed.join(", "))))
    }
}
