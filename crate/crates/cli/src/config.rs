//! Configuration layering: flags (and `EWSN_*` env vars) over a TOML file
//! over built-in defaults.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ewsn::model::{required_samples_for, EstimationSpec, ModelParams};
use ewsn::retrieval::RetrievalQuery;
use ewsn::sim::default_warmup;
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::format::sig;

pub const DEFAULT_N: usize = 10;
pub const DEFAULT_B: usize = 4;
pub const DEFAULT_LAMBDA_E: f64 = 0.2;
pub const DEFAULT_MU: f64 = 0.4;
pub const DEFAULT_S: usize = 2;
pub const DEFAULT_REPS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 20_240_607;

/// One source of settings. Every field is optional so layers can be merged.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub n: Option<usize>,
    pub b: Option<usize>,
    pub lambda_e: Option<f64>,
    pub mu: Option<f64>,
    pub lambda_a: Option<f64>,
    pub s: Option<usize>,
    pub sigma2: Option<f64>,
    pub threshold: Option<f64>,
    pub method: Option<String>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub warmup: Option<f64>,
}

impl Layer {
    pub fn from_toml_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    fn sample_rule(&self, origin: &str) -> CliResult<Option<SampleRule>> {
        match (self.s, self.sigma2, self.threshold) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(CliError::Usage(format!(
                "{origin}: give either s or sigma2/threshold, not both"
            ))),
            (Some(s), None, None) => Ok(Some(SampleRule::Count(s))),
            (None, Some(sigma2), Some(threshold)) => Ok(Some(SampleRule::Variance { sigma2, threshold })),
            (None, Some(_), None) | (None, None, Some(_)) => Err(CliError::Usage(format!(
                "{origin}: sigma2 and threshold must be given together"
            ))),
            (None, None, None) => Ok(None),
        }
    }
}

/// How the number of required measurements was fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleRule {
    Count(usize),
    Variance { sigma2: f64, threshold: f64 },
}

/// Fully merged and validated settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub params: ModelParams,
    pub samples_needed: usize,
    pub rule: SampleRule,
    pub method: Option<String>,
    pub reps: usize,
    pub seed: u64,
    /// Explicit warm-up; `None` means the per-model default.
    pub warmup: Option<f64>,
    pub config_file: Option<PathBuf>,
}

/// Merges `flags` over the optional TOML file over defaults.
pub fn resolve(flags: &Layer, config_file: Option<&Path>) -> CliResult<Resolved> {
    let file = match config_file {
        Some(path) => Layer::from_toml_file(path)?,
        None => Layer::default(),
    };
    let rule = match flags.sample_rule("flags")? {
        Some(rule) => rule,
        None => file.sample_rule("config file")?.unwrap_or(SampleRule::Count(DEFAULT_S)),
    };
    let mut params = ModelParams::new(
        flags.n.or(file.n).unwrap_or(DEFAULT_N),
        flags.b.or(file.b).unwrap_or(DEFAULT_B),
        flags.lambda_e.or(file.lambda_e).unwrap_or(DEFAULT_LAMBDA_E),
        flags.mu.or(file.mu).unwrap_or(DEFAULT_MU),
    )?;
    if let Some(rate) = flags.lambda_a.or(file.lambda_a) {
        params = params.with_arrival_rate(rate)?;
    }
    let samples_needed = match rule {
        SampleRule::Count(s) => s,
        SampleRule::Variance { sigma2, threshold } => {
            required_samples_for(&EstimationSpec::new(sigma2, threshold)?, &params)?
        }
    };
    RetrievalQuery::new(params, samples_needed)?;
    let reps = flags.reps.or(file.reps).unwrap_or(DEFAULT_REPS);
    if reps == 0 {
        return Err(CliError::Usage("reps must be at least 1".into()));
    }
    let warmup = flags.warmup.or(file.warmup);
    if let Some(w) = warmup {
        if !(w.is_finite() && w >= 0.0) {
            return Err(CliError::Usage(format!("warmup must be >= 0, got {w}")));
        }
    }
    Ok(Resolved {
        params,
        samples_needed,
        rule,
        method: flags.method.clone().or(file.method),
        reps,
        seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        warmup,
        config_file: config_file.map(Path::to_path_buf),
    })
}

impl Resolved {
    pub fn query(&self) -> RetrievalQuery {
        RetrievalQuery::new(self.params, self.samples_needed).expect("validated at resolve time")
    }

    pub fn effective_warmup(&self) -> f64 {
        self.warmup.unwrap_or_else(|| default_warmup(&self.params))
    }

    /// `# key = value` lines echoing every resolved setting.
    pub fn header(&self, command: &str, extra: &[(&str, String)]) -> String {
        let p = &self.params;
        let mut out = String::new();
        let mut line = |k: &str, v: String| writeln!(out, "# {k} = {v}").unwrap();
        line("command", command.to_string());
        line(
            "config_file",
            self.config_file.as_ref().map_or("none".into(), |f| f.display().to_string()),
        );
        line("n_sensors", p.n_sensors.to_string());
        line("battery_cap", p.battery_cap.to_string());
        line("harvest_rate", sig(p.harvest_rate));
        line("broadcast_rate", sig(p.broadcast_rate));
        line("client_arrival_rate", p.client_arrival_rate.map_or("none".into(), sig));
        line("samples_needed", self.samples_needed.to_string());
        if let SampleRule::Variance { sigma2, threshold } = self.rule {
            line("sigma2", sig(sigma2));
            line("threshold", sig(threshold));
        }
        line("reps", self.reps.to_string());
        line("seed", self.seed.to_string());
        line(
            "warmup",
            match self.warmup {
                Some(w) => sig(w),
                None => format!("{} (default)", sig(self.effective_warmup())),
            },
        );
        for (k, v) in extra {
            line(k, v.clone());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults() {
        let r = resolve(&Layer::default(), None).unwrap();
        assert_eq!(r.params, ModelParams::new(10, 4, 0.2, 0.4).unwrap());
        assert_eq!(r.samples_needed, 2);
        assert_eq!(r.seed, DEFAULT_SEED);
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "n = 6\nb = 2\ns = 3\nseed = 9").unwrap();
        let flags = Layer { b: Some(5), ..Layer::default() };
        let r = resolve(&flags, Some(f.path())).unwrap();
        assert_eq!((r.params.n_sensors, r.params.battery_cap, r.samples_needed), (6, 5, 3));
        assert_eq!(r.params.broadcast_rate, DEFAULT_MU);
        assert_eq!(r.seed, 9);
    }

    #[test]
    fn variance_rule_in_flags_overrides_file_count() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "s = 4").unwrap();
        let flags = Layer { sigma2: Some(1.0), threshold: Some(0.3), ..Layer::default() };
        let r = resolve(&flags, Some(f.path())).unwrap();
        assert_eq!(r.samples_needed, 4);
        assert!(matches!(r.rule, SampleRule::Variance { .. }));
        let flags = Layer { sigma2: Some(1.0), threshold: Some(0.5), ..Layer::default() };
        assert_eq!(resolve(&flags, Some(f.path())).unwrap().samples_needed, 2);
    }

    #[test]
    fn conflicts_and_bad_values_are_usage_errors() {
        let both = Layer { s: Some(2), sigma2: Some(1.0), threshold: Some(0.5), ..Layer::default() };
        assert!(matches!(resolve(&both, None), Err(CliError::Usage(_))));
        let half = Layer { sigma2: Some(1.0), ..Layer::default() };
        assert!(matches!(resolve(&half, None), Err(CliError::Usage(_))));
        let too_many = Layer { s: Some(11), ..Layer::default() };
        assert!(matches!(resolve(&too_many, None), Err(CliError::Usage(_))));
        let negative = Layer { mu: Some(-1.0), ..Layer::default() };
        assert!(matches!(resolve(&negative, None), Err(CliError::Usage(_))));
    }

    #[test]
    fn file_errors() {
        let missing = Path::new("/nonexistent/ewsn.toml");
        assert!(matches!(resolve(&Layer::default(), Some(missing)), Err(CliError::Io(_))));
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "unknown_key = 1").unwrap();
        assert!(matches!(resolve(&Layer::default(), Some(f.path())), Err(CliError::Usage(_))));
    }

    #[test]
    fn header_echoes_defaults() {
        let r = resolve(&Layer::default(), None).unwrap();
        let h = r.header("expected", &[("method", "closed".into())]);
        assert!(h.contains("# n_sensors = 10\n"));
        assert!(h.contains("# warmup = 2500 (default)\n"));
        assert!(h.ends_with("# method = closed\n"));
    }
}
