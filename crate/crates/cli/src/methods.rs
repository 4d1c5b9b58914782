use std::fmt;
use std::str::FromStr;

use ewsn::model::w_phase_type;
use ewsn::phtype::order_stat_moment;
use ewsn::retrieval::{
    closed_form_evaluation_with, expected_time_quadrature, AlternatingSign, ClosedFormRoute,
    RetrievalQuery,
};

use crate::error::{CliError, CliResult};

/// Evaluation routes for `E[W_s]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Closed,
    Quadrature,
    Matrix,
    Simulate,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Closed => "closed",
            Method::Quadrature => "quadrature",
            Method::Matrix => "matrix",
            Method::Simulate => "simulate",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "closed" | "closed_form" | "closed-form" => Ok(Method::Closed),
            "quadrature" | "quad" => Ok(Method::Quadrature),
            "matrix" => Ok(Method::Matrix),
            "simulate" | "sim" => Ok(Method::Simulate),
            other => Err(CliError::Usage(format!(
                "unknown method '{other}' (expected closed, quadrature, matrix or simulate)"
            ))),
        }
    }
}

/// Parses a comma-separated method list into sorted, de-duplicated form.
pub fn parse_methods(list: &str) -> CliResult<Vec<Method>> {
    let mut methods = list.split(',').map(str::parse).collect::<CliResult<Vec<Method>>>()?;
    methods.sort();
    methods.dedup();
    Ok(methods)
}

/// One analytic evaluation of `E[W_s]` and how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub route: &'static str,
}

pub fn evaluate(q: &RetrievalQuery, method: Method, sign: AlternatingSign) -> CliResult<Evaluation> {
    match method {
        Method::Closed => {
            let ev = closed_form_evaluation_with(q, sign)?;
            let route = match ev.route {
                ClosedFormRoute::Direct => "direct",
                ClosedFormRoute::EqualRateLimit => "equal_rate_limit",
                ClosedFormRoute::Quadrature => "quadrature_fallback",
            };
            Ok(Evaluation { value: ev.value, route })
        }
        Method::Quadrature => Ok(Evaluation { value: expected_time_quadrature(q)?, route: "quadrature" }),
        Method::Matrix => {
            let d = w_phase_type(&q.params);
            let value = order_stat_moment(&d, q.params.n_sensors, q.samples_needed, 1)?;
            Ok(Evaluation { value, route: "matrix" })
        }
        Method::Simulate => Err(CliError::Usage("simulate is not an analytic method".into())),
    }
}
