//! Retrieval-time analytics for energy-harvesting wireless sensor networks.
//!
//! `N` sensors each harvest unit energy packets at rate `λ_e` into a battery
//! of capacity `B` and, while they hold energy, broadcast at rate `μ/N`. A
//! client arriving in steady state waits `W_s` until it has heard from `s`
//! distinct sensors. This crate computes the law of `W_s` and its mean:
//!
//! * [`model`]: network parameters, the stationary battery law and the
//!   single-sensor waiting time `W`.
//! * [`retrieval`]: CDF and expectation of `W_s` in polynomial time, plus
//!   the large-`λ_e`, large-`B` and large-`N` limits.
//! * [`phtype`]: generic phase-type machinery (Kronecker algebra,
//!   uniformization, order statistics) used as an exact cross-check.
//! * [`sim`]: a discrete-event Monte Carlo simulator of the network.
//!
//! ```
//! use ewsn::model::ModelParams;
//! use ewsn::retrieval::{expected_time_closed_form, RetrievalQuery};
//!
//! let params = ModelParams::new(1, 1, 0.2, 0.4).unwrap();
//! let q = RetrievalQuery::new(params, 1).unwrap();
//! let mean = expected_time_closed_form(&q).unwrap();
//! assert!((mean - 35.0 / 6.0).abs() < 1e-12);
//! ```

pub mod error;
pub mod model;
pub mod numeric;
pub mod phtype;
pub mod retrieval;
pub mod sim;

pub use error::{Error, Result};

// The guide's code listings run as doctests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/phase_type.md")]
    mod phase_type {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/asymptotics.md")]
    mod asymptotics {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
