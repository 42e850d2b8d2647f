//! Stopping criteria for ranked document review.
//!
//! The central method models the occurrence of relevant documents down a
//! ranking as an inhomogeneous Poisson process with an exponentially
//! decaying rate, fitted on an examined prefix. The credible upper bound on
//! the total number of relevant documents then fixes how many must be found
//! to reach a target recall with a chosen probability.
//!
//! Alongside it live the target, knee, and oracle baselines, the
//! effort/recall metrics used to compare them, run and qrels parsing, and a
//! synthetic ranking generator.

pub mod error;
pub mod ingest;
pub mod methods;
pub mod metrics;
pub mod poisson;
pub mod ratefit;
pub mod simulate;
pub mod types;

pub use error::{Error, Result};
pub use methods::{knee_stop, oracle_stop, poisson_stop, target_stop, Method};
pub use poisson::RateModel;
pub use types::{reaches_recall, Document, MethodParams, Run, StopOutcome, Topic};
