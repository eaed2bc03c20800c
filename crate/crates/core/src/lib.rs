//! Gradient-norm minimization for smooth convex finite-sums.
//!
//! The crate provides the objective layer ([`objective`]), a counted gradient
//! oracle ([`oracle`]), deterministic full-gradient methods including OGM-G and
//! its memory-saving variant ([`deterministic`]), loopless variance-reduced
//! methods including Acc-SVRG-G ([`stochastic`]), the adaptively regularized
//! R-Acc-SVRG-G ([`adaptive`]), LIBSVM ingestion ([`data`]) and a multi-seed
//! experiment harness ([`harness`]).
//!
//! Every solver charges component-gradient evaluations to a
//! [`CountingOracle`]; metrics such as function values are read through an
//! uncounted channel so they never perturb complexity accounting.

pub mod adaptive;
pub mod data;
pub mod deterministic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod objective;
pub mod oracle;
pub mod reference;
pub mod stochastic;
pub mod trace;

pub use error::{Error, Result};
pub use objective::{FiniteSum, Logistic, Quadratic, Regularized};
pub use oracle::CountingOracle;
pub use trace::{Trace, TraceEvent};
