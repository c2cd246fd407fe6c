//! Testing approximate permanent oracles over the complex Gaussian ensemble.
//!
//! The crate provides exact permanent kernels ([`permanent`]), a reproducible
//! complex Gaussian matrix sampler ([`ensemble`]), a zoo of honest and
//! adversarial oracles plus a client for external ones ([`oracle`],
//! [`protocol`]), the stage-by-stage self-reducibility tester ([`tester`]),
//! and Monte Carlo diagnostics for the facts the tester relies on
//! ([`diagnostics`]).

pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod matrix;
pub mod oracle;
pub mod permanent;
pub mod protocol;
pub mod stats;
pub mod tester;

pub use num_complex::Complex64;

pub use ensemble::EnsembleSampler;
pub use error::{MatrixError, OracleError, ParamError, ProtocolError};
pub use matrix::{ComplexMatrix, Minor};
pub use oracle::{make_oracle, OracleFamily, OracleSpec};
pub use permanent::{factorial, first_row_minors, permanent_naive, permanent_ryser};
pub use tester::{compute_parameters, query_budget, run_ptest, RunMode, RunOptions, TestReport, TesterParams, Verdict};
