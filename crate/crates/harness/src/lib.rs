//! Command-line front end and Monte Carlo study runner for `lamafield`.
//!
//! The library half holds everything the `lamafield` binary does so that it
//! can be driven in-process: the embedded study cases, the replicate runner,
//! CSV/JSON serialization and the command dispatch.

pub mod cases;
pub mod cli;
pub mod error;
pub mod io;
pub mod study;

pub use cases::{study_case, table1_cases, StudyCase, TrueParams, TABLE1};
pub use error::{HarnessError, Result};
pub use study::{run_case, run_replicate, with_jobs, Percentiles, ReplicateOutcome, StudyResult};
