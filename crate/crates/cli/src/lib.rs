//! Scenario files, the check catalog and the report writer behind the
//! `vessel` binary.

pub mod checks;
pub mod report;
pub mod scenario;

pub use report::{run_scenario, Outcome, Report, RunOptions};
pub use scenario::{ConfigError, Scenario};
