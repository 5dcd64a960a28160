//! Scenario files, scenario execution with stream expectations, and a
//! sequential reference oracle.

mod oracle;
mod run;
mod scenario;

pub use oracle::{reference_run, OracleInapplicable};
pub use run::{
    evaluate, run_scenario, run_with, sticky_violation, stored_count, write_results, HarnessError, RunOptions,
    RunOutcome, Verdict,
};
pub use scenario::*;
