//! cloudADL: a components-and-connectors language with replication and
//! contexts, and a deterministic simulation kernel for its architecture style.

pub mod adl;
pub mod analyzer;
pub mod behaviors;
pub mod diag;
pub mod harness;
pub mod lexer;
pub mod runtime;
pub mod value;

pub use adl::{load_files, parse_model, pretty_print, ArchitectureModel};
pub use analyzer::{check, elaborate, RuntimeTopology};
pub use behaviors::Registry;
pub use diag::{Code, Diagnostic};
pub use harness::{load_scenario_file, reference_run, run_scenario, RunOptions, RunOutcome, Verdict};
pub use runtime::{Kernel, KernelConfig, StreamLog};
pub use value::{Payload, Value};
