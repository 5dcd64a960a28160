//! The textual cloudADL language: abstract syntax, reader, canonical printer
//! and multi-file loading.
//!
//! ```text
//! message Update { sensor: integer; cred: text; }
//!
//! component SensorChannel {
//!   port in Update update;
//!   port out Ack ack;
//!   component UpdateHandler handler;
//!   replicating component UpdateStore store;
//!   connect update -> handler.update;
//!   context session {
//!     open update -> handler.update;
//!   }
//! }
//! ```

mod ast;
mod loader;
mod parser;
mod printer;

pub use ast::*;
pub use loader::{load_files, merge};
pub use parser::parse_model;
pub use printer::pretty_print;
