//! Name resolution, well-formedness rules and elaboration of a root type
//! into a flat instance topology.

mod check;
mod elaborate;
mod topology;

pub use check::check;
pub use elaborate::{elaborate, ElaborateError};
pub use topology::*;
