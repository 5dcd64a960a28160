//! Deterministic execution of an elaborated topology.

mod kernel;
mod replica;
mod trace;


pub use kernel::{handover, InstanceKey, Kernel, KernelConfig, KernelError, Message, RuntimeInstance};
pub use replica::{EmptyGroup, Replica, ReplicaGroup, ReplicaId, RoundRobin, Selection, SelectionPolicy};
pub use trace::{render_tokens, ContextToken, Event, EventKind, StreamLog, TokenSet};
