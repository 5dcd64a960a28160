//! The contract between atomic components and the kernel, plus the registry
//! of built-in behaviors.
//!
//! A behavior sees only its own ports: it gets one incoming message per
//! activation and answers with a list of [`Action`]s that the kernel applies
//! after it returns.

mod automaton;
mod builtins;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

pub use automaton::{Automaton, Guard, GuardOp, Transition};

use crate::adl::{ArchitectureModel, BehaviorClause, ComponentTypeDef, Direction, MessageTypeDef, PortDecl};
use crate::value::Payload;

/// How an emission on a replicating out-port picks receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Directive {
    #[default]
    Default,
    /// Pin delivery to the replica at this position of the receiving group.
    Index(usize),
    /// One copy per live replica.
    Broadcast,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Emit { port: String, payload: Payload, directive: Directive },
    SetState(State),
    Raise(String),
    None,
}

impl Action {
    pub fn emit(port: impl Into<String>, payload: Payload) -> Self {
        Action::Emit { port: port.into(), payload, directive: Directive::Default }
    }
}

/// Behavior state. Opaque to the kernel, which only stores it, replaces it
/// on `SetState` and resets it on restart.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum State {
    #[default]
    Unit,
    Count(u64),
    Named(String),
    Buffer(VecDeque<Payload>),
    /// Stored rows tagged with the sequence number of the message that
    /// carried them.
    Rows(Vec<(u64, Payload)>),
    List(Vec<State>),
}

/// Per-activation inputs besides the message itself.
pub struct Activation<'a> {
    /// Live receiver count for each replicating out-port.
    pub receiver_counts: &'a BTreeMap<String, usize>,
    /// The instance's own seeded stream.
    pub rng: &'a mut ChaCha8Rng,
    /// Sequence number of the message being handled.
    pub seq: u64,
}

pub trait Behavior: fmt::Debug + Send + Sync {
    fn initial_state(&self) -> State;

    fn handle(&self, state: &State, port: &str, payload: &Payload, cx: &mut Activation<'_>) -> Vec<Action>;

    /// Rows kept by table-like behaviors, for result files.
    fn rows<'s>(&self, _state: &'s State) -> Option<&'s [(u64, Payload)]> {
        None
    }

    /// Whether outputs depend on the instance's random stream.
    fn uses_randomness(&self) -> bool {
        false
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BehaviorError {
    #[error("unknown behavior `{0}`")]
    Unknown(String),
    #[error("{builtin}: {message}")]
    BadArgs { builtin: String, message: String },
    #[error("{origin}:{line}: {message}")]
    Table { origin: String, line: u32, message: String },
}

impl BehaviorError {
    pub(crate) fn args(builtin: &str, message: impl Into<String>) -> Self {
        BehaviorError::BadArgs { builtin: builtin.to_string(), message: message.into() }
    }
}

/// What a factory may inspect when building a behavior: the component's own
/// interface and the message types it uses.
pub struct Interface<'m> {
    pub component: &'m ComponentTypeDef,
    pub model: &'m ArchitectureModel,
    /// Directory of the defining `.arc` file, for sidecar tables.
    pub base_dir: Option<PathBuf>,
}

impl<'m> Interface<'m> {
    pub fn new(model: &'m ArchitectureModel, component: &'m ComponentTypeDef) -> Self {
        let base_dir = std::path::Path::new(&component.origin).parent().map(|p| p.to_path_buf());
        Self { component, model, base_dir }
    }

    pub fn port(&self, name: &str) -> Option<&'m PortDecl> {
        self.component.port(name)
    }

    pub fn in_ports(&self) -> impl Iterator<Item = &'m PortDecl> {
        self.component.in_ports()
    }

    pub fn out_ports(&self) -> impl Iterator<Item = &'m PortDecl> {
        self.component.out_ports()
    }

    pub fn message(&self, name: &str) -> Option<&'m MessageTypeDef> {
        self.model.message(name)
    }

    pub fn port_type(&self, port: &PortDecl) -> Option<&'m MessageTypeDef> {
        self.model.message(&port.message_type)
    }

    pub fn out_port(&self, builtin: &str, name: &str) -> Result<&'m PortDecl, BehaviorError> {
        match self.port(name) {
            Some(p) if p.direction == Direction::Out => Ok(p),
            _ => Err(BehaviorError::args(builtin, format!("`{}` has no out-port `{name}`", self.component.name))),
        }
    }

    pub fn sole_out_port(&self, builtin: &str) -> Result<&'m PortDecl, BehaviorError> {
        let mut outs = self.out_ports();
        match (outs.next(), outs.next()) {
            (Some(p), None) => Ok(p),
            _ => Err(BehaviorError::args(
                builtin,
                format!("`{}` must have exactly one out-port (or name one with `out = ...`)", self.component.name),
            )),
        }
    }
}

pub type Factory =
    Arc<dyn Fn(&BehaviorClause, &Interface<'_>) -> Result<Box<dyn Behavior>, BehaviorError> + Send + Sync>;

/// Name → factory. Embedding programs can add their own behaviors.
#[derive(Clone)]
pub struct Registry {
    factories: BTreeMap<String, Factory>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.factories.keys()).finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    /// forward, approve_if, validate_range, store, collect, fault_at, delay,
    /// broadcast, route_to, lossy, sink and automaton.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        builtins::register_all(&mut r);
        r.register("automaton", |clause, iface| {
            Automaton::from_clause(clause, iface).map(|a| Box::new(a) as Box<dyn Behavior>)
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&BehaviorClause, &Interface<'_>) -> Result<Box<dyn Behavior>, BehaviorError> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn lookup(&self, name: &str) -> Result<&Factory, BehaviorError> {
        self.factories.get(name).ok_or_else(|| BehaviorError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    /// Builds the behavior named by `component`'s behavior clause.
    pub fn build(
        &self,
        model: &ArchitectureModel,
        component: &ComponentTypeDef,
    ) -> Result<Box<dyn Behavior>, BehaviorError> {
        let clause = component
            .behavior
            .as_ref()
            .ok_or_else(|| BehaviorError::args("behavior", format!("`{}` has no behavior clause", component.name)))?;
        let factory = self.lookup(&clause.builtin)?;
        factory(clause, &Interface::new(model, component))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_required_builtins() {
        let r = Registry::builtin();
        for name in ["forward", "approve_if", "validate_range", "store", "collect", "fault_at", "delay"] {
            assert!(r.lookup(name).is_ok(), "{name}");
        }
    }

    #[test]
    fn unknown_lookup_fails() {
        let r = Registry::builtin();
        assert_eq!(r.lookup("nope").err(), Some(BehaviorError::Unknown("nope".into())));
    }
}
