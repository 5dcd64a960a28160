use indexmap::IndexMap;

use crate::diag::Pos;
use crate::value::{Payload, Primitive, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub primitive: Primitive,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageTypeDef {
    pub name: String,
    pub fields: Vec<FieldDecl>,
    pub origin: String,
    pub pos: Pos,
}

/// Why a payload does not conform to a message type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConformError {
    WrongType { expected: String, found: String },
    MissingField(String),
    UnknownField(String),
    WrongPrimitive { field: String, expected: Primitive, found: Primitive },
}

impl std::fmt::Display for ConformError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConformError::WrongType { expected, found } => {
                write!(f, "expected a `{expected}` payload, found `{found}`")
            }
            ConformError::MissingField(n) => write!(f, "missing field `{n}`"),
            ConformError::UnknownField(n) => write!(f, "unknown field `{n}`"),
            ConformError::WrongPrimitive { field, expected, found } => {
                write!(f, "field `{field}` is {expected}, found {found}")
            }
        }
    }
}

impl MessageTypeDef {
    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Checks `payload` against this type and returns it with fields in
    /// declaration order.
    pub fn conform(&self, payload: &Payload) -> Result<Payload, ConformError> {
        if payload.type_name != self.name {
            return Err(ConformError::WrongType { expected: self.name.clone(), found: payload.type_name.clone() });
        }
        for (n, _) in &payload.fields {
            if self.field(n).is_none() {
                return Err(ConformError::UnknownField(n.clone()));
            }
        }
        let mut fields = Vec::with_capacity(self.fields.len());
        for decl in &self.fields {
            let v = payload.get(&decl.name).ok_or_else(|| ConformError::MissingField(decl.name.clone()))?;
            if v.primitive() != decl.primitive {
                return Err(ConformError::WrongPrimitive {
                    field: decl.name.clone(),
                    expected: decl.primitive,
                    found: v.primitive(),
                });
            }
            fields.push((decl.name.clone(), v.clone()));
        }
        Ok(Payload::new(self.name.clone(), fields))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortDecl {
    pub name: String,
    pub direction: Direction,
    pub message_type: String,
    pub replicating: bool,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcomponentDecl {
    pub name: String,
    pub type_ref: String,
    pub replicating: bool,
    pub pos: Pos,
}

/// `port` or `inst.port`. Longer paths parse but are rejected by the
/// analyzer, which only lets a type see its immediate subcomponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Endpoint {
    pub path: Vec<String>,
    pub port: String,
}

impl Endpoint {
    pub fn own(port: impl Into<String>) -> Self {
        Self { path: Vec::new(), port: port.into() }
    }

    pub fn sub(inst: impl Into<String>, port: impl Into<String>) -> Self {
        Self { path: vec![inst.into()], port: port.into() }
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in &self.path {
            write!(f, "{p}.")?;
        }
        f.write_str(&self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectorDecl {
    pub source: Endpoint,
    pub target: Endpoint,
    pub pos: Pos,
}

impl ConnectorDecl {
    pub fn matches(&self, gate: &GateRef) -> bool {
        self.source == gate.source && self.target == gate.target
    }
}

/// A gate names a connector of the enclosing type by its `src -> tgt` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateRef {
    pub source: Endpoint,
    pub target: Endpoint,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextDecl {
    pub name: String,
    pub opening: Vec<GateRef>,
    pub closing: Vec<GateRef>,
    pub pos: Pos,
}

/// A behavior argument literal: a value, or a bare identifier (port and
/// field names are written unquoted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgValue {
    Value(Value),
    Ident(String),
}

impl std::fmt::Display for ArgValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArgValue::Value(v) => write!(f, "{v}"),
            ArgValue::Ident(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorArg {
    pub name: Option<String>,
    pub value: ArgValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorClause {
    pub builtin: String,
    pub args: Vec<BehaviorArg>,
    pub pos: Pos,
}

impl BehaviorClause {
    pub fn named(&self, name: &str) -> Option<&ArgValue> {
        self.args.iter().find(|a| a.name.as_deref() == Some(name)).map(|a| &a.value)
    }

    pub fn positional(&self, idx: usize) -> Option<&ArgValue> {
        self.args.iter().filter(|a| a.name.is_none()).nth(idx).map(|a| &a.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentTypeDef {
    pub name: String,
    pub ports: Vec<PortDecl>,
    pub subcomponents: Vec<SubcomponentDecl>,
    pub connectors: Vec<ConnectorDecl>,
    pub contexts: Vec<ContextDecl>,
    pub behavior: Option<BehaviorClause>,
    pub origin: String,
    pub pos: Pos,
}

impl ComponentTypeDef {
    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn subcomponent(&self, name: &str) -> Option<&SubcomponentDecl> {
        self.subcomponents.iter().find(|s| s.name == name)
    }

    pub fn is_decomposed(&self) -> bool {
        !self.subcomponents.is_empty()
    }

    pub fn in_ports(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports.iter().filter(|p| p.direction == Direction::In)
    }

    pub fn out_ports(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports.iter().filter(|p| p.direction == Direction::Out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Definition {
    Message(MessageTypeDef),
    Component(ComponentTypeDef),
}

impl Definition {
    pub fn name(&self) -> &str {
        match self {
            Definition::Message(m) => &m.name,
            Definition::Component(c) => &c.name,
        }
    }
}

/// Message and component types, each namespace in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArchitectureModel {
    pub message_types: IndexMap<String, MessageTypeDef>,
    pub component_types: IndexMap<String, ComponentTypeDef>,
}

impl ArchitectureModel {
    pub fn message(&self, name: &str) -> Option<&MessageTypeDef> {
        self.message_types.get(name)
    }

    pub fn component(&self, name: &str) -> Option<&ComponentTypeDef> {
        self.component_types.get(name)
    }

    pub fn is_empty(&self) -> bool {
        self.message_types.is_empty() && self.component_types.is_empty()
    }
}
