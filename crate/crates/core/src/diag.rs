//! Diagnostics shared by the parser, the analyzer and the scenario loader.

use std::fmt;

/// A position in a source text. Lines and columns are 1-based.
///
/// Positions never participate in structural equality: two AST nodes that
/// differ only in where they were written compare equal.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

impl PartialEq for Pos {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl std::hash::Hash for Pos {
    fn hash<H: std::hash::Hasher>(&self, _state: &mut H) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
}

/// Stable diagnostic codes. The string form is part of the output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Code {
    Syntax,
    Duplicate,
    Io,
    Unresolved,
    TypeMismatch,
    Direction,
    Encapsulation,
    DupConnect,
    Behavior,
    GateRef,
    Recursion,
    ReplPort,
    UnknownBehavior,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Syntax => "E_SYNTAX",
            Code::Duplicate => "E_DUPLICATE",
            Code::Io => "E_IO",
            Code::Unresolved => "E_UNRESOLVED",
            Code::TypeMismatch => "E_TYPE_MISMATCH",
            Code::Direction => "E_DIRECTION",
            Code::Encapsulation => "E_ENCAPSULATION",
            Code::DupConnect => "E_DUP_CONNECT",
            Code::Behavior => "E_BEHAVIOR",
            Code::GateRef => "E_GATE_REF",
            Code::Recursion => "E_RECURSION",
            Code::ReplPort => "E_REPL_PORT",
            Code::UnknownBehavior => "E_UNKNOWN_BEHAVIOR",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub origin: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: Code, origin: &str, pos: Pos, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            code,
            origin: origin.to_string(),
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Renders as `<origin>:<line>:<col>: <CODE>: <message>`.
impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}: {}", self.origin, self.line, self.col, self.code, self.message)
    }
}
