//! Message payloads: primitive values and typed records.

use std::fmt;

use crate::lexer::{quote, Cursor, LexError, Tok};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Integer,
    Text,
    Boolean,
}

impl Primitive {
    pub fn as_str(self) -> &'static str {
        match self {
            Primitive::Integer => "integer",
            Primitive::Text => "text",
            Primitive::Boolean => "boolean",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "integer" => Some(Primitive::Integer),
            "text" => Some(Primitive::Text),
            "boolean" => Some(Primitive::Boolean),
            _ => None,
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Value {
    pub fn primitive(&self) -> Primitive {
        match self {
            Value::Int(_) => Primitive::Integer,
            Value::Text(_) => Primitive::Text,
            Value::Bool(_) => Primitive::Boolean,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }

    /// Reads an integer, string or `true`/`false` literal.
    pub fn read(cur: &mut Cursor<'_>) -> Result<Value, LexError> {
        let t = cur.peek();
        let v = match &t.tok {
            Tok::Int(v) => Value::Int(*v),
            Tok::Str(s) => Value::Text(s.clone()),
            Tok::Ident(s) if s == "true" => Value::Bool(true),
            Tok::Ident(s) if s == "false" => Value::Bool(false),
            other => {
                return Err(LexError {
                    pos: t.pos,
                    message: format!("expected a literal value, found {}", other.describe()),
                })
            }
        };
        cur.bump();
        Ok(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(&quote(s)),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// A typed record. Fields are kept in the declaration order of the type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Payload {
    pub type_name: String,
    pub fields: Vec<(String, Value)>,
}

impl Payload {
    pub fn new(type_name: impl Into<String>, fields: Vec<(String, Value)>) -> Self {
        Self { type_name: type_name.into(), fields }
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.fields.iter().find(|(n, _)| n == field).map(|(_, v)| v)
    }

    pub fn set(&mut self, field: &str, value: Value) -> bool {
        match self.fields.iter_mut().find(|(n, _)| n == field) {
            Some(slot) => {
                slot.1 = value;
                true
            }
            None => false,
        }
    }

    /// Reads `Type{field=value,...}`. Field order is taken as written; use
    /// [`crate::adl::MessageTypeDef::conform`] to check and normalize it.
    pub fn read(cur: &mut Cursor<'_>) -> Result<Payload, LexError> {
        let (type_name, _) = cur.expect_ident("a message type name")?;
        cur.expect(&Tok::LBrace, "`{`")?;
        let mut fields = Vec::new();
        if !cur.eat(&Tok::RBrace) {
            loop {
                let (name, _) = cur.expect_ident("a field name")?;
                cur.expect(&Tok::Assign, "`=`")?;
                let v = Value::read(cur)?;
                fields.push((name, v));
                if cur.eat(&Tok::Comma) {
                    continue;
                }
                cur.expect(&Tok::RBrace, "`,` or `}`")?;
                break;
            }
        }
        Ok(Payload { type_name, fields })
    }

    /// Parses a complete payload literal from text.
    pub fn parse(text: &str) -> Result<Payload, LexError> {
        let toks = crate::lexer::tokenize(text, 1)?;
        let mut cur = Cursor::new(&toks);
        let p = Payload::read(&mut cur)?;
        if !cur.at_eof() {
            let t = cur.peek();
            return Err(LexError { pos: t.pos, message: format!("unexpected {} after payload", t.tok.describe()) });
        }
        Ok(p)
    }
}

/// Renders as `Type{field=value,...}`.
impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.type_name)?;
        for (i, (n, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{n}={v}")?;
        }
        f.write_str("}")
    }
}
