//! Recursive-descent reader for `.arc` sources.

use std::collections::HashSet;

use super::ast::*;
use crate::diag::{Code, Diagnostic, Pos};
use crate::lexer::{tokenize, Cursor, LexError, Tok};
use crate::value::{Primitive, Value};

/// Parses one source text into a model fragment. On failure the returned
/// list holds at least one error and no partial model is produced.
pub fn parse_model(source: &str, origin: &str) -> Result<ArchitectureModel, Vec<Diagnostic>> {
    let syntax = |e: LexError| vec![Diagnostic::error(Code::Syntax, origin, e.pos, e.message)];
    let toks = tokenize(source, 1).map_err(syntax)?;
    let mut p = Parser { cur: Cursor::new(&toks), origin, dups: Vec::new() };
    let defs = p.definitions().map_err(syntax)?;

    let mut model = ArchitectureModel::default();
    let mut diags = p.dups;
    for def in defs {
        match def {
            Definition::Message(m) => {
                if model.message_types.contains_key(&m.name) {
                    diags.push(Diagnostic::error(
                        Code::Duplicate,
                        origin,
                        m.pos,
                        format!("message type `{}` is defined twice", m.name),
                    ));
                } else {
                    model.message_types.insert(m.name.clone(), m);
                }
            }
            Definition::Component(c) => {
                if model.component_types.contains_key(&c.name) {
                    diags.push(Diagnostic::error(
                        Code::Duplicate,
                        origin,
                        c.pos,
                        format!("component type `{}` is defined twice", c.name),
                    ));
                } else {
                    model.component_types.insert(c.name.clone(), c);
                }
            }
        }
    }
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(diags)
    }
}

struct Parser<'a> {
    cur: Cursor<'a>,
    origin: &'a str,
    dups: Vec<Diagnostic>,
}

type PResult<T> = Result<T, LexError>;

impl<'a> Parser<'a> {
    fn definitions(&mut self) -> PResult<Vec<Definition>> {
        let mut out = Vec::new();
        while !self.cur.at_eof() {
            let t = self.cur.peek();
            if self.cur.eat_keyword("message") {
                out.push(Definition::Message(self.message(t.pos)?));
            } else if self.cur.eat_keyword("component") {
                out.push(Definition::Component(self.component(t.pos)?));
            } else {
                return Err(LexError {
                    pos: t.pos,
                    message: format!("expected `message` or `component`, found {}", t.tok.describe()),
                });
            }
        }
        Ok(out)
    }

    fn dup(&mut self, seen: &mut HashSet<String>, what: &str, name: &str, pos: Pos) {
        if !seen.insert(name.to_string()) {
            self.dups.push(Diagnostic::error(
                Code::Duplicate,
                self.origin,
                pos,
                format!("{what} `{name}` is declared twice"),
            ));
        }
    }

    fn message(&mut self, pos: Pos) -> PResult<MessageTypeDef> {
        let (name, _) = self.cur.expect_ident("a message type name")?;
        self.cur.expect(&Tok::LBrace, "`{`")?;
        let mut fields = Vec::new();
        let mut seen = HashSet::new();
        while !self.cur.eat(&Tok::RBrace) {
            let (fname, fpos) = self.cur.expect_ident("a field name or `}`")?;
            self.cur.expect(&Tok::Colon, "`:`")?;
            let t = self.cur.peek();
            let (prim, _) = self.cur.expect_ident("a primitive type")?;
            let primitive = Primitive::from_name(&prim).ok_or_else(|| LexError {
                pos: t.pos,
                message: format!("unknown primitive `{prim}` (expected integer, text or boolean)"),
            })?;
            self.cur.expect(&Tok::Semi, "`;`")?;
            self.dup(&mut seen, "field", &fname, fpos);
            fields.push(FieldDecl { name: fname, primitive, pos: fpos });
        }
        Ok(MessageTypeDef { name, fields, origin: self.origin.to_string(), pos })
    }

    fn component(&mut self, pos: Pos) -> PResult<ComponentTypeDef> {
        let (name, _) = self.cur.expect_ident("a component type name")?;
        self.cur.expect(&Tok::LBrace, "`{`")?;
        let mut def = ComponentTypeDef {
            name,
            ports: Vec::new(),
            subcomponents: Vec::new(),
            connectors: Vec::new(),
            contexts: Vec::new(),
            behavior: None,
            origin: self.origin.to_string(),
            pos,
        };
        let mut port_names = HashSet::new();
        let mut sub_names = HashSet::new();
        let mut ctx_names = HashSet::new();
        loop {
            let t = self.cur.peek();
            if self.cur.eat(&Tok::RBrace) {
                break;
            } else if self.cur.eat_keyword("port") {
                let port = self.port(t.pos)?;
                self.dup(&mut port_names, "port", &port.name, port.pos);
                def.ports.push(port);
            } else if self.cur.is_keyword("replicating") || self.cur.is_keyword("component") {
                let replicating = self.cur.eat_keyword("replicating");
                self.cur.expect_keyword("component")?;
                let (type_ref, _) = self.cur.expect_ident("a component type name")?;
                let (inst, _) = self.cur.expect_ident("a subcomponent name")?;
                self.cur.expect(&Tok::Semi, "`;`")?;
                self.dup(&mut sub_names, "subcomponent", &inst, t.pos);
                def.subcomponents.push(SubcomponentDecl { name: inst, type_ref, replicating, pos: t.pos });
            } else if self.cur.eat_keyword("connect") {
                let (source, target) = self.link()?;
                self.cur.expect(&Tok::Semi, "`;`")?;
                def.connectors.push(ConnectorDecl { source, target, pos: t.pos });
            } else if self.cur.eat_keyword("context") {
                let ctx = self.context(t.pos)?;
                self.dup(&mut ctx_names, "context", &ctx.name, ctx.pos);
                def.contexts.push(ctx);
            } else if self.cur.eat_keyword("behavior") {
                let clause = self.behavior(t.pos)?;
                if def.behavior.is_some() {
                    self.dups.push(Diagnostic::error(
                        Code::Duplicate,
                        self.origin,
                        t.pos,
                        format!("component `{}` has more than one behavior clause", def.name),
                    ));
                }
                def.behavior = Some(clause);
            } else {
                return Err(LexError {
                    pos: t.pos,
                    message: format!(
                        "expected `port`, `component`, `replicating`, `connect`, `context`, `behavior` or `}}`, found {}",
                        t.tok.describe()
                    ),
                });
            }
        }
        Ok(def)
    }

    fn port(&mut self, pos: Pos) -> PResult<PortDecl> {
        let t = self.cur.peek();
        let direction = if self.cur.eat_keyword("in") {
            Direction::In
        } else if self.cur.eat_keyword("out") {
            Direction::Out
        } else {
            return Err(LexError {
                pos: t.pos,
                message: format!("expected `in` or `out`, found {}", t.tok.describe()),
            });
        };
        let (message_type, _) = self.cur.expect_ident("a message type")?;
        let (name, _) = self.cur.expect_ident("a port name")?;
        let replicating = self.cur.eat_keyword("replicating");
        self.cur.expect(&Tok::Semi, "`;`")?;
        Ok(PortDecl { name, direction, message_type, replicating, pos })
    }

    fn endpoint(&mut self) -> PResult<Endpoint> {
        let (first, _) = self.cur.expect_ident("a port or subcomponent name")?;
        let mut parts = vec![first];
        while self.cur.eat(&Tok::Dot) {
            let (next, _) = self.cur.expect_ident("a name after `.`")?;
            parts.push(next);
        }
        let port = parts.pop().expect("at least one segment");
        Ok(Endpoint { path: parts, port })
    }

    fn link(&mut self) -> PResult<(Endpoint, Endpoint)> {
        let source = self.endpoint()?;
        self.cur.expect(&Tok::Arrow, "`->`")?;
        let target = self.endpoint()?;
        Ok((source, target))
    }

    fn context(&mut self, pos: Pos) -> PResult<ContextDecl> {
        let (name, _) = self.cur.expect_ident("a context name")?;
        self.cur.expect(&Tok::LBrace, "`{`")?;
        let mut ctx = ContextDecl { name, opening: Vec::new(), closing: Vec::new(), pos };
        loop {
            let t = self.cur.peek();
            if self.cur.eat(&Tok::RBrace) {
                break;
            }
            let opening = if self.cur.eat_keyword("open") {
                true
            } else if self.cur.eat_keyword("close") {
                false
            } else {
                return Err(LexError {
                    pos: t.pos,
                    message: format!("expected `open`, `close` or `}}`, found {}", t.tok.describe()),
                });
            };
            let (source, target) = self.link()?;
            self.cur.expect(&Tok::Semi, "`;`")?;
            let gate = GateRef { source, target, pos: t.pos };
            if opening {
                ctx.opening.push(gate);
            } else {
                ctx.closing.push(gate);
            }
        }
        Ok(ctx)
    }

    fn behavior(&mut self, pos: Pos) -> PResult<BehaviorClause> {
        let (builtin, _) = self.cur.expect_ident("a behavior name")?;
        self.cur.expect(&Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if !self.cur.eat(&Tok::RParen) {
            loop {
                let name = match (&self.cur.peek().tok, &self.cur.peek_at(1).tok) {
                    (Tok::Ident(n), Tok::Assign) => {
                        let n = n.clone();
                        self.cur.bump();
                        self.cur.bump();
                        Some(n)
                    }
                    _ => None,
                };
                let value = match &self.cur.peek().tok {
                    Tok::Ident(s) if s != "true" && s != "false" => {
                        let s = s.clone();
                        self.cur.bump();
                        ArgValue::Ident(s)
                    }
                    _ => ArgValue::Value(Value::read(&mut self.cur)?),
                };
                args.push(BehaviorArg { name, value });
                if self.cur.eat(&Tok::Comma) {
                    continue;
                }
                self.cur.expect(&Tok::RParen, "`,` or `)`")?;
                break;
            }
        }
        self.cur.expect(&Tok::Semi, "`;`")?;
        Ok(BehaviorClause { builtin, args, pos })
    }
}
