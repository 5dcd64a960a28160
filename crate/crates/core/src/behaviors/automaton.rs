//! Table-driven automata.
//!
//! One transition per line:
//!
//! ```text
//! Idle , update , value >= 0 -> Idle , emit store Update{sensor=in.sensor, value=in.value}
//! Idle , update , _          -> Idle , emit log in ; emit audit in broadcast
//! ```
//!
//! The guard is `_` or a comparison of one payload field with a literal.
//! Emissions build a record from literals and `in.<field>` references, or
//! pass the incoming payload on with `in`. An optional trailing `broadcast`
//! or `to <index>` selects receivers on a replicating port.

use std::collections::BTreeSet;

use super::*;
use crate::adl::ArgValue;
use crate::lexer::{tokenize, Cursor, LexError, Tok};
use crate::value::{Primitive, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl GuardOp {
    fn eval(self, lhs: &Value, rhs: &Value) -> bool {
        match self {
            GuardOp::Eq => lhs == rhs,
            GuardOp::Ne => lhs != rhs,
            _ => match (lhs.as_int(), rhs.as_int()) {
                (Some(a), Some(b)) => match self {
                    GuardOp::Lt => a < b,
                    GuardOp::Le => a <= b,
                    GuardOp::Gt => a > b,
                    GuardOp::Ge => a >= b,
                    _ => unreachable!(),
                },
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    Always,
    Compare { field: String, op: GuardOp, value: Value },
}

impl Guard {
    pub fn matches(&self, payload: &Payload) -> bool {
        match self {
            Guard::Always => true,
            Guard::Compare { field, op, value } => payload.get(field).is_some_and(|v| op.eval(v, value)),
        }
    }

    /// Whether some payload satisfies both guards. Guards on different
    /// fields are assumed to be satisfiable together.
    pub fn overlaps(&self, other: &Guard) -> bool {
        let (Guard::Compare { field: fa, op: oa, value: va }, Guard::Compare { field: fb, op: ob, value: vb }) =
            (self, other)
        else {
            return true;
        };
        if fa != fb {
            return true;
        }
        match (va, vb) {
            (Value::Int(a), Value::Int(b)) => {
                let sa = int_set(*oa, *a);
                let sb = int_set(*ob, *b);
                sa.iter().any(|&(l1, h1)| sb.iter().any(|&(l2, h2)| l1.max(l2) <= h1.min(h2)))
            }
            (Value::Bool(_), Value::Bool(_)) => {
                [true, false].iter().any(|&x| oa.eval(&Value::Bool(x), va) && ob.eval(&Value::Bool(x), vb))
            }
            (Value::Text(a), Value::Text(b)) => match (oa, ob) {
                (GuardOp::Eq, GuardOp::Eq) => a == b,
                (GuardOp::Eq, GuardOp::Ne) | (GuardOp::Ne, GuardOp::Eq) => a != b,
                _ => true,
            },
            _ => true,
        }
    }
}

/// Closed intervals of integers satisfying `x op v`.
fn int_set(op: GuardOp, v: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let mut push = |lo: Option<i64>, hi: Option<i64>| {
        if let (Some(lo), Some(hi)) = (lo, hi) {
            if lo <= hi {
                out.push((lo, hi));
            }
        }
    };
    match op {
        GuardOp::Eq => push(Some(v), Some(v)),
        GuardOp::Ne => {
            push(Some(i64::MIN), v.checked_sub(1));
            push(v.checked_add(1), Some(i64::MAX));
        }
        GuardOp::Lt => push(Some(i64::MIN), v.checked_sub(1)),
        GuardOp::Le => push(Some(i64::MIN), Some(v)),
        GuardOp::Gt => push(v.checked_add(1), Some(i64::MAX)),
        GuardOp::Ge => push(Some(v), Some(i64::MAX)),
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldSource {
    Literal(Value),
    Input(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmitBody {
    PassThrough,
    Record { type_name: String, fields: Vec<(String, FieldSource)> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub port: String,
    pub body: EmitBody,
    pub directive: Directive,
}

impl Emission {
    fn build(&self, input: &Payload) -> Payload {
        match &self.body {
            EmitBody::PassThrough => input.clone(),
            EmitBody::Record { type_name, fields } => Payload::new(
                type_name.clone(),
                fields
                    .iter()
                    .map(|(n, src)| {
                        let v = match src {
                            FieldSource::Literal(v) => v.clone(),
                            FieldSource::Input(f) => input.get(f).cloned().expect("validated at load"),
                        };
                        (n.clone(), v)
                    })
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub state: String,
    pub port: String,
    pub guard: Guard,
    pub next: String,
    pub emissions: Vec<Emission>,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct Automaton {
    pub initial: String,
    pub states: BTreeSet<String>,
    pub transitions: Vec<Transition>,
}

impl Automaton {
    /// `automaton(table = "...")` or `automaton(file = "x.aut")`, with an
    /// optional `initial = State` (default: the first transition's state).
    pub fn from_clause(clause: &BehaviorClause, iface: &Interface<'_>) -> Result<Self, BehaviorError> {
        let text_arg = |name: &str| match clause.named(name) {
            Some(ArgValue::Value(Value::Text(s))) => Ok(Some(s.clone())),
            Some(other) => Err(BehaviorError::args("automaton", format!("`{name}` must be a string, found `{other}`"))),
            None => Ok(None),
        };
        let (text, origin) = match (text_arg("table")?, text_arg("file")?) {
            (Some(t), None) => (t, format!("{}#table", iface.component.origin)),
            (None, Some(f)) => {
                let path = match &iface.base_dir {
                    Some(d) => d.join(&f),
                    None => PathBuf::from(&f),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| BehaviorError::args("automaton", format!("cannot read {}: {e}", path.display())))?;
                (text, path.display().to_string())
            }
            _ => return Err(BehaviorError::args("automaton", "give exactly one of `table` or `file`")),
        };
        let initial = match clause.named("initial") {
            Some(ArgValue::Ident(s)) => Some(s.clone()),
            Some(ArgValue::Value(Value::Text(s))) => Some(s.clone()),
            Some(other) => {
                return Err(BehaviorError::args(
                    "automaton",
                    format!("`initial` must be a state name, found `{other}`"),
                ))
            }
            None => None,
        };
        Self::parse(&text, &origin, initial, iface)
    }

    pub fn parse(
        text: &str,
        origin: &str,
        initial: Option<String>,
        iface: &Interface<'_>,
    ) -> Result<Self, BehaviorError> {
        let mut transitions = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i as u32 + 1;
            let fail =
                |e: LexError| BehaviorError::Table { origin: origin.to_string(), line: lineno, message: e.message };
            let toks = tokenize(line, lineno).map_err(fail)?;
            if toks.len() == 1 {
                continue;
            }
            let t = read_transition(&mut Cursor::new(&toks), lineno).map_err(fail)?;
            validate(&t, iface).map_err(|message| BehaviorError::Table {
                origin: origin.to_string(),
                line: lineno,
                message,
            })?;
            transitions.push(t);
        }
        if transitions.is_empty() {
            return Err(BehaviorError::Table {
                origin: origin.to_string(),
                line: 1,
                message: "empty transition table".into(),
            });
        }
        for (i, a) in transitions.iter().enumerate() {
            for b in &transitions[..i] {
                if a.state == b.state && a.port == b.port && a.guard.overlaps(&b.guard) {
                    return Err(BehaviorError::Table {
                        origin: origin.to_string(),
                        line: a.line,
                        message: format!("guard overlaps the transition on line {}", b.line),
                    });
                }
            }
        }
        let mut states = BTreeSet::new();
        for t in &transitions {
            states.insert(t.state.clone());
            states.insert(t.next.clone());
        }
        let initial = initial.unwrap_or_else(|| transitions[0].state.clone());
        if !states.contains(&initial) {
            return Err(BehaviorError::Table {
                origin: origin.to_string(),
                line: 1,
                message: format!("initial state `{initial}` does not appear in the table"),
            });
        }
        Ok(Self { initial, states, transitions })
    }
}

fn read_transition(cur: &mut Cursor<'_>, line: u32) -> Result<Transition, LexError> {
    let (state, _) = cur.expect_ident("a state")?;
    cur.expect(&Tok::Comma, "`,`")?;
    let (port, _) = cur.expect_ident("an in-port")?;
    cur.expect(&Tok::Comma, "`,`")?;
    let guard = if cur.eat_keyword("_") {
        Guard::Always
    } else {
        let (field, _) = cur.expect_ident("a field name or `_`")?;
        let t = cur.bump();
        let op = match t.tok {
            Tok::Eq => GuardOp::Eq,
            Tok::Ne => GuardOp::Ne,
            Tok::Lt => GuardOp::Lt,
            Tok::Le => GuardOp::Le,
            Tok::Gt => GuardOp::Gt,
            Tok::Ge => GuardOp::Ge,
            ref other => {
                return Err(LexError {
                    pos: t.pos,
                    message: format!("expected a comparison, found {}", other.describe()),
                })
            }
        };
        let value = Value::read(cur)?;
        Guard::Compare { field, op, value }
    };
    cur.expect(&Tok::Arrow, "`->`")?;
    let (next, _) = cur.expect_ident("a target state")?;
    let mut emissions = Vec::new();
    if cur.eat(&Tok::Comma) {
        loop {
            cur.expect_keyword("emit")?;
            let (port, _) = cur.expect_ident("an out-port")?;
            let body = if cur.eat_keyword("in") {
                EmitBody::PassThrough
            } else {
                let (type_name, _) = cur.expect_ident("a message type or `in`")?;
                cur.expect(&Tok::LBrace, "`{`")?;
                let mut fields = Vec::new();
                if !cur.eat(&Tok::RBrace) {
                    loop {
                        let (f, _) = cur.expect_ident("a field name")?;
                        cur.expect(&Tok::Assign, "`=`")?;
                        let src = if cur.is_keyword("in") && cur.peek_at(1).tok == Tok::Dot {
                            cur.bump();
                            cur.bump();
                            FieldSource::Input(cur.expect_ident("a field name")?.0)
                        } else {
                            FieldSource::Literal(Value::read(cur)?)
                        };
                        fields.push((f, src));
                        if cur.eat(&Tok::Comma) {
                            continue;
                        }
                        cur.expect(&Tok::RBrace, "`,` or `}`")?;
                        break;
                    }
                }
                EmitBody::Record { type_name, fields }
            };
            let directive = if cur.eat_keyword("broadcast") {
                Directive::Broadcast
            } else if cur.eat_keyword("to") {
                let t = cur.bump();
                match t.tok {
                    Tok::Int(i) if i >= 0 => Directive::Index(i as usize),
                    _ => return Err(LexError { pos: t.pos, message: "expected a replica index".into() }),
                }
            } else {
                Directive::Default
            };
            emissions.push(Emission { port, body, directive });
            if cur.eat(&Tok::Semi) {
                continue;
            }
            break;
        }
    }
    if !cur.at_eof() {
        let t = cur.peek();
        return Err(LexError { pos: t.pos, message: format!("unexpected {}", t.tok.describe()) });
    }
    Ok(Transition { state, port, guard, next, emissions, line })
}

fn validate(t: &Transition, iface: &Interface<'_>) -> Result<(), String> {
    let in_port = match iface.port(&t.port) {
        Some(p) if p.direction == Direction::In => p,
        _ => return Err(format!("`{}` is not an in-port of `{}`", t.port, iface.component.name)),
    };
    let in_type = iface.port_type(in_port).ok_or_else(|| format!("unknown message type `{}`", in_port.message_type))?;
    if let Guard::Compare { field, op, value } = &t.guard {
        let decl = in_type.field(field).ok_or_else(|| format!("`{}` has no field `{field}`", in_type.name))?;
        if decl.primitive != value.primitive() {
            return Err(format!("field `{field}` is {}, compared with {}", decl.primitive, value.primitive()));
        }
        if decl.primitive != Primitive::Integer && !matches!(op, GuardOp::Eq | GuardOp::Ne) {
            return Err(format!("ordering comparison on {} field `{field}`", decl.primitive));
        }
    }
    for e in &t.emissions {
        let out = match iface.port(&e.port) {
            Some(p) if p.direction == Direction::Out => p,
            _ => return Err(format!("`{}` is not an out-port of `{}`", e.port, iface.component.name)),
        };
        if e.directive != Directive::Default && !out.replicating {
            return Err(format!("receiver selection on non-replicating port `{}`", e.port));
        }
        match &e.body {
            EmitBody::PassThrough => {
                if out.message_type != in_port.message_type {
                    return Err(format!(
                        "`emit {} in` passes `{}` to a `{}` port",
                        e.port, in_port.message_type, out.message_type
                    ));
                }
            }
            EmitBody::Record { type_name, fields } => {
                if type_name != &out.message_type {
                    return Err(format!("port `{}` carries `{}`, not `{type_name}`", e.port, out.message_type));
                }
                let ty = iface.message(type_name).ok_or_else(|| format!("unknown message type `{type_name}`"))?;
                for decl in &ty.fields {
                    let src = fields
                        .iter()
                        .find(|(n, _)| n == &decl.name)
                        .map(|(_, s)| s)
                        .ok_or_else(|| format!("missing field `{}` in `{type_name}`", decl.name))?;
                    let prim = match src {
                        FieldSource::Literal(v) => v.primitive(),
                        FieldSource::Input(f) => {
                            in_type.field(f).ok_or_else(|| format!("`{}` has no field `{f}`", in_type.name))?.primitive
                        }
                    };
                    if prim != decl.primitive {
                        return Err(format!("field `{}` is {}, given {prim}", decl.name, decl.primitive));
                    }
                }
                if let Some((n, _)) = fields.iter().find(|(n, _)| ty.field(n).is_none()) {
                    return Err(format!("`{type_name}` has no field `{n}`"));
                }
            }
        }
    }
    Ok(())
}

impl Behavior for Automaton {
    fn initial_state(&self) -> State {
        State::Named(self.initial.clone())
    }

    fn handle(&self, state: &State, port: &str, payload: &Payload, _: &mut Activation<'_>) -> Vec<Action> {
        let current = match state {
            State::Named(s) => s.as_str(),
            _ => self.initial.as_str(),
        };
        let Some(t) =
            self.transitions.iter().find(|t| t.state == current && t.port == port && t.guard.matches(payload))
        else {
            return vec![Action::Raise("no_transition".to_string())];
        };
        let mut out: Vec<Action> = t
            .emissions
            .iter()
            .map(|e| Action::Emit { port: e.port.clone(), payload: e.build(payload), directive: e.directive })
            .collect();
        if t.next != current {
            out.push(Action::SetState(State::Named(t.next.clone())));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adl::parse_model;
    use rand::SeedableRng;

    const SRC: &str = r#"
        message Update { sensor: integer; value: integer; tag: text; }
        message Ack { sensor: integer; ok: boolean; }
        component H {
          port in Update update;
          port out Update store;
          port out Ack ack replicating;
          behavior automaton(table = "");
        }
    "#;

    fn automaton(table: &str) -> Result<Automaton, BehaviorError> {
        let model = parse_model(SRC, "h.arc").unwrap();
        let c = model.component("H").unwrap();
        Automaton::parse(table, "h.aut", None, &Interface::new(&model, c))
    }

    fn update(value: i64) -> Payload {
        Payload::new(
            "Update",
            vec![
                ("sensor".into(), Value::Int(7)),
                ("value".into(), Value::Int(value)),
                ("tag".into(), Value::Text("t".into())),
            ],
        )
    }

    fn handle(a: &Automaton, state: &State, p: &Payload) -> Vec<Action> {
        let counts = BTreeMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        a.handle(state, "update", p, &mut Activation { receiver_counts: &counts, rng: &mut rng, seq: 0 })
    }

    #[test]
    fn guard_miss_raises_no_transition() {
        let a = automaton("Idle, update, value >= 0 -> Idle, emit store in").unwrap();
        let acts = handle(&a, &a.initial_state(), &update(-1));
        assert_eq!(acts, vec![Action::Raise("no_transition".into())]);
        let acts = handle(&a, &a.initial_state(), &update(0));
        assert_eq!(acts, vec![Action::emit("store", update(0))]);
    }

    #[test]
    fn builds_records_and_changes_state() {
        let a = automaton(
            "A, update, _ -> B, emit ack Ack{sensor=in.sensor, ok=true} broadcast ; emit store in\n\
             B, update, tag == \"t\" -> A",
        )
        .unwrap();
        let acts = handle(&a, &a.initial_state(), &update(3));
        assert_eq!(
            acts[0],
            Action::Emit {
                port: "ack".into(),
                payload: Payload::new("Ack", vec![("sensor".into(), Value::Int(7)), ("ok".into(), Value::Bool(true))]),
                directive: Directive::Broadcast,
            }
        );
        assert_eq!(acts[2], Action::SetState(State::Named("B".into())));
        let acts = handle(&a, &State::Named("B".into()), &update(3));
        assert_eq!(acts, vec![Action::SetState(State::Named("A".into()))]);
    }

    #[test]
    fn overlapping_guards_are_rejected() {
        let err = automaton("S, update, value >= 0 -> S\nS, update, value < 5 -> S").unwrap_err();
        assert!(matches!(err, BehaviorError::Table { line: 2, .. }));
        assert!(automaton("S, update, value >= 5 -> S\nS, update, value < 5 -> S").is_ok());
        assert!(automaton("S, update, value != 5 -> S\nS, update, value == 5 -> S").is_ok());
        assert!(automaton("S, update, tag == \"a\" -> S\nS, update, tag == \"b\" -> S").is_ok());
        assert!(automaton("S, update, tag == \"a\" -> S\nS, update, tag != \"b\" -> S").is_err());
        assert!(automaton("S, update, _ -> S\nS, update, value == 1 -> S").is_err());
        assert!(automaton("S, update, _ -> S\nT, update, _ -> S").is_ok());
    }

    #[test]
    fn table_validation() {
        assert!(automaton("S, nope, _ -> S").is_err());
        assert!(automaton("S, update, tag < \"x\" -> S").is_err());
        assert!(automaton("S, update, value == true -> S").is_err());
        assert!(automaton("S, update, _ -> S, emit ack in").is_err());
        assert!(automaton("S, update, _ -> S, emit store in to 1").is_err());
        assert!(automaton("S, update, _ -> S, emit ack Ack{sensor=1}").is_err());
        assert!(automaton("S, update, _ -> S, emit ack Ack{sensor=in.tag, ok=true}").is_err());
        assert!(automaton("// only a comment").is_err());
    }

    #[test]
    fn explicit_initial_state_must_exist() {
        let model = parse_model(SRC, "h.arc").unwrap();
        let c = model.component("H").unwrap();
        let iface = Interface::new(&model, c);
        assert!(Automaton::parse("A, update, _ -> B", "x", Some("B".into()), &iface).is_ok());
        assert!(Automaton::parse("A, update, _ -> B", "x", Some("C".into()), &iface).is_err());
    }

    #[test]
    fn integer_interval_edges() {
        let g = |op, v| Guard::Compare { field: "value".into(), op, value: Value::Int(v) };
        assert!(!g(GuardOp::Lt, i64::MIN).overlaps(&g(GuardOp::Ge, i64::MIN)));
        assert!(g(GuardOp::Le, 3).overlaps(&g(GuardOp::Ge, 3)));
        assert!(!g(GuardOp::Gt, i64::MAX).overlaps(&g(GuardOp::Ne, 0)));
    }
}
