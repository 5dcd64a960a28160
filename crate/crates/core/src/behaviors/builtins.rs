use rand::Rng;

use super::*;
use crate::adl::ArgValue;
use crate::value::{Primitive, Value};

/// Argument by name, falling back to position.
fn arg<'c>(clause: &'c BehaviorClause, name: &str, pos: usize) -> Option<&'c ArgValue> {
    clause.named(name).or_else(|| clause.positional(pos))
}

fn ident_arg(clause: &BehaviorClause, name: &str, pos: usize) -> Result<Option<String>, BehaviorError> {
    match arg(clause, name, pos) {
        None => Ok(None),
        Some(ArgValue::Ident(s)) => Ok(Some(s.clone())),
        Some(ArgValue::Value(Value::Text(s))) => Ok(Some(s.clone())),
        Some(other) => Err(BehaviorError::args(&clause.builtin, format!("`{name}` must be a name, found `{other}`"))),
    }
}

fn int_arg(clause: &BehaviorClause, name: &str, pos: usize) -> Result<Option<i64>, BehaviorError> {
    match arg(clause, name, pos) {
        None => Ok(None),
        Some(ArgValue::Value(Value::Int(v))) => Ok(Some(*v)),
        Some(other) => {
            Err(BehaviorError::args(&clause.builtin, format!("`{name}` must be an integer, found `{other}`")))
        }
    }
}

fn required<T>(v: Option<T>, clause: &BehaviorClause, name: &str) -> Result<T, BehaviorError> {
    v.ok_or_else(|| BehaviorError::args(&clause.builtin, format!("missing argument `{name}`")))
}

/// Every in-port must carry a type with `field` of primitive `prim`.
fn check_field(
    clause: &BehaviorClause,
    iface: &Interface<'_>,
    field: &str,
    prim: Primitive,
) -> Result<(), BehaviorError> {
    for p in iface.in_ports() {
        let ok = iface.port_type(p).and_then(|t| t.field(field)).is_some_and(|f| f.primitive == prim);
        if !ok {
            return Err(BehaviorError::args(
                &clause.builtin,
                format!("in-port `{}` has no {prim} field `{field}`", p.name),
            ));
        }
    }
    Ok(())
}

/// Every in-port type must equal `port`'s type, since payloads pass through.
fn check_pass_through(clause: &BehaviorClause, iface: &Interface<'_>, port: &PortDecl) -> Result<(), BehaviorError> {
    for p in iface.in_ports() {
        if p.message_type != port.message_type {
            return Err(BehaviorError::args(
                &clause.builtin,
                format!(
                    "in-port `{}` carries `{}` but out-port `{}` carries `{}`",
                    p.name, p.message_type, port.name, port.message_type
                ),
            ));
        }
    }
    Ok(())
}

fn out_or_sole(clause: &BehaviorClause, iface: &Interface<'_>, pos: usize) -> Result<String, BehaviorError> {
    let port = match ident_arg(clause, "out", pos)? {
        Some(name) => iface.out_port(&clause.builtin, &name)?,
        None => iface.sole_out_port(&clause.builtin)?,
    };
    check_pass_through(clause, iface, port)?;
    Ok(port.name.clone())
}

/// Either mark a boolean field (conjunctively) or route to one of two ports.
#[derive(Debug)]
enum Verdict {
    Mark { field: String, out: String },
    Route { pass: String, fail: String },
}

impl Verdict {
    fn from_clause(
        clause: &BehaviorClause,
        iface: &Interface<'_>,
        pass_name: &str,
        fail_name: &str,
    ) -> Result<Self, BehaviorError> {
        if let Some(field) = ident_arg(clause, "mark", usize::MAX)? {
            check_field(clause, iface, &field, Primitive::Boolean)?;
            let out = out_or_sole(clause, iface, usize::MAX)?;
            return Ok(Verdict::Mark { field, out });
        }
        let pass = ident_arg(clause, pass_name, usize::MAX)?.unwrap_or_else(|| pass_name.to_string());
        let fail = ident_arg(clause, fail_name, usize::MAX)?.unwrap_or_else(|| fail_name.to_string());
        for name in [&pass, &fail] {
            let p = iface.out_port(&clause.builtin, name)?;
            check_pass_through(clause, iface, p)?;
        }
        Ok(Verdict::Route { pass, fail })
    }

    fn apply(&self, payload: &Payload, ok: bool) -> Action {
        match self {
            Verdict::Mark { field, out } => {
                let mut p = payload.clone();
                if !ok {
                    p.set(field, Value::Bool(false));
                }
                Action::emit(out, p)
            }
            Verdict::Route { pass, fail } => Action::emit(if ok { pass } else { fail }, payload.clone()),
        }
    }
}

#[derive(Debug)]
struct Forward {
    outs: Vec<String>,
}

impl Behavior for Forward {
    fn initial_state(&self) -> State {
        State::Unit
    }

    fn handle(&self, _: &State, _: &str, payload: &Payload, _: &mut Activation<'_>) -> Vec<Action> {
        self.outs.iter().map(|o| Action::emit(o, payload.clone())).collect()
    }
}

#[derive(Debug)]
struct ApproveIf {
    field: String,
    equals: Value,
    verdict: Verdict,
}

impl Behavior for ApproveIf {
    fn initial_state(&self) -> State {
        State::Unit
    }

    fn handle(&self, _: &State, _: &str, payload: &Payload, _: &mut Activation<'_>) -> Vec<Action> {
        let ok = payload.get(&self.field) == Some(&self.equals);
        vec![self.verdict.apply(payload, ok)]
    }
}

#[derive(Debug)]
struct ValidateRange {
    field: String,
    min: i64,
    max: i64,
    verdict: Verdict,
}

impl Behavior for ValidateRange {
    fn initial_state(&self) -> State {
        State::Unit
    }

    fn handle(&self, _: &State, _: &str, payload: &Payload, _: &mut Activation<'_>) -> Vec<Action> {
        let ok = payload.get(&self.field).and_then(Value::as_int).is_some_and(|v| (self.min..=self.max).contains(&v));
        vec![self.verdict.apply(payload, ok)]
    }
}

#[derive(Debug)]
struct Store;

impl Behavior for Store {
    fn initial_state(&self) -> State {
        State::Rows(Vec::new())
    }

    fn handle(&self, state: &State, _: &str, payload: &Payload, cx: &mut Activation<'_>) -> Vec<Action> {
        let mut rows = match state {
            State::Rows(r) => r.clone(),
            _ => Vec::new(),
        };
        rows.push((cx.seq, payload.clone()));
        vec![Action::SetState(State::Rows(rows))]
    }

    fn rows<'s>(&self, state: &'s State) -> Option<&'s [(u64, Payload)]> {
        match state {
            State::Rows(r) => Some(r),
            _ => Some(&[]),
        }
    }
}

#[derive(Debug)]
struct Sink;

impl Behavior for Sink {
    fn initial_state(&self) -> State {
        State::Unit
    }

    fn handle(&self, _: &State, _: &str, _: &Payload, _: &mut Activation<'_>) -> Vec<Action> {
        vec![Action::None]
    }
}

/// Holds payloads until `n` have arrived, then releases all of them in
/// arrival order.
#[derive(Debug)]
struct Collect {
    n: usize,
    out: String,
}

impl Behavior for Collect {
    fn initial_state(&self) -> State {
        State::Buffer(Default::default())
    }

    fn handle(&self, state: &State, _: &str, payload: &Payload, _: &mut Activation<'_>) -> Vec<Action> {
        let mut buf = match state {
            State::Buffer(b) => b.clone(),
            _ => Default::default(),
        };
        buf.push_back(payload.clone());
        if buf.len() < self.n {
            return vec![Action::SetState(State::Buffer(buf))];
        }
        let mut out: Vec<Action> = buf.drain(..).map(|p| Action::emit(&self.out, p)).collect();
        out.push(Action::SetState(State::Buffer(buf)));
        out
    }
}

/// Forwards, but raises on its n-th activation since the last (re)start.
#[derive(Debug)]
struct FaultAt {
    n: u64,
    kind: String,
    outs: Vec<String>,
}

impl Behavior for FaultAt {
    fn initial_state(&self) -> State {
        State::Count(0)
    }

    fn handle(&self, state: &State, _: &str, payload: &Payload, _: &mut Activation<'_>) -> Vec<Action> {
        let count = match state {
            State::Count(c) => c + 1,
            _ => 1,
        };
        if count == self.n {
            return vec![Action::SetState(State::Count(count)), Action::Raise(self.kind.clone())];
        }
        let mut out: Vec<Action> = self.outs.iter().map(|o| Action::emit(o, payload.clone())).collect();
        out.push(Action::SetState(State::Count(count)));
        out
    }
}

/// Emits each payload once `k` newer ones have arrived behind it.
#[derive(Debug)]
struct Delay {
    k: usize,
    out: String,
}

impl Behavior for Delay {
    fn initial_state(&self) -> State {
        State::Buffer(Default::default())
    }

    fn handle(&self, state: &State, _: &str, payload: &Payload, _: &mut Activation<'_>) -> Vec<Action> {
        let mut buf = match state {
            State::Buffer(b) => b.clone(),
            _ => Default::default(),
        };
        buf.push_back(payload.clone());
        let mut out = Vec::new();
        while buf.len() > self.k {
            let p = buf.pop_front().expect("non-empty");
            out.push(Action::emit(&self.out, p));
        }
        out.push(Action::SetState(State::Buffer(buf)));
        out
    }
}

#[derive(Debug)]
struct Directed {
    out: String,
    directive: Directive,
}

impl Behavior for Directed {
    fn initial_state(&self) -> State {
        State::Unit
    }

    fn handle(&self, _: &State, _: &str, payload: &Payload, _: &mut Activation<'_>) -> Vec<Action> {
        vec![Action::Emit { port: self.out.clone(), payload: payload.clone(), directive: self.directive }]
    }
}

/// Forwards with the given probability in percent, using the instance's
/// seeded stream.
#[derive(Debug)]
struct Lossy {
    keep_percent: u32,
    out: String,
}

impl Behavior for Lossy {
    fn initial_state(&self) -> State {
        State::Unit
    }

    fn uses_randomness(&self) -> bool {
        true
    }

    fn handle(&self, _: &State, _: &str, payload: &Payload, cx: &mut Activation<'_>) -> Vec<Action> {
        if cx.rng.gen_range(0..100) < self.keep_percent {
            vec![Action::emit(&self.out, payload.clone())]
        } else {
            vec![Action::None]
        }
    }
}

fn forward_targets(clause: &BehaviorClause, iface: &Interface<'_>) -> Result<Vec<String>, BehaviorError> {
    if let Some(name) = ident_arg(clause, "out", usize::MAX)? {
        let p = iface.out_port(&clause.builtin, &name)?;
        check_pass_through(clause, iface, p)?;
        return Ok(vec![name]);
    }
    let outs: Vec<&PortDecl> = iface.out_ports().collect();
    for p in &outs {
        check_pass_through(clause, iface, p)?;
    }
    Ok(outs.into_iter().map(|p| p.name.clone()).collect())
}

fn replicating_out(clause: &BehaviorClause, iface: &Interface<'_>) -> Result<String, BehaviorError> {
    let name = out_or_sole(clause, iface, usize::MAX)?;
    if !iface.port(&name).is_some_and(|p| p.replicating) {
        return Err(BehaviorError::args(&clause.builtin, format!("out-port `{name}` must be declared replicating")));
    }
    Ok(name)
}

pub(super) fn register_all(r: &mut Registry) {
    r.register("forward", |clause, iface| Ok(Box::new(Forward { outs: forward_targets(clause, iface)? })));
    r.register("sink", |_, _| Ok(Box::new(Sink)));
    r.register("store", |_, _| Ok(Box::new(Store)));
    r.register("approve_if", |clause, iface| {
        let field = required(ident_arg(clause, "field", 0)?, clause, "field")?;
        let equals = match arg(clause, "equals", 1) {
            Some(ArgValue::Value(v)) => v.clone(),
            Some(ArgValue::Ident(s)) => Value::Text(s.clone()),
            None => return Err(BehaviorError::args("approve_if", "missing argument `equals`")),
        };
        check_field(clause, iface, &field, equals.primitive())?;
        let verdict = Verdict::from_clause(clause, iface, "approved", "rejected")?;
        Ok(Box::new(ApproveIf { field, equals, verdict }))
    });
    r.register("validate_range", |clause, iface| {
        let field = required(ident_arg(clause, "field", 0)?, clause, "field")?;
        let min = required(int_arg(clause, "min", 1)?, clause, "min")?;
        let max = required(int_arg(clause, "max", 2)?, clause, "max")?;
        check_field(clause, iface, &field, Primitive::Integer)?;
        let verdict = Verdict::from_clause(clause, iface, "valid", "invalid")?;
        Ok(Box::new(ValidateRange { field, min, max, verdict }))
    });
    r.register("collect", |clause, iface| {
        let n = required(int_arg(clause, "n", 0)?, clause, "n")?;
        if n < 1 {
            return Err(BehaviorError::args("collect", "`n` must be at least 1"));
        }
        Ok(Box::new(Collect { n: n as usize, out: out_or_sole(clause, iface, usize::MAX)? }))
    });
    r.register("fault_at", |clause, iface| {
        let n = required(int_arg(clause, "n", 0)?, clause, "n")?;
        if n < 1 {
            return Err(BehaviorError::args("fault_at", "`n` must be at least 1"));
        }
        let kind = ident_arg(clause, "kind", 1)?.unwrap_or_else(|| "fault".to_string());
        Ok(Box::new(FaultAt { n: n as u64, kind, outs: forward_targets(clause, iface)? }))
    });
    r.register("delay", |clause, iface| {
        let k = required(int_arg(clause, "k", 0)?, clause, "k")?;
        if k < 0 {
            return Err(BehaviorError::args("delay", "`k` must not be negative"));
        }
        Ok(Box::new(Delay { k: k as usize, out: out_or_sole(clause, iface, usize::MAX)? }))
    });
    r.register("broadcast", |clause, iface| {
        Ok(Box::new(Directed { out: replicating_out(clause, iface)?, directive: Directive::Broadcast }))
    });
    r.register("route_to", |clause, iface| {
        let i = required(int_arg(clause, "index", 0)?, clause, "index")?;
        if i < 0 {
            return Err(BehaviorError::args("route_to", "`index` must not be negative"));
        }
        Ok(Box::new(Directed { out: replicating_out(clause, iface)?, directive: Directive::Index(i as usize) }))
    });
    r.register("lossy", |clause, iface| {
        let keep = required(int_arg(clause, "keep", 0)?, clause, "keep")?;
        if !(0..=100).contains(&keep) {
            return Err(BehaviorError::args("lossy", "`keep` is a percentage"));
        }
        Ok(Box::new(Lossy { keep_percent: keep as u32, out: out_or_sole(clause, iface, usize::MAX)? }))
    });
}
