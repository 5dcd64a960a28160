//! Well-formedness rules for a merged model.

use std::collections::{HashMap, HashSet};

use crate::adl::{ArchitectureModel, ComponentTypeDef, Direction, Endpoint};
use crate::diag::{Code, Diagnostic};

/// Checks every component type and returns all violations in a stable
/// order. An empty list means the model may be elaborated.
pub fn check(model: &ArchitectureModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for c in model.component_types.values() {
        check_component(model, c, &mut diags);
    }
    check_recursion(model, &mut diags);
    diags
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Own,
    Sub,
}

struct Resolved<'m> {
    side: Side,
    direction: Direction,
    message_type: &'m str,
}

enum Resolution<'m> {
    Ok(Resolved<'m>),
    /// Failure already reported elsewhere (e.g. an unresolved subcomponent type).
    Silent,
    Err(Code, String),
}

fn resolve<'m>(model: &'m ArchitectureModel, c: &'m ComponentTypeDef, ep: &Endpoint) -> Resolution<'m> {
    match ep.path.as_slice() {
        [] => match c.port(&ep.port) {
            Some(p) => {
                Resolution::Ok(Resolved { side: Side::Own, direction: p.direction, message_type: &p.message_type })
            }
            None => Resolution::Err(Code::Unresolved, format!("component `{}` has no port `{}`", c.name, ep.port)),
        },
        [inst] => {
            let Some(sub) = c.subcomponent(inst) else {
                return Resolution::Err(
                    Code::Unresolved,
                    format!("component `{}` has no subcomponent `{inst}`", c.name),
                );
            };
            let Some(ty) = model.component(&sub.type_ref) else {
                return Resolution::Silent;
            };
            match ty.port(&ep.port) {
                Some(p) => {
                    Resolution::Ok(Resolved { side: Side::Sub, direction: p.direction, message_type: &p.message_type })
                }
                None => Resolution::Err(
                    Code::Unresolved,
                    format!("subcomponent `{inst}` of type `{}` has no port `{}`", ty.name, ep.port),
                ),
            }
        }
        _ => Resolution::Err(
            Code::Encapsulation,
            format!(
                "`{ep}` reaches below the immediate subcomponents of `{}`; only their interfaces are visible",
                c.name
            ),
        ),
    }
}

fn check_component(model: &ArchitectureModel, c: &ComponentTypeDef, diags: &mut Vec<Diagnostic>) {
    let origin = c.origin.as_str();
    let err = |diags: &mut Vec<Diagnostic>, code, pos, msg: String| {
        diags.push(Diagnostic::error(code, origin, pos, msg));
    };

    for p in &c.ports {
        if model.message(&p.message_type).is_none() {
            err(diags, Code::Unresolved, p.pos, format!("unknown message type `{}`", p.message_type));
        }
        if p.replicating && p.direction == Direction::In {
            err(
                diags,
                Code::ReplPort,
                p.pos,
                format!("in-port `{}` cannot be replicating; only out-ports select receivers", p.name),
            );
        }
    }
    for s in &c.subcomponents {
        if model.component(&s.type_ref).is_none() {
            err(diags, Code::Unresolved, s.pos, format!("unknown component type `{}`", s.type_ref));
        }
    }

    match (c.is_decomposed(), &c.behavior) {
        (true, Some(b)) => err(
            diags,
            Code::Behavior,
            b.pos,
            format!("decomposed component `{}` cannot also declare a behavior", c.name),
        ),
        (false, None) => {
            err(diags, Code::Behavior, c.pos, format!("atomic component `{}` needs a behavior clause", c.name))
        }
        _ => {}
    }

    let mut seen: HashSet<(&Endpoint, &Endpoint)> = HashSet::new();
    for k in &c.connectors {
        let src = resolve(model, c, &k.source);
        let tgt = resolve(model, c, &k.target);
        let mut resolved = true;
        for r in [&src, &tgt] {
            match r {
                Resolution::Err(code, msg) => {
                    err(diags, *code, k.pos, msg.clone());
                    resolved = false;
                }
                Resolution::Silent => resolved = false,
                Resolution::Ok(_) => {}
            }
        }
        if let (true, Resolution::Ok(s), Resolution::Ok(t)) = (resolved, &src, &tgt) {
            let legal = match (s.side, s.direction, t.side, t.direction) {
                (Side::Own, Direction::In, Side::Sub, Direction::In) => true,
                (Side::Sub, Direction::Out, Side::Sub, Direction::In) => k.source.path != k.target.path,
                (Side::Sub, Direction::Out, Side::Own, Direction::Out) => true,
                _ => false,
            };
            if !legal {
                err(
                    diags,
                    Code::Direction,
                    k.pos,
                    format!(
                        "connector `{} -> {}` is not one of own-in -> sub-in, sub-out -> other-sub-in, sub-out -> own-out",
                        k.source, k.target
                    ),
                );
            }
            if s.message_type != t.message_type {
                err(
                    diags,
                    Code::TypeMismatch,
                    k.pos,
                    format!(
                        "connector `{} -> {}` joins `{}` to `{}`",
                        k.source, k.target, s.message_type, t.message_type
                    ),
                );
            }
        }
        if !seen.insert((&k.source, &k.target)) {
            err(diags, Code::DupConnect, k.pos, format!("`{} -> {}` is connected more than once", k.source, k.target));
        }
    }

    for ctx in &c.contexts {
        let mut opened: HashSet<(&Endpoint, &Endpoint)> = HashSet::new();
        let mut closed: HashSet<(&Endpoint, &Endpoint)> = HashSet::new();
        for (gates, set, other) in [(&ctx.opening, &mut opened, "open"), (&ctx.closing, &mut closed, "close")] {
            for g in gates {
                if !c.connectors.iter().any(|k| k.matches(g)) {
                    err(
                        diags,
                        Code::GateRef,
                        g.pos,
                        format!(
                            "context `{}` gates `{} -> {}`, which is not a connector of `{}`",
                            ctx.name, g.source, g.target, c.name
                        ),
                    );
                } else if !set.insert((&g.source, &g.target)) {
                    err(
                        diags,
                        Code::GateRef,
                        g.pos,
                        format!("context `{}` lists `{other}` gate `{} -> {}` twice", ctx.name, g.source, g.target),
                    );
                }
            }
        }
        for g in &ctx.closing {
            if opened.contains(&(&g.source, &g.target)) {
                err(
                    diags,
                    Code::GateRef,
                    g.pos,
                    format!("context `{}` both opens and closes on `{} -> {}`", ctx.name, g.source, g.target),
                );
            }
        }
    }
}

/// Reports each containment cycle once, at the subcomponent declaration
/// that closes it.
fn check_recursion(model: &ArchitectureModel, diags: &mut Vec<Diagnostic>) {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'m>(
        model: &'m ArchitectureModel,
        name: &'m str,
        marks: &mut HashMap<&'m str, Mark>,
        diags: &mut Vec<Diagnostic>,
    ) {
        let Some(c) = model.component(name) else { return };
        marks.insert(name, Mark::Active);
        for s in &c.subcomponents {
            match marks.get(s.type_ref.as_str()) {
                Some(Mark::Active) => diags.push(Diagnostic::error(
                    Code::Recursion,
                    &c.origin,
                    s.pos,
                    format!("subcomponent `{}` of type `{}` makes `{}` contain itself", s.name, s.type_ref, s.type_ref),
                )),
                Some(Mark::Done) => {}
                None => visit(model, &s.type_ref, marks, diags),
            }
        }
        marks.insert(name, Mark::Done);
    }
    let mut marks = HashMap::new();
    for name in model.component_types.keys() {
        if !marks.contains_key(name.as_str()) {
            visit(model, name, &mut marks, diags);
        }
    }
}
