//! Canonical text form of a model.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "  ";

/// Prints message types, then component types, each in declaration order.
/// Inside a component: ports, subcomponents, connectors, contexts, behavior.
pub fn pretty_print(model: &ArchitectureModel) -> String {
    let mut out = String::new();
    let mut first = true;
    for m in model.message_types.values() {
        if !first {
            out.push('\n');
        }
        first = false;
        print_message(&mut out, m);
    }
    for c in model.component_types.values() {
        if !first {
            out.push('\n');
        }
        first = false;
        print_component(&mut out, c);
    }
    out
}

fn print_message(out: &mut String, m: &MessageTypeDef) {
    let _ = writeln!(out, "message {} {{", m.name);
    for f in &m.fields {
        let _ = writeln!(out, "{INDENT}{}: {};", f.name, f.primitive);
    }
    out.push_str("}\n");
}

fn print_component(out: &mut String, c: &ComponentTypeDef) {
    let _ = writeln!(out, "component {} {{", c.name);
    for p in &c.ports {
        let _ = write!(out, "{INDENT}port {} {} {}", p.direction.as_str(), p.message_type, p.name);
        if p.replicating {
            out.push_str(" replicating");
        }
        out.push_str(";\n");
    }
    for s in &c.subcomponents {
        out.push_str(INDENT);
        if s.replicating {
            out.push_str("replicating ");
        }
        let _ = writeln!(out, "component {} {};", s.type_ref, s.name);
    }
    for k in &c.connectors {
        let _ = writeln!(out, "{INDENT}connect {} -> {};", k.source, k.target);
    }
    for ctx in &c.contexts {
        let _ = writeln!(out, "{INDENT}context {} {{", ctx.name);
        for g in &ctx.opening {
            let _ = writeln!(out, "{INDENT}{INDENT}open {} -> {};", g.source, g.target);
        }
        for g in &ctx.closing {
            let _ = writeln!(out, "{INDENT}{INDENT}close {} -> {};", g.source, g.target);
        }
        let _ = writeln!(out, "{INDENT}}}");
    }
    if let Some(b) = &c.behavior {
        let _ = write!(out, "{INDENT}behavior {}(", b.builtin);
        for (i, a) in b.args.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            if let Some(n) = &a.name {
                let _ = write!(out, "{n} = ");
            }
            let _ = write!(out, "{}", a.value);
        }
        out.push_str(");\n");
    }
    out.push_str("}\n");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adl::parse_model;

    #[test]
    fn minimal_canonical_form() {
        let m = parse_model("component Empty { }", "e.arc").unwrap();
        assert_eq!(pretty_print(&m), "component Empty {\n}\n");
    }

    #[test]
    fn keeps_replicating_and_string_escapes() {
        let src = r#"component S { port out M o replicating; replicating component T t;
                     behavior x(k = "a\"b\nc", -4); }"#;
        let m = parse_model(src, "s.arc").unwrap();
        let text = pretty_print(&m);
        assert!(text.contains("port out M o replicating;"));
        assert!(text.contains("replicating component T t;"));
        assert_eq!(parse_model(&text, "s.arc").unwrap(), m);
    }

    #[test]
    fn printing_is_idempotent() {
        let src = "message A{x:integer;b:boolean;}\ncomponent C{port in A i;behavior forward();}";
        let once = pretty_print(&parse_model(src, "a").unwrap());
        let twice = pretty_print(&parse_model(&once, "a").unwrap());
        assert_eq!(once, twice);
    }
}
