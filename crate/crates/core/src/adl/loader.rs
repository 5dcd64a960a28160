use std::path::Path;

use super::ast::ArchitectureModel;
use super::parser::parse_model;
use crate::diag::{Code, Diagnostic, Pos};

/// Merges fragments in order. A name defined by two fragments is reported
/// at its second definition.
pub fn merge(fragments: impl IntoIterator<Item = ArchitectureModel>) -> Result<ArchitectureModel, Vec<Diagnostic>> {
    let mut model = ArchitectureModel::default();
    let mut diags = Vec::new();
    for frag in fragments {
        for (name, m) in frag.message_types {
            if let Some(prev) = model.message_types.get(&name) {
                diags.push(Diagnostic::error(
                    Code::Duplicate,
                    &m.origin,
                    m.pos,
                    format!("message type `{name}` is already defined in {}", prev.origin),
                ));
            } else {
                model.message_types.insert(name, m);
            }
        }
        for (name, c) in frag.component_types {
            if let Some(prev) = model.component_types.get(&name) {
                diags.push(Diagnostic::error(
                    Code::Duplicate,
                    &c.origin,
                    c.pos,
                    format!("component type `{name}` is already defined in {}", prev.origin),
                ));
            } else {
                model.component_types.insert(name, c);
            }
        }
    }
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(diags)
    }
}

/// Reads and parses every path, then merges the fragments. All files are
/// read even after a failure so that one run reports every problem.
pub fn load_files<P: AsRef<Path>>(paths: &[P]) -> Result<ArchitectureModel, Vec<Diagnostic>> {
    let mut fragments = Vec::new();
    let mut diags = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let origin = path.display().to_string();
        match std::fs::read_to_string(path) {
            Ok(text) => match parse_model(&text, &origin) {
                Ok(frag) => fragments.push(frag),
                Err(mut d) => diags.append(&mut d),
            },
            Err(e) => {
                diags.push(Diagnostic::error(Code::Io, &origin, Pos::new(1, 1), format!("cannot read file: {e}")))
            }
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    merge(fragments)
}
