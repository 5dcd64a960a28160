//! Instantiation of the type hierarchy and fusion of connector chains.

use super::topology::*;
use crate::adl::{ArchitectureModel, ComponentTypeDef, ConnectorDecl, Direction, Endpoint};
use crate::diag::Diagnostic;

#[derive(Debug, thiserror::Error)]
pub enum ElaborateError {
    #[error("unknown root component type `{0}`")]
    UnknownRoot(String),
    #[error("model has {} error(s)", .0.len())]
    Rejected(Vec<Diagnostic>),
}

/// Builds the runtime topology rooted at `root_type`. The model is checked
/// first; a model with diagnostics is refused rather than half-elaborated.
pub fn elaborate(model: &ArchitectureModel, root_type: &str) -> Result<RuntimeTopology, ElaborateError> {
    let diags = super::check(model);
    if !diags.is_empty() {
        return Err(ElaborateError::Rejected(diags));
    }
    let root = model.component(root_type).ok_or_else(|| ElaborateError::UnknownRoot(root_type.to_string()))?;

    let mut e = Elaborator { model, nodes: Vec::new(), channels: Vec::new() };
    e.instantiate("root".to_string(), root, None, false);

    let external_ports = root
        .ports
        .iter()
        .map(|p| ExternalPort { name: p.name.clone(), direction: p.direction, message_type: p.message_type.clone() })
        .collect();

    let root_id = RuntimeTopology::ROOT;
    if root.is_decomposed() {
        for p in root.in_ports() {
            let start =
                Chain::start(ChannelEnd::External { port: p.name.clone() }, format!("ext.{}", p.name), &p.message_type);
            e.follow(root_id, &Endpoint::own(&p.name), start);
        }
    } else {
        for p in &root.ports {
            let (from, to) = match p.direction {
                Direction::In => (
                    ChannelEnd::External { port: p.name.clone() },
                    ChannelEnd::Port { node: root_id, port: p.name.clone() },
                ),
                Direction::Out => (
                    ChannelEnd::Port { node: root_id, port: p.name.clone() },
                    ChannelEnd::External { port: p.name.clone() },
                ),
            };
            let id = match p.direction {
                Direction::In => format!("ext.{0}>root.{0}", p.name),
                Direction::Out => format!("root.{0}>ext.{0}", p.name),
            };
            e.channels.push(ChannelSpec {
                id,
                from,
                to,
                message_type: p.message_type.clone(),
                gates: Vec::new(),
                latency: 1,
            });
        }
    }

    for idx in 0..e.nodes.len() {
        let node = &e.nodes[idx];
        if node.kind != NodeKind::Atomic || node.parent.is_none() {
            continue;
        }
        let ty = model.component(&node.type_name).expect("checked");
        let parent = node.parent.expect("non-root");
        let name = node.name().to_string();
        let path = node.path.clone();
        for p in ty.out_ports() {
            let start = Chain::start(
                ChannelEnd::Port { node: NodeId(idx), port: p.name.clone() },
                format!("{path}.{}", p.name),
                &p.message_type,
            );
            e.follow(parent, &Endpoint::sub(&name, &p.name), start);
        }
    }

    Ok(RuntimeTopology { root_type: root_type.to_string(), nodes: e.nodes, channels: e.channels, external_ports })
}

struct Elaborator<'m> {
    model: &'m ArchitectureModel,
    nodes: Vec<InstanceNode>,
    channels: Vec<ChannelSpec>,
}

#[derive(Clone)]
struct Chain {
    from: ChannelEnd,
    hops: Vec<String>,
    gates: Vec<Gate>,
    message_type: String,
}

impl Chain {
    fn start(from: ChannelEnd, label: String, message_type: &str) -> Self {
        Self { from, hops: vec![label], gates: Vec::new(), message_type: message_type.to_string() }
    }
}

fn gates_of(ty: &ComponentTypeDef, k: &ConnectorDecl) -> Vec<Gate> {
    let mut out = Vec::new();
    for ctx in &ty.contexts {
        if ctx.opening.iter().any(|g| k.matches(g)) {
            out.push(Gate { context: ctx.name.clone(), kind: GateKind::Open });
        }
        if ctx.closing.iter().any(|g| k.matches(g)) {
            out.push(Gate { context: ctx.name.clone(), kind: GateKind::Close });
        }
    }
    out
}

impl<'m> Elaborator<'m> {
    fn instantiate(
        &mut self,
        path: String,
        ty: &ComponentTypeDef,
        parent: Option<NodeId>,
        replicating: bool,
    ) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(InstanceNode {
            path: path.clone(),
            type_name: ty.name.clone(),
            kind: if ty.is_decomposed() { NodeKind::Supervisor } else { NodeKind::Atomic },
            parent,
            children: Vec::new(),
            replica_group: replicating.then(ReplicaGroupSpec::default),
            strategy: ErrorStrategy::default(),
        });
        for sub in &ty.subcomponents {
            let sub_ty = self.model.component(&sub.type_ref).expect("checked");
            let child = self.instantiate(format!("{path}/{}", sub.name), sub_ty, Some(id), sub.replicating);
            self.nodes[id.0].children.push(child);
        }
        id
    }

    fn child(&self, scope: NodeId, name: &str) -> NodeId {
        *self.nodes[scope.0].children.iter().find(|c| self.nodes[c.0].name() == name).expect("checked subcomponent")
    }

    /// Follows every connector of `scope`'s type whose source is `source`,
    /// descending into decomposed targets and ascending through own out-ports.
    fn follow(&mut self, scope: NodeId, source: &Endpoint, chain: Chain) {
        let ty = self.model.component(&self.nodes[scope.0].type_name).expect("checked");
        for k in ty.connectors.iter().filter(|k| &k.source == source) {
            let mut next = chain.clone();
            next.gates.extend(gates_of(ty, k));
            match k.target.path.as_slice() {
                [inst] => {
                    let child = self.child(scope, inst);
                    let label = format!("{}.{}", self.nodes[child.0].path, k.target.port);
                    next.hops.push(label);
                    if self.nodes[child.0].kind == NodeKind::Atomic {
                        self.finish(next, ChannelEnd::Port { node: child, port: k.target.port.clone() });
                    } else {
                        self.follow(child, &Endpoint::own(&k.target.port), next);
                    }
                }
                _ => match self.nodes[scope.0].parent {
                    None => {
                        next.hops.push(format!("ext.{}", k.target.port));
                        self.finish(next, ChannelEnd::External { port: k.target.port.clone() });
                    }
                    Some(parent) => {
                        let path = self.nodes[scope.0].path.clone();
                        next.hops.push(format!("{path}.{}", k.target.port));
                        let name = self.nodes[scope.0].name().to_string();
                        self.follow(parent, &Endpoint::sub(name, &k.target.port), next);
                    }
                },
            }
        }
    }

    fn finish(&mut self, chain: Chain, to: ChannelEnd) {
        self.channels.push(ChannelSpec {
            id: chain.hops.join(">"),
            from: chain.from,
            to,
            message_type: chain.message_type,
            gates: chain.gates,
            latency: 1,
        });
    }
}
