use std::fmt;

use crate::adl::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Supervisor,
    Atomic,
}

/// What an instance does with an error raised in it (or, for supervisors,
/// escalated to it from a child).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorStrategy {
    Resume,
    Restart,
    #[default]
    Escalate,
}

impl ErrorStrategy {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "resume" => Some(Self::Resume),
            "restart" => Some(Self::Restart),
            "escalate" => Some(Self::Escalate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaGroupSpec {
    pub initial: usize,
    pub policy: String,
}

impl Default for ReplicaGroupSpec {
    fn default() -> Self {
        Self { initial: 1, policy: "round_robin".to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceNode {
    /// `root`, `root/handler`, `root/p/a`, ...
    pub path: String,
    pub type_name: String,
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub replica_group: Option<ReplicaGroupSpec>,
    pub strategy: ErrorStrategy,
}

impl InstanceNode {
    pub fn name(&self) -> &str {
        self.path.rsplit('/').next().unwrap_or(&self.path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelEnd {
    Port { node: NodeId, port: String },
    External { port: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Open,
    Close,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Gate {
    pub context: String,
    pub kind: GateKind,
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            GateKind::Open => "open",
            GateKind::Close => "close",
        };
        write!(f, "{k} {}", self.context)
    }
}

/// A fused end-to-end channel. The id lists every port the connector chain
/// passes through, e.g. `ext.update>root/handler.update`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSpec {
    pub id: String,
    pub from: ChannelEnd,
    pub to: ChannelEnd,
    pub message_type: String,
    pub gates: Vec<Gate>,
    pub latency: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalPort {
    pub name: String,
    pub direction: Direction,
    pub message_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuntimeTopology {
    pub root_type: String,
    /// Pre-order; `nodes[0]` is the root.
    pub nodes: Vec<InstanceNode>,
    pub channels: Vec<ChannelSpec>,
    pub external_ports: Vec<ExternalPort>,
}

impl RuntimeTopology {
    pub const ROOT: NodeId = NodeId(0);

    pub fn node(&self, id: NodeId) -> &InstanceNode {
        &self.nodes[id.0]
    }

    pub fn find(&self, path: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.path == path).map(NodeId)
    }

    pub fn atomics(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.kind == NodeKind::Atomic).map(|(i, _)| NodeId(i))
    }

    pub fn external(&self, name: &str) -> Option<&ExternalPort> {
        self.external_ports.iter().find(|p| p.name == name)
    }

    /// The nearest ancestor-or-self that carries a replica group.
    pub fn group_of(&self, mut id: NodeId) -> Option<NodeId> {
        loop {
            let n = self.node(id);
            if n.replica_group.is_some() {
                return Some(id);
            }
            id = n.parent?;
        }
    }

    pub fn is_within(&self, mut id: NodeId, ancestor: NodeId) -> bool {
        loop {
            if id == ancestor {
                return true;
            }
            match self.node(id).parent {
                Some(p) => id = p,
                None => return false,
            }
        }
    }

    /// All nodes of the subtree rooted at `id`, in pre-order.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.node(out[i]).children.iter().copied());
            i += 1;
        }
        out.sort();
        out
    }

    pub fn end_label(&self, end: &ChannelEnd) -> String {
        match end {
            ChannelEnd::Port { node, port } => format!("{}.{port}", self.node(*node).path),
            ChannelEnd::External { port } => format!("ext.{port}"),
        }
    }

    /// Sets the latency of every channel whose id matches the glob `pattern`.
    /// Returns how many channels matched.
    pub fn set_latency(&mut self, pattern: &glob::Pattern, steps: u64) -> usize {
        let mut n = 0;
        for ch in &mut self.channels {
            if pattern.matches(&ch.id) {
                ch.latency = steps.max(1);
                n += 1;
            }
        }
        n
    }

    pub fn set_strategy(&mut self, path: &str, strategy: ErrorStrategy) -> bool {
        match self.find(path) {
            Some(id) => {
                self.nodes[id.0].strategy = strategy;
                true
            }
            None => false,
        }
    }

    pub fn channels_from<'a>(&'a self, end: &'a ChannelEnd) -> impl Iterator<Item = (usize, &'a ChannelSpec)> + 'a {
        self.channels.iter().enumerate().filter(move |(_, c)| &c.from == end)
    }
}
