//! The discrete-step kernel.
//!
//! Each step delivers every in-flight message whose arrival step has come, in
//! the order `(arrive step, channel id, seq)`, then activates the receivers
//! once per queued message in the same order. Latency is at least one step,
//! so nothing sent during a step is delivered in that step.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::replica::{EmptyGroup, ReplicaGroup, ReplicaId, RoundRobin};
use super::trace::{ContextToken, Event, EventKind, StreamLog, TokenSet};
use crate::adl::{ArchitectureModel, MessageTypeDef};
use crate::analyzer::{ChannelEnd, ErrorStrategy, GateKind, NodeId, RuntimeTopology};
use crate::behaviors::{Action, Activation, Behavior, BehaviorError, Directive, Registry, State};
use crate::value::Payload;

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("`{path}`: {source}")]
    Behavior { path: String, source: BehaviorError },
    #[error("`{0}` is replicated inside another replicated subcomponent")]
    NestedReplication(String),
    #[error("type error on `{channel}`: {reason}")]
    TypeError { channel: String, reason: String },
    #[error("bad directive: {0}")]
    BadDirective(String),
    #[error(transparent)]
    EmptyGroup(#[from] EmptyGroup),
    #[error("error `{kind}` raised in `{instance}` reached the root unhandled")]
    FatalUnhandled { instance: String, kind: String },
    #[error("no root port `{0}`")]
    UnknownPort(String),
    #[error("no instance `{0}`")]
    UnknownInstance(String),
    #[error("`{0}` is not a replica group")]
    NotAGroup(String),
    #[error("scale target must be at least 1")]
    BadScale,
}

impl KernelError {
    /// The error kind a behavior's faulty emission is raised as.
    fn fault_kind(&self) -> &'static str {
        match self {
            KernelError::TypeError { .. } => "type_error",
            KernelError::EmptyGroup(_) => "empty_group",
            _ => "bad_directive",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct KernelConfig {
    pub seed: u64,
    /// Initial replica counts by group path; groups not listed start at 1.
    pub initial_replicas: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceKey {
    pub node: NodeId,
    pub replica: ReplicaId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub channel: usize,
    pub payload: Payload,
    pub tokens: TokenSet,
    pub seq: u64,
    pub send_step: u64,
    pub arrive_step: u64,
    /// Replica the message must reach, if any.
    pub pinned: Option<ReplicaId>,
}

type OrderKey = (u64, usize, u64);

#[derive(Debug)]
struct InFlight {
    key: OrderKey,
    msg: Message,
}

impl PartialEq for InFlight {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for InFlight {}
impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for InFlight {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

#[derive(Debug)]
pub struct RuntimeInstance {
    pub key: InstanceKey,
    pub state: State,
    pub queues: BTreeMap<String, VecDeque<Message>>,
    pub held_tokens: TokenSet,
    pub retiring: bool,
    rng: ChaCha8Rng,
    rng_seed: u64,
}

impl RuntimeInstance {
    pub fn is_idle(&self) -> bool {
        self.queues.values().all(VecDeque::is_empty)
    }
}

#[derive(Debug)]
struct OutPort {
    message_type: String,
    replicating: bool,
    channels: Vec<usize>,
}

#[derive(Debug)]
struct AtomicInfo {
    behavior: Box<dyn Behavior>,
    in_ports: Vec<String>,
    out_ports: BTreeMap<String, OutPort>,
}

/// A send the kernel has validated but not yet performed.
#[derive(Debug)]
struct PlannedSend {
    channel: usize,
    payload: Payload,
    pinned: Option<ReplicaId>,
}

#[derive(Debug)]
pub struct Kernel {
    topo: RuntimeTopology,
    messages: BTreeMap<String, MessageTypeDef>,
    atomics: BTreeMap<NodeId, AtomicInfo>,
    channel_rank: Vec<usize>,
    seed: u64,
    step: u64,
    next_seq: u64,
    mint: BTreeMap<String, u64>,
    in_flight: BinaryHeap<Reverse<InFlight>>,
    instances: BTreeMap<InstanceKey, RuntimeInstance>,
    groups: BTreeMap<NodeId, ReplicaGroup>,
    log: StreamLog,
    outputs: BTreeMap<String, Vec<Payload>>,
    fatal: Option<(String, String)>,
}

fn instance_seed(seed: u64, path: &str, replica: ReplicaId) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in path.bytes().chain(replica.0.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ seed.rotate_left(29)
}

impl Kernel {
    pub fn new(
        model: &ArchitectureModel,
        topo: RuntimeTopology,
        registry: &Registry,
        config: &KernelConfig,
    ) -> Result<Self, KernelError> {
        let mut atomics = BTreeMap::new();
        for id in topo.atomics() {
            let node = topo.node(id);
            let def =
                model.component(&node.type_name).ok_or_else(|| KernelError::UnknownInstance(node.path.clone()))?;
            let behavior = registry
                .build(model, def)
                .map_err(|source| KernelError::Behavior { path: node.path.clone(), source })?;
            let in_ports = def.in_ports().map(|p| p.name.clone()).collect();
            let mut out_ports = BTreeMap::new();
            for p in def.out_ports() {
                let end = ChannelEnd::Port { node: id, port: p.name.clone() };
                out_ports.insert(
                    p.name.clone(),
                    OutPort {
                        message_type: p.message_type.clone(),
                        replicating: p.replicating,
                        channels: topo.channels_from(&end).map(|(i, _)| i).collect(),
                    },
                );
            }
            atomics.insert(id, AtomicInfo { behavior, in_ports, out_ports });
        }

        let mut order: Vec<usize> = (0..topo.channels.len()).collect();
        order.sort_by(|a, b| topo.channels[*a].id.cmp(&topo.channels[*b].id));
        let mut channel_rank = vec![0; order.len()];
        for (rank, idx) in order.into_iter().enumerate() {
            channel_rank[idx] = rank;
        }

        let mut groups = BTreeMap::new();
        for (i, node) in topo.nodes.iter().enumerate() {
            let id = NodeId(i);
            if let Some(spec) = &node.replica_group {
                if node.parent.and_then(|p| topo.group_of(p)).is_some() {
                    return Err(KernelError::NestedReplication(node.path.clone()));
                }
                let n = config.initial_replicas.get(&node.path).copied().unwrap_or(spec.initial);
                if n == 0 {
                    return Err(KernelError::BadScale);
                }
                groups.insert(id, ReplicaGroup::new(node.path.clone(), n, Box::new(RoundRobin)));
            }
        }

        let messages = model.message_types.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let mut k = Kernel {
            topo,
            messages,
            atomics,
            channel_rank,
            seed: config.seed,
            step: 0,
            next_seq: 1,
            mint: BTreeMap::new(),
            in_flight: BinaryHeap::new(),
            instances: BTreeMap::new(),
            groups,
            log: StreamLog::default(),
            outputs: BTreeMap::new(),
            fatal: None,
        };
        let ids: Vec<NodeId> = k.atomics.keys().copied().collect();
        for id in ids {
            match k.topo.group_of(id) {
                Some(g) => {
                    let replicas: Vec<ReplicaId> = k.groups[&g].replicas.iter().map(|r| r.id).collect();
                    for r in replicas {
                        k.create_instance(InstanceKey { node: id, replica: r });
                    }
                }
                None => k.create_instance(InstanceKey { node: id, replica: ReplicaId(0) }),
            }
        }
        Ok(k)
    }

    fn create_instance(&mut self, key: InstanceKey) {
        let info = &self.atomics[&key.node];
        let rng_seed = instance_seed(self.seed, &self.topo.node(key.node).path, key.replica);
        let queues = info.in_ports.iter().map(|p| (p.clone(), VecDeque::new())).collect();
        let inst = RuntimeInstance {
            key,
            state: info.behavior.initial_state(),
            queues,
            held_tokens: TokenSet::new(),
            retiring: false,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            rng_seed,
        };
        self.instances.insert(key, inst);
    }

    pub fn topology(&self) -> &RuntimeTopology {
        &self.topo
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn log(&self) -> &StreamLog {
        &self.log
    }

    pub fn into_log(self) -> StreamLog {
        self.log
    }

    pub fn instances(&self) -> impl Iterator<Item = &RuntimeInstance> {
        self.instances.values()
    }

    pub fn instance(&self, key: InstanceKey) -> Option<&RuntimeInstance> {
        self.instances.get(&key)
    }

    pub fn group(&self, path: &str) -> Option<&ReplicaGroup> {
        self.topo.find(path).and_then(|id| self.groups.get(&id))
    }

    pub fn mint_counter(&self, context: &str) -> u64 {
        self.mint.get(context).copied().unwrap_or(1)
    }

    /// Payloads delivered to root out-port `port`, in delivery order.
    pub fn output(&self, port: &str) -> &[Payload] {
        self.outputs.get(port).map_or(&[], Vec::as_slice)
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn is_quiescent(&self) -> bool {
        self.in_flight.is_empty() && self.instances.values().all(RuntimeInstance::is_idle)
    }

    pub fn is_halted(&self) -> bool {
        self.fatal.is_some()
    }

    /// The path with the replica index after the group segment, as in
    /// `root/store[1]` or `root/a[1]/x`; plain paths outside groups.
    pub fn label(&self, node: NodeId, replica: ReplicaId) -> String {
        let path = &self.topo.node(node).path;
        match self.topo.group_of(node) {
            Some(g) => {
                let gp = &self.topo.node(g).path;
                format!("{gp}[{replica}]{}", &path[gp.len()..])
            }
            None => path.clone(),
        }
    }

    /// Stored rows of every replica of `path`, ordered by message seq.
    pub fn store_rows(&self, path: &str) -> Option<Vec<Payload>> {
        let node = self.topo.find(path)?;
        let info = self.atomics.get(&node)?;
        let mut rows: Vec<(u64, Payload)> = Vec::new();
        let mut any = false;
        for inst in self.instances.values().filter(|i| i.key.node == node) {
            if let Some(r) = info.behavior.rows(&inst.state) {
                any = true;
                rows.extend(r.iter().cloned());
            }
        }
        if !any {
            return None;
        }
        rows.sort_by_key(|(seq, _)| *seq);
        Some(rows.into_iter().map(|(_, p)| p).collect())
    }

    /// Paths of atomic instances whose behavior keeps rows.
    pub fn store_paths(&self) -> Vec<String> {
        self.atomics
            .iter()
            .filter(|(id, info)| {
                let inst = self.instances.values().find(|i| i.key.node == **id);
                inst.is_some_and(|i| info.behavior.rows(&i.state).is_some())
            })
            .map(|(id, _)| self.topo.node(*id).path.clone())
            .collect()
    }

    fn event(&mut self, kind: EventKind, subject: String, seq: Option<u64>, tokens: Vec<ContextToken>, detail: String) {
        self.log.push(Event { step: self.step, kind, subject, seq, tokens, payload: None, detail });
    }

    /// Applies the channel's gates to `tokens`, logging MINT and STRIP.
    pub fn apply_gates(&mut self, channel: usize, seq: u64, mut tokens: TokenSet) -> TokenSet {
        let gates = self.topo.channels[channel].gates.clone();
        let id = self.topo.channels[channel].id.clone();
        for gate in gates {
            match gate.kind {
                GateKind::Open => {
                    let counter = self.mint.entry(gate.context.clone()).or_insert(1);
                    let t = ContextToken::new(gate.context, *counter);
                    *counter += 1;
                    tokens.insert(t.clone());
                    self.event(EventKind::Mint, id.clone(), Some(seq), vec![t], String::new());
                }
                GateKind::Close => {
                    let stripped: Vec<ContextToken> =
                        tokens.iter().filter(|t| t.context == gate.context).cloned().collect();
                    if !stripped.is_empty() {
                        tokens.retain(|t| t.context != gate.context);
                        self.event(EventKind::Strip, id.clone(), Some(seq), stripped, String::new());
                    }
                }
            }
        }
        tokens
    }

    fn conform(&self, channel: usize, payload: &Payload) -> Result<Payload, KernelError> {
        let ch = &self.topo.channels[channel];
        let ty = self.messages.get(&ch.message_type).ok_or_else(|| KernelError::TypeError {
            channel: ch.id.clone(),
            reason: format!("unknown message type `{}`", ch.message_type),
        })?;
        ty.conform(payload).map_err(|e| KernelError::TypeError { channel: ch.id.clone(), reason: e.to_string() })
    }

    /// Puts a message on `channel`. Returns its seq.
    pub fn send(&mut self, channel: usize, payload: Payload, tokens: TokenSet) -> Result<u64, KernelError> {
        self.send_pinned(channel, payload, tokens, None)
    }

    fn send_pinned(
        &mut self,
        channel: usize,
        payload: Payload,
        tokens: TokenSet,
        pinned: Option<ReplicaId>,
    ) -> Result<u64, KernelError> {
        let payload = self.conform(channel, &payload)?;
        let seq = self.next_seq;
        self.next_seq += 1;
        let tokens = self.apply_gates(channel, seq, tokens);
        let ch = &self.topo.channels[channel];
        let arrive_step = self.step + ch.latency.max(1);
        self.log.push(Event {
            step: self.step,
            kind: EventKind::Send,
            subject: ch.id.clone(),
            seq: Some(seq),
            tokens: tokens.iter().cloned().collect(),
            payload: Some(payload.clone()),
            detail: String::new(),
        });
        let msg = Message { channel, payload, tokens, seq, send_step: self.step, arrive_step, pinned };
        let key = (arrive_step, self.channel_rank[channel], seq);
        self.in_flight.push(Reverse(InFlight { key, msg }));
        Ok(seq)
    }

    /// Sends `payload` into the system through root in-port `port`.
    pub fn inject(&mut self, port: &str, payload: Payload) -> Result<Vec<u64>, KernelError> {
        let end = ChannelEnd::External { port: port.to_string() };
        let chans: Vec<usize> = self.topo.channels_from(&end).map(|(i, _)| i).collect();
        if self.topo.external(port).is_none() {
            return Err(KernelError::UnknownPort(port.to_string()));
        }
        let mut seqs = Vec::new();
        for c in chans {
            seqs.push(self.send(c, payload.clone(), TokenSet::new())?);
        }
        Ok(seqs)
    }

    fn target_group(&self, channel: usize) -> Option<NodeId> {
        match &self.topo.channels[channel].to {
            ChannelEnd::Port { node, .. } => self.topo.group_of(*node),
            ChannelEnd::External { .. } => None,
        }
    }

    /// Live receivers behind a replicating out-port of an atomic node.
    pub fn receiver_count(&self, node: NodeId, port: &str) -> Result<usize, KernelError> {
        let out = self
            .atomics
            .get(&node)
            .and_then(|a| a.out_ports.get(port))
            .ok_or_else(|| KernelError::BadDirective(format!("no out-port `{port}`")))?;
        if !out.replicating {
            return Err(KernelError::BadDirective(format!("`{port}` is not replicating")));
        }
        Ok(match out.channels.first() {
            None => 0,
            Some(c) => match self.target_group(*c) {
                Some(g) => self.groups[&g].active_count(),
                None => 1,
            },
        })
    }

    fn receiver_counts(&self, node: NodeId) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for (name, out) in &self.atomics[&node].out_ports {
            if out.replicating {
                if let Ok(n) = self.receiver_count(node, name) {
                    counts.insert(name.clone(), n);
                }
            }
        }
        counts
    }

    fn plan_emit(
        &self,
        from: InstanceKey,
        port: &str,
        payload: &Payload,
        directive: Directive,
    ) -> Result<Vec<PlannedSend>, KernelError> {
        let out = self
            .atomics
            .get(&from.node)
            .and_then(|a| a.out_ports.get(port))
            .ok_or_else(|| KernelError::BadDirective(format!("no out-port `{port}`")))?;
        if directive != Directive::Default && !out.replicating {
            return Err(KernelError::BadDirective(format!("`{port}` is not replicating")));
        }
        let ty = self.messages.get(&out.message_type);
        if let Some(ty) = ty {
            ty.conform(payload).map_err(|e| KernelError::TypeError {
                channel: format!("{}.{port}", self.label(from.node, from.replica)),
                reason: e.to_string(),
            })?;
        }
        let sender_group = self.topo.group_of(from.node);
        let mut plan = Vec::new();
        for &c in &out.channels {
            let target = self.target_group(c);
            let group = target.map(|g| &self.groups[&g]);
            let same_group = target.is_some() && target == sender_group;
            match directive {
                Directive::Default => {
                    let pinned = same_group.then_some(from.replica);
                    plan.push(PlannedSend { channel: c, payload: payload.clone(), pinned });
                }
                Directive::Index(i) => {
                    let pinned = match group {
                        Some(g) => {
                            let active = g.active();
                            let r = active.get(i).ok_or_else(|| {
                                KernelError::BadDirective(format!(
                                    "index {i} out of range for `{}` of size {}",
                                    g.path,
                                    active.len()
                                ))
                            })?;
                            Some(*r)
                        }
                        None if i == 0 => None,
                        None => return Err(KernelError::BadDirective(format!("index {i} out of range for size 1"))),
                    };
                    plan.push(PlannedSend { channel: c, payload: payload.clone(), pinned });
                }
                Directive::Broadcast => match group {
                    Some(g) => {
                        for r in g.active() {
                            plan.push(PlannedSend { channel: c, payload: payload.clone(), pinned: Some(r) });
                        }
                    }
                    None => plan.push(PlannedSend { channel: c, payload: payload.clone(), pinned: None }),
                },
            }
        }
        Ok(plan)
    }

    /// Emits on an out-port of `from` with the given tokens and directive.
    pub fn emit_directed(
        &mut self,
        from: InstanceKey,
        port: &str,
        payload: Payload,
        directive: Directive,
        tokens: &TokenSet,
    ) -> Result<Vec<u64>, KernelError> {
        let plan = self.plan_emit(from, port, &payload, directive)?;
        self.perform(plan, tokens)
    }

    fn perform(&mut self, plan: Vec<PlannedSend>, tokens: &TokenSet) -> Result<Vec<u64>, KernelError> {
        let mut seqs = Vec::with_capacity(plan.len());
        for p in plan {
            seqs.push(self.send_pinned(p.channel, p.payload, handover(tokens), p.pinned)?);
        }
        Ok(seqs)
    }

    fn deliver(&mut self, msg: Message) -> Result<(), KernelError> {
        let ch = &self.topo.channels[msg.channel];
        match ch.to.clone() {
            ChannelEnd::External { port } => {
                self.log.push(Event {
                    step: self.step,
                    kind: EventKind::Deliver,
                    subject: format!("ext.{port}"),
                    seq: Some(msg.seq),
                    tokens: msg.tokens.iter().cloned().collect(),
                    payload: Some(msg.payload.clone()),
                    detail: String::new(),
                });
                self.outputs.entry(port).or_default().push(msg.payload);
            }
            ChannelEnd::Port { node, port } => {
                let replica = match self.topo.group_of(node) {
                    None => ReplicaId(0),
                    Some(g) => {
                        let group = self.groups.get_mut(&g).expect("group exists");
                        let (replica, newly) = match msg.pinned {
                            Some(r) if group.contains(r) => (r, group.bind(&msg.tokens, r)),
                            _ => {
                                let s = group.select(&msg.tokens)?;
                                (s.replica, s.newly_bound)
                            }
                        };
                        if !newly.is_empty() {
                            let subject = self.label(g, replica);
                            self.event(EventKind::Bind, subject, Some(msg.seq), newly, String::new());
                        }
                        replica
                    }
                };
                let key = InstanceKey { node, replica };
                self.log.push(Event {
                    step: self.step,
                    kind: EventKind::Deliver,
                    subject: format!("{}.{port}", self.label(node, replica)),
                    seq: Some(msg.seq),
                    tokens: msg.tokens.iter().cloned().collect(),
                    payload: Some(msg.payload.clone()),
                    detail: String::new(),
                });
                let inst = self
                    .instances
                    .get_mut(&key)
                    .ok_or_else(|| KernelError::UnknownInstance(format!("{node:?}/{replica}")))?;
                inst.held_tokens.extend(msg.tokens.iter().cloned());
                inst.queues.entry(port).or_default().push_back(msg);
            }
        }
        Ok(())
    }

    /// One step: deliveries, activations, deferred retirements.
    pub fn step(&mut self) -> Result<(), KernelError> {
        if let Some((instance, kind)) = &self.fatal {
            return Err(KernelError::FatalUnhandled { instance: instance.clone(), kind: kind.clone() });
        }
        while self.in_flight.peek().is_some_and(|m| m.0.key.0 <= self.step) {
            let Reverse(f) = self.in_flight.pop().expect("peeked");
            self.deliver(f.msg)?;
        }

        let mut pending: BinaryHeap<Reverse<(OrderKey, InstanceKey, String)>> = BinaryHeap::new();
        for inst in self.instances.values() {
            for (port, q) in &inst.queues {
                for m in q {
                    let key = (m.arrive_step, self.channel_rank[m.channel], m.seq);
                    pending.push(Reverse((key, inst.key, port.clone())));
                }
            }
        }
        while let Some(Reverse((_, key, port))) = pending.pop() {
            let Some(inst) = self.instances.get_mut(&key) else { continue };
            let Some(msg) = inst.queues.get_mut(&port).and_then(VecDeque::pop_front) else { continue };
            self.activate(key, &port, msg)?;
        }

        self.retire_ready();
        self.step += 1;
        Ok(())
    }

    fn activate(&mut self, key: InstanceKey, port: &str, msg: Message) -> Result<(), KernelError> {
        let counts = self.receiver_counts(key.node);
        let info = &self.atomics[&key.node];
        let inst = self.instances.get_mut(&key).expect("instance exists");
        let mut cx = Activation { receiver_counts: &counts, rng: &mut inst.rng, seq: msg.seq };
        let actions = info.behavior.handle(&inst.state, port, &msg.payload, &mut cx);

        // A raising activation keeps its state change but emits nothing.
        if let Some(kind) = actions.iter().find_map(|a| match a {
            Action::Raise(k) => Some(k.clone()),
            _ => None,
        }) {
            if let Some(s) = actions.into_iter().rev().find_map(|a| match a {
                Action::SetState(s) => Some(s),
                _ => None,
            }) {
                self.instances.get_mut(&key).expect("instance exists").state = s;
            }
            return self.escalate(key, &kind, Some(msg.seq));
        }

        let mut plan = Vec::new();
        let mut new_state = None;
        for a in actions {
            match a {
                Action::Emit { port, payload, directive } => match self.plan_emit(key, &port, &payload, directive) {
                    Ok(p) => plan.extend(p),
                    Err(e) => return self.escalate(key, e.fault_kind(), Some(msg.seq)),
                },
                Action::SetState(s) => new_state = Some(s),
                Action::Raise(_) | Action::None => {}
            }
        }
        if let Some(s) = new_state {
            self.instances.get_mut(&key).expect("instance exists").state = s;
        }
        self.perform(plan, &msg.tokens)?;
        Ok(())
    }

    /// Handles an error raised in `key`: each level's strategy either resolves
    /// it or passes it to the parent, which then acts on the whole child
    /// subtree the error came from.
    pub fn escalate(&mut self, key: InstanceKey, kind: &str, seq: Option<u64>) -> Result<(), KernelError> {
        let origin = self.label(key.node, key.replica);
        self.event(EventKind::Raise, origin.clone(), seq, Vec::new(), kind.to_string());
        let mut owner = key.node;
        let mut subtree = key.node;
        loop {
            match self.topo.node(owner).strategy {
                ErrorStrategy::Resume => return Ok(()),
                ErrorStrategy::Restart => {
                    self.restart(subtree, key.replica);
                    return Ok(());
                }
                ErrorStrategy::Escalate => match self.topo.node(owner).parent {
                    Some(parent) => {
                        let from = self.label(owner, key.replica);
                        let to = self.label(parent, key.replica);
                        self.event(EventKind::Escalate, from, seq, Vec::new(), format!("to={to}"));
                        subtree = owner;
                        owner = parent;
                    }
                    None => {
                        let root = self.label(owner, key.replica);
                        self.event(EventKind::Fatal, root, seq, Vec::new(), format!("kind={kind} from={origin}"));
                        self.fatal = Some((origin.clone(), kind.to_string()));
                        return Err(KernelError::FatalUnhandled { instance: origin, kind: kind.to_string() });
                    }
                },
            }
        }
    }

    /// Resets every atomic instance under `subtree` to its initial state.
    /// Inside a replica group only the faulting replica is touched.
    fn restart(&mut self, subtree: NodeId, replica: ReplicaId) {
        let scoped = self.topo.group_of(subtree).is_some();
        let keys: Vec<InstanceKey> = self
            .instances
            .keys()
            .filter(|k| self.topo.is_within(k.node, subtree) && (!scoped || k.replica == replica))
            .copied()
            .collect();
        for k in keys {
            let initial = self.atomics[&k.node].behavior.initial_state();
            let inst = self.instances.get_mut(&k).expect("instance exists");
            inst.state = initial;
            inst.held_tokens.clear();
            inst.rng = ChaCha8Rng::seed_from_u64(inst.rng_seed);
        }
        let subject = self.label(subtree, replica);
        self.event(EventKind::Restart, subject, None, Vec::new(), String::new());
    }

    /// Injects an error into an instance given as `path` or `path[r]`.
    pub fn inject_fault(&mut self, instance: &str, kind: &str) -> Result<(), KernelError> {
        let key = self.resolve_instance(instance)?;
        self.escalate(key, kind, None)
    }

    pub fn resolve_instance(&self, instance: &str) -> Result<InstanceKey, KernelError> {
        let unknown = || KernelError::UnknownInstance(instance.to_string());
        let (path, replica) = match instance.split_once('[').and_then(|(a, b)| Some((a, b.split_once(']')?))) {
            Some((head, (r, tail))) => (format!("{head}{tail}"), Some(ReplicaId(r.parse().map_err(|_| unknown())?))),
            None => (instance.to_string(), None),
        };
        let node = self.topo.find(&path).ok_or_else(unknown)?;
        let replica = match (self.topo.group_of(node), replica) {
            (None, None) => ReplicaId(0),
            (None, Some(_)) => return Err(unknown()),
            (Some(g), Some(r)) if self.groups[&g].contains(r) => r,
            (Some(_), Some(_)) => return Err(unknown()),
            (Some(g), None) => self.groups[&g].replicas.first().map(|r| r.id).ok_or_else(unknown)?,
        };
        Ok(InstanceKey { node, replica })
    }

    /// Grows or shrinks the replica group at `path` towards `target`.
    pub fn scale(&mut self, path: &str, target: usize) -> Result<(), KernelError> {
        if target == 0 {
            return Err(KernelError::BadScale);
        }
        let g = self.topo.find(path).ok_or_else(|| KernelError::UnknownInstance(path.to_string()))?;
        let group = self.groups.get_mut(&g).ok_or_else(|| KernelError::NotAGroup(path.to_string()))?;
        let active = group.active_count();
        let retiring = group.size() - active;
        if target == active && retiring == 0 {
            return Ok(());
        }
        let mut created = Vec::new();
        if target > active {
            let mut need = target - active;
            for r in group.replicas.iter_mut().filter(|r| r.retiring) {
                if need == 0 {
                    break;
                }
                r.retiring = false;
                need -= 1;
            }
            for _ in 0..need {
                created.push(group.add_replica());
            }
        } else {
            let mut extra = active - target;
            for r in group.replicas.iter_mut().rev().filter(|r| !r.retiring) {
                if extra == 0 {
                    break;
                }
                r.retiring = true;
                extra -= 1;
            }
        }
        let flags: Vec<(ReplicaId, bool)> = group.replicas.iter().map(|r| (r.id, r.retiring)).collect();
        let members: Vec<NodeId> = self.topo.subtree(g).into_iter().filter(|n| self.atomics.contains_key(n)).collect();
        for r in created {
            for &n in &members {
                self.create_instance(InstanceKey { node: n, replica: r });
            }
        }
        for (r, retiring) in flags {
            for &n in &members {
                if let Some(i) = self.instances.get_mut(&InstanceKey { node: n, replica: r }) {
                    i.retiring = retiring;
                }
            }
        }
        self.retire_group(g, Some(target));
        Ok(())
    }

    fn retire_ready(&mut self) {
        let ids: Vec<NodeId> =
            self.groups.iter().filter(|(_, g)| g.replicas.iter().any(|r| r.retiring)).map(|(id, _)| *id).collect();
        for g in ids {
            self.retire_group(g, None);
        }
    }

    /// Retires every retiring replica of `g` that is idle, holds no tokens
    /// and has no pinned message in flight. Logs SCALE when a scale command
    /// was given or a replica went away.
    fn retire_group(&mut self, g: NodeId, command: Option<usize>) {
        let candidates: Vec<ReplicaId> = self.groups[&g].replicas.iter().filter(|r| r.retiring).map(|r| r.id).collect();
        let mut retired = Vec::new();
        for r in candidates {
            let members: Vec<InstanceKey> =
                self.instances.keys().filter(|k| k.replica == r && self.topo.is_within(k.node, g)).copied().collect();
            let busy = members.iter().any(|k| {
                let i = &self.instances[k];
                !i.is_idle() || !i.held_tokens.is_empty()
            });
            let pinned = self.in_flight.iter().any(|f| {
                f.0.msg.pinned == Some(r)
                    && matches!(&self.topo.channels[f.0.msg.channel].to,
                        ChannelEnd::Port { node, .. } if self.topo.is_within(*node, g))
            });
            if busy || pinned {
                continue;
            }
            for k in members {
                self.instances.remove(&k);
            }
            self.groups.get_mut(&g).expect("group").remove(r);
            retired.push(r);
        }
        if command.is_none() && retired.is_empty() {
            return;
        }
        let group = &self.groups[&g];
        let target = group.active_count();
        let deferred = group.size() - target;
        let mut detail = format!("size={} target={target}", group.size());
        if deferred > 0 {
            detail.push_str(&format!(" deferred={deferred}"));
        }
        if !retired.is_empty() {
            let ids: Vec<String> = retired.iter().map(|r| r.to_string()).collect();
            detail.push_str(&format!(" retired={}", ids.join(",")));
        }
        let path = self.topo.node(g).path.clone();
        self.event(EventKind::Scale, path, None, Vec::new(), detail);
    }

    /// Steps until quiescent or `max_steps` steps have run.
    pub fn run(&mut self, max_steps: u64) -> Result<(), KernelError> {
        for _ in 0..max_steps {
            if self.is_quiescent() {
                break;
            }
            self.step()?;
        }
        Ok(())
    }
}

/// Tokens for the emissions of one activation: all outputs are attributed
/// to the single incoming message, so each carries its tokens.
pub fn handover(incoming: &TokenSet) -> TokenSet {
    incoming.clone()
}
