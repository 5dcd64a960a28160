//! A sequential reference interpreter for cross-checking the kernel.
//!
//! Every group has one replica, every channel delivers immediately, and each
//! injection is followed through the whole system before the next one is
//! taken.

use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::scenario::LoadedScenario;
use crate::analyzer::{ChannelEnd, NodeId};
use crate::behaviors::{Action, Activation, Behavior, BehaviorError, Directive, Registry, State};
use crate::value::Payload;

/// Deliveries after which the oracle gives up on a cyclic model.
const BUDGET: usize = 1_000_000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OracleInapplicable {
    #[error("`{0}` has a replicating out-port")]
    ReplicatingPort(String),
    #[error("scenario injects faults")]
    Faults,
    #[error("`{0}` uses randomness")]
    Randomness(String),
    #[error("`{instance}` raised `{kind}`")]
    Raised { instance: String, kind: String },
    #[error("`{0}` emitted with a directive")]
    Directed(String),
    #[error("`{path}`: {source}")]
    Behavior { path: String, source: BehaviorError },
    #[error("no quiescence after {BUDGET} deliveries")]
    Diverges,
}

/// Root out-port streams of the sequential interpretation.
pub fn reference_run(
    s: &LoadedScenario,
    registry: &Registry,
) -> Result<BTreeMap<String, Vec<Payload>>, OracleInapplicable> {
    if !s.scenario.faults.is_empty() {
        return Err(OracleInapplicable::Faults);
    }
    let topo = &s.topology;
    let mut behaviors: BTreeMap<NodeId, (Box<dyn Behavior>, State)> = BTreeMap::new();
    for node in &topo.nodes {
        let def = s.model.component(&node.type_name).expect("elaborated type exists");
        if def.ports.iter().any(|p| p.replicating) {
            return Err(OracleInapplicable::ReplicatingPort(node.path.clone()));
        }
    }
    for id in topo.atomics() {
        let node = topo.node(id);
        let def = s.model.component(&node.type_name).expect("elaborated type exists");
        let b = registry
            .build(&s.model, def)
            .map_err(|source| OracleInapplicable::Behavior { path: node.path.clone(), source })?;
        if b.uses_randomness() {
            return Err(OracleInapplicable::Randomness(node.path.clone()));
        }
        let st = b.initial_state();
        behaviors.insert(id, (b, st));
    }

    let mut injections: Vec<_> = s.scenario.injections.iter().collect();
    injections.sort_by_key(|i| i.at);
    let counts = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut outputs: BTreeMap<String, Vec<Payload>> = BTreeMap::new();
    let mut budget = BUDGET;
    let mut seq = 0u64;

    for inj in injections {
        let mut work: VecDeque<(ChannelEnd, Payload)> = VecDeque::new();
        let start = ChannelEnd::External { port: inj.port.clone() };
        for (_, ch) in topo.channels_from(&start) {
            work.push_back((ch.to.clone(), inj.payload.clone()));
        }
        while let Some((to, payload)) = work.pop_front() {
            budget = budget.checked_sub(1).ok_or(OracleInapplicable::Diverges)?;
            seq += 1;
            let (node, port) = match to {
                ChannelEnd::External { port } => {
                    outputs.entry(port).or_default().push(payload);
                    continue;
                }
                ChannelEnd::Port { node, port } => (node, port),
            };
            let (b, state) = behaviors.get_mut(&node).expect("atomic target");
            let mut cx = Activation { receiver_counts: &counts, rng: &mut rng, seq };
            let actions = b.handle(state, &port, &payload, &mut cx);
            for a in actions {
                match a {
                    Action::Raise(kind) => {
                        return Err(OracleInapplicable::Raised { instance: topo.node(node).path.clone(), kind })
                    }
                    Action::SetState(s) => *state = s,
                    Action::Emit { directive: Directive::Default, port, payload } => {
                        let from = ChannelEnd::Port { node, port };
                        for (_, ch) in topo.channels_from(&from) {
                            work.push_back((ch.to.clone(), payload.clone()));
                        }
                    }
                    Action::Emit { .. } => return Err(OracleInapplicable::Directed(topo.node(node).path.clone())),
                    Action::None => {}
                }
            }
        }
    }
    Ok(outputs)
}
