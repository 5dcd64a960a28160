//! Replica groups: receiver selection and token binding.

use std::collections::BTreeMap;
use std::fmt;

use super::trace::{ContextToken, TokenSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ReplicaId(pub u32);

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Picks a position among `eligible` selectable replicas for a message that
/// carries no bound token.
pub trait SelectionPolicy: fmt::Debug + Send + Sync {
    fn pick(&self, counter: u64, eligible: usize) -> usize;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RoundRobin;

impl SelectionPolicy for RoundRobin {
    fn pick(&self, counter: u64, eligible: usize) -> usize {
        (counter % eligible as u64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Replica {
    pub id: ReplicaId,
    pub retiring: bool,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("replica group `{0}` has no selectable replica")]
pub struct EmptyGroup(pub String);

#[derive(Debug)]
pub struct ReplicaGroup {
    pub path: String,
    /// Live replicas in creation order; ids are never reused.
    pub replicas: Vec<Replica>,
    pub next_id: u32,
    pub counter: u64,
    pub bindings: BTreeMap<ContextToken, ReplicaId>,
    pub policy: Box<dyn SelectionPolicy>,
}

/// Result of routing one message into a group.
#[derive(Debug, PartialEq, Eq)]
pub struct Selection {
    pub replica: ReplicaId,
    pub newly_bound: Vec<ContextToken>,
}

impl ReplicaGroup {
    pub fn new(path: impl Into<String>, initial: usize, policy: Box<dyn SelectionPolicy>) -> Self {
        let replicas = (0..initial as u32).map(|i| Replica { id: ReplicaId(i), retiring: false }).collect();
        Self { path: path.into(), replicas, next_id: initial as u32, counter: 0, bindings: BTreeMap::new(), policy }
    }

    /// Replicas that accept unbound messages, in order.
    pub fn active(&self) -> Vec<ReplicaId> {
        self.replicas.iter().filter(|r| !r.retiring).map(|r| r.id).collect()
    }

    pub fn active_count(&self) -> usize {
        self.replicas.iter().filter(|r| !r.retiring).count()
    }

    pub fn size(&self) -> usize {
        self.replicas.len()
    }

    pub fn contains(&self, id: ReplicaId) -> bool {
        self.replicas.iter().any(|r| r.id == id)
    }

    /// A token bound here wins (lowest token first when several are bound);
    /// otherwise the policy picks among active replicas and the counter
    /// advances. Unbound tokens are then bound to the chosen replica.
    pub fn select(&mut self, tokens: &TokenSet) -> Result<Selection, EmptyGroup> {
        let bound = tokens.iter().find_map(|t| self.bindings.get(t).copied());
        let replica = match bound {
            Some(r) => r,
            None => {
                let active = self.active();
                if active.is_empty() {
                    return Err(EmptyGroup(self.path.clone()));
                }
                let idx = self.policy.pick(self.counter, active.len());
                self.counter += 1;
                active[idx]
            }
        };
        let newly_bound = self.bind(tokens, replica);
        Ok(Selection { replica, newly_bound })
    }

    /// Binds every token of `tokens` that is not yet bound.
    pub fn bind(&mut self, tokens: &TokenSet, replica: ReplicaId) -> Vec<ContextToken> {
        let mut out = Vec::new();
        for t in tokens {
            if !self.bindings.contains_key(t) {
                self.bindings.insert(t.clone(), replica);
                out.push(t.clone());
            }
        }
        out
    }

    pub fn add_replica(&mut self) -> ReplicaId {
        let id = ReplicaId(self.next_id);
        self.next_id += 1;
        self.replicas.push(Replica { id, retiring: false });
        id
    }

    pub fn remove(&mut self, id: ReplicaId) {
        self.replicas.retain(|r| r.id != id);
        self.bindings.retain(|_, r| *r != id);
    }
}
