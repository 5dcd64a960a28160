//! The event log and its text form.
//!
//! One event per line, tab separated:
//! `step KIND subject seq tokens payload`, with `-` for empty columns.

use std::collections::BTreeSet;
use std::fmt;

use crate::value::Payload;

/// A context token: `(context name, serial)`, rendered `ctx#serial`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextToken {
    pub context: String,
    pub serial: u64,
}

impl ContextToken {
    pub fn new(context: impl Into<String>, serial: u64) -> Self {
        Self { context: context.into(), serial }
    }
}

impl fmt::Display for ContextToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.context, self.serial)
    }
}

pub type TokenSet = BTreeSet<ContextToken>;

/// Tokens as `a#1,b#2`, sorted by their rendered text, or `-`.
pub fn render_tokens<'a>(tokens: impl IntoIterator<Item = &'a ContextToken>) -> String {
    let mut parts: Vec<String> = tokens.into_iter().map(|t| t.to_string()).collect();
    if parts.is_empty() {
        return "-".to_string();
    }
    parts.sort();
    parts.join(",")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Send,
    Deliver,
    Mint,
    Strip,
    Bind,
    Raise,
    Restart,
    Escalate,
    Scale,
    Fatal,
}

impl EventKind {
    pub const ALL: [EventKind; 10] = [
        EventKind::Send,
        EventKind::Deliver,
        EventKind::Mint,
        EventKind::Strip,
        EventKind::Bind,
        EventKind::Raise,
        EventKind::Restart,
        EventKind::Escalate,
        EventKind::Scale,
        EventKind::Fatal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Send => "SEND",
            EventKind::Deliver => "DELIVER",
            EventKind::Mint => "MINT",
            EventKind::Strip => "STRIP",
            EventKind::Bind => "BIND",
            EventKind::Raise => "RAISE",
            EventKind::Restart => "RESTART",
            EventKind::Escalate => "ESCALATE",
            EventKind::Scale => "SCALE",
            EventKind::Fatal => "FATAL",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Subjects: SEND, MINT, STRIP name the channel id; DELIVER names the
/// receiving `instance.port` (or `ext.port`); BIND, RAISE, RESTART,
/// ESCALATE and FATAL name an instance; SCALE names a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub step: u64,
    pub kind: EventKind,
    pub subject: String,
    pub seq: Option<u64>,
    pub tokens: Vec<ContextToken>,
    pub payload: Option<Payload>,
    /// Payload column for events that carry no message payload.
    pub detail: String,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let seq = self.seq.map_or_else(|| "-".to_string(), |s| s.to_string());
        let last = match &self.payload {
            Some(p) => p.to_string(),
            None if self.detail.is_empty() => "-".to_string(),
            None => self.detail.clone(),
        };
        write!(f, "{}\t{}\t{}\t{}\t{}\t{}", self.step, self.kind, self.subject, seq, render_tokens(&self.tokens), last)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamLog {
    pub events: Vec<Event>,
}

impl StreamLog {
    pub fn push(&mut self, e: Event) {
        self.events.push(e);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Sequence numbers sent on `channel`, in send order.
    pub fn sent_on(&self, channel: &str) -> Vec<u64> {
        self.of_kind(EventKind::Send).filter(|e| e.subject == channel).filter_map(|e| e.seq).collect()
    }

    /// Payloads delivered to the root out-port `port`, in delivery order.
    pub fn port_stream(&self, port: &str) -> Vec<&Payload> {
        let subject = format!("ext.{port}");
        self.of_kind(EventKind::Deliver).filter(|e| e.subject == subject).filter_map(|e| e.payload.as_ref()).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}
