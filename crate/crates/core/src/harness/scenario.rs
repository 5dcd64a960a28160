//! `.scn` scenario files.
//!
//! One directive per line; blank lines and `//` lines are ignored.
//!
//! ```text
//! scenario sensor_basic
//! model types.arc
//! model sensor_channel.arc
//! root SensorChannel
//! seed 7
//! latency ext.update>* 3
//! scale root/store 3 at 0
//! strategy root/handler restart
//! inject update at 0 Update{sensor=1, cred="ok", value=5}
//! fault root/handler at 4 crash
//! expect count ack 1 by 20
//! expect prefix ack Ack{sensor=1, ok=true}
//! expect store root/store 1
//! expect event RESTART root/handler
//! expect sticky root/a
//! maxsteps 100
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use crate::adl::{load_files, ArchitectureModel, Direction};
use crate::analyzer::{check, elaborate, ElaborateError, ErrorStrategy, NodeId, RuntimeTopology};
use crate::diag::{Code, Diagnostic, Pos};
use crate::lexer::{tokenize, Cursor};
use crate::runtime::EventKind;
use crate::value::Payload;

pub const DEFAULT_MAX_STEPS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatencyOverride {
    pub pattern: String,
    pub steps: u64,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleDirective {
    pub path: String,
    pub target: usize,
    pub at: u64,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyOverride {
    pub path: String,
    pub strategy: ErrorStrategy,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub port: String,
    pub at: u64,
    pub payload: Payload,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub path: String,
    pub at: u64,
    pub kind: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation {
    CountIs {
        port: String,
        n: usize,
        by: Option<u64>,
    },
    SeqPrefix {
        port: String,
        payloads: Vec<Payload>,
    },
    StoreContains {
        path: String,
        n: usize,
    },
    EventOccurs {
        kind: EventKind,
        subject: String,
    },
    /// Every token seen entering the group always enters the same replica.
    Sticky {
        group: String,
    },
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::CountIs { port, n, by: None } => write!(f, "expect count {port} {n}"),
            Expectation::CountIs { port, n, by: Some(s) } => write!(f, "expect count {port} {n} by {s}"),
            Expectation::SeqPrefix { port, payloads } => {
                write!(f, "expect prefix {port}")?;
                for p in payloads {
                    write!(f, " {p}")?;
                }
                Ok(())
            }
            Expectation::StoreContains { path, n } => write!(f, "expect store {path} {n}"),
            Expectation::EventOccurs { kind, subject } => write!(f, "expect event {kind} {subject}"),
            Expectation::Sticky { group } => write!(f, "expect sticky {group}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectLine {
    pub expectation: Expectation,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub origin: String,
    pub models: Vec<String>,
    pub root: String,
    pub root_pos: Pos,
    pub seed: u64,
    pub latency: Vec<LatencyOverride>,
    pub scale: Vec<ScaleDirective>,
    pub strategies: Vec<StrategyOverride>,
    pub injections: Vec<Injection>,
    pub faults: Vec<Fault>,
    pub expectations: Vec<ExpectLine>,
    pub max_steps: u64,
}

struct Line<'a> {
    text: &'a str,
    pos: Pos,
    origin: &'a str,
}

impl<'a> Line<'a> {
    fn err(&self, code: Code, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::error(code, self.origin, self.pos, msg)
    }

    /// The first `n` words and the rest of the line.
    fn split(&self, n: usize) -> (Vec<&'a str>, &'a str) {
        let mut rest = self.text.trim_start();
        let mut words = Vec::with_capacity(n);
        for _ in 0..n {
            if rest.is_empty() {
                break;
            }
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            words.push(&rest[..end]);
            rest = rest[end..].trim_start();
        }
        (words, rest)
    }
}

fn number<T: std::str::FromStr>(line: &Line<'_>, word: &str, what: &str) -> Result<T, Diagnostic> {
    word.parse().map_err(|_| line.err(Code::Syntax, format!("expected {what}, found `{word}`")))
}

fn payloads(line: &Line<'_>, text: &str) -> Result<Vec<Payload>, Diagnostic> {
    let toks = tokenize(text, line.pos.line)
        .map_err(|e| line.err(Code::Syntax, format!("bad payload literal: {}", e.message)))?;
    let mut cur = Cursor::new(&toks);
    let mut out = Vec::new();
    while !cur.at_eof() {
        let p = Payload::read(&mut cur)
            .map_err(|e| line.err(Code::Syntax, format!("bad payload literal: {}", e.message)))?;
        out.push(p);
    }
    Ok(out)
}

fn exact(line: &Line<'_>, words: &[&str], rest: &str, n: usize, usage: &str) -> Result<(), Diagnostic> {
    if words.len() < n || !rest.is_empty() {
        return Err(line.err(Code::Syntax, format!("expected `{usage}`")));
    }
    Ok(())
}

fn at_keyword(line: &Line<'_>, word: &str, usage: &str) -> Result<(), Diagnostic> {
    if word != "at" {
        return Err(line.err(Code::Syntax, format!("expected `{usage}`")));
    }
    Ok(())
}

/// Parses scenario text without looking at the model.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, Vec<Diagnostic>> {
    let mut s = Scenario {
        name: String::new(),
        origin: origin.to_string(),
        models: Vec::new(),
        root: String::new(),
        root_pos: Pos::new(1, 1),
        seed: 0,
        latency: Vec::new(),
        scale: Vec::new(),
        strategies: Vec::new(),
        injections: Vec::new(),
        faults: Vec::new(),
        expectations: Vec::new(),
        max_steps: DEFAULT_MAX_STEPS,
    };
    let mut diags = Vec::new();
    let mut seen: Vec<&str> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with("//") {
            continue;
        }
        let col = (raw.len() - raw.trim_start().len()) as u32 + 1;
        let line = Line { text: trimmed, pos: Pos::new(i as u32 + 1, col), origin };
        let (head, _) = line.split(1);
        let keyword = head[0];
        if matches!(keyword, "scenario" | "root" | "seed" | "maxsteps") {
            if seen.contains(&keyword) {
                diags.push(line.err(Code::Duplicate, format!("`{keyword}` given more than once")));
                continue;
            }
            seen.push(keyword);
        }
        if let Err(d) = parse_line(&mut s, &line, keyword) {
            diags.push(d);
        }
    }
    if s.models.is_empty() {
        diags.push(Diagnostic::error(Code::Syntax, origin, Pos::new(1, 1), "scenario names no `model` file"));
    }
    if s.root.is_empty() {
        diags.push(Diagnostic::error(Code::Syntax, origin, Pos::new(1, 1), "scenario names no `root` type"));
    }
    if diags.is_empty() {
        Ok(s)
    } else {
        diags.sort_by_key(|d| (d.line, d.col));
        Err(diags)
    }
}

fn parse_line(s: &mut Scenario, line: &Line<'_>, keyword: &str) -> Result<(), Diagnostic> {
    match keyword {
        "scenario" => {
            let (w, rest) = line.split(2);
            exact(line, &w, rest, 2, "scenario NAME")?;
            s.name = w[1].to_string();
        }
        "model" => {
            let (_, rest) = line.split(1);
            if rest.is_empty() {
                return Err(line.err(Code::Syntax, "expected `model PATH`"));
            }
            s.models.push(rest.to_string());
        }
        "root" => {
            let (w, rest) = line.split(2);
            exact(line, &w, rest, 2, "root TYPE")?;
            s.root = w[1].to_string();
            s.root_pos = line.pos;
        }
        "seed" => {
            let (w, rest) = line.split(2);
            exact(line, &w, rest, 2, "seed N")?;
            s.seed = number(line, w[1], "a seed")?;
        }
        "maxsteps" => {
            let (w, rest) = line.split(2);
            exact(line, &w, rest, 2, "maxsteps N")?;
            s.max_steps = number(line, w[1], "a step count")?;
        }
        "latency" => {
            let (w, rest) = line.split(3);
            exact(line, &w, rest, 3, "latency PATTERN STEPS")?;
            let steps: u64 = number(line, w[2], "a latency")?;
            if steps == 0 {
                return Err(line.err(Code::Syntax, "latency must be at least 1"));
            }
            s.latency.push(LatencyOverride { pattern: w[1].to_string(), steps, pos: line.pos });
        }
        "scale" => {
            let usage = "scale PATH N at STEP";
            let (w, rest) = line.split(5);
            exact(line, &w, rest, 5, usage)?;
            at_keyword(line, w[3], usage)?;
            let target: usize = number(line, w[2], "a replica count")?;
            if target == 0 {
                return Err(line.err(Code::Syntax, "scale target must be at least 1"));
            }
            let at = number(line, w[4], "a step")?;
            s.scale.push(ScaleDirective { path: w[1].to_string(), target, at, pos: line.pos });
        }
        "strategy" => {
            let (w, rest) = line.split(3);
            exact(line, &w, rest, 3, "strategy PATH resume|restart|escalate")?;
            let strategy = ErrorStrategy::from_name(w[2])
                .ok_or_else(|| line.err(Code::Syntax, format!("unknown strategy `{}`", w[2])))?;
            s.strategies.push(StrategyOverride { path: w[1].to_string(), strategy, pos: line.pos });
        }
        "inject" => {
            let usage = "inject PORT at STEP Type{...}";
            let (w, rest) = line.split(4);
            if w.len() < 4 || rest.is_empty() {
                return Err(line.err(Code::Syntax, format!("expected `{usage}`")));
            }
            at_keyword(line, w[2], usage)?;
            let at = number(line, w[3], "a step")?;
            let mut ps = payloads(line, rest)?;
            if ps.len() != 1 {
                return Err(line.err(Code::Syntax, "expected exactly one payload literal"));
            }
            s.injections.push(Injection { port: w[1].to_string(), at, payload: ps.remove(0), pos: line.pos });
        }
        "fault" => {
            let usage = "fault PATH at STEP KIND";
            let (w, rest) = line.split(5);
            exact(line, &w, rest, 5, usage)?;
            at_keyword(line, w[2], usage)?;
            let at = number(line, w[3], "a step")?;
            s.faults.push(Fault { path: w[1].to_string(), at, kind: w[4].to_string(), pos: line.pos });
        }
        "expect" => {
            let expectation = parse_expect(line)?;
            s.expectations.push(ExpectLine { expectation, pos: line.pos });
        }
        other => return Err(line.err(Code::Syntax, format!("unknown directive `{other}`"))),
    }
    Ok(())
}

fn parse_expect(line: &Line<'_>) -> Result<Expectation, Diagnostic> {
    let (w, _) = line.split(2);
    let form = w.get(1).copied().unwrap_or("");
    match form {
        "count" => {
            let (w, rest) = line.split(6);
            match w.len() {
                4 if rest.is_empty() => {
                    Ok(Expectation::CountIs { port: w[2].to_string(), n: number(line, w[3], "a count")?, by: None })
                }
                6 if rest.is_empty() && w[4] == "by" => Ok(Expectation::CountIs {
                    port: w[2].to_string(),
                    n: number(line, w[3], "a count")?,
                    by: Some(number(line, w[5], "a step")?),
                }),
                _ => Err(line.err(Code::Syntax, "expected `expect count PORT N [by STEP]`")),
            }
        }
        "prefix" => {
            let (w, rest) = line.split(3);
            if w.len() < 3 {
                return Err(line.err(Code::Syntax, "expected `expect prefix PORT Type{...} ...`"));
            }
            Ok(Expectation::SeqPrefix { port: w[2].to_string(), payloads: payloads(line, rest)? })
        }
        "store" => {
            let (w, rest) = line.split(4);
            exact(line, &w, rest, 4, "expect store PATH N")?;
            Ok(Expectation::StoreContains { path: w[2].to_string(), n: number(line, w[3], "a count")? })
        }
        "event" => {
            let (w, rest) = line.split(4);
            exact(line, &w, rest, 4, "expect event KIND SUBJECT")?;
            let kind = EventKind::from_name(w[2])
                .ok_or_else(|| line.err(Code::Syntax, format!("unknown event kind `{}`", w[2])))?;
            Ok(Expectation::EventOccurs { kind, subject: w[3].to_string() })
        }
        "sticky" => {
            let (w, rest) = line.split(3);
            exact(line, &w, rest, 3, "expect sticky GROUP")?;
            Ok(Expectation::Sticky { group: w[2].to_string() })
        }
        _ => Err(line.err(Code::Syntax, "expected `expect count|prefix|store|event|sticky ...`")),
    }
}

/// A scenario together with its checked model and the topology with the
/// scenario's latency and strategy overrides applied.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub model: ArchitectureModel,
    pub topology: RuntimeTopology,
}

/// Reads a `.scn` file; model paths are relative to its directory.
pub fn load_scenario_file(path: &Path) -> Result<LoadedScenario, Vec<Diagnostic>> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![Diagnostic::error(Code::Io, &origin, Pos::new(1, 1), format!("cannot read file: {e}"))])?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    load_scenario(&text, &origin, &base)
}

pub fn load_scenario(text: &str, origin: &str, base_dir: &Path) -> Result<LoadedScenario, Vec<Diagnostic>> {
    let scenario = parse_scenario(text, origin)?;
    let paths: Vec<PathBuf> = scenario.models.iter().map(|m| base_dir.join(m)).collect();
    let model = load_files(&paths)?;
    resolve(scenario, model)
}

/// Checks a parsed scenario against `model` and elaborates it.
pub fn resolve(scenario: Scenario, model: ArchitectureModel) -> Result<LoadedScenario, Vec<Diagnostic>> {
    let diags = check(&model);
    if !diags.is_empty() {
        return Err(diags);
    }
    let origin = scenario.origin.clone();
    let err = |code, pos, msg: String| Diagnostic::error(code, &origin, pos, msg);
    let mut topology = match elaborate(&model, &scenario.root) {
        Ok(t) => t,
        Err(ElaborateError::UnknownRoot(r)) => {
            return Err(vec![err(Code::Unresolved, scenario.root_pos, format!("unknown root component type `{r}`"))])
        }
        Err(ElaborateError::Rejected(d)) => return Err(d),
    };

    let mut diags = Vec::new();
    for l in &scenario.latency {
        match glob::Pattern::new(&l.pattern) {
            Ok(p) => {
                if topology.set_latency(&p, l.steps) == 0 {
                    diags.push(err(Code::Unresolved, l.pos, format!("`{}` matches no channel", l.pattern)));
                }
            }
            Err(e) => diags.push(err(Code::Syntax, l.pos, format!("bad channel pattern: {e}"))),
        }
    }
    for o in &scenario.strategies {
        if !topology.set_strategy(&o.path, o.strategy) {
            diags.push(err(Code::Unresolved, o.pos, format!("no instance `{}`", o.path)));
        }
    }
    let is_group = |t: &RuntimeTopology, p: &str| t.find(p).is_some_and(|id| t.node(id).replica_group.is_some());
    for d in &scenario.scale {
        if !is_group(&topology, &d.path) {
            diags.push(err(Code::Unresolved, d.pos, format!("`{}` is not a replicating subcomponent", d.path)));
        }
    }
    let mut scenario = scenario;
    for inj in &mut scenario.injections {
        match root_port(&topology, &inj.port, Direction::In) {
            None => diags.push(err(Code::Unresolved, inj.pos, format!("root type has no in-port `{}`", inj.port))),
            Some(ty) => match model.message(&ty).map(|m| m.conform(&inj.payload)) {
                Some(Ok(p)) => inj.payload = p,
                Some(Err(e)) => diags.push(err(Code::TypeMismatch, inj.pos, format!("`{}`: {e}", inj.port))),
                None => diags.push(err(Code::Unresolved, inj.pos, format!("unknown message type `{ty}`"))),
            },
        }
    }
    for f in &scenario.faults {
        if find_instance(&topology, &f.path).is_none() {
            diags.push(err(Code::Unresolved, f.pos, format!("no instance `{}`", f.path)));
        }
    }
    for e in &mut scenario.expectations {
        let pos = e.pos;
        match &mut e.expectation {
            Expectation::CountIs { port, .. } => {
                if root_port(&topology, port, Direction::Out).is_none() {
                    diags.push(err(Code::Unresolved, pos, format!("root type has no out-port `{port}`")));
                }
            }
            Expectation::SeqPrefix { port, payloads } => match root_port(&topology, port, Direction::Out) {
                None => diags.push(err(Code::Unresolved, pos, format!("root type has no out-port `{port}`"))),
                Some(ty) => {
                    for p in payloads.iter_mut() {
                        match model.message(&ty).map(|m| m.conform(p)) {
                            Some(Ok(c)) => *p = c,
                            Some(Err(e)) => diags.push(err(Code::TypeMismatch, pos, format!("`{port}`: {e}"))),
                            None => diags.push(err(Code::Unresolved, pos, format!("unknown message type `{ty}`"))),
                        }
                    }
                }
            },
            Expectation::StoreContains { path, .. } => {
                let atomic = topology.find(path).is_some_and(|id| topology.atomics().any(|a| a == id));
                if !atomic {
                    diags.push(err(Code::Unresolved, pos, format!("no atomic instance `{path}`")));
                }
            }
            Expectation::Sticky { group } => {
                if !is_group(&topology, group) {
                    diags.push(err(Code::Unresolved, pos, format!("`{group}` is not a replicating subcomponent")));
                }
            }
            Expectation::EventOccurs { .. } => {}
        }
    }
    if diags.is_empty() {
        Ok(LoadedScenario { scenario, model, topology })
    } else {
        Err(diags)
    }
}

fn root_port(t: &RuntimeTopology, name: &str, dir: Direction) -> Option<String> {
    t.external(name).filter(|p| p.direction == dir).map(|p| p.message_type.clone())
}

/// Resolves `path` or `path[r]`-style instance names to a node, ignoring the
/// replica index.
fn find_instance(t: &RuntimeTopology, name: &str) -> Option<NodeId> {
    let plain = match name.split_once('[').and_then(|(a, b)| Some((a, b.split_once(']')?.1))) {
        Some((head, tail)) => format!("{head}{tail}"),
        None => name.to_string(),
    };
    t.find(&plain)
}
