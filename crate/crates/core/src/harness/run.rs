use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use super::scenario::{Expectation, LoadedScenario};
use crate::behaviors::Registry;
use crate::runtime::{EventKind, Kernel, KernelConfig, KernelError, StreamLog};
use crate::value::Payload;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub max_steps: Option<u64>,
    /// Extra `(glob, steps)` latency overrides applied after the scenario's.
    pub latency: Vec<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail {
        expectation: String,
        reason: String,
    },
    /// An error escalated past the root; carries the FATAL trace line.
    Fatal {
        event: String,
    },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        *self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("PASS"),
            Verdict::Fail { expectation, reason } => write!(f, "FAIL {expectation}: {reason}"),
            Verdict::Fatal { event } => write!(f, "FATAL {event}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("cannot instantiate: {0}")]
    Instantiate(KernelError),
    #[error("runtime error: {0}")]
    Runtime(KernelError),
    #[error("bad latency pattern `{0}`")]
    BadLatency(String),
}

#[derive(Debug)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub log: StreamLog,
    /// Rows of every store-like instance, by path, in seq order.
    pub stores: BTreeMap<String, Vec<Payload>>,
    pub steps: u64,
}

enum Directive<'a> {
    Scale(&'a str, usize),
    Fault(&'a str, &'a str),
    Inject(&'a str, &'a Payload),
}

pub fn run_scenario(s: &LoadedScenario, opts: &RunOptions) -> Result<RunOutcome, HarnessError> {
    run_with(s, opts, &Registry::builtin())
}

pub fn run_with(s: &LoadedScenario, opts: &RunOptions, registry: &Registry) -> Result<RunOutcome, HarnessError> {
    let sc = &s.scenario;
    let mut topo = s.topology.clone();
    for (pat, steps) in &opts.latency {
        let p = glob::Pattern::new(pat).map_err(|_| HarnessError::BadLatency(pat.clone()))?;
        topo.set_latency(&p, *steps);
    }
    let mut config = KernelConfig { seed: opts.seed.unwrap_or(sc.seed), ..Default::default() };
    for d in sc.scale.iter().filter(|d| d.at == 0) {
        config.initial_replicas.insert(d.path.clone(), d.target);
    }
    let mut kernel = Kernel::new(&s.model, topo, registry, &config).map_err(HarnessError::Instantiate)?;
    let max_steps = opts.max_steps.unwrap_or(sc.max_steps);

    // Per step: scaling, then faults, then injections, each in file order.
    let mut plan: BTreeMap<u64, Vec<Directive<'_>>> = BTreeMap::new();
    for d in sc.scale.iter().filter(|d| d.at > 0) {
        plan.entry(d.at).or_default().push(Directive::Scale(&d.path, d.target));
    }
    for f in &sc.faults {
        plan.entry(f.at).or_default().push(Directive::Fault(&f.path, &f.kind));
    }
    for i in &sc.injections {
        plan.entry(i.at).or_default().push(Directive::Inject(&i.port, &i.payload));
    }
    for list in plan.values_mut() {
        list.sort_by_key(|d| match d {
            Directive::Scale(..) => 0,
            Directive::Fault(..) => 1,
            Directive::Inject(..) => 2,
        });
    }

    let mut fatal = false;
    'outer: while kernel.current_step() < max_steps {
        let now = kernel.current_step();
        if let Some(list) = plan.remove(&now) {
            for d in list {
                let r = match d {
                    Directive::Scale(path, n) => kernel.scale(path, n),
                    Directive::Fault(path, kind) => kernel.inject_fault(path, kind),
                    Directive::Inject(port, payload) => kernel.inject(port, payload.clone()).map(|_| ()),
                };
                match r {
                    Ok(()) => {}
                    Err(KernelError::FatalUnhandled { .. }) => {
                        fatal = true;
                        break 'outer;
                    }
                    Err(e) => return Err(HarnessError::Runtime(e)),
                }
            }
        }
        if plan.is_empty() && kernel.is_quiescent() {
            break;
        }
        match kernel.step() {
            Ok(()) => {}
            Err(KernelError::FatalUnhandled { .. }) => {
                fatal = true;
                break;
            }
            Err(e) => return Err(HarnessError::Runtime(e)),
        }
    }

    let mut stores = BTreeMap::new();
    for path in kernel.store_paths() {
        if let Some(rows) = kernel.store_rows(&path) {
            stores.insert(path, rows);
        }
    }
    let steps = kernel.current_step();
    let log = kernel.into_log();
    let verdict = if fatal {
        let event = log.of_kind(EventKind::Fatal).last().map(|e| e.to_string()).unwrap_or_default();
        Verdict::Fatal { event }
    } else {
        evaluate(sc.expectations.iter().map(|e| &e.expectation), &log)
    };
    Ok(RunOutcome { verdict, log, stores, steps })
}

/// The first violated expectation, in order, or `Pass`.
pub fn evaluate<'a>(expectations: impl IntoIterator<Item = &'a Expectation>, log: &StreamLog) -> Verdict {
    for e in expectations {
        if let Err(reason) = check_one(e, log) {
            return Verdict::Fail { expectation: e.to_string(), reason };
        }
    }
    Verdict::Pass
}

fn check_one(e: &Expectation, log: &StreamLog) -> Result<(), String> {
    match e {
        Expectation::CountIs { port, n, by } => {
            let subject = format!("ext.{port}");
            let got = log
                .of_kind(EventKind::Deliver)
                .filter(|ev| ev.subject == subject && by.is_none_or(|b| ev.step <= b))
                .count();
            if got == *n {
                Ok(())
            } else {
                Err(format!("got {got}"))
            }
        }
        Expectation::SeqPrefix { port, payloads } => {
            let stream = log.port_stream(port);
            for (i, want) in payloads.iter().enumerate() {
                match stream.get(i) {
                    Some(got) if *got == want => {}
                    Some(got) => return Err(format!("element {i} is {got}")),
                    None => return Err(format!("stream has only {} element(s)", stream.len())),
                }
            }
            Ok(())
        }
        Expectation::StoreContains { path, n } => {
            let got = stored_count(log, path);
            if got == *n {
                Ok(())
            } else {
                Err(format!("got {got}"))
            }
        }
        Expectation::EventOccurs { kind, subject } => {
            let pat = glob::Pattern::new(subject).ok();
            let hit = log
                .of_kind(*kind)
                .any(|ev| ev.subject == *subject || pat.as_ref().is_some_and(|p| p.matches(&ev.subject)));
            if hit {
                Ok(())
            } else {
                Err("no such event".to_string())
            }
        }
        Expectation::Sticky { group } => sticky_violation(log, group).map_or(Ok(()), Err),
    }
}

/// Instance part of a DELIVER subject: everything before the port.
fn delivered_instance(subject: &str) -> &str {
    subject.rsplit_once('.').map_or(subject, |(i, _)| i)
}

/// Messages delivered to `path` (any replica) and not answered by a RAISE.
pub fn stored_count(log: &StreamLog, path: &str) -> usize {
    let matches = |inst: &str| {
        let plain = match inst.split_once('[').and_then(|(a, b)| Some((a, b.split_once(']')?.1))) {
            Some((head, tail)) => format!("{head}{tail}"),
            None => inst.to_string(),
        };
        plain == path
    };
    let mut delivered = 0usize;
    let mut raised = std::collections::BTreeSet::new();
    for ev in &log.events {
        match ev.kind {
            EventKind::Deliver if matches(delivered_instance(&ev.subject)) => delivered += 1,
            EventKind::Raise if matches(&ev.subject) => {
                if let Some(s) = ev.seq {
                    raised.insert(s);
                }
            }
            _ => {}
        }
    }
    delivered - raised.len()
}

/// The replica index of a subject inside `group`, if it is one.
fn replica_in<'s>(subject: &'s str, group: &str) -> Option<&'s str> {
    let rest = subject.strip_prefix(group)?.strip_prefix('[')?;
    rest.split_once(']').map(|(r, _)| r)
}

/// Checks that every token delivered into `group` always lands on one
/// replica. Returns a description of the first violation.
pub fn sticky_violation(log: &StreamLog, group: &str) -> Option<String> {
    let mut home: BTreeMap<String, &str> = BTreeMap::new();
    for ev in log.of_kind(EventKind::Deliver) {
        let Some(r) = replica_in(&ev.subject, group) else { continue };
        for t in &ev.tokens {
            let first = *home.entry(t.to_string()).or_insert(r);
            if first != r {
                return Some(format!("{t} went to replica {first} and then to replica {r} (seq {:?})", ev.seq));
            }
        }
    }
    None
}

/// Writes one `<path>.txt` per store under `dir` (slashes become `_`), one
/// payload per line. Returns the files written.
pub fn write_results(stores: &BTreeMap<String, Vec<Payload>>, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (path, rows) in stores {
        let file = dir.join(format!("{}.txt", path.replace('/', "_")));
        let mut text = String::new();
        for p in rows {
            text.push_str(&p.to_string());
            text.push('\n');
        }
        std::fs::write(&file, text)?;
        written.push(file);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adl::parse_model;
    use crate::harness::scenario::{parse_scenario, resolve};

    const MODEL: &str = r#"
message M { v: integer; }
component Fwd { port in M i; port out M o; behavior forward(); }
component Store { port in M i; behavior store(); }
component Crash { port in M i; port out M o; behavior fault_at(1); }
component Q {
  port in M i;
  port out M o;
  component Fwd f;
  replicating component Store s;
  connect i -> f.i;
  connect f.o -> o;
  connect i -> s.i;
}
component Bad {
  port in M i;
  port out M o;
  component Crash c;
  connect i -> c.i;
  connect c.o -> o;
}
"#;

    fn run(text: &str) -> RunOutcome {
        let s = resolve(parse_scenario(text, "t.scn").unwrap(), parse_model(MODEL, "m.arc").unwrap()).unwrap();
        run_scenario(&s, &RunOptions::default()).unwrap()
    }

    #[test]
    fn empty_scenario_passes_with_empty_log() {
        let out = run("model m.arc\nroot Q\n");
        assert!(out.verdict.is_pass());
        assert!(out.log.is_empty());
    }

    #[test]
    fn counts_prefix_and_store() {
        let out = run("model m.arc\nroot Q\nscale root/s 3 at 0\n\
             inject i at 0 M{v=1}\ninject i at 0 M{v=2}\ninject i at 1 M{v=3}\n\
             expect count o 3\nexpect count o 2 by 2\nexpect prefix o M{v=1} M{v=2}\nexpect store root/s 3\n");
        assert_eq!(out.verdict, Verdict::Pass);
        let rows: Vec<String> = out.stores["root/s"].iter().map(|p| p.to_string()).collect();
        assert_eq!(rows, ["M{v=1}", "M{v=2}", "M{v=3}"]);
    }

    #[test]
    fn first_failure_is_reported() {
        let out =
            run("model m.arc\nroot Q\ninject i at 0 M{v=1}\nexpect count o 1\nexpect count o 5\nexpect count o 7\n");
        assert_eq!(out.verdict, Verdict::Fail { expectation: "expect count o 5".into(), reason: "got 1".into() });
    }

    #[test]
    fn fatal_surfaces_with_event() {
        let out = run("model m.arc\nroot Bad\ninject i at 0 M{v=1}\n");
        match out.verdict {
            Verdict::Fatal { event } => assert!(event.contains("\tFATAL\troot\t")),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn later_scale_is_applied() {
        let out = run("model m.arc\nroot Q\nscale root/s 2 at 3\nexpect event SCALE root/s\n");
        assert!(out.verdict.is_pass());
        assert_eq!(out.steps, 3);
    }

    #[test]
    fn results_are_written() {
        let out = run("model m.arc\nroot Q\ninject i at 0 M{v=4}\n");
        let dir = tempfile::tempdir().unwrap();
        let files = write_results(&out.stores, dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        assert_eq!(std::fs::read_to_string(&files[0]).unwrap(), "M{v=4}\n");
        assert!(files[0].ends_with("root_s.txt"));
    }
}
