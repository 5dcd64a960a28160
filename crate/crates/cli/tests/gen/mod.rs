//! Random model and scenario generators for the acceptance suite.

#![allow(dead_code)]

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const PRIMS: [&str; 3] = ["integer", "text", "boolean"];

pub struct MsgType {
    pub name: String,
    pub fields: Vec<(String, &'static str)>,
}

impl MsgType {
    pub fn literal(&self, rng: &mut ChaCha8Rng) -> String {
        let fields: Vec<String> = self.fields.iter().map(|(n, p)| format!("{n}={}", value_literal(rng, p))).collect();
        format!("{}{{{}}}", self.name, fields.join(", "))
    }
}

fn value_literal(rng: &mut ChaCha8Rng, prim: &str) -> String {
    match prim {
        "integer" => rng.gen_range(-50..500).to_string(),
        "boolean" => rng.gen_bool(0.5).to_string(),
        _ => string_literal(rng),
    }
}

fn string_literal(rng: &mut ChaCha8Rng) -> String {
    let pieces = ["a", "b", "zz", " ", "\\\"", "\\\\", "\\n", "\\t", "x-y", "9"];
    let mut s = String::from("\"");
    for _ in 0..rng.gen_range(0..5) {
        s.push_str(pieces.choose(rng).unwrap());
    }
    s.push('"');
    s
}

/// A valid model together with the facts a scenario needs about it.
pub struct Generated {
    pub source: String,
    pub root: String,
    /// `(port, message type index)` of every root in-port.
    pub inputs: Vec<(String, usize)>,
    pub outputs: Vec<String>,
    pub types: Vec<MsgType>,
    /// Instance paths of top-level replicated groups.
    pub groups: Vec<String>,
}

struct Builder<'r> {
    rng: &'r mut ChaCha8Rng,
    out: String,
    next: usize,
    atomics_done: Vec<(usize, &'static str)>,
}

const ATOMICS: [&str; 5] = ["Fwd", "Del", "Col", "Los", "Bc"];

impl Builder<'_> {
    fn atomic(&mut self, kind: &'static str, ty: usize) -> String {
        let name = format!("{kind}{ty}");
        if !self.atomics_done.contains(&(ty, kind)) {
            self.atomics_done.push((ty, kind));
            let t = format!("T{ty}");
            let (out_port, behavior) = match kind {
                "Fwd" => ("o", "forward()".to_string()),
                "Del" => ("o", format!("delay(k = {})", self.rng.gen_range(0..3))),
                "Col" => ("o", format!("collect({})", self.rng.gen_range(1..4))),
                "Los" => ("o", format!("lossy(keep = {})", self.rng.gen_range(30..90))),
                "Bc" => ("o replicating", "broadcast()".to_string()),
                _ => unreachable!(),
            };
            let _ = writeln!(
                self.out,
                "component {name} {{\n  port in {t} i;\n  port out {t} {out_port};\n  behavior {behavior};\n}}"
            );
        }
        name
    }

    fn store(&mut self, ty: usize) -> String {
        let name = format!("Sto{ty}");
        if !self.atomics_done.contains(&(ty, "Sto")) {
            self.atomics_done.push((ty, "Sto"));
            let _ = writeln!(self.out, "component {name} {{\n  port in T{ty} i;\n  behavior store();\n}}");
        }
        name
    }

    /// Emits a composite `in T i -> stages -> out T o` and returns its name.
    fn pipeline(&mut self, ty: usize, depth: u32, allow_repl: bool) -> String {
        let n = self.rng.gen_range(1..=3);
        let mut stages = Vec::new();
        for k in 0..n {
            let repl = allow_repl && self.rng.gen_bool(0.3);
            let type_name = if depth < 2 && self.rng.gen_bool(0.3) {
                self.pipeline(ty, depth + 1, allow_repl && !repl)
            } else {
                let kind = *ATOMICS.choose(self.rng).unwrap();
                self.atomic(kind, ty)
            };
            stages.push((format!("s{k}"), type_name, repl));
        }
        let tap = if self.rng.gen_bool(0.3) { Some(self.store(ty)) } else { None };
        let name = format!("C{}", self.next);
        self.next += 1;
        let mut body = format!("component {name} {{\n  port in T{ty} i;\n  port out T{ty} o;\n");
        for (s, t, repl) in &stages {
            let _ = writeln!(body, "  {}component {t} {s};", if *repl { "replicating " } else { "" });
        }
        if let Some(t) = &tap {
            let _ = writeln!(body, "  component {t} tap;");
        }
        let _ = writeln!(body, "  connect i -> s0.i;");
        for k in 1..n {
            let _ = writeln!(body, "  connect s{}.o -> s{k}.i;", k - 1);
        }
        let _ = writeln!(body, "  connect s{}.o -> o;", n - 1);
        if tap.is_some() {
            let src = self.rng.gen_range(0..n);
            let _ = writeln!(body, "  connect s{src}.o -> tap.i;");
        }
        if self.rng.gen_bool(0.3) {
            let _ = writeln!(body, "  context ctx {{\n    open i -> s0.i;\n    close s{}.o -> o;\n  }}", n - 1);
        }
        body.push_str("}\n");
        self.out.push_str(&body);
        name
    }
}

/// A random, valid model: one or two typed pipelines under a root.
pub fn valid_model(rng: &mut ChaCha8Rng) -> Generated {
    let ntypes = rng.gen_range(1..=2);
    let mut types = Vec::new();
    let mut out = String::new();
    for t in 0..ntypes {
        let nf = rng.gen_range(1..=3);
        let fields: Vec<(String, &'static str)> =
            (0..nf).map(|k| (format!("f{k}"), *PRIMS.choose(rng).unwrap())).collect();
        let _ = writeln!(out, "message T{t} {{");
        for (n, p) in &fields {
            let _ = writeln!(out, "  {n}: {p};");
        }
        out.push_str("}\n");
        types.push(MsgType { name: format!("T{t}"), fields });
    }
    let mut b = Builder { rng, out, next: 0, atomics_done: Vec::new() };
    let mut root = String::from("component Root {\n");
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut groups = Vec::new();
    let mut subs = String::new();
    let mut conns = String::new();
    for t in 0..ntypes {
        let repl = b.rng.gen_bool(0.4);
        let p = b.pipeline(t, 1, !repl);
        let _ = writeln!(root, "  port in T{t} in{t};\n  port out T{t} out{t};");
        let _ = writeln!(subs, "  {}component {p} p{t};", if repl { "replicating " } else { "" });
        let _ = writeln!(conns, "  connect in{t} -> p{t}.i;\n  connect p{t}.o -> out{t};");
        inputs.push((format!("in{t}"), t));
        outputs.push(format!("out{t}"));
        if repl {
            groups.push(format!("root/p{t}"));
        }
    }
    root.push_str(&subs);
    root.push_str(&conns);
    root.push_str("}\n");
    b.out.push_str(&root);
    Generated { source: b.out, root: "Root".into(), inputs, outputs, types, groups }
}

/// Scenario text driving `g` with random injections, sizes and timing.
/// Per-channel latencies are added separately once channel ids are known.
pub fn scenario_for(g: &Generated, rng: &mut ChaCha8Rng, messages: usize) -> String {
    let mut s = format!("scenario generated\nmodel gen.arc\nroot {}\nseed {}\n", g.root, rng.gen::<u32>());
    for grp in &g.groups {
        let _ = writeln!(s, "scale {grp} {} at 0", rng.gen_range(1..=4));
        if rng.gen_bool(0.5) {
            let _ = writeln!(s, "scale {grp} {} at {}", rng.gen_range(1..=4), rng.gen_range(1..8));
        }
    }
    for _ in 0..messages {
        let (port, t) = g.inputs.choose(rng).unwrap();
        let _ = writeln!(s, "inject {port} at {} {}", rng.gen_range(0..8), g.types[*t].literal(rng));
    }
    s
}

const WORDS: [&str; 8] = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"];

fn ident(rng: &mut ChaCha8Rng) -> String {
    format!("{}{}", WORDS.choose(rng).unwrap(), rng.gen_range(0..20))
}

fn endpoint(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..3) {
        0 => ident(rng),
        1 => format!("{}.{}", ident(rng), ident(rng)),
        _ => format!("{}.{}.{}", ident(rng), ident(rng), ident(rng)),
    }
}

/// Random whitespace, sometimes with a line comment.
fn ws(rng: &mut ChaCha8Rng) -> &'static str {
    [" ", "  ", "\n", "\t", " // note\n", "\n\n  "].choose(rng).unwrap()
}

/// Syntactically valid source in arbitrary layout. Names are unique per
/// declaration kind so the parser keeps every item.
pub fn any_source(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    let nm = rng.gen_range(0..4);
    let nc = rng.gen_range(1..5);
    for m in 0..nm {
        let _ = write!(s, "message{}M{m}{}{{", ws(rng), ws(rng));
        for f in 0..rng.gen_range(0..4) {
            let _ = write!(s, "{}f{f}{}:{}{};", ws(rng), ws(rng), PRIMS.choose(rng).unwrap(), ws(rng));
        }
        let _ = write!(s, "}}{}", ws(rng));
    }
    for c in 0..nc {
        let _ = write!(s, "component{}K{c}{}{{", ws(rng), ws(rng));
        for p in 0..rng.gen_range(0..4) {
            let dir = if rng.gen_bool(0.5) { "in" } else { "out" };
            let repl = if rng.gen_bool(0.2) { " replicating" } else { "" };
            let _ = write!(s, "{}port {dir} {} p{p}{repl};", ws(rng), ident(rng));
        }
        for k in 0..rng.gen_range(0..3) {
            let repl = if rng.gen_bool(0.3) { "replicating " } else { "" };
            let _ = write!(s, "{}{repl}component {} sub{k};", ws(rng), ident(rng));
        }
        for _ in 0..rng.gen_range(0..3) {
            let _ = write!(s, "{}connect {}{}->{}{};", ws(rng), endpoint(rng), ws(rng), ws(rng), endpoint(rng));
        }
        for x in 0..rng.gen_range(0..2) {
            let _ = write!(s, "{}context ctx{x} {{", ws(rng));
            for _ in 0..rng.gen_range(1..4) {
                let kw = if rng.gen_bool(0.5) { "open" } else { "close" };
                let _ = write!(s, "{}{kw} {} -> {};", ws(rng), endpoint(rng), endpoint(rng));
            }
            s.push('}');
        }
        if rng.gen_bool(0.7) {
            let _ = write!(s, "{}behavior {}(", ws(rng), ident(rng));
            let n = rng.gen_range(0..4);
            for a in 0..n {
                if a > 0 {
                    s.push(',');
                    s.push_str(ws(rng));
                }
                if rng.gen_bool(0.5) {
                    let _ = write!(s, "{}{}={}", ident(rng), ws(rng), ws(rng));
                }
                match rng.gen_range(0..4) {
                    0 => s.push_str(&rng.gen_range(-1000i64..1000).to_string()),
                    1 => s.push_str(&string_literal(rng)),
                    2 => s.push_str(if rng.gen_bool(0.5) { "true" } else { "false" }),
                    _ => s.push_str(&ident(rng)),
                }
            }
            s.push_str(");");
        }
        let _ = write!(s, "{}}}{}", ws(rng), ws(rng));
    }
    s
}
