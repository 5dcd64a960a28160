use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cloudadl::harness::{self, HarnessError, RunOptions, Verdict};
use cloudadl::{check, load_files, parse_model, pretty_print, Diagnostic};

#[derive(Parser)]
#[command(name = "cloudadl", version, about = "Check, format and simulate cloudADL architecture models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load model files and report every diagnostic.
    Check {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Run a scenario and print its verdict.
    Sim {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "max-steps")]
        max_steps: Option<u64>,
        /// Write the event log here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// File of `PATTERN STEPS` lines overriding channel latencies.
        #[arg(long)]
        latency: Option<PathBuf>,
        /// Directory for store result files.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Rewrite model files in canonical form.
    Fmt {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

const OK: u8 = 0;
const FAILED: u8 = 1;
const DIAGNOSTICS: u8 = 2;
const FATAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Check { paths } => cmd_check(&paths),
        Command::Sim { scenario, seed, max_steps, trace, latency, results } => {
            cmd_sim(&scenario, seed, max_steps, trace.as_deref(), latency.as_deref(), results.as_deref())
        }
        Command::Fmt { paths } => cmd_fmt(&paths),
    };
    ExitCode::from(status)
}

fn print_diags(diags: &[Diagnostic]) {
    for d in diags {
        println!("{d}");
    }
}

fn cmd_check(paths: &[PathBuf]) -> u8 {
    let diags = match load_files(paths) {
        Ok(model) => check(&model),
        Err(d) => d,
    };
    print_diags(&diags);
    if diags.is_empty() {
        OK
    } else {
        DIAGNOSTICS
    }
}

fn read_latency_file(path: &Path) -> anyhow::Result<Vec<(String, u64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        let mut words = line.split_whitespace();
        match (words.next(), words.next().map(str::parse::<u64>), words.next()) {
            (Some(pat), Some(Ok(steps)), None) if steps >= 1 => out.push((pat.to_string(), steps)),
            _ => anyhow::bail!("{}:{}: expected `PATTERN STEPS` with STEPS >= 1", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn cmd_sim(
    scenario: &Path,
    seed: Option<u64>,
    max_steps: Option<u64>,
    trace: Option<&Path>,
    latency: Option<&Path>,
    results: Option<&Path>,
) -> u8 {
    let loaded = match harness::load_scenario_file(scenario) {
        Ok(s) => s,
        Err(d) => {
            print_diags(&d);
            return DIAGNOSTICS;
        }
    };
    let latency = match latency.map(read_latency_file).transpose() {
        Ok(l) => l.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return DIAGNOSTICS;
        }
    };
    let opts = RunOptions { seed, max_steps, latency };
    let outcome = match harness::run_scenario(&loaded, &opts) {
        Ok(o) => o,
        Err(e @ (HarnessError::Instantiate(_) | HarnessError::BadLatency(_))) => {
            eprintln!("error: {e}");
            return DIAGNOSTICS;
        }
        Err(e @ HarnessError::Runtime(_)) => {
            eprintln!("error: {e}");
            return FATAL;
        }
    };
    if let Some(path) = trace {
        if let Err(e) = std::fs::write(path, outcome.log.render()) {
            eprintln!("error: {}: {e}", path.display());
            return DIAGNOSTICS;
        }
    }
    if let Some(dir) = results {
        if let Err(e) = harness::write_results(&outcome.stores, dir) {
            eprintln!("error: {}: {e}", dir.display());
            return DIAGNOSTICS;
        }
    }
    println!("{}", outcome.verdict);
    match outcome.verdict {
        Verdict::Pass => OK,
        Verdict::Fail { .. } => FAILED,
        Verdict::Fatal { .. } => FATAL,
    }
}

fn cmd_fmt(paths: &[PathBuf]) -> u8 {
    let mut status = OK;
    for path in paths {
        let origin = path.display().to_string();
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                println!("{origin}:1:1: E_IO: cannot read file: {e}");
                status = DIAGNOSTICS;
                continue;
            }
        };
        match parse_model(&text, &origin) {
            Ok(model) => {
                let canonical = pretty_print(&model);
                if canonical != text {
                    if let Err(e) = std::fs::write(path, canonical) {
                        println!("{origin}:1:1: E_IO: cannot write file: {e}");
                        status = DIAGNOSTICS;
                    }
                }
            }
            Err(d) => {
                for x in d {
                    println!("{x}");
                }
                status = DIAGNOSTICS;
            }
        }
    }
    status
}
