//! Command-line front end: argument parsing, report rendering, exit codes.
//!
//! Exit codes: 0 success (verified / no wrong reachable / valid /
//! equivalent), 1 the analysis found a problem in the program, 2 usage or
//! structural errors (unreadable file, parse errors, ill-formed program,
//! busted budget).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::ast::{Diagnostic, Program};
use crate::checker::{self, CheckOptions, Report};
use crate::explorer::{self, ExploreOptions, Scheduler, Trace};
use crate::moverspec;
use crate::parser;

const DEFAULT_BUDGET: u64 = 1 << 24;

#[derive(Parser)]
#[command(name = "mvl", version, about = "Mover-logic verifier and interleaving explorer")]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify a program against its mover specification.
    Verify(Common),
    /// Exhaustively explore thread interleavings.
    Explore(Common),
    /// Check the validity of the mover specification alone.
    Movers(Common),
    /// Print the source annotated with per-statement effects.
    Effects(Common),
}

#[derive(Args)]
struct Common {
    /// Program file (.mvl).
    path: PathBuf,
    /// Override the integer window exponent (2..=8).
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=8))]
    bits: Option<u32>,
    /// Override the list depth cap (1..=4).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=4))]
    listdepth: Option<u32>,
    /// State/space budget (default: MVL_BUDGET or 2^24).
    #[arg(long)]
    budget: Option<u64>,
    /// Interleaving scheduler for explore.
    #[arg(long, value_enum, default_value_t = Sched::Preemptive)]
    scheduler: Sched,
    /// Explore under both schedulers and compare the outcomes.
    #[arg(long)]
    compare: bool,
    /// Where left-mover totality is required.
    #[arg(long, value_enum, default_value_t = Totality::Global)]
    totality: Totality,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sched {
    Preemptive,
    Nonpreemptive,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Totality {
    /// Left-movers must be enabled on every store.
    Global,
    /// Left-movers must be enabled on the stores reachable at the statement.
    Reachable,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

impl Common {
    fn budget(&self) -> u64 {
        self.budget
            .or_else(|| std::env::var("MVL_BUDGET").ok().and_then(|v| v.parse().ok()))
            .unwrap_or(DEFAULT_BUDGET)
    }

    fn load(&self) -> Result<(String, Program), (i32, String)> {
        let src = std::fs::read_to_string(&self.path)
            .map_err(|e| (2, format!("cannot read {}: {}", self.path.display(), e)))?;
        let mut p = parser::parse(&src).map_err(|errs| {
            let mut out = String::new();
            for e in errs {
                out.push_str(&format!("{}: parse error: {}\n", e.span, e.message));
            }
            (2, out.trim_end().to_string())
        })?;
        if let Some(b) = self.bits {
            p.bits = b;
        }
        if let Some(d) = self.listdepth {
            p.list_depth = d;
        }
        Ok((src, p))
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let (common, result) = match &cli.cmd {
        Cmd::Verify(c) => (c, cmd_verify(c)),
        Cmd::Explore(c) => (c, cmd_explore(c)),
        Cmd::Movers(c) => (c, cmd_movers(c)),
        Cmd::Effects(c) => (c, cmd_effects(c)),
    };
    // Ignore write errors (e.g. a closed pipe) instead of panicking.
    use std::io::Write;
    match result {
        Ok((code, text)) => {
            let _ = writeln!(std::io::stdout(), "{}", text);
            code
        }
        Err((code, msg)) => {
            if common.format == Format::Json {
                let _ = writeln!(
                    std::io::stdout(),
                    "{}",
                    serde_json::to_string_pretty(&json!({
                        "version": env!("CARGO_PKG_VERSION"),
                        "program": common.path.display().to_string(),
                        "verdict": "error",
                        "failures": [ { "rule": "error", "message": msg } ],
                        "effects": [],
                        "stats": {},
                    }))
                    .unwrap()
                );
            } else {
                eprintln!("{}", msg);
            }
            code
        }
    }
}

fn diags_err(diags: Vec<Diagnostic>) -> (i32, String) {
    let mut out = String::new();
    for d in diags {
        out.push_str(&format!("{}\n", d));
    }
    (2, out.trim_end().to_string())
}

fn report_json(c: &Common, verdict: &str, report: &Report) -> String {
    let failures: Vec<_> = report
        .failures
        .iter()
        .map(|f| {
            json!({
                "rule": f.rule,
                "span": f.span.to_string(),
                "message": f.message,
                "context": f.context,
            })
        })
        .collect();
    let effects: Vec<_> = report
        .effects
        .iter()
        .map(|e| json!({ "span": e.span.to_string(), "effect": e.effect.name() }))
        .collect();
    serde_json::to_string_pretty(&json!({
        "version": env!("CARGO_PKG_VERSION"),
        "program": c.path.display().to_string(),
        "verdict": verdict,
        "failures": failures,
        "effects": effects,
        "stats": {
            "store_space": report.stats.store_space,
            "threads": report.stats.threads,
            "functions": report.fn_results.len(),
        },
    }))
    .unwrap()
}

fn cmd_verify(c: &Common) -> Result<(i32, String), (i32, String)> {
    let (_, p) = c.load()?;
    let opts = CheckOptions {
        budget: c.budget(),
        totality_reachable: c.totality == Totality::Reachable,
    };
    let report = checker::check_program(&p, &opts).map_err(diags_err)?;
    let verdict = if report.verified() { "verified" } else { "failed" };
    let code = if report.verified() { 0 } else { 1 };
    if c.format == Format::Json {
        return Ok((code, report_json(c, verdict, &report)));
    }
    let mut out = format!("{}: {}\n", c.path.display(), verdict);
    for (name, ok) in &report.fn_results {
        out.push_str(&format!("  fn {}(): {}\n", name, if *ok { "ok" } else { "failed" }));
    }
    for f in &report.failures {
        out.push_str(&format!("  {}\n", f));
    }
    out.push_str(&format!(
        "  stats: {} stores per thread view, {} threads",
        report.stats.store_space, report.stats.threads
    ));
    Ok((code, out))
}

fn fmt_trace(label: &str, trace: &Trace) -> String {
    let mut out = format!("  {} ({} steps):\n", label, trace.len());
    out.push_str("    tid | rule | statement | store delta\n");
    for step in trace {
        out.push_str(&format!("    {}\n", step));
    }
    out
}

fn cmd_explore(c: &Common) -> Result<(i32, String), (i32, String)> {
    let (_, p) = c.load()?;
    let diags = crate::ast::well_formed(&p);
    if !diags.is_empty() {
        return Err(diags_err(diags));
    }
    let budget = c.budget();
    if c.compare {
        let cmp = explorer::compare_schedulers(&p, budget).map_err(|d| (2, d.to_string()))?;
        let verdict = if cmp.equivalent { "equivalent" } else { "different" };
        let code = if cmp.equivalent { 0 } else { 1 };
        if c.format == Format::Json {
            return Ok((
                code,
                serde_json::to_string_pretty(&json!({
                    "version": env!("CARGO_PKG_VERSION"),
                    "program": c.path.display().to_string(),
                    "verdict": verdict,
                    "failures": cmp.details.iter().map(|d| json!({
                        "rule": "scheduler difference", "message": d,
                    })).collect::<Vec<_>>(),
                    "effects": [],
                    "stats": {
                        "preemptive_states": cmp.preemptive.states,
                        "nonpreemptive_states": cmp.nonpreemptive.states,
                        "preemptive_terminals": cmp.preemptive.terminal_stores.len(),
                        "nonpreemptive_terminals": cmp.nonpreemptive.terminal_stores.len(),
                    },
                }))
                .unwrap(),
            ));
        }
        let mut out = format!("{}: {}\n", c.path.display(), verdict);
        for d in &cmp.details {
            out.push_str(&format!("  {}\n", d));
        }
        out.push_str(&format!(
            "  preemptive: {} states, {} terminal stores; non-preemptive: {} states, {} terminal stores",
            cmp.preemptive.states,
            cmp.preemptive.terminal_stores.len(),
            cmp.nonpreemptive.states,
            cmp.nonpreemptive.terminal_stores.len()
        ));
        return Ok((code, out));
    }
    let opts = ExploreOptions {
        scheduler: match c.scheduler {
            Sched::Preemptive => Scheduler::Preemptive,
            Sched::Nonpreemptive => Scheduler::Nonpreemptive,
        },
        max_states: budget,
        instrument: false,
    };
    let e = explorer::explore(&p, &opts).map_err(|d| (2, d.to_string()))?;
    let verdict = if e.wrong.is_some() { "wrong reachable" } else { "no wrong reachable" };
    let code = if e.wrong.is_some() { 1 } else { 0 };
    if c.format == Format::Json {
        let mut failures = Vec::new();
        if let Some(t) = &e.wrong {
            failures.push(json!({
                "rule": "wrong reachable",
                "message": t.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("\n"),
            }));
        }
        if let Some(t) = &e.deadlock {
            failures.push(json!({
                "rule": "deadlock",
                "message": t.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("\n"),
            }));
        }
        return Ok((
            code,
            serde_json::to_string_pretty(&json!({
                "version": env!("CARGO_PKG_VERSION"),
                "program": c.path.display().to_string(),
                "verdict": verdict,
                "failures": failures,
                "effects": [],
                "stats": {
                    "states": e.states,
                    "transitions": e.transitions,
                    "terminal_stores": e.terminal_stores.len(),
                    "deadlocks": e.deadlock_count,
                },
            }))
            .unwrap(),
        ));
    }
    let mut out = format!("{}: {}\n", c.path.display(), verdict);
    if let Some(t) = &e.wrong {
        out.push_str(&fmt_trace("witness trace to wrong", t));
    }
    if let Some(t) = &e.deadlock {
        out.push_str(&format!("  deadlock reachable ({} deadlock states)\n", e.deadlock_count));
        out.push_str(&fmt_trace("witness trace to deadlock", t));
    }
    out.push_str(&format!(
        "  {} states, {} transitions, {} terminal stores",
        e.states,
        e.transitions,
        e.terminal_stores.len()
    ));
    Ok((code, out))
}

fn cmd_movers(c: &Common) -> Result<(i32, String), (i32, String)> {
    let (_, p) = c.load()?;
    let diags = crate::ast::well_formed(&p);
    if !diags.is_empty() {
        return Err(diags_err(diags));
    }
    let world = crate::space::World::new(&p);
    let actions = crate::action::build_actions(&p, &world);
    let violations = moverspec::check_validity(&p, &world, &actions, c.budget())
        .map_err(|d| (2, d.to_string()))?;
    let verdict = if violations.is_empty() { "valid" } else { "invalid" };
    let code = if violations.is_empty() { 0 } else { 1 };
    if c.format == Format::Json {
        return Ok((
            code,
            serde_json::to_string_pretty(&json!({
                "version": env!("CARGO_PKG_VERSION"),
                "program": c.path.display().to_string(),
                "verdict": verdict,
                "failures": violations.iter().map(|v| json!({
                    "rule": format!("validity condition ({})", v.condition),
                    "span": v.a1_span.to_string(),
                    "message": v.to_string(),
                })).collect::<Vec<_>>(),
                "effects": [],
                "stats": { "violations": violations.len() },
            }))
            .unwrap(),
        ));
    }
    let mut out = format!("{}: mover specification is {}\n", c.path.display(), verdict);
    for v in &violations {
        out.push_str(&format!("  {}\n", v));
    }
    out.push_str(&format!("  {} violations", violations.len()));
    Ok((code, out))
}

fn cmd_effects(c: &Common) -> Result<(i32, String), (i32, String)> {
    let (src, p) = c.load()?;
    let opts = CheckOptions {
        budget: c.budget(),
        totality_reachable: c.totality == Totality::Reachable,
    };
    let report = checker::check_program(&p, &opts).map_err(diags_err)?;
    if c.format == Format::Json {
        let verdict = if report.verified() { "verified" } else { "failed" };
        return Ok((0, report_json(c, verdict, &report)));
    }
    Ok((0, render_effects(&src, &report)))
}

/// Renders the source with a margin of per-statement effects.  Statements
/// between yields form one reducible sequence; a `--` marker in the margin
/// shows each yield, i.e. each group boundary.
pub fn render_effects(src: &str, report: &Report) -> String {
    use std::collections::BTreeMap;
    let mut by_line: BTreeMap<u32, Vec<(u32, &str)>> = BTreeMap::new();
    for e in &report.effects {
        by_line
            .entry(e.span.start_line)
            .or_default()
            .push((e.span.start_col, e.effect.name()));
    }
    let mut out = String::new();
    for (i, line) in src.lines().enumerate() {
        let ln = i as u32 + 1;
        let margin = match by_line.get(&ln) {
            None => String::new(),
            Some(effs) => {
                let mut effs = effs.clone();
                effs.sort();
                effs.iter()
                    .map(|(_, e)| if *e == "Y" { "--" } else { e })
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        };
        out.push_str(&format!("{:>6} | {}\n", margin, line));
    }
    out.trim_end().to_string()
}
