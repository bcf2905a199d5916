//! Exhaustive interleaving exploration.
//!
//! Executes the program concretely over full stores (globals plus every
//! thread's locals) by breadth-first search over execution states.  A state
//! is a store plus one continuation (statement stack) per thread, deduped
//! structurally.  Calls are inlined, loops re-enqueue themselves, and a
//! failed assertion pushes an explicit failure marker, so "about to go
//! wrong" is visible in the continuation itself.
//!
//! Two schedulers are supported: preemptive (any thread may step anywhere)
//! and non-preemptive (the running thread keeps stepping until it reaches a
//! yield, blocks, or finishes).  For programs the checker verifies, the two
//! must agree on terminal stores and on whether wrong or deadlock is
//! reachable; `compare_schedulers` checks exactly that.
//!
//! Witness traces carry, per step, the acting thread, a rule name, the
//! statement span, and the store delta; `replay` re-executes a trace
//! against the semantics to confirm it is a real execution.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::action::{build_actions, Action, ActionTable, Layout, NodeActions};
use crate::ast::{Diagnostic, NodeId, Program, Span, Stmt, StmtKind};
use crate::effects::Effect;
use crate::moverspec::{effect_of, MoverTable};
use crate::space::{Val, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduler {
    Preemptive,
    Nonpreemptive,
}

#[derive(Debug, Clone)]
pub struct ExploreOptions {
    pub scheduler: Scheduler,
    /// Cap on distinct execution states.
    pub max_states: u64,
    /// Track the R*[N]L* phase of each thread between yields and flag
    /// effect-E steps and pattern violations.
    pub instrument: bool,
}

impl Default for ExploreOptions {
    fn default() -> ExploreOptions {
        ExploreOptions {
            scheduler: Scheduler::Preemptive,
            max_states: 1 << 22,
            instrument: false,
        }
    }
}

/// Sentinel node id for the failure marker pushed by a failed assertion.
pub const WRONG_NODE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct TraceStep {
    pub tid: u32,
    pub rule: String,
    pub span: Span,
    /// Human-readable store change, empty for silent steps.
    pub delta: String,
    /// Executed statement's node id; used by `replay`.
    pub node: u32,
    /// Full store after the step; used by `replay`.
    pub store: Vec<u16>,
}

impl std::fmt::Display for TraceStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} | {} | {} | {}", self.tid, self.rule, self.span, self.delta)
    }
}

pub type Trace = Vec<TraceStep>;

#[derive(Debug, Clone)]
pub struct Exploration {
    pub states: usize,
    pub transitions: usize,
    /// Stores of states where every thread has finished.
    pub terminal_stores: BTreeSet<Vec<u16>>,
    /// Shortest trace to a wrong state, if one is reachable.
    pub wrong: Option<Trace>,
    /// Shortest trace to a deadlock (all unfinished threads blocked).
    pub deadlock: Option<Trace>,
    pub deadlock_count: usize,
    /// Instrumentation findings (effect-E steps, R*[N]L* violations).
    pub phase_flags: Vec<String>,
}

/// One thread's pending work item.
#[derive(Clone, Copy)]
enum Task<'a> {
    Stmt(&'a Stmt),
    /// The program is about to go wrong (failed assertion).
    Wrong,
}

impl<'a> Task<'a> {
    fn id(&self) -> u32 {
        match self {
            Task::Stmt(s) => s.id.0,
            Task::Wrong => WRONG_NODE,
        }
    }
}

type Kont<'a> = Vec<Task<'a>>;

struct StateData<'a> {
    store: Vec<u16>,
    /// Continuation stacks, next statement last.
    konts: Vec<Kont<'a>>,
    running: Option<u32>,
    /// Per-thread R*[N]L* phase (0 = pre-commit, 1 = post-commit); empty
    /// unless instrumenting.
    phases: Vec<u8>,
    parent: Option<(usize, TraceStep)>,
}

fn state_key(s: &StateData) -> (Vec<u16>, Vec<Vec<u32>>, Option<u32>, Vec<u8>) {
    (
        s.store.clone(),
        s.konts.iter().map(|k| k.iter().map(Task::id).collect()).collect(),
        s.running,
        s.phases.clone(),
    )
}

/// One successor of a single thread.
struct Succ<'a> {
    rule: String,
    span: Span,
    node: u32,
    store: Vec<u16>,
    kont: Kont<'a>,
    effect: StepEffect,
}

/// Effect classification of a step for instrumentation.
#[derive(Clone, Copy)]
enum StepEffect {
    Silent,
    Yield,
    Action(NodeId, Branch),
}

#[derive(Clone, Copy)]
enum Branch {
    Only,
    First,
    Second,
}

fn push_block<'a>(kont: &mut Kont<'a>, block: &'a [Stmt]) {
    for s in block.iter().rev() {
        kont.push(Task::Stmt(s));
    }
}

/// All successors of thread `tid` from `store` with continuation `kont`.
/// An empty result means the thread is blocked (or finished, or stuck at
/// the failure marker).
fn thread_succs<'a>(
    p: &'a Program,
    world: &World,
    actions: &ActionTable,
    store: &[u16],
    kont: &Kont<'a>,
    tid: u32,
) -> Vec<Succ<'a>> {
    let Some(task) = kont.last() else { return Vec::new() };
    let s = match task {
        Task::Wrong => return Vec::new(),
        Task::Stmt(s) => *s,
    };
    let mut popped = kont.clone();
    popped.pop();
    let mut out = Vec::new();
    let mut fire = |a: &Action, kont: Kont<'a>, rule: &str, eff: StepEffect| {
        let mut succs = Vec::new();
        a.successors(world, Layout::Full, tid, store, &mut succs);
        for st in succs {
            out.push(Succ {
                rule: rule.to_string(),
                span: s.span,
                node: s.id.0,
                store: st,
                kont: kont.clone(),
                effect: eff,
            });
        }
    };
    match &s.kind {
        StmtKind::Wrong => {}
        StmtKind::Skip => out.push(Succ {
            rule: "skip".into(),
            span: s.span,
            node: s.id.0,
            store: store.to_vec(),
            kont: popped,
            effect: StepEffect::Silent,
        }),
        StmtKind::Yield => out.push(Succ {
            rule: "yield".into(),
            span: s.span,
            node: s.id.0,
            store: store.to_vec(),
            kont: popped,
            effect: StepEffect::Yield,
        }),
        StmtKind::Assign { .. }
        | StmtKind::UnstableRead { .. }
        | StmtKind::Acquire(_)
        | StmtKind::Release(_) => {
            let NodeActions::Single(a) = &actions[&s.id] else { unreachable!() };
            let rule = match &s.kind {
                StmtKind::Assign { .. } => "assign",
                StmtKind::UnstableRead { .. } => "unstable-read",
                StmtKind::Acquire(_) => "acquire",
                _ => "release",
            };
            fire(a, popped, rule, StepEffect::Action(s.id, Branch::Only));
        }
        StmtKind::Assert(_) => {
            let NodeActions::Branch(pass, fail) = &actions[&s.id] else { unreachable!() };
            fire(pass, popped.clone(), "assert-pass", StepEffect::Action(s.id, Branch::First));
            let mut failed = popped;
            failed.push(Task::Wrong);
            fire(fail, failed, "assert-fail", StepEffect::Action(s.id, Branch::Second));
        }
        StmtKind::If { then_branch, else_branch, .. } => {
            let NodeActions::Branch(a1, a2) = &actions[&s.id] else { unreachable!() };
            let mut k1 = popped.clone();
            push_block(&mut k1, then_branch);
            fire(a1, k1, "if-true", StepEffect::Action(s.id, Branch::First));
            let mut k2 = popped;
            push_block(&mut k2, else_branch);
            fire(a2, k2, "if-false", StepEffect::Action(s.id, Branch::Second));
        }
        StmtKind::While { body, .. } => {
            let NodeActions::Branch(a1, a2) = &actions[&s.id] else { unreachable!() };
            let mut again = kont.clone(); // loop head stays on the stack
            push_block(&mut again, body);
            fire(a1, again, "while-true", StepEffect::Action(s.id, Branch::First));
            fire(a2, popped, "while-false", StepEffect::Action(s.id, Branch::Second));
        }
        StmtKind::Call(name) => {
            if let Some(f) = p.func(name) {
                let mut k = popped;
                push_block(&mut k, &f.body);
                out.push(Succ {
                    rule: format!("call {}", name),
                    span: s.span,
                    node: s.id.0,
                    store: store.to_vec(),
                    kont: k,
                    effect: StepEffect::Silent,
                });
            }
        }
    }
    out
}

fn fmt_val(v: &Val) -> String {
    match v {
        Val::Int(n) => n.to_string(),
        Val::Bool(b) => b.to_string(),
        Val::NoneV => "None".into(),
        Val::List(l) => l
            .iter()
            .map(|e| format!("{}::", e))
            .chain(std::iter::once("Nil".into()))
            .collect(),
    }
}

fn slot_name(world: &World, idx: usize) -> String {
    if idx < world.globals.len() {
        world.globals[idx].name.clone()
    } else {
        let rel = idx - world.globals.len();
        let t = rel / world.locals.len() + 1;
        format!("{}@{}", world.locals[rel % world.locals.len()].name, t)
    }
}

fn fmt_delta(world: &World, pre: &[u16], post: &[u16]) -> String {
    let mut parts = Vec::new();
    for i in 0..pre.len() {
        if pre[i] != post[i] {
            let d = world.full_domain(i);
            parts.push(format!(
                "{}: {} -> {}",
                slot_name(world, i),
                fmt_val(&d.decode(pre[i])),
                fmt_val(&d.decode(post[i]))
            ));
        }
    }
    parts.join(", ")
}

/// Whether some thread in the state is about to execute wrong.
fn is_wrong(state: &StateData) -> bool {
    state.konts.iter().any(|k| {
        matches!(
            k.last(),
            Some(Task::Wrong) | Some(Task::Stmt(Stmt { kind: StmtKind::Wrong, .. }))
        )
    })
}

fn trace_to(states: &[StateData], mut i: usize) -> Trace {
    let mut t = Vec::new();
    while let Some((parent, step)) = &states[i].parent {
        t.push(step.clone());
        i = *parent;
    }
    t.reverse();
    t
}

pub fn explore(p: &Program, opts: &ExploreOptions) -> Result<Exploration, Diagnostic> {
    let world = World::new(p);
    let actions = build_actions(p, &world);
    let mt = opts.instrument.then(|| MoverTable::new(p, &world));
    let init = world.init_full_store(p)?;
    let n = world.n_threads as usize;

    let mut konts: Vec<Kont> = Vec::with_capacity(n);
    for t in &p.threads {
        let mut k = Vec::new();
        push_block(&mut k, t);
        konts.push(k);
    }
    let init_state = StateData {
        store: init,
        konts,
        running: None,
        phases: if opts.instrument { vec![0; n] } else { Vec::new() },
        parent: None,
    };

    let mut states: Vec<StateData> = Vec::new();
    let mut index: HashMap<_, usize> = HashMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    index.insert(state_key(&init_state), 0);
    states.push(init_state);
    queue.push_back(0);

    let mut out = Exploration {
        states: 0,
        transitions: 0,
        terminal_stores: BTreeSet::new(),
        wrong: None,
        deadlock: None,
        deadlock_count: 0,
        phase_flags: Vec::new(),
    };

    while let Some(cur) = queue.pop_front() {
        if states.len() as u64 > opts.max_states {
            return Err(Diagnostic {
                span: Span::default(),
                message: format!(
                    "exploration budget exceeded: more than {} states",
                    opts.max_states
                ),
            });
        }
        if is_wrong(&states[cur]) {
            if out.wrong.is_none() {
                out.wrong = Some(trace_to(&states, cur));
            }
            continue; // gone wrong; nothing further to execute
        }
        if states[cur].konts.iter().all(|k| k.is_empty()) {
            out.terminal_stores.insert(states[cur].store.clone());
            continue;
        }

        // Which threads the scheduler allows to step.
        let allowed: Vec<u32> = {
            let st = &states[cur];
            let free_for_all = match (opts.scheduler, st.running) {
                (Scheduler::Preemptive, _) | (_, None) => true,
                (Scheduler::Nonpreemptive, Some(r)) => {
                    let k = &st.konts[r as usize - 1];
                    match k.last() {
                        None => true, // finished
                        Some(Task::Stmt(s)) if matches!(s.kind, StmtKind::Yield) => true,
                        _ => thread_succs(p, &world, &actions, &st.store, k, r).is_empty(),
                    }
                }
            };
            if free_for_all {
                (1..=world.n_threads).collect()
            } else {
                vec![st.running.unwrap()]
            }
        };

        let mut any = false;
        for t in allowed {
            let succs = {
                let st = &states[cur];
                thread_succs(p, &world, &actions, &st.store, &st.konts[t as usize - 1], t)
            };
            for succ in succs {
                any = true;
                out.transitions += 1;
                let (mut phases, delta) = {
                    let st = &states[cur];
                    (st.phases.clone(), fmt_delta(&world, &st.store, &succ.store))
                };
                if let Some(mt) = &mt {
                    let e = match succ.effect {
                        StepEffect::Silent => Effect::B,
                        StepEffect::Yield => Effect::Y,
                        StepEffect::Action(id, br) => {
                            let a = match (&actions[&id], br) {
                                (NodeActions::Single(a), _) => a,
                                (NodeActions::Branch(a, _), Branch::First) => a,
                                (NodeActions::Branch(_, b), _) => b,
                            };
                            effect_of(&world, Layout::Full, mt, a, t, &states[cur].store)
                                .unwrap_or(Effect::E)
                        }
                    };
                    let ph = &mut phases[t as usize - 1];
                    match e {
                        Effect::Y => *ph = 0,
                        Effect::B => {}
                        Effect::R | Effect::N if *ph == 1 => {
                            out.phase_flags.push(format!(
                                "thread {} at {}: effect {} after the commit point breaks R*[N]L*",
                                t, succ.span, e
                            ));
                        }
                        Effect::R => {}
                        Effect::N | Effect::L => *ph = 1,
                        Effect::E => out.phase_flags.push(format!(
                            "thread {} at {}: step has effect E",
                            t, succ.span
                        )),
                    }
                }
                let mut konts = states[cur].konts.clone();
                konts[t as usize - 1] = succ.kont;
                let next = StateData {
                    store: succ.store.clone(),
                    konts,
                    running: match opts.scheduler {
                        Scheduler::Preemptive => None,
                        Scheduler::Nonpreemptive => Some(t),
                    },
                    phases,
                    parent: Some((
                        cur,
                        TraceStep {
                            tid: t,
                            rule: succ.rule,
                            span: succ.span,
                            delta,
                            node: succ.node,
                            store: succ.store,
                        },
                    )),
                };
                let key = state_key(&next);
                if let std::collections::hash_map::Entry::Vacant(e) = index.entry(key) {
                    e.insert(states.len());
                    queue.push_back(states.len());
                    states.push(next);
                }
            }
        }
        if !any {
            // Not all finished (checked above), and no thread can move.
            out.deadlock_count += 1;
            if out.deadlock.is_none() {
                out.deadlock = Some(trace_to(&states, cur));
            }
        }
    }

    out.states = states.len();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub equivalent: bool,
    pub details: Vec<String>,
    pub preemptive: Exploration,
    pub nonpreemptive: Exploration,
}

/// Runs both schedulers and compares terminal stores, wrong-reachability,
/// and deadlock-reachability.
pub fn compare_schedulers(p: &Program, max_states: u64) -> Result<Comparison, Diagnostic> {
    let pre = explore(
        p,
        &ExploreOptions { scheduler: Scheduler::Preemptive, max_states, instrument: false },
    )?;
    let non = explore(
        p,
        &ExploreOptions { scheduler: Scheduler::Nonpreemptive, max_states, instrument: false },
    )?;
    let world = World::new(p);
    let mut details = Vec::new();
    for s in pre.terminal_stores.difference(&non.terminal_stores) {
        details.push(format!(
            "terminal store only under the preemptive scheduler: {}",
            world.describe_full(s)
        ));
    }
    for s in non.terminal_stores.difference(&pre.terminal_stores) {
        details.push(format!(
            "terminal store only under the non-preemptive scheduler: {}",
            world.describe_full(s)
        ));
    }
    if pre.wrong.is_some() != non.wrong.is_some() {
        details.push(format!(
            "wrong reachable under {} scheduler only",
            if pre.wrong.is_some() { "the preemptive" } else { "the non-preemptive" }
        ));
    }
    if pre.deadlock.is_some() != non.deadlock.is_some() {
        details.push(format!(
            "deadlock reachable under {} scheduler only",
            if pre.deadlock.is_some() { "the preemptive" } else { "the non-preemptive" }
        ));
    }
    Ok(Comparison { equivalent: details.is_empty(), details, preemptive: pre, nonpreemptive: non })
}

/// Re-executes a trace against the semantics: every step must be a real
/// successor of the current state for its thread.  Returns whether the
/// final state is wrong.
pub fn replay(p: &Program, trace: &Trace) -> Result<bool, String> {
    let world = World::new(p);
    let actions = build_actions(p, &world);
    let mut store = world.init_full_store(p).map_err(|d| d.to_string())?;
    let mut konts: Vec<Kont> = Vec::new();
    for t in &p.threads {
        let mut k = Vec::new();
        push_block(&mut k, t);
        konts.push(k);
    }
    for (i, step) in trace.iter().enumerate() {
        if step.tid == 0 || step.tid > world.n_threads {
            return Err(format!("step {}: no such thread {}", i, step.tid));
        }
        let ti = step.tid as usize - 1;
        let succs = thread_succs(p, &world, &actions, &store, &konts[ti], step.tid);
        let Some(m) = succs.into_iter().find(|s| s.node == step.node && s.store == step.store)
        else {
            return Err(format!(
                "step {}: thread {} has no successor for node {} reaching {}",
                i,
                step.tid,
                step.node,
                world.describe_full(&step.store)
            ));
        };
        store = m.store;
        konts[ti] = m.kont;
    }
    let wrong = konts.iter().any(|k| {
        matches!(
            k.last(),
            Some(Task::Wrong) | Some(Task::Stmt(Stmt { kind: StmtKind::Wrong, .. }))
        )
    });
    Ok(wrong)
}
