//! The mover-logic verifier.
//!
//! Verification is a strongest-postcondition computation over [`Rel`]
//! predicates: each statement maps a set of (pre, post) store pairs — the
//! stores reachable since the last yield, paired with the store at that
//! yield — to the pairs reachable after it, together with a mover effect.
//! Sequencing composes effects with [`Effect::seq`]; a composition landing
//! on E means the statement sequence cannot be reduced to the pattern
//! "right-movers, at most one non-mover, left-movers" between yields, and
//! is reported as a failure.
//!
//! On top of the statement rules sit function contracts (atomic functions
//! check their body without interference and summarize as a two-store
//! postcondition framed on their write set; non-atomic functions check
//! under their declared rely/guarantee) and the whole-program rule: the
//! mover specification must be valid, every thread body must start with a
//! yield, check with an effect other than E, re-establish the program
//! guarantee, and every thread's guarantee must be contained in every other
//! thread's rely.
//!
//! Rely and guarantee formulas denote stutter-closed relations: the
//! identity transition always satisfies them, and they constrain globals
//! only (locals are preserved across interference).  Inside atomic
//! functions both relations are empty, so a reachable yield there is an
//! error and no interference is applied.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::action::{build_actions, Action, ActionTable, Layout, NodeActions};
use crate::ast::{
    well_formed, Cond, Diagnostic, Expr, FnDecl, FnSpec, Formula, NodeId, Program, Span, Stmt,
    StmtKind, Ty, VarId,
};
use crate::ast::mentioned_names;
use crate::effects::Effect;
use crate::moverspec::{check_validity, effect_of, effect_over, MoverTable};
use crate::rel::Rel;
use crate::space::{assignable, holds, proj_lookup2, type_of, ProjSpace, World};

#[derive(Debug, Clone)]
pub struct CheckOptions {
    /// Cap on |threads| x |projected store space| (and on the validity
    /// check's per-pair enumeration).
    pub budget: u64,
    /// When true, totality of left-movers is only required on the stores
    /// reachable at the statement rather than on every store.
    pub totality_reachable: bool,
}

impl Default for CheckOptions {
    fn default() -> CheckOptions {
        CheckOptions { budget: 1 << 24, totality_reachable: false }
    }
}

/// One verification failure with a short rule name, the offending source
/// span, and a witness-bearing message.
#[derive(Debug, Clone)]
pub struct Failure {
    pub rule: String,
    pub span: Span,
    pub message: String,
    /// Which function or thread the failure was found in.
    pub context: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: [{}] {} (in {})", self.span, self.rule, self.message, self.context)
    }
}

/// The computed effect of one statement.
#[derive(Debug, Clone)]
pub struct StmtEffect {
    pub id: NodeId,
    pub span: Span,
    pub effect: Effect,
}

#[derive(Debug, Clone, Default)]
pub struct Stats {
    /// Size of the projected store space (one thread's view).
    pub store_space: u64,
    pub threads: u32,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub failures: Vec<Failure>,
    /// Per-statement effects in source order.
    pub effects: Vec<StmtEffect>,
    /// Per-function verdicts in declaration order.
    pub fn_results: Vec<(String, bool)>,
    pub stats: Stats,
}

impl Report {
    pub fn verified(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks a whole program.  `Err` carries structural problems (ill-formed
/// or ill-typed programs, busted budget); `Ok` carries the verdict.
pub fn check_program(p: &Program, opts: &CheckOptions) -> Result<Report, Vec<Diagnostic>> {
    let mut diags = well_formed(p);
    if !diags.is_empty() {
        return Err(diags);
    }
    let world = World::new(p);
    diags.extend(typecheck(p, &world));
    if !diags.is_empty() {
        return Err(diags);
    }
    let space = ProjSpace::new(&world);
    let weight = (world.n_threads.max(1) as u64).saturating_mul(space.size);
    if weight > opts.budget {
        return Err(vec![Diagnostic {
            span: Span::default(),
            message: format!(
                "state budget exceeded: {} threads x {} stores = {} > {} (raise --budget or shrink bits/listdepth)",
                world.n_threads.max(1),
                space.size,
                weight,
                opts.budget
            ),
        }]);
    }
    let init = world.init_proj_store(p).map_err(|d| vec![d])?;
    let init_idx = space.encode(&init);
    let actions = build_actions(p, &world);
    let mt = MoverTable::new(p, &world);

    let mut ck = Ck {
        p,
        world,
        space,
        actions,
        mt,
        opts,
        failures: Vec::new(),
        effects: BTreeMap::new(),
        fn_results: Vec::new(),
        silent: 0,
        wsets: HashMap::new(),
    };

    let prog = ck.p;
    for f in &prog.fns {
        ck.check_fn(f);
    }

    match check_validity(prog, &ck.world, &ck.actions, opts.budget) {
        Ok(violations) => {
            for v in violations {
                ck.failures.push(Failure {
                    rule: format!("validity condition ({})", v.condition),
                    span: v.a1_span,
                    message: v.to_string(),
                    context: "mover specification".into(),
                });
            }
        }
        Err(d) => return Err(vec![d]),
    }

    for t in 1..=ck.world.n_threads {
        ck.check_thread(t, init_idx);
    }

    // Every thread's guarantee must be contained in every other thread's
    // rely.  (The initial stores trivially satisfy the guarantee because
    // guarantees are stutter-closed.)
    for t in 1..=ck.world.n_threads {
        for u in 1..=ck.world.n_threads {
            if t == u {
                continue;
            }
            if let Err((pre, post)) =
                ck.pair_implies(Some(&prog.guarantees), t, Some(&prog.relies), u)
            {
                ck.failures.push(Failure {
                    rule: "guarantee/rely containment".into(),
                    span: Span::default(),
                    message: format!(
                        "thread {}'s guarantee admits {} -> {}, which thread {}'s rely does not",
                        t,
                        fmt_globals(&ck.world, &pre),
                        fmt_globals(&ck.world, &post),
                        u
                    ),
                    context: "program interference specification".into(),
                });
            }
        }
    }

    let effects = ck
        .effects
        .iter()
        .map(|(id, (span, e))| StmtEffect { id: *id, span: *span, effect: *e })
        .collect();
    Ok(Report {
        failures: ck.failures,
        effects,
        fn_results: ck.fn_results,
        stats: Stats { store_space: ck.space.size, threads: ck.world.n_threads },
    })
}

/// Type checking pass over every statement and specification formula.
pub fn typecheck(p: &Program, world: &World) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut want_bool = |f: &Formula, sp: Span, what: &str| match type_of(world, f) {
        Ok(Ty::Bool) => {}
        Ok(t) => diags.push(Diagnostic {
            span: sp,
            message: format!("{} must be boolean, found {:?}", what, t),
        }),
        Err(mut d) => {
            if d.span == Span::default() {
                d.span = sp;
            }
            diags.push(d);
        }
    };

    for v in &p.vars {
        for c in &v.clauses {
            want_bool(&c.condition, c.span, "mover clause condition");
        }
    }
    for f in &p.fns {
        match &f.spec {
            FnSpec::Atomic { requires, ensures, .. } => {
                want_bool(requires, f.span, "requires clause");
                want_bool(ensures, f.span, "ensures clause");
            }
            FnSpec::NonAtomic { relies, guarantees, requires, ensures } => {
                want_bool(relies, f.span, "relies clause");
                want_bool(guarantees, f.span, "guarantees clause");
                want_bool(requires, f.span, "requires clause");
                want_bool(ensures, f.span, "ensures clause");
            }
        }
    }
    want_bool(&p.relies, Span::default(), "program relies clause");
    want_bool(&p.guarantees, Span::default(), "program guarantees clause");

    let mut stmt_diags = Vec::new();
    crate::ast::for_each_stmt(p, |s| match &s.kind {
        StmtKind::Assign { target, target_span, expr } => {
            let Some(id) = world.resolve(target) else { return };
            match type_of(world, expr) {
                Ok(t) => {
                    if !assignable(world.info(id).domain.ty(), t) {
                        stmt_diags.push(Diagnostic {
                            span: *target_span,
                            message: format!(
                                "cannot assign {:?} to `{}` of type {:?}",
                                t,
                                target,
                                world.info(id).domain.ty()
                            ),
                        });
                    }
                }
                Err(mut d) => {
                    if d.span == Span::default() {
                        d.span = s.span;
                    }
                    stmt_diags.push(d);
                }
            }
        }
        StmtKind::Assert(f) => check_bool(world, f, s.span, "assert condition", &mut stmt_diags),
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => {
            match cond {
                Cond::Test(f) => check_bool(world, f, s.span, "condition", &mut stmt_diags),
                Cond::Cas { var, var_span, expected, new, .. } => {
                    let Some(id) = world.resolve(var) else { return };
                    let vt = world.info(id).domain.ty();
                    for e in [expected, new] {
                        match type_of(world, e) {
                            Ok(t) if assignable(vt, t) || (vt == Ty::Int && t == Ty::OptInt) => {}
                            Ok(t) => stmt_diags.push(Diagnostic {
                                span: *var_span,
                                message: format!(
                                    "cas argument of type {:?} does not fit `{}` of type {:?}",
                                    t, var, vt
                                ),
                            }),
                            Err(mut d) => {
                                if d.span == Span::default() {
                                    d.span = s.span;
                                }
                                stmt_diags.push(d);
                            }
                        }
                    }
                }
            }
            if let StmtKind::While { invariant: Some(inv), .. } = &s.kind {
                check_bool(world, inv, s.span, "loop invariant", &mut stmt_diags);
            }
        }
        _ => {}
    });
    diags.extend(stmt_diags);
    diags
}

fn check_bool(world: &World, f: &Formula, sp: Span, what: &str, out: &mut Vec<Diagnostic>) {
    match type_of(world, f) {
        Ok(Ty::Bool) => {}
        Ok(t) => out.push(Diagnostic {
            span: sp,
            message: format!("{} must be boolean, found {:?}", what, t),
        }),
        Err(mut d) => {
            if d.span == Span::default() {
                d.span = sp;
            }
            out.push(d);
        }
    }
}

/// Result of checking one statement or sequence.
struct Jdg {
    post: Rel,
    effect: Effect,
    /// Whether this judgment is a loop whose effect was promoted with R
    /// because it may not terminate; used to name the failure if a later
    /// sequential composition becomes irreducible as a result.
    promoted: bool,
}

/// A rely/guarantee context for checking one body.  `None` formulas denote
/// the empty relation (atomic function bodies).
struct Ctx<'c> {
    tid: u32,
    rely: Option<&'c Formula>,
    guar: Option<&'c Formula>,
    label: String,
    /// Interference closure memo: global part of a store -> reachable
    /// global parts under the reflexive-transitive rely.
    reach: HashMap<Vec<u16>, Vec<Vec<u16>>>,
}

struct Ck<'a> {
    p: &'a Program,
    world: World,
    space: ProjSpace,
    actions: ActionTable,
    mt: MoverTable,
    opts: &'a CheckOptions,
    failures: Vec<Failure>,
    effects: BTreeMap<NodeId, (Span, Effect)>,
    fn_results: Vec<(String, bool)>,
    /// Non-zero while exploring loop fixpoints; suppresses reporting.
    silent: u32,
    /// Memoized per-function transitive write sets.
    wsets: HashMap<String, Vec<VarId>>,
}

impl<'a> Ck<'a> {
    fn fail(&mut self, rule: &str, span: Span, message: String, ctx: &str) {
        if self.silent == 0 {
            self.failures.push(Failure {
                rule: rule.into(),
                span,
                message,
                context: ctx.into(),
            });
        }
    }

    fn record(&mut self, s: &Stmt, e: Effect) {
        if self.silent == 0 {
            self.effects.insert(s.id, (s.span, e));
        }
    }

    fn holds2(&self, f: &Formula, tid: u32, pre: &[u16], post: &[u16]) -> bool {
        holds(&self.world, f, tid, &proj_lookup2(&self.world, pre, post))
    }

    fn holds1(&self, f: &Formula, tid: u32, st: &[u16]) -> bool {
        self.holds2(f, tid, st, st)
    }

    fn single_action(&self, id: NodeId) -> Action {
        match &self.actions[&id] {
            NodeActions::Single(a) => a.clone(),
            NodeActions::Branch(..) => unreachable!("statement denotes one action"),
        }
    }

    fn branch_actions(&self, id: NodeId) -> (Action, Action) {
        match &self.actions[&id] {
            NodeActions::Branch(a, b) => (a.clone(), b.clone()),
            NodeActions::Single(_) => unreachable!("conditional denotes two actions"),
        }
    }

    /// Relational composition of a predicate with one action.  Successor
    /// sets are memoized per equivalence class of post stores (stores that
    /// differ only in a coordinate the action overwrites without reading),
    /// and each class is applied once per pre store; this keeps actions like
    /// an unstable read inside a retry loop from regenerating the same
    /// posts quadratically.
    fn compose(&self, a: &Action, tid: u32, p: &Rel) -> Rel {
        let mut out = Rel::empty(p.size());
        let wipe = a.clobbered(&self.world).map(|id| self.world.proj_index(id));
        let mut store = vec![0u16; self.world.proj_len()];
        let mut succ: Vec<Vec<u16>> = Vec::new();
        let mut memo: HashMap<u64, Vec<u64>> = HashMap::new();
        let mut cur_pre = u64::MAX;
        let mut seen: Vec<u64> = Vec::new();
        for (pre, post) in p.iter() {
            if pre != cur_pre {
                cur_pre = pre;
                seen.clear();
            }
            let key = match wipe {
                Some(idx) => {
                    self.space.decode(post, &mut store);
                    store[idx] = 0;
                    self.space.encode(&store)
                }
                None => post,
            };
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            if !memo.contains_key(&key) {
                self.space.decode(post, &mut store);
                succ.clear();
                a.successors(&self.world, Layout::Proj, tid, &store, &mut succ);
                let encoded: Vec<u64> = succ.iter().map(|s| self.space.encode(s)).collect();
                memo.insert(key, encoded);
            }
            for &q2 in &memo[&key] {
                out.insert(pre, q2);
            }
        }
        out
    }

    /// Effect and post of one primitive action.  `require_total` is false
    /// for the branches of a conditional, whose union is total by
    /// construction.
    fn action_stmt(&mut self, ctx: &Ctx, a: &Action, p: &Rel, require_total: bool) -> (Rel, Effect) {
        let e = effect_over(&self.world, &self.mt, a, ctx.tid, p, &self.space);
        if e == Effect::E {
            let mut at = String::new();
            for idx in p.posts() {
                let st = self.space.decode_vec(idx);
                if effect_of(&self.world, Layout::Proj, &self.mt, a, ctx.tid, &st)
                    == Some(Effect::E)
                {
                    at = format!(" at {}", self.world.describe_proj(&st));
                    break;
                }
            }
            self.fail(
                "effect",
                a.span,
                format!("no mover clause gives {} an effect{}", a.label, at),
                &ctx.label,
            );
        }
        if require_total && e.leq(Effect::L) {
            // Left-movers (and the effects below them) must be enabled
            // everywhere, otherwise moving them earlier could block.
            let witness = if self.opts.totality_reachable {
                let mut w = None;
                let mut succ: Vec<Vec<u16>> = Vec::new();
                for idx in p.posts() {
                    let st = self.space.decode_vec(idx);
                    succ.clear();
                    a.successors(&self.world, Layout::Proj, ctx.tid, &st, &mut succ);
                    if succ.is_empty() {
                        w = Some(st);
                        break;
                    }
                }
                w
            } else {
                a.is_total(&self.world, ctx.tid).err()
            };
            if let Some(st) = witness {
                self.fail(
                    "totality",
                    a.span,
                    format!(
                        "{} has effect {} but is disabled at {}",
                        a.label,
                        e,
                        self.world.describe_proj(&st)
                    ),
                    &ctx.label,
                );
            }
        }
        (self.compose(a, ctx.tid, p), e)
    }

    /// `P => G` for every non-stutter pair in `p`.
    fn check_guarantee(&mut self, ctx: &Ctx, p: &Rel, span: Span, what: &str) {
        match ctx.guar {
            None => {
                if !p.is_empty() {
                    self.fail(
                        "yield guarantee",
                        span,
                        format!("{} inside an atomic body (the guarantee there is empty)", what),
                        &ctx.label,
                    );
                }
            }
            Some(g) => {
                for (pre, post) in p.iter() {
                    if pre == post {
                        continue;
                    }
                    let a = self.space.decode_vec(pre);
                    let b = self.space.decode_vec(post);
                    if !self.holds2(g, ctx.tid, &a, &b) {
                        self.fail(
                            "yield guarantee",
                            span,
                            format!(
                                "{} does not re-establish the guarantee: {} -> {}",
                                what,
                                self.world.describe_proj(&a),
                                self.world.describe_proj(&b)
                            ),
                            &ctx.label,
                        );
                        return;
                    }
                }
            }
        }
    }

    /// Global parts reachable from `st` under the reflexive-transitive rely.
    fn rely_reach(&self, tid: u32, rely: &Formula, st: &[u16]) -> Vec<Vec<u16>> {
        let gl = self.world.globals.len();
        let gsizes: Vec<u64> = self.world.globals.iter().map(|v| v.domain.size()).collect();
        let gtotal: u64 = gsizes.iter().product::<u64>().max(1);
        let mut seen: HashSet<Vec<u16>> = HashSet::new();
        let mut frontier = vec![st[..gl].to_vec()];
        seen.insert(frontier[0].clone());
        let mut pre = st.to_vec();
        let mut post = st.to_vec();
        while let Some(g) = frontier.pop() {
            pre[..gl].copy_from_slice(&g);
            for idx in 0..gtotal {
                let mut rem = idx;
                for (i, sz) in gsizes.iter().enumerate() {
                    post[i] = (rem % sz) as u16;
                    rem /= sz;
                }
                if seen.contains(&post[..gl].to_vec()) {
                    continue;
                }
                if self.holds2(rely, tid, &pre, &post) {
                    let g2 = post[..gl].to_vec();
                    seen.insert(g2.clone());
                    frontier.push(g2);
                }
            }
        }
        let mut out: Vec<Vec<u16>> = seen.into_iter().collect();
        out.sort();
        out
    }

    /// Post of a yield: the diagonal over every store the environment can
    /// reach from a store in `p`'s range, with locals preserved.
    fn yield_close(&mut self, ctx: &mut Ctx, p: &Rel) -> Rel {
        let mut out = Rel::empty(self.space.size);
        let gl = self.world.globals.len();
        for q in p.posts() {
            let st = self.space.decode_vec(q);
            match ctx.rely {
                None => {
                    out.insert(q, q);
                }
                Some(r) => {
                    let key = st[..gl].to_vec();
                    if !ctx.reach.contains_key(&key) {
                        let reach = self.rely_reach(ctx.tid, r, &st);
                        ctx.reach.insert(key.clone(), reach);
                    }
                    let mut s2 = st.clone();
                    for g2 in &ctx.reach[&key] {
                        s2[..gl].copy_from_slice(g2);
                        let q2 = self.space.encode(&s2);
                        out.insert(q2, q2);
                    }
                }
            }
        }
        out
    }

    /// Whether `sub`'s relation (stutter-closed over globals) is contained
    /// in `sup`'s.  `None` is the empty relation.  Returns a violating
    /// global pair padded into projected stores.
    fn pair_implies(
        &self,
        sub: Option<&Formula>,
        sub_tid: u32,
        sup: Option<&Formula>,
        sup_tid: u32,
    ) -> Result<(), (Vec<u16>, Vec<u16>)> {
        let Some(fs) = sub else { return Ok(()) };
        let gl = self.world.globals.len();
        let gsizes: Vec<u64> = self.world.globals.iter().map(|v| v.domain.size()).collect();
        let gtotal: u64 = gsizes.iter().product::<u64>().max(1);
        let base = {
            let mut b = vec![0u16; self.world.proj_len()];
            for i in 0..self.world.proj_len() {
                let d = self.world.proj_domain(i);
                b[i] = d.encode(&d.default_val()).unwrap();
            }
            b
        };
        let mut pre = base.clone();
        let mut post = base;
        for i1 in 0..gtotal {
            let mut rem = i1;
            for (i, sz) in gsizes.iter().enumerate() {
                pre[i] = (rem % sz) as u16;
                rem /= sz;
            }
            for i2 in 0..gtotal {
                if i1 == i2 {
                    continue; // stutter pairs are in both closures
                }
                let mut rem = i2;
                for (i, sz) in gsizes.iter().enumerate() {
                    post[i] = (rem % sz) as u16;
                    rem /= sz;
                }
                if self.holds2(fs, sub_tid, &pre, &post) {
                    let ok = match sup {
                        None => false,
                        Some(fg) => self.holds2(fg, sup_tid, &pre, &post),
                    };
                    if !ok {
                        return Err((pre[..gl].to_vec(), post[..gl].to_vec()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Encoded stores satisfying a one-store formula.
    fn denote_one(&self, f: &Formula, tid: u32) -> Vec<u64> {
        if matches!(f, Expr::BoolLit(true)) {
            return (0..self.space.size).collect();
        }
        let mut out = Vec::new();
        let mut st = vec![0u16; self.world.proj_len()];
        for idx in 0..self.space.size {
            self.space.decode(idx, &mut st);
            if self.holds1(f, tid, &st) {
                out.push(idx);
            }
        }
        out
    }

    /// Transitive syntactic write set of a function body: assignment
    /// targets, acquired/released locks, cas'd globals, unstable-read
    /// targets, and everything written by called functions.
    fn write_set(&mut self, name: &str) -> Vec<VarId> {
        if let Some(ws) = self.wsets.get(name) {
            return ws.clone();
        }
        let mut out = Vec::new();
        let mut visited = HashSet::new();
        self.collect_writes(name, &mut visited, &mut out);
        out.sort();
        out.dedup();
        self.wsets.insert(name.to_string(), out.clone());
        out
    }

    fn collect_writes(&self, name: &str, visited: &mut HashSet<String>, out: &mut Vec<VarId>) {
        if !visited.insert(name.to_string()) {
            return;
        }
        let Some(f) = self.p.func(name) else { return };
        fn walk(ck: &Ck, stmts: &[Stmt], visited: &mut HashSet<String>, out: &mut Vec<VarId>) {
            for s in stmts {
                match &s.kind {
                    StmtKind::Assign { target, .. } => {
                        if let Some(id) = ck.world.resolve(target) {
                            out.push(id);
                        }
                    }
                    StmtKind::UnstableRead { local, .. } => {
                        if let Some(id) = ck.world.resolve(local) {
                            out.push(id);
                        }
                    }
                    StmtKind::Acquire(m) | StmtKind::Release(m) => {
                        if let Some(id) = ck.world.resolve(m) {
                            out.push(id);
                        }
                    }
                    StmtKind::If { cond, then_branch, else_branch } => {
                        if let Cond::Cas { var, .. } = cond {
                            if let Some(id) = ck.world.resolve(var) {
                                out.push(id);
                            }
                        }
                        walk(ck, then_branch, visited, out);
                        walk(ck, else_branch, visited, out);
                    }
                    StmtKind::While { cond, body, .. } => {
                        if let Cond::Cas { var, .. } = cond {
                            if let Some(id) = ck.world.resolve(var) {
                                out.push(id);
                            }
                        }
                        walk(ck, body, visited, out);
                    }
                    StmtKind::Call(g) => ck.collect_writes(g, visited, out),
                    _ => {}
                }
            }
        }
        walk(self, &f.body, visited, out);
    }

    /// Whether an atomic function can reach itself through calls.
    fn atomic_recursive(&self, name: &str) -> bool {
        fn reaches(p: &Program, from: &str, target: &str, seen: &mut HashSet<String>) -> bool {
            if !seen.insert(from.to_string()) {
                return false;
            }
            let Some(f) = p.func(from) else { return false };
            let mut hit = false;
            let mut callees = Vec::new();
            crate::ast::for_each_stmt_in(&f.body, &mut |s: &Stmt| {
                if let StmtKind::Call(g) = &s.kind {
                    callees.push(g.clone());
                }
            });
            for g in callees {
                if g == target || reaches(p, &g, target, seen) {
                    hit = true;
                    break;
                }
            }
            hit
        }
        reaches(self.p, name, name, &mut HashSet::new())
    }

    /// Composition of `p` with an atomic callee's two-store postcondition,
    /// framed on the callee's write set: variables the body never writes
    /// are preserved, written ones range over everything the postcondition
    /// allows.
    fn atomic_post(&mut self, fname: &str, ensures: &Formula, tid: u32, p: &Rel) -> Rel {
        let widx: Vec<usize> = {
            let mut v: Vec<usize> =
                self.write_set(fname).iter().map(|id| self.world.proj_index(*id)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let mentioned: Vec<usize> = {
            let mut v: Vec<usize> = mentioned_names(ensures)
                .iter()
                .filter_map(|n| self.world.resolve(n))
                .map(|id| self.world.proj_index(id))
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        // The accepted write-set assignments depend on the pre store only
        // through the variables the postcondition mentions, so memoize on
        // that projection.
        let mut memo: HashMap<Vec<u16>, Vec<Vec<u16>>> = HashMap::new();
        let world = &self.world;
        let space = &self.space;
        p.step_posts(&mut |q, out| {
            let st = space.decode_vec(q);
            let key: Vec<u16> = mentioned.iter().map(|i| st[*i]).collect();
            let assigns = memo.entry(key).or_insert_with(|| {
                let mut acc: Vec<Vec<u16>> = Vec::new();
                let mut cand = st.clone();
                enum_proj_slots(world, &widx, &mut cand, 0, &mut |c| {
                    if holds(world, ensures, tid, &proj_lookup2(world, &st, c)) {
                        acc.push(widx.iter().map(|i| c[*i]).collect());
                    }
                });
                acc
            });
            let mut s2 = st.clone();
            for a in assigns.iter() {
                for (k, slot) in widx.iter().enumerate() {
                    s2[*slot] = a[k];
                }
                out.push(space.encode(&s2));
            }
        })
    }

    fn check_call(&mut self, ctx: &mut Ctx, name: &str, p: &Rel, span: Span) -> Jdg {
        let prog = self.p;
        let Some(f) = prog.func(name) else {
            // Already reported by well-formedness.
            return Jdg { post: Rel::empty(self.space.size), effect: Effect::B, promoted: false };
        };
        match &f.spec {
            FnSpec::Atomic { effect, requires, ensures, .. } => {
                for q in p.posts() {
                    let st = self.space.decode_vec(q);
                    if !self.holds1(requires, ctx.tid, &st) {
                        self.fail(
                            "call precondition",
                            span,
                            format!(
                                "precondition of {}() may not hold at {}",
                                name,
                                self.world.describe_proj(&st)
                            ),
                            &ctx.label,
                        );
                        break;
                    }
                }
                let post = self.atomic_post(name, ensures, ctx.tid, p);
                Jdg { post, effect: *effect, promoted: false }
            }
            FnSpec::NonAtomic { relies, guarantees, requires, ensures } => {
                // The caller must be quiescent: pairs diagonal (i.e. at a
                // yield point) and satisfying the callee precondition.
                let mut diag_ok = true;
                for (pre, post) in p.iter() {
                    if pre != post {
                        self.fail(
                            "call precondition",
                            span,
                            format!(
                                "non-atomic {}() must be called right after a yield; found pending transition {} -> {}",
                                name,
                                self.world.describe_proj(&self.space.decode_vec(pre)),
                                self.world.describe_proj(&self.space.decode_vec(post))
                            ),
                            &ctx.label,
                        );
                        diag_ok = false;
                        break;
                    }
                }
                if diag_ok {
                    for q in p.posts() {
                        let st = self.space.decode_vec(q);
                        if !self.holds1(requires, ctx.tid, &st) {
                            self.fail(
                                "call precondition",
                                span,
                                format!(
                                    "precondition of {}() may not hold at {}",
                                    name,
                                    self.world.describe_proj(&st)
                                ),
                                &ctx.label,
                            );
                            break;
                        }
                    }
                }
                if let Err((g1, g2)) = self.pair_implies(ctx.rely, ctx.tid, Some(relies), ctx.tid)
                {
                    self.fail(
                        "rely containment",
                        span,
                        format!(
                            "caller's rely admits interference {} -> {} that {}() does not tolerate",
                            fmt_globals(&self.world, &g1),
                            fmt_globals(&self.world, &g2),
                            name
                        ),
                        &ctx.label,
                    );
                }
                if let Err((g1, g2)) =
                    self.pair_implies(Some(guarantees), ctx.tid, ctx.guar, ctx.tid)
                {
                    self.fail(
                        "guarantee containment",
                        span,
                        format!(
                            "{}() may perform {} -> {}, which exceeds the caller's guarantee",
                            name,
                            fmt_globals(&self.world, &g1),
                            fmt_globals(&self.world, &g2)
                        ),
                        &ctx.label,
                    );
                }
                let post = Rel::diag(self.space.size, self.denote_one(ensures, ctx.tid));
                Jdg { post, effect: Effect::R, promoted: false }
            }
        }
    }

    fn check_stmt(&mut self, ctx: &mut Ctx, s: &Stmt, p: &Rel) -> Jdg {
        match &s.kind {
            StmtKind::Skip => Jdg { post: p.clone(), effect: Effect::B, promoted: false },
            StmtKind::Wrong => {
                if let Some((_, post)) = p.iter().next() {
                    let st = self.space.decode_vec(post);
                    self.fail(
                        "wrong reachable",
                        s.span,
                        format!("`wrong` is reachable, e.g. at {}", self.world.describe_proj(&st)),
                        &ctx.label,
                    );
                }
                Jdg { post: Rel::empty(self.space.size), effect: Effect::B, promoted: false }
            }
            StmtKind::Yield => {
                self.check_guarantee(ctx, p, s.span, "yield");
                let post = self.yield_close(ctx, p);
                Jdg { post, effect: Effect::Y, promoted: false }
            }
            StmtKind::Assign { .. }
            | StmtKind::UnstableRead { .. }
            | StmtKind::Acquire(_)
            | StmtKind::Release(_) => {
                let a = self.single_action(s.id);
                let (post, effect) = self.action_stmt(ctx, &a, p, true);
                Jdg { post, effect, promoted: false }
            }
            StmtKind::Assert(_) => {
                let (pass, fail_a) = self.branch_actions(s.id);
                let (post, e_pass) = self.action_stmt(ctx, &pass, p, false);
                let e_fail = effect_over(&self.world, &self.mt, &fail_a, ctx.tid, p, &self.space);
                let q_fail = self.compose(&fail_a, ctx.tid, p);
                if let Some((_, bad)) = q_fail.iter().next() {
                    let st = self.space.decode_vec(bad);
                    self.fail(
                        "assertion",
                        s.span,
                        format!("assertion may fail at {}", self.world.describe_proj(&st)),
                        &ctx.label,
                    );
                }
                Jdg { post, effect: e_pass.join(e_fail), promoted: false }
            }
            StmtKind::If { then_branch, else_branch, .. } => {
                let (a1, a2) = self.branch_actions(s.id);
                let (p1, e_a1) = self.action_stmt(ctx, &a1, p, false);
                let (p2, e_a2) = self.action_stmt(ctx, &a2, p, false);
                let j1 = self.check_seq(ctx, then_branch, p1);
                let j2 = self.check_seq(ctx, else_branch, p2);
                let e1 = self.branch_seq(e_a1, &j1, s.span, &ctx.label);
                let e2 = self.branch_seq(e_a2, &j2, s.span, &ctx.label);
                let mut post = j1.post;
                post.union_with(&j2.post);
                Jdg { post, effect: e1.join(e2), promoted: false }
            }
            StmtKind::While { invariant, body, .. } => {
                let (a1, a2) = self.branch_actions(s.id);
                // Least fixpoint of the loop-head predicate.
                let mut inv = p.clone();
                loop {
                    self.silent += 1;
                    let body_in = self.compose(&a1, ctx.tid, &inv);
                    let j = self.check_seq(ctx, body, body_in);
                    self.silent -= 1;
                    let mut next = inv.clone();
                    next.union_with(&j.post);
                    if next.len() == inv.len() {
                        break;
                    }
                    inv = next;
                }
                if let Some(user_inv) = invariant {
                    for q in inv.posts() {
                        let st = self.space.decode_vec(q);
                        if !self.holds1(user_inv, ctx.tid, &st) {
                            self.fail(
                                "loop invariant",
                                s.span,
                                format!(
                                    "declared invariant does not hold at loop head: {}",
                                    self.world.describe_proj(&st)
                                ),
                                &ctx.label,
                            );
                            break;
                        }
                    }
                }
                // Audible pass from the stable loop-head predicate.
                let (body_in, e_a1) = self.action_stmt(ctx, &a1, &inv, false);
                let j = self.check_seq(ctx, body, body_in);
                let (post, e_a2) = self.action_stmt(ctx, &a2, &inv, false);
                let once = self.branch_seq(e_a1, &j, s.span, &ctx.label);
                let mut effect = once.star().seq(e_a2);
                // A loop at or below L might not terminate, which would
                // block everything after it from moving left; promote with
                // R so later sequencing accounts for that.
                let promoted = effect.leq(Effect::L);
                if promoted {
                    effect = effect.join(Effect::R);
                }
                Jdg { post, effect, promoted }
            }
            StmtKind::Call(name) => {
                let name = name.clone();
                self.check_call(ctx, &name, p, s.span)
            }
        }
    }

    /// Sequence a conditional's branch action effect with its branch body,
    /// reporting irreducibility at the statement.
    fn branch_seq(&mut self, e_cond: Effect, j: &Jdg, span: Span, label: &str) -> Effect {
        let e = e_cond.seq(j.effect);
        if e == Effect::E && e_cond != Effect::E && j.effect != Effect::E {
            if j.promoted {
                self.fail(
                    "left-mover termination",
                    span,
                    format!(
                        "loop effect was promoted to {} because the loop may not terminate; {} ; {} has no reduction",
                        j.effect, e_cond, j.effect
                    ),
                    label,
                );
            } else {
                self.fail(
                    "irreducible sequence",
                    span,
                    format!("effects {} ; {} do not compose", e_cond, j.effect),
                    label,
                );
            }
        }
        e
    }

    fn check_seq(&mut self, ctx: &mut Ctx, stmts: &[Stmt], p: Rel) -> Jdg {
        let mut acc = Effect::B;
        let mut cur = p;
        for s in stmts {
            let j = self.check_stmt(ctx, s, &cur);
            self.record(s, j.effect);
            let combined = acc.seq(j.effect);
            if combined == Effect::E && acc != Effect::E && j.effect != Effect::E {
                if j.promoted {
                    self.fail(
                        "left-mover termination",
                        s.span,
                        format!(
                            "loop effect was promoted to {} because the loop may not terminate; {} ; {} has no reduction",
                            j.effect, acc, j.effect
                        ),
                        &ctx.label,
                    );
                } else {
                    self.fail(
                        "irreducible sequence",
                        s.span,
                        format!("effects {} ; {} do not compose", acc, j.effect),
                        &ctx.label,
                    );
                }
            }
            acc = combined;
            cur = j.post;
        }
        Jdg { post: cur, effect: acc, promoted: false }
    }

    fn check_fn(&mut self, f: &FnDecl) {
        let before = self.failures.len();
        let n = self.world.n_threads.max(1);
        match &f.spec {
            FnSpec::Atomic { effect, requires, ensures, .. } => {
                if self.atomic_recursive(&f.name) {
                    self.fail(
                        "atomic recursion",
                        f.span,
                        format!("atomic function {}() may call itself", f.name),
                        &format!("fn {}", f.name),
                    );
                } else {
                    for tid in 1..=n {
                        let at = self.failures.len();
                        let mut ctx = Ctx {
                            tid,
                            rely: None,
                            guar: None,
                            label: format!("fn {} (as thread {})", f.name, tid),
                            reach: HashMap::new(),
                        };
                        let p0 = Rel::diag(self.space.size, self.denote_one(requires, tid));
                        let j = self.check_seq(&mut ctx, &f.body, p0);
                        if !j.effect.leq(*effect) {
                            self.fail(
                                "declared effect",
                                f.span,
                                format!(
                                    "body of {}() has effect {} but the declaration allows {}",
                                    f.name, j.effect, effect
                                ),
                                &ctx.label,
                            );
                        }
                        let mut bad = None;
                        for (pre, post) in j.post.iter() {
                            let a = self.space.decode_vec(pre);
                            let b = self.space.decode_vec(post);
                            if !self.holds2(ensures, tid, &a, &b) {
                                bad = Some((a, b));
                                break;
                            }
                        }
                        if let Some((a, b)) = bad {
                            self.fail(
                                "postcondition",
                                f.span,
                                format!(
                                    "{}() can finish with {} -> {}, violating its postcondition",
                                    f.name,
                                    self.world.describe_proj(&a),
                                    self.world.describe_proj(&b)
                                ),
                                &ctx.label,
                            );
                        }
                        if self.failures.len() > at {
                            break; // identical failures would repeat per thread
                        }
                    }
                }
            }
            FnSpec::NonAtomic { relies, guarantees, requires, ensures } => {
                for tid in 1..=n {
                    let at = self.failures.len();
                    let mut ctx = Ctx {
                        tid,
                        rely: Some(relies),
                        guar: Some(guarantees),
                        label: format!("fn {} (as thread {})", f.name, tid),
                        reach: HashMap::new(),
                    };
                    let p0 = Rel::diag(self.space.size, self.denote_one(requires, tid));
                    let j = self.check_seq(&mut ctx, &f.body, p0);
                    if !j.effect.leq(Effect::R) {
                        self.fail(
                            "non-atomic effect",
                            f.span,
                            format!(
                                "body of {}() has effect {}, but a non-atomic body must stay at or below R (end with a yield)",
                                f.name, j.effect
                            ),
                            &ctx.label,
                        );
                    }
                    let mut bad = None;
                    for (pre, post) in j.post.iter() {
                        if pre != post {
                            bad = Some(post);
                            break;
                        }
                        let st = self.space.decode_vec(post);
                        if !self.holds1(ensures, tid, &st) {
                            bad = Some(post);
                            break;
                        }
                    }
                    if let Some(q) = bad {
                        let st = self.space.decode_vec(q);
                        self.fail(
                            "postcondition",
                            f.span,
                            format!(
                                "{}() can finish at {} without establishing its postcondition",
                                f.name,
                                self.world.describe_proj(&st)
                            ),
                            &ctx.label,
                        );
                    }
                    if self.failures.len() > at {
                        break;
                    }
                }
            }
        }
        self.fn_results.push((f.name.clone(), self.failures.len() == before));
    }

    fn check_thread(&mut self, t: u32, init_idx: u64) {
        let prog = self.p;
        let body = &prog.threads[t as usize - 1];
        let label = format!("thread {}", t);
        let before = self.failures.len();
        if !matches!(body.first().map(|s| &s.kind), Some(StmtKind::Yield)) {
            let sp = body.first().map(|s| s.span).unwrap_or_default();
            self.fail(
                "thread start",
                sp,
                "a thread body must begin with yield".into(),
                &label,
            );
        }
        let mut ctx = Ctx {
            tid: t,
            rely: Some(&prog.relies),
            guar: Some(&prog.guarantees),
            label: label.clone(),
            reach: HashMap::new(),
        };
        let p0 = Rel::diag(self.space.size, [init_idx]);
        let j = self.check_seq(&mut ctx, body, p0);
        let end = body.last().map(|s| s.span).unwrap_or_default();
        self.check_guarantee(&ctx, &j.post, end, "thread exit");
        if j.effect == Effect::E && self.failures.len() == before {
            self.fail(
                "thread effect",
                end,
                format!("thread body has effect {}", Effect::E),
                &label,
            );
        }
    }
}

fn fmt_globals(world: &World, g: &[u16]) -> String {
    use crate::space::Val;
    let mut parts = Vec::new();
    for (i, v) in world.globals.iter().enumerate() {
        let s = match v.domain.decode(g[i]) {
            Val::Int(n) => n.to_string(),
            Val::Bool(b) => b.to_string(),
            Val::NoneV => "None".into(),
            Val::List(l) => l
                .iter()
                .map(|e| format!("{}::", e))
                .chain(std::iter::once("Nil".into()))
                .collect::<String>(),
        };
        parts.push(format!("{}={}", v.name, s));
    }
    parts.join(" ")
}

fn enum_proj_slots(
    world: &World,
    slots: &[usize],
    store: &mut Vec<u16>,
    depth: usize,
    visit: &mut impl FnMut(&[u16]),
) {
    if depth == slots.len() {
        visit(store);
        return;
    }
    let idx = slots[depth];
    let saved = store[idx];
    for code in 0..world.proj_domain(idx).size() as u16 {
        store[idx] = code;
        enum_proj_slots(world, slots, store, depth + 1, visit);
    }
    store[idx] = saved;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use std::collections::HashMap as Map;
    use Effect::*;

    fn check(src: &str) -> Report {
        let p = parse(src).expect("parse");
        check_program(&p, &CheckOptions::default())
            .unwrap_or_else(|d| panic!("structural errors: {:?}", d))
    }

    fn rules(r: &Report) -> Vec<&str> {
        r.failures.iter().map(|f| f.rule.as_str()).collect()
    }

    const COUNTER: &str = "bits 4;
lock m write right-mover if old(m) == 0 && m == tid
       write left-mover if old(m) == tid && m == 0;
int x both-mover if m == tid;
local int n;
local int u;

atomic requires true ensures x == old(x) + n && u == x
add() {
    acquire(m);
    u = x;
    u = u + n;
    x = u;
    release(m);
    skip;
}

relies even(x) guarantees even(x)
requires even(x) ensures even(u)
client() {
    yield;
    n = 2;
    add();
    yield;
    n = 2;
    add();
    yield;
    assert even(u);
    yield;
}

init { x = 0; }
relies even(x);
guarantees even(x);

thread { yield; client(); }
thread { yield; client(); }
";

    #[test]
    fn counter_verifies() {
        let r = check(COUNTER);
        assert!(r.verified(), "failures: {:#?}", r.failures);
        assert!(r.fn_results.iter().all(|(_, ok)| *ok));
        assert_eq!(r.stats.threads, 2);
    }

    #[test]
    fn add_effects_follow_the_reduction_pattern() {
        let p = parse(COUNTER).unwrap();
        let r = check_program(&p, &CheckOptions::default()).unwrap();
        let by_id: Map<_, _> = r.effects.iter().map(|se| (se.id, se.effect)).collect();
        let add = p.func("add").unwrap();
        let effs: Vec<Effect> = add.body.iter().map(|s| by_id[&s.id]).collect();
        assert_eq!(effs, vec![R, B, B, B, L, B]);
        let overall = effs.iter().fold(B, |a, e| a.seq(*e));
        assert_eq!(overall, N);
    }

    #[test]
    fn stronger_declared_effect_is_rejected() {
        let src = COUNTER.replace("atomic requires", "atomic both-mover requires");
        let r = check(&src);
        assert!(rules(&r).contains(&"declared effect"), "{:#?}", r.failures);
    }

    #[test]
    fn missing_acquire_gives_effect_e_at_the_access() {
        let src = COUNTER.replace("    acquire(m);\n", "");
        let r = check(&src);
        let eff: Vec<_> = r.failures.iter().filter(|f| f.rule == "effect").collect();
        assert!(!eff.is_empty(), "{:#?}", r.failures);
        assert!(eff.iter().any(|f| f.message.contains('x')));
    }

    #[test]
    fn weakened_guarantee_breaks_the_yield() {
        let src = COUNTER.replace("guarantees even(x)", "guarantees x == old(x)");
        let r = check(&src);
        assert!(rules(&r).contains(&"yield guarantee"), "{:#?}", r.failures);
    }

    #[test]
    fn nonterminating_loop_blocks_left_movement() {
        let r = check(
            "bits 2;
int x non-mover;
init { }
thread {
    yield;
    x = 1;
    while (true) { skip; }
    yield;
}
",
        );
        assert!(rules(&r).contains(&"left-mover termination"), "{:#?}", r.failures);
    }

    #[test]
    fn spin_lock_functions_verify_with_declared_movers() {
        let r = check(
            "bits 2;
lock l write right-mover if old(l) == 0 && l == tid
       write left-mover if old(l) == tid && l == 0;

atomic right-mover requires true ensures old(l) == 0 && l == tid
lock_it() {
    while (!cas(l, 0, tid)) { skip; }
}

atomic left-mover requires l == tid ensures l == 0
unlock_it() {
    release(l);
}

init { }

thread { yield; lock_it(); unlock_it(); }
thread { yield; lock_it(); unlock_it(); }
",
        );
        assert!(r.verified(), "{:#?}", r.failures);
    }

    #[test]
    fn failed_assertion_is_reported() {
        let r = check(
            "bits 2;
int x non-mover;
local int u;
init { }
thread { yield; x = 1; assert even(x); }
",
        );
        assert!(rules(&r).contains(&"assertion"), "{:#?}", r.failures);
    }

    #[test]
    fn reachable_wrong_is_reported() {
        let r = check("bits 2; int x non-mover; init { } thread { yield; wrong; }");
        assert!(rules(&r).contains(&"wrong reachable"), "{:#?}", r.failures);
    }

    #[test]
    fn thread_must_start_with_yield() {
        let r = check("bits 2; int x non-mover; init { } thread { x = 1; }");
        assert!(rules(&r).contains(&"thread start"), "{:#?}", r.failures);
    }

    #[test]
    fn yield_inside_atomic_function_fails() {
        let r = check(
            "bits 2;
int x both-mover;
atomic requires true ensures true f() { yield; }
init { }
thread { yield; f(); }
",
        );
        assert!(
            r.failures.iter().any(|f| f.rule == "yield guarantee" && f.message.contains("atomic")),
            "{:#?}",
            r.failures
        );
    }

    #[test]
    fn guarantee_must_be_within_other_threads_rely() {
        let r = check(
            "bits 2;
int x non-mover;
init { }
relies x == old(x);
guarantees true;
thread { yield; }
thread { yield; }
",
        );
        assert!(rules(&r).contains(&"guarantee/rely containment"), "{:#?}", r.failures);
    }

    #[test]
    fn partial_left_mover_fails_totality() {
        // A release under the lock discipline is a left-mover; making a
        // both-mover assignment partial (list overflow) must be flagged.
        let r = check(
            "bits 2; listdepth 1;
list int t non-mover;
local list int s;
init { }
thread { yield; t = 1 :: s; yield; }
",
        );
        // The write is a non-mover here, so totality is not demanded; the
        // same partial write declared both-mover must fail.
        assert!(r.verified(), "{:#?}", r.failures);
        let r2 = check(
            "bits 2; listdepth 1;
list int t both-mover;
local list int s;
init { }
thread { yield; t = 1 :: s; yield; }
",
        );
        assert!(rules(&r2).contains(&"totality"), "{:#?}", r2.failures);
    }
}
