//! Primitive statements as transition relations.
//!
//! Every primitive statement (and each branch of a conditional) denotes an
//! action: a partial, possibly nondeterministic successor function on stores,
//! plus a syntactic classification of the single global it reads or writes.
//! The same actions drive the checker (projected stores) and the explorer
//! (full stores), selected by `Layout`.

use crate::ast::*;
use crate::space::{eval, holds, Val, World};
use std::collections::HashMap;

/// Which global an action touches, if any.  Effects of local-only actions do
/// not consult the mover specification (they are both-movers).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    GlobalRead(usize),
    GlobalWrite(usize),
    LocalOnly,
}

#[derive(Debug, Clone)]
pub enum ActionKind {
    Assign { target: VarId, expr: Expr },
    UnstableRead { local: usize, global: usize },
    Acquire(usize),
    Release(usize),
    /// Succeeds exactly when the formula evaluates to true.
    TestTrue(Expr),
    /// Succeeds when the formula does not evaluate to true (strict negation
    /// would leave undefined formulas with no enabled branch).
    TestFalse(Expr),
    CasSuccess { global: usize, expected: Expr, new: Expr },
    /// The failure branch is the identity on every store.
    CasFail { global: usize },
}

#[derive(Debug, Clone)]
pub struct Action {
    pub kind: ActionKind,
    pub access: Access,
    pub span: Span,
    /// Short description for diagnostics, e.g. "write to x".
    pub label: String,
}

/// Store layout an action is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Globals plus one instance of each local family (checker view).
    Proj,
    /// Globals plus every thread's locals (explorer view).
    Full,
}

pub fn var_index(world: &World, layout: Layout, id: VarId, tid: u32) -> usize {
    match layout {
        Layout::Proj => world.proj_index(id),
        Layout::Full => world.full_index(id, tid),
    }
}

/// Variable lookup for expression evaluation under a layout.  `old(x)` is
/// not meaningful in executable expressions and resolves like `x`.
pub fn store_lookup<'a>(
    world: &'a World,
    layout: Layout,
    store: &'a [u16],
    tid: u32,
) -> impl Fn(&str, bool) -> Option<Val> + 'a {
    move |name, _| {
        let id = world.resolve(name)?;
        let idx = var_index(world, layout, id, tid);
        Some(world.info(id).domain.decode(store[idx]))
    }
}

impl Action {
    /// All post-stores reachable by this action for thread `tid`.  An empty
    /// result means the action is disabled (blocking) here.
    pub fn successors(
        &self,
        world: &World,
        layout: Layout,
        tid: u32,
        store: &[u16],
        out: &mut Vec<Vec<u16>>,
    ) {
        let lookup = store_lookup(world, layout, store, tid);
        match &self.kind {
            ActionKind::Assign { target, expr } => {
                let Some(v) = eval(world, expr, tid, &lookup) else { return };
                let info = world.info(*target);
                let Some(code) = info.domain.encode(&v) else { return };
                let mut s = store.to_vec();
                s[var_index(world, layout, *target, tid)] = code;
                out.push(s);
            }
            ActionKind::UnstableRead { local, .. } => {
                let id = VarId::Local(*local);
                let idx = var_index(world, layout, id, tid);
                for code in 0..world.info(id).domain.size() as u16 {
                    let mut s = store.to_vec();
                    s[idx] = code;
                    out.push(s);
                }
            }
            ActionKind::Acquire(m) => {
                let idx = var_index(world, layout, VarId::Global(*m), tid);
                if store[idx] == 0 {
                    let mut s = store.to_vec();
                    s[idx] = tid as u16;
                    out.push(s);
                }
            }
            ActionKind::Release(m) => {
                let mut s = store.to_vec();
                s[var_index(world, layout, VarId::Global(*m), tid)] = 0;
                out.push(s);
            }
            ActionKind::TestTrue(f) => {
                if holds(world, f, tid, &lookup) {
                    out.push(store.to_vec());
                }
            }
            ActionKind::TestFalse(f) => {
                if !holds(world, f, tid, &lookup) {
                    out.push(store.to_vec());
                }
            }
            ActionKind::CasSuccess { global, expected, new } => {
                let id = VarId::Global(*global);
                let idx = var_index(world, layout, id, tid);
                let Some(want) = eval(world, expected, tid, &lookup) else { return };
                if world.info(id).domain.encode(&want) != Some(store[idx]) {
                    return;
                }
                let Some(v) = eval(world, new, tid, &lookup) else { return };
                let Some(code) = world.info(id).domain.encode(&v) else { return };
                let mut s = store.to_vec();
                s[idx] = code;
                out.push(s);
            }
            ActionKind::CasFail { .. } => out.push(store.to_vec()),
        }
    }

    /// Variables whose values can influence this action's enabledness or
    /// successors (used for totality and commutation checks).
    pub fn support(&self, world: &World) -> Vec<VarId> {
        let mut names: Vec<String> = Vec::new();
        let mut ids: Vec<VarId> = Vec::new();
        match &self.kind {
            ActionKind::Assign { target, expr } => {
                ids.push(*target);
                names = mentioned_names(expr);
            }
            ActionKind::UnstableRead { local, global } => {
                ids.push(VarId::Local(*local));
                ids.push(VarId::Global(*global));
            }
            ActionKind::Acquire(m) | ActionKind::Release(m) => ids.push(VarId::Global(*m)),
            ActionKind::TestTrue(f) | ActionKind::TestFalse(f) => names = mentioned_names(f),
            ActionKind::CasSuccess { global, expected, new } => {
                ids.push(VarId::Global(*global));
                names = mentioned_names(expected);
                names.extend(mentioned_names(new));
            }
            ActionKind::CasFail { global } => ids.push(VarId::Global(*global)),
        }
        for n in names {
            if let Some(id) = world.resolve(&n) {
                ids.push(id);
            }
        }
        ids.sort();
        ids.dedup();
        ids
    }

    /// The variable this action always overwrites without reading, if any.
    /// Stores that differ only in that coordinate have identical successor
    /// sets, which lets predicate transformers share the computation.
    pub fn clobbered(&self, world: &World) -> Option<VarId> {
        match &self.kind {
            ActionKind::Assign { target, expr } => {
                let reads_target = mentioned_names(expr)
                    .iter()
                    .any(|n| world.resolve(n) == Some(*target));
                (!reads_target).then_some(*target)
            }
            ActionKind::UnstableRead { local, .. } => Some(VarId::Local(*local)),
            ActionKind::Release(m) => Some(VarId::Global(*m)),
            _ => None,
        }
    }

    /// Whether the action has at least one successor from every store.
    /// Enabledness depends only on the support variables, so enumeration is
    /// restricted to their product domain (other variables held at defaults).
    pub fn is_total(&self, world: &World, tid: u32) -> Result<(), Vec<u16>> {
        let support = self.support(world);
        self.total_over(world, tid, &support, &mut vec![0u16; world.proj_len()], 0)
    }

    fn total_over(
        &self,
        world: &World,
        tid: u32,
        support: &[VarId],
        store: &mut Vec<u16>,
        depth: usize,
    ) -> Result<(), Vec<u16>> {
        if depth == support.len() {
            let mut out = Vec::new();
            self.successors(world, Layout::Proj, tid, store, &mut out);
            return if out.is_empty() { Err(store.clone()) } else { Ok(()) };
        }
        let id = support[depth];
        let idx = world.proj_index(id);
        for code in 0..world.info(id).domain.size() as u16 {
            store[idx] = code;
            self.total_over(world, tid, support, store, depth + 1)?;
        }
        Ok(())
    }
}

/// The action(s) a statement denotes, if any.
#[derive(Debug, Clone)]
pub enum NodeActions {
    Single(Action),
    /// Success and failure branches of a condition (or of `assert`).
    Branch(Action, Action),
}

pub type ActionTable = HashMap<NodeId, NodeActions>;

fn classify_expr(world: &World, e: &Expr) -> Access {
    for n in mentioned_names(e) {
        if let Some(VarId::Global(g)) = world.resolve(&n) {
            return Access::GlobalRead(g);
        }
    }
    Access::LocalOnly
}

fn cond_actions(world: &World, cond: &Cond, span: Span) -> (Action, Action) {
    match cond {
        Cond::Test(f) => {
            let access = classify_expr(world, f);
            (
                Action {
                    kind: ActionKind::TestTrue(f.clone()),
                    access,
                    span,
                    label: "test".into(),
                },
                Action {
                    kind: ActionKind::TestFalse(f.clone()),
                    access,
                    span,
                    label: "negated test".into(),
                },
            )
        }
        Cond::Cas { var, expected, new, negated, .. } => {
            let g = match world.resolve(var) {
                Some(VarId::Global(g)) => g,
                _ => unreachable!("well-formedness rejects cas on non-globals"),
            };
            let succ = Action {
                kind: ActionKind::CasSuccess {
                    global: g,
                    expected: expected.clone(),
                    new: new.clone(),
                },
                access: Access::GlobalWrite(g),
                span,
                label: format!("cas({}) success", var),
            };
            let fail = Action {
                kind: ActionKind::CasFail { global: g },
                // The failure branch leaves every store unchanged, which
                // commutes with everything, so it is local-only.
                access: Access::LocalOnly,
                span,
                label: format!("cas({}) failure", var),
            };
            if *negated {
                (fail, succ)
            } else {
                (succ, fail)
            }
        }
    }
}

fn stmt_actions(world: &World, s: &Stmt, table: &mut ActionTable) {
    match &s.kind {
        StmtKind::Assign { target, expr, .. } => {
            let id = world.resolve(target).expect("checked by well-formedness");
            let access = match id {
                VarId::Global(g) => Access::GlobalWrite(g),
                VarId::Local(_) => classify_expr(world, expr),
            };
            table.insert(
                s.id,
                NodeActions::Single(Action {
                    kind: ActionKind::Assign { target: id, expr: expr.clone() },
                    access,
                    span: s.span,
                    label: format!("write to {}", target),
                }),
            );
        }
        StmtKind::UnstableRead { local, global, .. } => {
            let (Some(VarId::Local(l)), Some(VarId::Global(g))) =
                (world.resolve(local), world.resolve(global))
            else {
                unreachable!("checked by well-formedness")
            };
            table.insert(
                s.id,
                NodeActions::Single(Action {
                    kind: ActionKind::UnstableRead { local: l, global: g },
                    access: Access::GlobalRead(g),
                    span: s.span,
                    label: format!("unstable read of {}", global),
                }),
            );
        }
        StmtKind::Acquire(m) => {
            let Some(VarId::Global(g)) = world.resolve(m) else { unreachable!() };
            table.insert(
                s.id,
                NodeActions::Single(Action {
                    kind: ActionKind::Acquire(g),
                    access: Access::GlobalWrite(g),
                    span: s.span,
                    label: format!("acquire({})", m),
                }),
            );
        }
        StmtKind::Release(m) => {
            let Some(VarId::Global(g)) = world.resolve(m) else { unreachable!() };
            table.insert(
                s.id,
                NodeActions::Single(Action {
                    kind: ActionKind::Release(g),
                    access: Access::GlobalWrite(g),
                    span: s.span,
                    label: format!("release({})", m),
                }),
            );
        }
        StmtKind::Assert(f) => {
            let (a1, a2) = cond_actions(world, &Cond::Test(f.clone()), s.span);
            table.insert(s.id, NodeActions::Branch(a1, a2));
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => {
            let (a1, a2) = cond_actions(world, cond, s.span);
            table.insert(s.id, NodeActions::Branch(a1, a2));
        }
        StmtKind::Skip | StmtKind::Wrong | StmtKind::Yield | StmtKind::Call(_) => {}
    }
}

/// Builds the program-wide table from statement ids to their actions.
pub fn build_actions(p: &Program, world: &World) -> ActionTable {
    let mut table = HashMap::new();
    for_each_stmt(p, |s| stmt_actions(world, s, &mut table));
    table
}
