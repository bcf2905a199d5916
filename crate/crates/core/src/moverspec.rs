//! Mover specifications: compiling per-variable clauses into the effect
//! assignment for actions, and checking the four commutation conditions that
//! make a specification trustworthy.

use crate::action::{Access, Action, ActionKind, ActionTable, Layout, NodeActions};
use crate::ast::*;
use crate::effects::Effect;
use crate::rel::Rel;
use crate::space::{full_lookup2, holds, proj_lookup2, ProjSpace, World};
use std::collections::{BTreeMap, HashMap};

/// Ordered read/write clauses per global variable.  The first clause whose
/// condition holds decides the effect; no match means the error effect E.
#[derive(Debug, Clone)]
pub struct MoverTable {
    pub read: Vec<Vec<(Effect, Formula)>>,
    pub write: Vec<Vec<(Effect, Formula)>>,
    /// Variables appearing in any clause condition of each global.
    cond_support: Vec<Vec<VarId>>,
}

impl MoverTable {
    pub fn new(p: &Program, world: &World) -> MoverTable {
        let n = world.globals.len();
        let mut read = vec![Vec::new(); n];
        let mut write = vec![Vec::new(); n];
        let mut cond_support = vec![Vec::new(); n];
        for v in p.vars.iter().filter(|v| !v.is_local) {
            let Some(VarId::Global(g)) = world.resolve(&v.name) else { continue };
            for c in &v.clauses {
                match c.kind {
                    ClauseKind::Read => read[g].push((c.effect, c.condition.clone())),
                    ClauseKind::Write => write[g].push((c.effect, c.condition.clone())),
                }
                for name in mentioned_names(&c.condition) {
                    if let Some(id) = world.resolve(&name) {
                        cond_support[g].push(id);
                    }
                }
            }
            cond_support[g].sort();
            cond_support[g].dedup();
        }
        MoverTable { read, write, cond_support }
    }
}

fn holds2(world: &World, layout: Layout, f: &Formula, tid: u32, pre: &[u16], post: &[u16]) -> bool {
    match layout {
        Layout::Proj => holds(world, f, tid, &proj_lookup2(world, pre, post)),
        Layout::Full => holds(world, f, tid, &full_lookup2(world, pre, post, tid)),
    }
}

fn first_match(
    world: &World,
    layout: Layout,
    clauses: &[(Effect, Formula)],
    tid: u32,
    pre: &[u16],
    post: &[u16],
) -> Effect {
    for (e, cond) in clauses {
        if holds2(world, layout, cond, tid, pre, post) {
            return *e;
        }
    }
    Effect::E
}

/// The effect of an enabled action for thread `tid` at `store`; `None` when
/// the action is disabled (blocked) there.  Read clauses are evaluated on
/// the identity pair, write clauses on the action's own transition.
pub fn effect_of(
    world: &World,
    layout: Layout,
    mt: &MoverTable,
    a: &Action,
    tid: u32,
    store: &[u16],
) -> Option<Effect> {
    let mut succ = Vec::new();
    a.successors(world, layout, tid, store, &mut succ);
    if succ.is_empty() {
        return None;
    }
    // An unstable read commutes past any concurrent step regardless of the
    // global's declared clauses: its result does not depend on the store.
    if let ActionKind::UnstableRead { .. } = a.kind {
        return Some(Effect::R);
    }
    Some(match a.access {
        Access::LocalOnly => Effect::B,
        Access::GlobalRead(g) => first_match(world, layout, &mt.read[g], tid, store, store),
        Access::GlobalWrite(g) => {
            debug_assert_eq!(succ.len(), 1, "write actions are deterministic");
            first_match(world, layout, &mt.write[g], tid, store, &succ[0])
        }
    })
}

/// Variables that can influence `effect_of` for this action: the action's
/// own support plus the accessed global's clause-condition variables.
pub fn effect_support(world: &World, mt: &MoverTable, a: &Action) -> Vec<VarId> {
    let mut s = a.support(world);
    match a.access {
        Access::GlobalRead(g) | Access::GlobalWrite(g) => s.extend(&mt.cond_support[g]),
        Access::LocalOnly => {}
    }
    s.sort();
    s.dedup();
    s
}

/// Join of the action's effect over every post store of the precondition;
/// disabled stores contribute nothing; the empty precondition gives B.
pub fn effect_over(
    world: &World,
    mt: &MoverTable,
    a: &Action,
    tid: u32,
    pre: &Rel,
    space: &ProjSpace,
) -> Effect {
    let support: Vec<usize> =
        effect_support(world, mt, a).iter().map(|id| world.proj_index(*id)).collect();
    let mut memo: HashMap<Vec<u16>, Option<Effect>> = HashMap::new();
    let mut acc = Effect::B;
    let mut store = vec![0u16; world.proj_len()];
    for idx in pre.posts() {
        space.decode(idx, &mut store);
        let key: Vec<u16> = support.iter().map(|i| store[*i]).collect();
        let e = *memo
            .entry(key)
            .or_insert_with(|| effect_of(world, Layout::Proj, mt, a, tid, &store));
        if let Some(e) = e {
            acc = acc.join(e);
        }
    }
    acc
}

#[derive(Debug, Clone)]
pub struct ValidityViolation {
    /// Which commutation condition failed (1-4).
    pub condition: u8,
    pub a1_span: Span,
    pub a1_label: String,
    pub a2_span: Span,
    pub a2_label: String,
    pub t: u32,
    pub u: u32,
    pub witness: String,
}

impl std::fmt::Display for ValidityViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "validity condition ({}) violated by {} at {} (thread {}) vs {} at {} (thread {}): {}",
            self.condition,
            self.a1_label,
            self.a1_span,
            self.t,
            self.a2_label,
            self.a2_span,
            self.u,
            self.witness
        )
    }
}

fn all_actions(actions: &ActionTable) -> Vec<&Action> {
    let mut v: Vec<&Action> = Vec::new();
    for na in actions.values() {
        match na {
            NodeActions::Single(a) => v.push(a),
            NodeActions::Branch(a1, a2) => {
                v.push(a1);
                v.push(a2);
            }
        }
    }
    v.sort_by_key(|a| {
        (a.span.start_line, a.span.start_col, a.span.end_line, a.span.end_col, a.label.clone())
    });
    v
}

struct PairCheck<'a> {
    world: &'a World,
    mt: &'a MoverTable,
    a1: &'a Action,
    a2: &'a Action,
    t: u32,
    u: u32,
}

impl<'a> PairCheck<'a> {
    fn succ(&self, a: &Action, tid: u32, store: &[u16]) -> Vec<Vec<u16>> {
        let mut out = Vec::new();
        a.successors(self.world, Layout::Full, tid, store, &mut out);
        out
    }

    fn eff(&self, a: &Action, tid: u32, store: &[u16]) -> Option<Effect> {
        effect_of(self.world, Layout::Full, self.mt, a, tid, store)
    }

    /// Checks all four conditions at one store; returns the first failing
    /// condition number with a witness description.
    fn check_at(&self, sigma: &[u16]) -> Option<(u8, String)> {
        let w = self.world;
        let Some(e1) = self.eff(self.a1, self.t, sigma) else { return None };
        let s1 = self.succ(self.a1, self.t, sigma);
        let a2_at_sigma = self.succ(self.a2, self.u, sigma);
        let e2_at_sigma = self.eff(self.a2, self.u, sigma);

        for sp in &s1 {
            // (1) right-movers commute later.
            if e1.leq(Effect::R) {
                if let Some(e2) = self.eff(self.a2, self.u, sp) {
                    if e2.leq(Effect::N) {
                        for spp in self.succ(self.a2, self.u, sp) {
                            let ok = a2_at_sigma
                                .iter()
                                .any(|sppp| self.succ(self.a1, self.t, sppp).contains(&spp));
                            if !ok {
                                return Some((1, format!("from {}", w.describe_full(sigma))));
                            }
                        }
                    }
                }
            }
            if !e1.leq(Effect::N) {
                continue;
            }
            // (2) left-movers commute earlier.
            if let Some(e2) = self.eff(self.a2, self.u, sp) {
                if e2.leq(Effect::L) {
                    for spp in self.succ(self.a2, self.u, sp) {
                        let ok = a2_at_sigma
                            .iter()
                            .any(|sppp| self.succ(self.a1, self.t, sppp).contains(&spp));
                        if !ok {
                            return Some((2, format!("from {}", w.describe_full(sigma))));
                        }
                    }
                }
            }
            // (3) effects are stable under other threads' steps (checked
            // where the observed action is enabled on both sides).
            if let (Some(e_pre), Some(e_post)) = (e2_at_sigma, self.eff(self.a2, self.u, sp)) {
                if e_pre != e_post {
                    return Some((
                        3,
                        format!(
                            "effect changes {} -> {} across {} from {}",
                            e_pre,
                            e_post,
                            self.a1.label,
                            w.describe_full(sigma)
                        ),
                    ));
                }
            }
            // (4) left-movers cannot be blocked by other threads' steps.
            if let Some(e2) = e2_at_sigma {
                if e2.leq(Effect::L) {
                    for spp in &a2_at_sigma {
                        let ok = self
                            .succ(self.a2, self.u, sp)
                            .iter()
                            .any(|sppp| self.succ(self.a1, self.t, spp).contains(sppp));
                        if !ok {
                            return Some((4, format!("from {}", w.describe_full(sigma))));
                        }
                    }
                }
            }
        }
        None
    }
}

fn enumerate_slots(
    world: &World,
    slots: &[usize],
    store: &mut Vec<u16>,
    depth: usize,
    visit: &mut dyn FnMut(&[u16]) -> bool,
) -> bool {
    if depth == slots.len() {
        return visit(store);
    }
    let idx = slots[depth];
    let size = world.full_domain(idx).size() as u16;
    for code in 0..size {
        store[idx] = code;
        if !enumerate_slots(world, slots, store, depth + 1, visit) {
            return false;
        }
    }
    true
}

/// Brute-force check of the four validity conditions over every ordered pair
/// of syntactic actions and every pair of distinct threads.  Enumeration is
/// restricted to each pair's support variables; local-only actions are
/// exempt (they are identity-on-globals or touch only the acting thread's
/// locals, so they commute and preserve effects by construction).
pub fn check_validity(
    p: &Program,
    world: &World,
    actions: &ActionTable,
    budget: u64,
) -> Result<Vec<ValidityViolation>, Diagnostic> {
    if world.n_threads < 2 {
        return Ok(Vec::new());
    }
    let mt = MoverTable::new(p, world);
    // Unstable reads are exempt alongside local-only actions: their
    // successors differ from the pre store only in the acting thread's own
    // local, which no other thread's action can read, so every commutation
    // condition holds for them by construction.
    let acts: Vec<&Action> = all_actions(actions)
        .into_iter()
        .filter(|a| {
            a.access != Access::LocalOnly && !matches!(a.kind, ActionKind::UnstableRead { .. })
        })
        .collect();
    let base = world.init_full_store(p).map_err(|d| d)?;
    let mut found: BTreeMap<(usize, usize, u8), ValidityViolation> = BTreeMap::new();
    for (i, a1) in acts.iter().enumerate() {
        for (j, a2) in acts.iter().enumerate() {
            for t in 1..=world.n_threads {
                for u in 1..=world.n_threads {
                    if t == u {
                        continue;
                    }
                    let mut slots: Vec<usize> = effect_support(world, &mt, a1)
                        .iter()
                        .map(|id| world.full_index(*id, t))
                        .chain(
                            effect_support(world, &mt, a2)
                                .iter()
                                .map(|id| world.full_index(*id, u)),
                        )
                        .collect();
                    slots.sort_unstable();
                    slots.dedup();
                    let space: u64 = slots
                        .iter()
                        .map(|i| world.full_domain(*i).size())
                        .try_fold(1u64, |a, b| a.checked_mul(b))
                        .unwrap_or(u64::MAX);
                    if space > budget {
                        return Err(Diagnostic {
                            span: a1.span,
                            message: format!(
                                "validity check budget exceeded: {} stores for action pair",
                                space
                            ),
                        });
                    }
                    let chk = PairCheck { world, mt: &mt, a1, a2, t, u };
                    let mut store = base.clone();
                    enumerate_slots(world, &slots, &mut store, 0, &mut |sigma| {
                        if let Some((cond, witness)) = chk.check_at(sigma) {
                            found.entry((i, j, cond)).or_insert_with(|| ValidityViolation {
                                condition: cond,
                                a1_span: a1.span,
                                a1_label: a1.label.clone(),
                                a2_span: a2.span,
                                a2_label: a2.label.clone(),
                                t,
                                u,
                                witness,
                            });
                            return false; // one witness per pair+condition
                        }
                        true
                    });
                }
            }
        }
    }
    Ok(found.into_values().collect())
}

/// Literal transcription of the validity definition: every ordered pair of
/// actions (including local-only ones), every distinct thread pair, every
/// store in the full product space.  Exponentially slower; used to validate
/// the optimized check on tiny programs.
pub fn check_validity_literal(
    p: &Program,
    world: &World,
    actions: &ActionTable,
    budget: u64,
) -> Result<Vec<ValidityViolation>, Diagnostic> {
    if world.n_threads < 2 {
        return Ok(Vec::new());
    }
    let mt = MoverTable::new(p, world);
    let acts = all_actions(actions);
    let space: u64 = (0..world.full_len())
        .map(|i| world.full_domain(i).size())
        .try_fold(1u64, |a, b| a.checked_mul(b))
        .unwrap_or(u64::MAX);
    if space > budget {
        return Err(Diagnostic {
            span: Span::default(),
            message: format!("literal validity check infeasible: {} stores", space),
        });
    }
    let slots: Vec<usize> = (0..world.full_len()).collect();
    let base = world.init_full_store(p).map_err(|d| d)?;
    let mut found: BTreeMap<(usize, usize, u8), ValidityViolation> = BTreeMap::new();
    for (i, a1) in acts.iter().enumerate() {
        for (j, a2) in acts.iter().enumerate() {
            for t in 1..=world.n_threads {
                for u in 1..=world.n_threads {
                    if t == u {
                        continue;
                    }
                    let chk = PairCheck { world, mt: &mt, a1, a2, t, u };
                    let mut store = base.clone();
                    enumerate_slots(world, &slots, &mut store, 0, &mut |sigma| {
                        if let Some((cond, witness)) = chk.check_at(sigma) {
                            found.entry((i, j, cond)).or_insert_with(|| ValidityViolation {
                                condition: cond,
                                a1_span: a1.span,
                                a1_label: a1.label.clone(),
                                a2_span: a2.span,
                                a2_label: a2.label.clone(),
                                t,
                                u,
                                witness,
                            });
                            return false;
                        }
                        true
                    });
                }
            }
        }
    }
    Ok(found.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::build_actions;
    use crate::parser::parse;
    use Effect::*;

    fn setup(src: &str) -> (Program, World, ActionTable, MoverTable) {
        let p = parse(src).expect("parse");
        assert!(well_formed(&p).is_empty(), "{:?}", well_formed(&p));
        let w = World::new(&p);
        let t = build_actions(&p, &w);
        let mt = MoverTable::new(&p, &w);
        (p, w, t, mt)
    }

    const LOCKED: &str = "bits 3;
lock m write right-mover if old(m) == 0 && m == tid
       write left-mover if old(m) == tid && m == 0;
int x both-mover if m == tid;
local int r;
init { }
thread { yield; acquire(m); r = x; x = r + 1; release(m); }
thread { yield; acquire(m); r = x; x = r + 1; release(m); }
";

    fn action_at<'a>(t: &'a ActionTable, p: &Program, thread: usize, i: usize) -> &'a Action {
        match t.get(&p.threads[thread][i].id).unwrap() {
            NodeActions::Single(a) => a,
            _ => panic!(),
        }
    }

    #[test]
    fn lock_discipline_effects() {
        let (p, w, t, mt) = setup(LOCKED);
        let acq = action_at(&t, &p, 0, 1);
        let read = action_at(&t, &p, 0, 2);
        let write = action_at(&t, &p, 0, 3);
        let rel = action_at(&t, &p, 0, 4);
        let mut free = w.init_proj_store(&p).unwrap(); // m = 0
        assert_eq!(effect_of(&w, Layout::Proj, &mt, acq, 1, &free), Some(R));
        // Held by this thread: acquire blocked, release is a left-mover,
        // x accesses are both-movers.
        let mut held = free.clone();
        held[0] = 1;
        assert_eq!(effect_of(&w, Layout::Proj, &mt, acq, 1, &held), None);
        assert_eq!(effect_of(&w, Layout::Proj, &mt, rel, 1, &held), Some(L));
        assert_eq!(effect_of(&w, Layout::Proj, &mt, read, 1, &held), Some(B));
        assert_eq!(effect_of(&w, Layout::Proj, &mt, write, 1, &held), Some(B));
        // Unprotected access: no clause matches.
        assert_eq!(effect_of(&w, Layout::Proj, &mt, write, 1, &free), Some(E));
        assert_eq!(effect_of(&w, Layout::Proj, &mt, read, 2, &held), Some(E));
        // Release from an unheld store: left-clause fails, error effect.
        free[0] = 0;
        assert_eq!(effect_of(&w, Layout::Proj, &mt, rel, 1, &free), Some(E));
    }

    #[test]
    fn effect_over_joins_and_is_monotone() {
        let (p, w, t, mt) = setup(LOCKED);
        let write = action_at(&t, &p, 0, 3);
        let space = ProjSpace::new(&w);
        // m == tid only: both-mover.
        let mut held = w.init_proj_store(&p).unwrap();
        held[0] = 1;
        let small = Rel::diag(space.size, [space.encode(&held)]);
        assert_eq!(effect_over(&w, &mt, write, 1, &small, &space), B);
        // Adding an unprotected store joins in E.
        let mut bigger = small.clone();
        let free = w.init_proj_store(&p).unwrap();
        bigger.insert(space.encode(&free), space.encode(&free));
        assert_eq!(effect_over(&w, &mt, write, 1, &bigger, &space), E);
        // Empty precondition: bottom.
        assert_eq!(effect_over(&w, &mt, write, 1, &Rel::empty(space.size), &space), B);
    }

    #[test]
    fn lock_discipline_is_valid() {
        let (p, w, t, _) = setup(LOCKED);
        let v = check_validity(&p, &w, &t, 1 << 24).unwrap();
        assert!(v.is_empty(), "{:?}", v);
    }

    const RACY: &str = "bits 2;
int x both-mover;
local int r;
init { }
thread { yield; x = 1; }
thread { yield; x = 2; }
";

    #[test]
    fn racy_bothmover_is_invalid() {
        let (p, w, t, _) = setup(RACY);
        let v = check_validity(&p, &w, &t, 1 << 24).unwrap();
        assert!(!v.is_empty());
        assert!(v.iter().any(|v| v.condition == 1 || v.condition == 2));
    }

    #[test]
    fn single_thread_vacuously_valid() {
        let (p, w, t, _) =
            setup("bits 2; int x both-mover; init { } thread { yield; x = 1; }");
        assert!(check_validity(&p, &w, &t, 1 << 24).unwrap().is_empty());
    }

    fn violation_keys(v: &[ValidityViolation]) -> Vec<(u8, Span, Span)> {
        let mut k: Vec<_> = v.iter().map(|v| (v.condition, v.a1_span, v.a2_span)).collect();
        k.sort();
        k.dedup();
        k
    }

    #[test]
    fn optimized_matches_literal_transcription() {
        // Small enough for the full-product-space literal check.
        for src in [
            RACY,
            "bits 2;
lock m write right-mover if old(m) == 0 && m == tid
       write left-mover if old(m) == tid && m == 0;
int x both-mover if m == tid;
init { }
thread { yield; acquire(m); x = 1; release(m); }
thread { yield; acquire(m); x = 2; release(m); }
",
            "bits 2;
int x non-mover;
int y read both-mover
      write non-mover;
init { }
thread { yield; x = 1; y = 1; }
thread { yield; x = 2; if (y == 0) { skip; } else { skip; } }
",
        ] {
            let (p, w, t, _) = setup(src);
            let fast = check_validity(&p, &w, &t, 1 << 24).unwrap();
            let slow = check_validity_literal(&p, &w, &t, 1 << 24).unwrap();
            assert_eq!(violation_keys(&fast), violation_keys(&slow), "program:\n{}", src);
        }
    }
}
