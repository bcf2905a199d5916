//! End-to-end acceptance gate.  Each numbered check prints one PASS/FAIL
//! line; the test fails if any check does.  Run with `--nocapture` to see
//! the lines on success.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use mvl::action::{build_actions, ActionKind, Layout, NodeActions};
use mvl::ast::{FnSpec, Program, Stmt, StmtKind};
use mvl::checker::{check_program, CheckOptions, Report};
use mvl::effects::{Effect, ALL_EFFECTS};
use mvl::explorer::{compare_schedulers, explore, replay, ExploreOptions, Scheduler};
use mvl::moverspec::{effect_of, MoverTable};
use mvl::parser::parse;
use mvl::rel::Rel;
use mvl::space::World;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load(name: &str) -> (String, Program) {
    let path = corpus_dir().join(name);
    let src = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    let p = parse(&src).unwrap_or_else(|e| panic!("{name} does not parse: {e:?}"));
    (src, p)
}

fn check(name: &str, reachable_totality: bool) -> Report {
    let (_, p) = load(name);
    let opts = CheckOptions { totality_reachable: reachable_totality, ..Default::default() };
    check_program(&p, &opts).unwrap_or_else(|d| panic!("{name} structural errors: {d:?}"))
}

fn has_rule(r: &Report, rule: &str) -> bool {
    r.failures.iter().any(|f| f.rule == rule)
}

/// Per-statement effects of a function body, in order.
fn body_effects(p: &Program, r: &Report, fname: &str) -> Vec<Effect> {
    let by_id: BTreeMap<_, _> = r.effects.iter().map(|se| (se.id, se.effect)).collect();
    p.func(fname).unwrap().body.iter().map(|s| by_id[&s.id]).collect()
}

type Outcome = Result<String, String>;

// ---------------------------------------------------------------------------
// 1. Effect algebra: ordering, sequencing, and iteration tables, frozen
//    here independently; plus associativity and monotonicity.

fn criterion_1() -> Outcome {
    use Effect::*;
    let started = Instant::now();
    // Frozen expectations (row = left operand), in the order Y B R L N E.
    let seq_table: [[Effect; 6]; 6] = [
        [Y, Y, Y, L, L, E],
        [Y, B, R, L, N, E],
        [R, R, R, N, N, E],
        [Y, L, E, L, E, E],
        [R, N, E, N, E, E],
        [E, E, E, E, E, E],
    ];
    let star_table: [(Effect, Effect); 6] = [(Y, Y), (B, B), (R, R), (L, L), (N, E), (E, E)];
    // Strict covers of the ordering: Y < B < {R, L} < N < E.
    let covers: &[(Effect, Effect)] = &[(Y, B), (B, R), (B, L), (R, N), (L, N), (N, E)];

    for (i, a) in ALL_EFFECTS.iter().enumerate() {
        for (j, b) in ALL_EFFECTS.iter().enumerate() {
            if a.seq(*b) != seq_table[i][j] {
                return Err(format!("seq({a:?}, {b:?}) = {:?}", a.seq(*b)));
            }
        }
    }
    for (a, want) in star_table {
        if a.star() != want {
            return Err(format!("star({a:?}) = {:?}", a.star()));
        }
    }
    // leq must be exactly the reflexive-transitive closure of the covers.
    let mut closure = HashSet::new();
    for e in ALL_EFFECTS {
        closure.insert((e, e));
    }
    loop {
        let mut grew = false;
        for &(a, b) in covers {
            let next: Vec<_> = closure
                .iter()
                .filter(|(x, y)| *y == a || (*x == b && *y != a))
                .cloned()
                .collect();
            for (x, y) in next {
                if y == a && closure.insert((x, b)) {
                    grew = true;
                }
                if x == b && closure.insert((a, y)) {
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    for a in ALL_EFFECTS {
        for b in ALL_EFFECTS {
            if a.leq(b) != closure.contains(&(a, b)) {
                return Err(format!("leq({a:?}, {b:?}) = {}", a.leq(b)));
            }
        }
    }
    // Associativity of seq; monotonicity of seq and join in both arguments.
    for a in ALL_EFFECTS {
        for b in ALL_EFFECTS {
            for c in ALL_EFFECTS {
                if a.seq(b).seq(c) != a.seq(b.seq(c)) {
                    return Err(format!("seq not associative at {a:?} {b:?} {c:?}"));
                }
                for d in ALL_EFFECTS {
                    if a.leq(b) && c.leq(d) {
                        if !a.seq(c).leq(b.seq(d)) {
                            return Err(format!("seq not monotone at {a:?} {b:?} {c:?} {d:?}"));
                        }
                        if !a.join(c).leq(b.join(d)) {
                            return Err(format!("join not monotone at {a:?} {b:?} {c:?} {d:?}"));
                        }
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    if elapsed.as_secs_f64() >= 1.0 {
        return Err(format!("algebra checks took {elapsed:?} (limit 1s)"));
    }
    Ok(format!("36 seq + 6 star + 36 leq entries, laws hold, {elapsed:?}"))
}

// ---------------------------------------------------------------------------
// 2. Lock-based counter: verifies; add() margin effects R B B B L B with
//    overall N; schedulers agree; no wrong state under preemption.

fn criterion_2() -> Outcome {
    use Effect::*;
    let started = Instant::now();
    let (_, p) = load("counter.mvl");
    let r = check("counter.mvl", false);
    if !r.verified() {
        return Err(format!("counter failed: {:?}", r.failures));
    }
    let effs = body_effects(&p, &r, "add");
    if effs != vec![R, B, B, B, L, B] {
        return Err(format!("add() effects {effs:?}"));
    }
    let overall = effs.iter().fold(B, |a, e| a.seq(*e));
    if overall != N {
        return Err(format!("add() overall effect {overall:?}"));
    }
    let cmp = compare_schedulers(&p, 1 << 22).map_err(|d| d.to_string())?;
    if !cmp.equivalent {
        return Err(format!("schedulers differ: {:?}", cmp.details));
    }
    if cmp.preemptive.wrong.is_some() {
        return Err("wrong reachable under preemption".into());
    }
    let elapsed = started.elapsed();
    if elapsed.as_secs_f64() >= 10.0 {
        return Err(format!("counter checks took {elapsed:?} (limit 10s)"));
    }
    Ok(format!(
        "verified, add() = R B B B L B (overall N), schedulers equivalent, {} preemptive states, {elapsed:?}",
        cmp.preemptive.states
    ))
}

// ---------------------------------------------------------------------------
// 3. Counter variant that transiently breaks even(x) inside the critical
//    section still verifies, with the same add() postcondition.

fn criterion_3() -> Outcome {
    let (src, _) = load("counter_broken_invariant.mvl");
    let (base_src, _) = load("counter.mvl");
    let spec_line = "atomic requires true ensures x == old(x) + n && u == x";
    if !src.contains(spec_line) || !base_src.contains(spec_line) {
        return Err("add() specification text differs from the lock-based counter".into());
    }
    let r = check("counter_broken_invariant.mvl", false);
    if !r.verified() {
        return Err(format!("failed: {:?}", r.failures));
    }
    Ok("verified with the unchanged add() postcondition".into())
}

// ---------------------------------------------------------------------------
// 4. Spin lock: lock() is an atomic right-mover, unlock() an atomic
//    left-mover, and add() keeps the identical specification text.

fn criterion_4() -> Outcome {
    let (src, p) = load("spinlock.mvl");
    let (base_src, _) = load("counter.mvl");
    let r = check("spinlock.mvl", false);
    if !r.verified() {
        return Err(format!("failed: {:?}", r.failures));
    }
    let declared = |name: &str| match &p.func(name).unwrap().spec {
        FnSpec::Atomic { effect, .. } => *effect,
        FnSpec::NonAtomic { .. } => Effect::E,
    };
    if declared("spin_lock") != Effect::R {
        return Err(format!("spin_lock declared {:?}", declared("spin_lock")));
    }
    if declared("spin_unlock") != Effect::L {
        return Err(format!("spin_unlock declared {:?}", declared("spin_unlock")));
    }
    let spec_line = "atomic requires true ensures x == old(x) + n && u == x";
    if !src.contains(spec_line) || !base_src.contains(spec_line) {
        return Err("add() specification text differs between the two counters".into());
    }
    Ok("spin_lock R, spin_unlock L, add() spec text identical".into())
}

// ---------------------------------------------------------------------------
// 5. Single-element queue: verifies; inside dequeue the unstable read is R,
//    a failing cas is B, a succeeding cas is N.

fn criterion_5() -> Outcome {
    let (_, p) = load("queue.mvl");
    let r = check("queue.mvl", false);
    if !r.verified() {
        return Err(format!("failed: {:?}", r.failures));
    }
    let world = World::new(&p);
    let actions = build_actions(&p, &world);
    let mt = MoverTable::new(&p, &world);
    let store = world.init_proj_store(&p).map_err(|d| d.to_string())?;
    let deq = p.func("dequeue").unwrap();
    let mut read_eff = None;
    let mut fail_eff = None;
    let mut succ_eff = None;
    let mut visit = |s: &Stmt| match &s.kind {
        StmtKind::UnstableRead { .. } => {
            if let NodeActions::Single(a) = &actions[&s.id] {
                read_eff = effect_of(&world, Layout::Proj, &mt, a, 1, &store);
            }
        }
        StmtKind::While { .. } => {
            if let NodeActions::Branch(a, b) = &actions[&s.id] {
                for act in [a, b] {
                    match act.kind {
                        ActionKind::CasFail { .. } => {
                            fail_eff = effect_of(&world, Layout::Proj, &mt, act, 1, &store)
                        }
                        ActionKind::CasSuccess { .. } => {
                            // Initially buf == None == r, so the cas is enabled.
                            succ_eff = effect_of(&world, Layout::Proj, &mt, act, 1, &store)
                        }
                        _ => {}
                    }
                }
            }
        }
        _ => {}
    };
    mvl::ast::for_each_stmt_in(&deq.body, &mut visit);
    if read_eff != Some(Effect::R) {
        return Err(format!("unstable read effect {read_eff:?}"));
    }
    if fail_eff != Some(Effect::B) {
        return Err(format!("failing cas effect {fail_eff:?}"));
    }
    if succ_eff != Some(Effect::N) {
        return Err(format!("succeeding cas effect {succ_eff:?}"));
    }
    Ok("verified; unstable read R, failed cas B, successful cas N".into())
}

// ---------------------------------------------------------------------------
// 6. Treiber-style stack at list depth 3, two threads, one push and one pop
//    each, with the structural postconditions on head/tail.

fn criterion_6() -> Outcome {
    let (src, p) = load("stack.mvl");
    if p.list_depth != 3 || p.n_threads() != 2 {
        return Err(format!("depth {} threads {}", p.list_depth, p.n_threads()));
    }
    if !src.contains("ensures head(top) == v && tail(top) == old(top)")
        || !src.contains("ensures head(old(top)) == v && tail(old(top)) == top")
    {
        return Err("push/pop postconditions are not the structural ones".into());
    }
    let r = check("stack.mvl", true);
    if !r.verified() {
        return Err(format!("failed: {:?}", r.failures));
    }
    Ok("verified at list depth 3 with structural push/pop postconditions".into())
}

// ---------------------------------------------------------------------------
// 7. Mutation suite: each mutant must fail with the named rule.

fn criterion_7() -> Outcome {
    let cases: &[(&str, &str)] = &[
        ("counter_noacquire.mvl", "effect"),
        ("counter_bad_guarantee.mvl", "yield guarantee"),
        ("counter_missing_yield.mvl", "irreducible sequence"),
        ("loop_noterm.mvl", "left-mover termination"),
        ("bad_spec_racy_bothmover.mvl", "validity condition (1)"),
    ];
    let mut seen = Vec::new();
    for (name, rule) in cases {
        let r = check(name, false);
        if r.verified() {
            return Err(format!("{name} unexpectedly verified"));
        }
        if !has_rule(&r, rule) {
            let rules: Vec<_> = r.failures.iter().map(|f| f.rule.as_str()).collect();
            return Err(format!("{name}: wanted rule {rule:?}, got {rules:?}"));
        }
        let f = r.failures.iter().find(|f| f.rule == *rule).unwrap();
        if f.message.is_empty() {
            return Err(format!("{name}: empty witness message"));
        }
        seen.push(*rule);
    }
    // The write-to-x witness of the deleted acquire names the variable.
    let r = check("counter_noacquire.mvl", false);
    if !r.failures.iter().any(|f| f.rule == "effect" && f.message.contains("write to x")) {
        return Err("deleted acquire does not flag the x write".into());
    }
    Ok(format!("five mutants fail with rules {seen:?}"))
}

// ---------------------------------------------------------------------------
// 8. Differential soundness: every verified corpus program reaches no wrong
//    state and has scheduler-independent terminal stores; at least two
//    failed programs exhibit replayable wrong-reaching traces.

fn criterion_8() -> Outcome {
    let started = Instant::now();
    let mut programs: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension().map_or(false, |x| x == "mvl")).then_some(p)
        })
        .collect();
    programs.sort();
    let mut verified = 0usize;
    let mut replayed = Vec::new();
    for path in &programs {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let src = std::fs::read_to_string(path).unwrap();
        let p = parse(&src).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        // Totality in its weakest supported mode, so the verdict split only
        // reflects genuine verification failures.
        let opts = CheckOptions { totality_reachable: true, ..Default::default() };
        let r = check_program(&p, &opts).unwrap_or_else(|d| panic!("{name}: {d:?}"));
        if r.verified() {
            verified += 1;
            let cmp = compare_schedulers(&p, 1 << 22).map_err(|d| d.to_string())?;
            if cmp.preemptive.wrong.is_some() {
                return Err(format!("{name} verified but wrong is reachable"));
            }
            if cmp.preemptive.terminal_stores != cmp.nonpreemptive.terminal_stores {
                return Err(format!("{name}: terminal stores differ between schedulers"));
            }
        } else {
            let e = explore(
                &p,
                &ExploreOptions {
                    scheduler: Scheduler::Preemptive,
                    max_states: 1 << 22,
                    instrument: false,
                },
            )
            .map_err(|d| d.to_string())?;
            if let Some(trace) = &e.wrong {
                match replay(&p, trace) {
                    Ok(true) => replayed.push(name.clone()),
                    Ok(false) => return Err(format!("{name}: witness replays but not to wrong")),
                    Err(msg) => return Err(format!("{name}: witness does not replay: {msg}")),
                }
            }
        }
    }
    if replayed.len() < 2 {
        return Err(format!("only {replayed:?} produced replayable wrong traces"));
    }
    for must in ["racy_assert.mvl", "torn_counter.mvl"] {
        if !replayed.iter().any(|n| n == must) {
            return Err(format!("{must} missing from the wrong-trace set"));
        }
    }
    let elapsed = started.elapsed();
    if elapsed.as_secs_f64() >= 120.0 {
        return Err(format!("differential pass took {elapsed:?} (limit 120s)"));
    }
    Ok(format!(
        "{verified} verified programs scheduler-stable, {} replayable wrong traces, {elapsed:?}",
        replayed.len()
    ))
}

// ---------------------------------------------------------------------------
// 9. Relation engine vs a naive set-of-pairs reference, randomized.

#[derive(Clone, Default)]
struct NaiveRel {
    set: HashSet<(u64, u64)>,
}

impl NaiveRel {
    fn matches(&self, r: &Rel) -> bool {
        self.set.len() == r.len() && self.set.iter().all(|&(p, q)| r.contains(p, q))
    }
}

fn criterion_9() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x6d766c);
    for case in 0..1000u32 {
        let size = rng.gen_range(1..=1024u64);
        let density = rng.gen_range(0.0..0.2f64);
        let n_pairs = ((size * size) as f64 * density) as usize;
        let mut a = Rel::empty(size);
        let mut b = Rel::empty(size);
        let mut na = NaiveRel { set: HashSet::new() };
        let mut nb = NaiveRel { set: HashSet::new() };
        for _ in 0..n_pairs.min(5000) {
            let (p, q) = (rng.gen_range(0..size), rng.gen_range(0..size));
            if rng.gen_bool(0.6) {
                let fresh = a.insert(p, q);
                if fresh != na.set.insert((p, q)) {
                    return Err(format!("case {case}: insert freshness disagrees"));
                }
            } else {
                b.insert(p, q);
                nb.set.insert((p, q));
            }
        }
        // Membership on random probes.
        for _ in 0..50 {
            let (p, q) = (rng.gen_range(0..size), rng.gen_range(0..size));
            if a.contains(p, q) != na.set.contains(&(p, q)) {
                return Err(format!("case {case}: contains disagrees at ({p}, {q})"));
            }
        }
        // Union.
        let mut u = a.clone();
        u.union_with(&b);
        let nu = NaiveRel { set: na.set.union(&nb.set).cloned().collect() };
        if !nu.matches(&u) {
            return Err(format!("case {case}: union disagrees"));
        }
        // Subset both ways.
        if a.is_subset(&u) != na.set.is_subset(&nu.set) {
            return Err(format!("case {case}: subset disagrees"));
        }
        if u.is_subset(&a) != nu.set.is_subset(&na.set) {
            return Err(format!("case {case}: reverse subset disagrees"));
        }
        if let Some((p, q)) = u.subset_witness(&a) {
            if na.set.contains(&(p, q)) || !nu.set.contains(&(p, q)) {
                return Err(format!("case {case}: bogus subset witness ({p}, {q})"));
            }
        }
        // Distinct pres/posts.
        let mut np: Vec<u64> = na.set.iter().map(|&(_, q)| q).collect();
        np.sort_unstable();
        np.dedup();
        if a.posts() != np {
            return Err(format!("case {case}: posts disagree"));
        }
        let mut npre: Vec<u64> = na.set.iter().map(|&(p, _)| p).collect();
        npre.sort_unstable();
        npre.dedup();
        if a.pres() != npre {
            return Err(format!("case {case}: pres disagree"));
        }
        // Filtering.
        let keep = |p: u64, q: u64| (p + q) % 3 != 0;
        let fa = a.retain(keep);
        let nfa = NaiveRel {
            set: na.set.iter().cloned().filter(|&(p, q)| keep(p, q)).collect(),
        };
        if !nfa.matches(&fa) {
            return Err(format!("case {case}: retain disagrees"));
        }
        // Post-store stepping: q -> {q/2, min(q+1, size-1)}.
        let stepped = a.step_posts(&mut |q, out| {
            out.push(q / 2);
            out.push((q + 1).min(size - 1));
        });
        let nstepped = NaiveRel {
            set: na
                .set
                .iter()
                .flat_map(|&(p, q)| [(p, q / 2), (p, (q + 1).min(size - 1))])
                .collect(),
        };
        if !nstepped.matches(&stepped) {
            return Err(format!("case {case}: step_posts disagrees"));
        }
        // Diagonal.
        let d = Rel::diag(size, a.posts());
        let nd = NaiveRel { set: np.iter().map(|&q| (q, q)).collect() };
        if !nd.matches(&d) {
            return Err(format!("case {case}: diag disagrees"));
        }
    }
    // A few cases past the dense cutoff exercise the sparse backend too.
    for case in 0..20u32 {
        let size = rng.gen_range(3000..=6000u64);
        let mut a = Rel::empty(size);
        let mut na: HashSet<(u64, u64)> = HashSet::new();
        for _ in 0..2000 {
            let (p, q) = (rng.gen_range(0..size), rng.gen_range(0..size));
            a.insert(p, q);
            na.insert((p, q));
        }
        let collected: HashSet<(u64, u64)> = a.iter().collect();
        if collected != na {
            return Err(format!("sparse case {case}: contents disagree"));
        }
    }
    Ok("1000 randomized cases agree with the set-based reference".into())
}

#[test]
fn acceptance() {
    let checks: Vec<(&str, fn() -> Outcome)> = vec![
        ("effect algebra tables and laws", criterion_1),
        ("lock-based counter", criterion_2),
        ("broken-invariant counter", criterion_3),
        ("spin-lock counter", criterion_4),
        ("lock-free queue", criterion_5),
        ("lock-free stack", criterion_6),
        ("mutation suite", criterion_7),
        ("checker/explorer differential", criterion_8),
        ("relation engine cross-check", criterion_9),
    ];
    let mut failed = false;
    for (i, (label, f)) in checks.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} ({label}): PASS — {detail}", i + 1),
            Err(why) => {
                failed = true;
                println!("criterion {} ({label}): FAIL — {why}", i + 1);
            }
        }
    }
    assert!(!failed, "acceptance criteria failed (see lines above)");
}
