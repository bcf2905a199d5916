//! Pretty-printer for parsed programs.  The output re-parses to the same
//! tree (ignoring spans), with bare mover clauses and `assert` left in their
//! sugared forms.

use crate::ast::*;
use crate::effects::Effect;
use std::fmt::Write;

pub fn print(p: &Program) -> String {
    let mut s = String::new();
    if p.bits != DEFAULT_BITS {
        let _ = writeln!(s, "bits {};", p.bits);
    }
    if p.list_depth != DEFAULT_LIST_DEPTH {
        let _ = writeln!(s, "listdepth {};", p.list_depth);
    }
    if p.bits != DEFAULT_BITS || p.list_depth != DEFAULT_LIST_DEPTH {
        s.push('\n');
    }
    for v in &p.vars {
        print_vardecl(&mut s, v);
    }
    if !p.vars.is_empty() {
        s.push('\n');
    }
    for f in &p.fns {
        print_fndecl(&mut s, f);
        s.push('\n');
    }
    s.push_str("init {\n");
    for (name, e, _) in &p.init {
        let _ = writeln!(s, "    {} = {};", name, expr(e));
    }
    s.push_str("}\n");
    if p.relies != Expr::BoolLit(true) {
        let _ = writeln!(s, "relies {};", expr(&p.relies));
    }
    if p.guarantees != Expr::BoolLit(true) {
        let _ = writeln!(s, "guarantees {};", expr(&p.guarantees));
    }
    for t in &p.threads {
        s.push_str("\nthread {\n");
        print_stmts(&mut s, t, 1);
        s.push_str("}\n");
    }
    s
}

fn domain_kw(d: DomainKind) -> &'static str {
    match d {
        DomainKind::Int => "int",
        DomainKind::Lock => "lock",
        DomainKind::OptInt => "optional int",
        DomainKind::ListInt => "list int",
    }
}

fn print_vardecl(s: &mut String, v: &VarDecl) {
    if v.is_local {
        let _ = writeln!(s, "local {} {};", domain_kw(v.domain), v.name);
        return;
    }
    let _ = write!(s, "{} {}", domain_kw(v.domain), v.name);
    let mut i = 0;
    while i < v.clauses.len() {
        let c = &v.clauses[i];
        // A combined clause was expanded into an adjacent read/write pair.
        let combined = c.from_combined
            && i + 1 < v.clauses.len()
            && v.clauses[i + 1].from_combined
            && v.clauses[i + 1].effect == c.effect
            && v.clauses[i + 1].condition == c.condition;
        s.push('\n');
        s.push_str("    ");
        if combined {
            i += 2;
        } else {
            s.push_str(match c.kind {
                ClauseKind::Read => "read ",
                ClauseKind::Write => "write ",
            });
            i += 1;
        }
        s.push_str(effect_kw(c.effect));
        if c.condition != Expr::BoolLit(true) {
            let _ = write!(s, " if {}", expr(&c.condition));
        }
    }
    s.push_str(";\n");
}

fn effect_kw(e: Effect) -> &'static str {
    e.keyword().unwrap_or("non-mover")
}

fn print_fndecl(s: &mut String, f: &FnDecl) {
    match &f.spec {
        FnSpec::Atomic { effect, effect_elided, requires, ensures } => {
            s.push_str("atomic");
            if !*effect_elided {
                let _ = write!(s, " {}", effect_kw(*effect));
            }
            let _ = writeln!(s, " requires {} ensures {}", expr(requires), expr(ensures));
        }
        FnSpec::NonAtomic { relies, guarantees, requires, ensures } => {
            let _ = writeln!(s, "relies {} guarantees {}", expr(relies), expr(guarantees));
            let _ = writeln!(s, "requires {} ensures {}", expr(requires), expr(ensures));
        }
    }
    let _ = writeln!(s, "{}() {{", f.name);
    print_stmts(s, &f.body, 1);
    s.push_str("}\n");
}

fn indent(s: &mut String, depth: usize) {
    for _ in 0..depth {
        s.push_str("    ");
    }
}

fn print_stmts(s: &mut String, stmts: &[Stmt], depth: usize) {
    for st in stmts {
        print_stmt(s, st, depth);
    }
}

fn print_stmt(s: &mut String, st: &Stmt, depth: usize) {
    indent(s, depth);
    match &st.kind {
        StmtKind::Skip => s.push_str("skip;\n"),
        StmtKind::Wrong => s.push_str("wrong;\n"),
        StmtKind::Yield => s.push_str("yield;\n"),
        StmtKind::Assign { target, expr: e, .. } => {
            let _ = writeln!(s, "{} = {};", target, expr(e));
        }
        StmtKind::UnstableRead { local, global, .. } => {
            let _ = writeln!(s, "{} ~= {};", local, global);
        }
        StmtKind::Acquire(m) => {
            let _ = writeln!(s, "acquire({});", m);
        }
        StmtKind::Release(m) => {
            let _ = writeln!(s, "release({});", m);
        }
        StmtKind::Assert(f) => {
            let _ = writeln!(s, "assert {};", expr(f));
        }
        StmtKind::If { cond, then_branch, else_branch } => {
            let _ = writeln!(s, "if ({}) {{", cond_str(cond));
            print_stmts(s, then_branch, depth + 1);
            indent(s, depth);
            s.push_str("} else {\n");
            print_stmts(s, else_branch, depth + 1);
            indent(s, depth);
            s.push_str("}\n");
        }
        StmtKind::While { cond, invariant, body } => {
            let _ = write!(s, "while ({})", cond_str(cond));
            if let Some(inv) = invariant {
                let _ = write!(s, " invariant {}", expr(inv));
            }
            s.push_str(" {\n");
            print_stmts(s, body, depth + 1);
            indent(s, depth);
            s.push_str("}\n");
        }
        StmtKind::Call(f) => {
            let _ = writeln!(s, "{}();", f);
        }
    }
}

fn cond_str(c: &Cond) -> String {
    match c {
        Cond::Test(f) => expr(f),
        Cond::Cas { var, expected, new, negated, .. } => {
            format!("{}cas({}, {}, {})", if *negated { "!" } else { "" }, var, expr(expected), expr(new))
        }
    }
}

// Precedence levels, loosest first; used to decide where parentheses are
// required so the output re-parses identically.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Implies, ..) => 1,
        Expr::Binary(BinOp::Or, ..) => 2,
        Expr::Binary(BinOp::And, ..) => 3,
        Expr::Binary(
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge,
            ..,
        ) => 4,
        Expr::Binary(BinOp::Cons, ..) => 5,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 6,
        Expr::Binary(BinOp::Mul, ..) => 7,
        Expr::Unary(UnOp::Not | UnOp::Neg, _) => 8,
        _ => 9,
    }
}

pub fn expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_sub(s: &mut String, e: &Expr, min: u8) {
    if prec(e) < min {
        s.push('(');
        write_expr(s, e);
        s.push(')');
    } else {
        write_expr(s, e);
    }
}

fn write_expr(s: &mut String, e: &Expr) {
    match e {
        Expr::IntLit(n) => {
            let _ = write!(s, "{}", n);
        }
        Expr::BoolLit(b) => s.push_str(if *b { "true" } else { "false" }),
        Expr::NoneLit => s.push_str("None"),
        Expr::NilLit => s.push_str("Nil"),
        Expr::Tid => s.push_str("tid"),
        Expr::Var(n, _) => s.push_str(n),
        Expr::Old(n, _) => {
            let _ = write!(s, "old({})", n);
        }
        Expr::Unary(op, a) => match op {
            UnOp::Not => {
                s.push('!');
                write_sub(s, a, 8);
            }
            UnOp::Neg => {
                s.push('-');
                write_sub(s, a, 8);
            }
            UnOp::Even => {
                let _ = write!(s, "even({})", expr(a));
            }
            UnOp::Head => {
                let _ = write!(s, "head({})", expr(a));
            }
            UnOp::Tail => {
                let _ = write!(s, "tail({})", expr(a));
            }
        },
        Expr::Binary(op, a, b) => {
            let p = prec(e);
            let (sym, la, lb) = match op {
                // right-assoc operators parenthesize a left operand of the
                // same level; comparisons are non-associative.
                BinOp::Implies => ("==>", p + 1, p),
                BinOp::Cons => ("::", p + 1, p),
                BinOp::Or => ("||", p, p + 1),
                BinOp::And => ("&&", p, p + 1),
                BinOp::Eq => ("==", p + 1, p + 1),
                BinOp::Ne => ("!=", p + 1, p + 1),
                BinOp::Lt => ("<", p + 1, p + 1),
                BinOp::Le => ("<=", p + 1, p + 1),
                BinOp::Gt => (">", p + 1, p + 1),
                BinOp::Ge => (">=", p + 1, p + 1),
                BinOp::Add => ("+", p, p + 1),
                BinOp::Sub => ("-", p, p + 1),
                BinOp::Mul => ("*", p, p + 1),
            };
            write_sub(s, a, la);
            let _ = write!(s, " {} ", sym);
            write_sub(s, b, lb);
        }
    }
}

/// Structural copy with all spans and statement ids cleared, for comparing
/// programs produced by different parses.
pub fn strip(p: &Program) -> Program {
    let mut q = p.clone();
    for v in &mut q.vars {
        v.span = Span::default();
        for c in &mut v.clauses {
            c.span = Span::default();
            strip_expr(&mut c.condition);
        }
    }
    for f in &mut q.fns {
        f.span = Span::default();
        match &mut f.spec {
            FnSpec::Atomic { requires, ensures, .. } => {
                strip_expr(requires);
                strip_expr(ensures);
            }
            FnSpec::NonAtomic { relies, guarantees, requires, ensures } => {
                strip_expr(relies);
                strip_expr(guarantees);
                strip_expr(requires);
                strip_expr(ensures);
            }
        }
        strip_stmts(&mut f.body);
    }
    for (_, e, sp) in &mut q.init {
        strip_expr(e);
        *sp = Span::default();
    }
    strip_expr(&mut q.relies);
    strip_expr(&mut q.guarantees);
    for t in &mut q.threads {
        strip_stmts(t);
    }
    q
}

fn strip_stmts(stmts: &mut [Stmt]) {
    for s in stmts {
        s.id = NodeId(0);
        s.span = Span::default();
        match &mut s.kind {
            StmtKind::Assign { target_span, expr, .. } => {
                *target_span = Span::default();
                strip_expr(expr);
            }
            StmtKind::UnstableRead { span2, .. } => *span2 = Span::default(),
            StmtKind::Assert(f) => strip_expr(f),
            StmtKind::If { cond, then_branch, else_branch } => {
                strip_cond(cond);
                strip_stmts(then_branch);
                strip_stmts(else_branch);
            }
            StmtKind::While { cond, invariant, body } => {
                strip_cond(cond);
                if let Some(inv) = invariant {
                    strip_expr(inv);
                }
                strip_stmts(body);
            }
            _ => {}
        }
    }
}

fn strip_cond(c: &mut Cond) {
    match c {
        Cond::Test(f) => strip_expr(f),
        Cond::Cas { var_span, expected, new, .. } => {
            *var_span = Span::default();
            strip_expr(expected);
            strip_expr(new);
        }
    }
}

fn strip_expr(e: &mut Expr) {
    match e {
        Expr::Var(_, sp) | Expr::Old(_, sp) => *sp = Span::default(),
        Expr::Unary(_, a) => strip_expr(a),
        Expr::Binary(_, a, b) => {
            strip_expr(a);
            strip_expr(b);
        }
        _ => {}
    }
}
