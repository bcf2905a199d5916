//! Abstract syntax for `.mvl` programs: variable declarations with mover
//! clauses, function declarations with specifications, statements, formulas,
//! and the whole-program declaration table.

use crate::effects::Effect;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Span {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    pub fn join(self, other: Span) -> Span {
        let start = if (self.start_line, self.start_col) <= (other.start_line, other.start_col) {
            (self.start_line, self.start_col)
        } else {
            (other.start_line, other.start_col)
        };
        let end = if (self.end_line, self.end_col) >= (other.end_line, other.end_col) {
            (self.end_line, self.end_col)
        } else {
            (other.end_line, other.end_col)
        };
        Span {
            start_line: start.0,
            start_col: start.1,
            end_line: end.0,
            end_col: end.1,
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start_line, self.start_col)
    }
}

/// Resolved reference to a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarId {
    Global(usize),
    /// Index of a thread-local family; the instance is selected by the
    /// executing thread.
    Local(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    /// Signed wrap-around window of width `2^bits`.
    Int,
    /// `{0} ∪ Tid`.
    Lock,
    /// `None` or an int.
    OptInt,
    /// Immutable int list of bounded depth.
    ListInt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int,
    Bool,
    OptInt,
    ListInt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    IntLit(i64),
    BoolLit(bool),
    NoneLit,
    NilLit,
    Tid,
    Var(String, Span),
    /// `old(x)`; only meaningful in two-store formulas.
    Old(String, Span),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
    Even,
    Head,
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
    Cons,
}

pub type Formula = Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseKind {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoverClause {
    pub kind: ClauseKind,
    pub effect: Effect,
    /// Two-store condition; `true` when elided in the source.
    pub condition: Formula,
    /// True when the source wrote a bare clause that expands to both a read
    /// and a write case; used by the printer to resugar.
    pub from_combined: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub domain: DomainKind,
    pub is_local: bool,
    pub clauses: Vec<MoverClause>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    /// State-predicate test, encoded as a pair of identity-on-store actions.
    Test(Formula),
    /// `cas(x, expected, new)`; `negated` swaps the success/failure pair.
    Cas {
        var: String,
        var_span: Span,
        expected: Expr,
        new: Expr,
        negated: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub id: NodeId,
    pub span: Span,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Skip,
    Wrong,
    Yield,
    /// `x = expr`.
    Assign { target: String, target_span: Span, expr: Expr },
    /// Unstable read `r ~= x`: stores an arbitrary domain value into `r`.
    UnstableRead { local: String, global: String, span2: Span },
    Acquire(String),
    Release(String),
    /// Sugar for `if (B) skip else wrong`.
    Assert(Formula),
    If { cond: Cond, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
    While { cond: Cond, invariant: Option<Formula>, body: Vec<Stmt> },
    Call(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FnSpec {
    Atomic {
        /// Declared mover effect; `N` when elided.
        effect: Effect,
        /// True when the effect keyword was elided in the source.
        effect_elided: bool,
        /// One-store precondition.
        requires: Formula,
        /// Two-store postcondition.
        ensures: Formula,
    },
    NonAtomic {
        relies: Formula,
        guarantees: Formula,
        /// One-store precondition.
        requires: Formula,
        /// One-store postcondition.
        ensures: Formula,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnDecl {
    pub name: String,
    pub spec: FnSpec,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    /// Wrap-around window width exponent; domain is `[-2^(bits-1), 2^(bits-1)-1]`.
    pub bits: u32,
    /// Maximum list length for the bounded list domain.
    pub list_depth: u32,
    pub vars: Vec<VarDecl>,
    pub fns: Vec<FnDecl>,
    /// Constant initial assignments to globals; unassigned variables default
    /// to 0 / unheld / None / Nil.
    pub init: Vec<(String, Expr, Span)>,
    /// Program-level rely; `true` when elided.
    pub relies: Formula,
    /// Program-level guarantee; `true` when elided.
    pub guarantees: Formula,
    pub threads: Vec<Vec<Stmt>>,
}

pub const DEFAULT_BITS: u32 = 5;
pub const DEFAULT_LIST_DEPTH: u32 = 3;

impl Program {
    pub fn n_threads(&self) -> usize {
        self.threads.len()
    }

    pub fn global(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| !v.is_local && v.name == name)
    }

    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn func(&self, name: &str) -> Option<&FnDecl> {
        self.fns.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: Span,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

/// Walks every expression of a formula/expr tree, collecting variable names.
pub fn expr_vars<'a>(e: &'a Expr, out: &mut Vec<(&'a str, bool, Span)>) {
    match e {
        Expr::Var(n, sp) => out.push((n, false, *sp)),
        Expr::Old(n, sp) => out.push((n, true, *sp)),
        Expr::Unary(_, a) => expr_vars(a, out),
        Expr::Binary(_, a, b) => {
            expr_vars(a, out);
            expr_vars(b, out);
        }
        _ => {}
    }
}

/// Names of variables an expression mentions (either store).
pub fn mentioned_names(e: &Expr) -> Vec<String> {
    let mut v = Vec::new();
    expr_vars(e, &mut v);
    let mut names: Vec<String> = v.into_iter().map(|(n, _, _)| n.to_string()).collect();
    names.sort();
    names.dedup();
    names
}

fn walk_stmts<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
    for s in stmts {
        f(s);
        match &s.kind {
            StmtKind::If { then_branch, else_branch, .. } => {
                walk_stmts(then_branch, f);
                walk_stmts(else_branch, f);
            }
            StmtKind::While { body, .. } => walk_stmts(body, f),
            _ => {}
        }
    }
}

/// Visits every statement in one block, including nested ones.
pub fn for_each_stmt_in<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
    walk_stmts(stmts, f);
}

/// Visits every statement in the program (function bodies, then threads).
pub fn for_each_stmt<'a>(p: &'a Program, mut f: impl FnMut(&'a Stmt)) {
    for fd in &p.fns {
        walk_stmts(&fd.body, &mut f);
    }
    for t in &p.threads {
        walk_stmts(t, &mut f);
    }
}

/// The set of global variables a single primitive statement or embedded
/// expression touches. Used to enforce the one-global-per-action shape.
pub fn expr_globals(p: &Program, e: &Expr) -> Vec<String> {
    let mut vars = Vec::new();
    expr_vars(e, &mut vars);
    let mut out: Vec<String> = vars
        .iter()
        .filter(|(n, _, _)| p.global(n).is_some())
        .map(|(n, _, _)| n.to_string())
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Structural well-formedness checks: declaration references, domain shapes,
/// the single-global-per-action restriction, and clause constraints.
pub fn well_formed(p: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in &p.vars {
        if !seen.insert(v.name.clone()) {
            diags.push(Diagnostic {
                span: v.span,
                message: format!("duplicate variable declaration `{}`", v.name),
            });
        }
        if v.is_local && !v.clauses.is_empty() {
            diags.push(Diagnostic {
                span: v.span,
                message: format!("thread-local `{}` may not carry mover clauses", v.name),
            });
        }
        for c in &v.clauses {
            if matches!(c.effect, Effect::Y | Effect::E) {
                diags.push(Diagnostic {
                    span: c.span,
                    message: "clause effect must be one of B, R, L, N".into(),
                });
            }
            for (name, _, sp) in {
                let mut vs = Vec::new();
                expr_vars(&c.condition, &mut vs);
                vs
            } {
                if p.var(name).is_none() {
                    diags.push(Diagnostic {
                        span: sp,
                        message: format!("clause condition references undeclared `{}`", name),
                    });
                }
            }
        }
    }
    let mut fn_seen = std::collections::HashSet::new();
    for f in &p.fns {
        if !fn_seen.insert(f.name.clone()) {
            diags.push(Diagnostic {
                span: f.span,
                message: format!("duplicate function declaration `{}`", f.name),
            });
        }
    }
    if p.threads.is_empty() {
        diags.push(Diagnostic { span: Span::default(), message: "program has no threads".into() });
    }
    for (name, _, sp) in &p.init {
        match p.var(name) {
            None => diags.push(Diagnostic {
                span: *sp,
                message: format!("init assigns undeclared `{}`", name),
            }),
            Some(v) if v.is_local => diags.push(Diagnostic {
                span: *sp,
                message: format!("init may only assign globals, `{}` is thread-local", name),
            }),
            _ => {}
        }
    }
    for (name, _, sp) in {
        let mut vs = Vec::new();
        expr_vars(&p.relies, &mut vs);
        expr_vars(&p.guarantees, &mut vs);
        vs
    } {
        match p.var(name) {
            None => diags.push(Diagnostic {
                span: sp,
                message: format!("program rely/guarantee references undeclared `{}`", name),
            }),
            Some(v) if v.is_local => diags.push(Diagnostic {
                span: sp,
                message: format!(
                    "program rely/guarantee may reference only globals, `{}` is thread-local",
                    name
                ),
            }),
            _ => {}
        }
    }

    for_each_stmt(p, |s| check_stmt_shape(p, s, &mut diags));
    for f in &p.fns {
        let mut vs = Vec::new();
        match &f.spec {
            FnSpec::Atomic { requires, ensures, .. } => {
                expr_vars(requires, &mut vs);
                expr_vars(ensures, &mut vs);
            }
            FnSpec::NonAtomic { relies, guarantees, requires, ensures } => {
                let mut rg = Vec::new();
                expr_vars(relies, &mut rg);
                expr_vars(guarantees, &mut rg);
                for (name, _, sp) in &rg {
                    if matches!(p.var(name), Some(v) if v.is_local) {
                        diags.push(Diagnostic {
                            span: *sp,
                            message: format!(
                                "rely/guarantee may reference only globals, `{}` is thread-local",
                                name
                            ),
                        });
                    }
                }
                vs.extend(rg);
                expr_vars(requires, &mut vs);
                expr_vars(ensures, &mut vs);
            }
        }
        for (name, _, sp) in vs {
            if p.var(name).is_none() {
                diags.push(Diagnostic {
                    span: sp,
                    message: format!("specification references undeclared `{}`", name),
                });
            }
        }
    }
    diags
}

fn check_expr_refs(p: &Program, e: &Expr, diags: &mut Vec<Diagnostic>) {
    let mut vs = Vec::new();
    expr_vars(e, &mut vs);
    for (name, _, sp) in vs {
        if p.var(name).is_none() {
            diags.push(Diagnostic {
                span: sp,
                message: format!("reference to undeclared variable `{}`", name),
            });
        }
    }
}

fn locals_only(p: &Program, e: &Expr) -> bool {
    expr_globals(p, e).is_empty()
}

fn check_stmt_shape(p: &Program, s: &Stmt, diags: &mut Vec<Diagnostic>) {
    match &s.kind {
        StmtKind::Assign { target, target_span, expr } => {
            check_expr_refs(p, expr, diags);
            match p.var(target) {
                None => diags.push(Diagnostic {
                    span: *target_span,
                    message: format!("assignment to undeclared `{}`", target),
                }),
                Some(v) if !v.is_local => {
                    // A global write may read only locals and constants.
                    if !locals_only(p, expr) {
                        diags.push(Diagnostic {
                            span: s.span,
                            message: format!(
                                "multi-global action: write to `{}` reads globals {:?}",
                                target,
                                expr_globals(p, expr)
                            ),
                        });
                    }
                }
                Some(_) => {
                    // A local write may read at most one global.
                    let gs = expr_globals(p, expr);
                    if gs.len() > 1 {
                        diags.push(Diagnostic {
                            span: s.span,
                            message: format!("multi-global action: reads globals {:?}", gs),
                        });
                    }
                }
            }
        }
        StmtKind::UnstableRead { local, global, span2 } => {
            match p.var(local) {
                None => diags.push(Diagnostic {
                    span: s.span,
                    message: format!("unstable read into undeclared `{}`", local),
                }),
                Some(v) if !v.is_local => diags.push(Diagnostic {
                    span: s.span,
                    message: format!("unstable read target `{}` must be thread-local", local),
                }),
                _ => {}
            }
            match p.var(global) {
                None => diags.push(Diagnostic {
                    span: *span2,
                    message: format!("unstable read of undeclared `{}`", global),
                }),
                Some(v) if v.is_local => diags.push(Diagnostic {
                    span: *span2,
                    message: format!("unstable read source `{}` must be global", global),
                }),
                _ => {}
            }
        }
        StmtKind::Acquire(m) | StmtKind::Release(m) => match p.var(m) {
            None => diags.push(Diagnostic {
                span: s.span,
                message: format!("lock operation on undeclared `{}`", m),
            }),
            Some(v) if v.domain != DomainKind::Lock || v.is_local => diags.push(Diagnostic {
                span: s.span,
                message: format!("`{}` is not a global lock", m),
            }),
            _ => {}
        },
        StmtKind::Assert(f) => {
            check_expr_refs(p, f, diags);
            check_cond_shape(p, &Cond::Test(f.clone()), s.span, diags);
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => {
            check_cond_shape(p, cond, s.span, diags);
            if let StmtKind::While { invariant: Some(inv), .. } = &s.kind {
                check_expr_refs(p, inv, diags);
            }
        }
        StmtKind::Call(f) => {
            if p.func(f).is_none() {
                diags.push(Diagnostic {
                    span: s.span,
                    message: format!("call to undeclared function `{}`", f),
                });
            }
        }
        StmtKind::Skip | StmtKind::Wrong | StmtKind::Yield => {}
    }
}

fn check_cond_shape(p: &Program, cond: &Cond, span: Span, diags: &mut Vec<Diagnostic>) {
    match cond {
        Cond::Test(f) => {
            check_expr_refs(p, f, diags);
            let gs = expr_globals(p, f);
            if gs.len() > 1 {
                diags.push(Diagnostic {
                    span,
                    message: format!("multi-global action: test reads globals {:?}", gs),
                });
            }
        }
        Cond::Cas { var, var_span, expected, new, .. } => {
            match p.var(var) {
                None => diags.push(Diagnostic {
                    span: *var_span,
                    message: format!("cas on undeclared `{}`", var),
                }),
                Some(v) if v.is_local => diags.push(Diagnostic {
                    span: *var_span,
                    message: format!("cas target `{}` must be global", var),
                }),
                _ => {}
            }
            check_expr_refs(p, expected, diags);
            check_expr_refs(p, new, diags);
            for e in [expected, new] {
                if !locals_only(p, e) {
                    diags.push(Diagnostic {
                        span,
                        message: format!(
                            "multi-global action: cas argument reads globals {:?}",
                            expr_globals(p, e)
                        ),
                    });
                }
            }
        }
    }
}
