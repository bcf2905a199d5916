//! Finite value domains, store layouts, and expression evaluation.
//!
//! Every variable ranges over a small finite domain whose values are encoded
//! as dense `u16` codes, so a store is a flat code vector and a set of stores
//! can be indexed by a mixed-radix integer.

use crate::ast::*;

/// A runtime value.  `NoneV` is the empty optional; lists hold ints only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Val {
    Int(i64),
    Bool(bool),
    NoneV,
    List(Vec<i64>),
}

/// A variable's finite domain, with a dense code assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Domain {
    pub kind: DomainKind,
    pub bits: u32,
    pub depth: u32,
    pub n_threads: u32,
}

impl Domain {
    pub fn int_count(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn int_min(&self) -> i64 {
        -(1i64 << (self.bits - 1))
    }

    pub fn int_max(&self) -> i64 {
        (1i64 << (self.bits - 1)) - 1
    }

    /// Wraps an arbitrary integer into the signed window.
    pub fn wrap(&self, v: i64) -> i64 {
        let w = self.int_count() as i64;
        (v - self.int_min()).rem_euclid(w) + self.int_min()
    }

    pub fn size(&self) -> u64 {
        match self.kind {
            DomainKind::Int => self.int_count(),
            DomainKind::Lock => self.n_threads as u64 + 1,
            DomainKind::OptInt => self.int_count() + 1,
            DomainKind::ListInt => {
                // Sum of k^i for list lengths i = 0..=depth.
                let k = self.int_count();
                let mut total = 0u64;
                let mut pow = 1u64;
                for _ in 0..=self.depth {
                    total += pow;
                    pow *= k;
                }
                total
            }
        }
    }

    fn int_code(&self, v: i64) -> u16 {
        (v - self.int_min()) as u16
    }

    pub fn decode(&self, code: u16) -> Val {
        match self.kind {
            DomainKind::Int => Val::Int(self.int_min() + code as i64),
            DomainKind::Lock => Val::Int(code as i64),
            DomainKind::OptInt => {
                if code == 0 {
                    Val::NoneV
                } else {
                    Val::Int(self.int_min() + (code - 1) as i64)
                }
            }
            DomainKind::ListInt => {
                let k = self.int_count();
                let mut code = code as u64;
                let mut len = 0u32;
                let mut pow = 1u64;
                while code >= pow {
                    code -= pow;
                    pow *= k;
                    len += 1;
                }
                // `code` is now the mixed-radix index of a length-`len` list.
                let mut elems = vec![0i64; len as usize];
                for slot in elems.iter_mut().rev() {
                    *slot = self.int_min() + (code % k) as i64;
                    code /= k;
                }
                Val::List(elems)
            }
        }
    }

    /// Encodes a value if it lies in the domain.
    pub fn encode(&self, v: &Val) -> Option<u16> {
        match (self.kind, v) {
            (DomainKind::Int, Val::Int(n)) => {
                if *n >= self.int_min() && *n <= self.int_max() {
                    Some(self.int_code(*n))
                } else {
                    None
                }
            }
            (DomainKind::Lock, Val::Int(n)) => {
                if *n >= 0 && *n <= self.n_threads as i64 {
                    Some(*n as u16)
                } else {
                    None
                }
            }
            (DomainKind::OptInt, Val::NoneV) => Some(0),
            (DomainKind::OptInt, Val::Int(n)) => {
                if *n >= self.int_min() && *n <= self.int_max() {
                    Some(1 + self.int_code(*n))
                } else {
                    None
                }
            }
            (DomainKind::ListInt, Val::List(elems)) => {
                if elems.len() as u32 > self.depth {
                    return None;
                }
                let k = self.int_count();
                let mut offset = 0u64;
                let mut pow = 1u64;
                for _ in 0..elems.len() {
                    offset += pow;
                    pow *= k;
                }
                let mut idx = 0u64;
                for e in elems {
                    if *e < self.int_min() || *e > self.int_max() {
                        return None;
                    }
                    idx = idx * k + self.int_code(*e) as u64;
                }
                Some((offset + idx) as u16)
            }
            _ => None,
        }
    }

    pub fn default_val(&self) -> Val {
        match self.kind {
            DomainKind::Int | DomainKind::Lock => Val::Int(0),
            DomainKind::OptInt => Val::NoneV,
            DomainKind::ListInt => Val::List(Vec::new()),
        }
    }

    pub fn ty(&self) -> Ty {
        match self.kind {
            DomainKind::Int | DomainKind::Lock => Ty::Int,
            DomainKind::OptInt => Ty::OptInt,
            DomainKind::ListInt => Ty::ListInt,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub domain: Domain,
    pub is_local: bool,
}

/// Resolved declaration table shared by the checker and the explorer.
#[derive(Debug, Clone)]
pub struct World {
    pub bits: u32,
    pub list_depth: u32,
    pub n_threads: u32,
    pub globals: Vec<VarInfo>,
    /// Thread-local families; each thread owns one instance of each.
    pub locals: Vec<VarInfo>,
}

impl World {
    pub fn new(p: &Program) -> World {
        let n_threads = p.n_threads() as u32;
        let mk = |v: &VarDecl| VarInfo {
            name: v.name.clone(),
            domain: Domain { kind: v.domain, bits: p.bits, depth: p.list_depth, n_threads },
            is_local: v.is_local,
        };
        World {
            bits: p.bits,
            list_depth: p.list_depth,
            n_threads,
            globals: p.vars.iter().filter(|v| !v.is_local).map(mk).collect(),
            locals: p.vars.iter().filter(|v| v.is_local).map(mk).collect(),
        }
    }

    pub fn resolve(&self, name: &str) -> Option<VarId> {
        if let Some(i) = self.globals.iter().position(|v| v.name == name) {
            return Some(VarId::Global(i));
        }
        self.locals.iter().position(|v| v.name == name).map(VarId::Local)
    }

    pub fn info(&self, id: VarId) -> &VarInfo {
        match id {
            VarId::Global(i) => &self.globals[i],
            VarId::Local(i) => &self.locals[i],
        }
    }

    /// Index of a variable in the projected (single-thread) store layout:
    /// globals first, then one instance of each local family.
    pub fn proj_index(&self, id: VarId) -> usize {
        match id {
            VarId::Global(i) => i,
            VarId::Local(i) => self.globals.len() + i,
        }
    }

    pub fn proj_len(&self) -> usize {
        self.globals.len() + self.locals.len()
    }

    pub fn proj_domain(&self, idx: usize) -> &Domain {
        if idx < self.globals.len() {
            &self.globals[idx].domain
        } else {
            &self.locals[idx - self.globals.len()].domain
        }
    }

    /// Index of a variable in the full-store layout used by the explorer:
    /// globals, then thread 1's locals, thread 2's locals, ...
    pub fn full_index(&self, id: VarId, tid: u32) -> usize {
        match id {
            VarId::Global(i) => i,
            VarId::Local(i) => {
                self.globals.len() + (tid as usize - 1) * self.locals.len() + i
            }
        }
    }

    pub fn full_len(&self) -> usize {
        self.globals.len() + self.n_threads as usize * self.locals.len()
    }

    pub fn full_domain(&self, idx: usize) -> &Domain {
        if idx < self.globals.len() {
            &self.globals[idx].domain
        } else {
            &self.locals[(idx - self.globals.len()) % self.locals.len()].domain
        }
    }

    /// Initial projected store: defaults overridden by `init` assignments.
    pub fn init_proj_store(&self, p: &Program) -> Result<Vec<u16>, Diagnostic> {
        let mut store = vec![0u16; self.proj_len()];
        for (i, d) in (0..self.proj_len()).map(|i| (i, self.proj_domain(i))) {
            store[i] = d.encode(&d.default_val()).unwrap();
        }
        for (name, e, sp) in &p.init {
            let id = self.resolve(name).ok_or_else(|| Diagnostic {
                span: *sp,
                message: format!("init assigns undeclared `{}`", name),
            })?;
            let v = const_eval(self, e).ok_or_else(|| Diagnostic {
                span: *sp,
                message: format!("init value for `{}` is not a constant", name),
            })?;
            let code = self.info(id).domain.encode(&v).ok_or_else(|| Diagnostic {
                span: *sp,
                message: format!("init value for `{}` is outside its domain", name),
            })?;
            store[self.proj_index(id)] = code;
        }
        Ok(store)
    }

    /// Initial full store for the explorer (every thread's locals share the
    /// same defaults; `init` touches globals only).
    pub fn init_full_store(&self, p: &Program) -> Result<Vec<u16>, Diagnostic> {
        let proj = self.init_proj_store(p)?;
        let mut store = vec![0u16; self.full_len()];
        store[..self.globals.len()].copy_from_slice(&proj[..self.globals.len()]);
        for t in 1..=self.n_threads {
            for (i, l) in self.locals.iter().enumerate() {
                store[self.full_index(VarId::Local(i), t)] =
                    l.domain.encode(&l.domain.default_val()).unwrap();
            }
        }
        Ok(store)
    }
}

impl World {
    fn fmt_val(v: &Val) -> String {
        match v {
            Val::Int(n) => n.to_string(),
            Val::Bool(b) => b.to_string(),
            Val::NoneV => "None".into(),
            Val::List(l) => {
                let mut s = String::new();
                for e in l {
                    s.push_str(&e.to_string());
                    s.push_str("::");
                }
                s.push_str("Nil");
                s
            }
        }
    }

    /// Human-readable dump of a projected store.
    pub fn describe_proj(&self, store: &[u16]) -> String {
        let mut parts = Vec::new();
        for (i, v) in self.globals.iter().chain(&self.locals).enumerate() {
            parts.push(format!("{}={}", v.name, Self::fmt_val(&v.domain.decode(store[i]))));
        }
        parts.join(" ")
    }

    /// Human-readable dump of a full store (locals tagged with their thread).
    pub fn describe_full(&self, store: &[u16]) -> String {
        let mut parts = Vec::new();
        for (i, v) in self.globals.iter().enumerate() {
            parts.push(format!("{}={}", v.name, Self::fmt_val(&v.domain.decode(store[i]))));
        }
        for t in 1..=self.n_threads {
            for (i, v) in self.locals.iter().enumerate() {
                let idx = self.full_index(VarId::Local(i), t);
                parts.push(format!("{}@{}={}", v.name, t, Self::fmt_val(&v.domain.decode(store[idx]))));
            }
        }
        parts.join(" ")
    }
}

/// Mixed-radix index for projected stores, used to key relation sets.
#[derive(Debug, Clone)]
pub struct ProjSpace {
    pub sizes: Vec<u64>,
    pub radix: Vec<u64>,
    pub size: u64,
}

impl ProjSpace {
    pub fn new(world: &World) -> ProjSpace {
        let sizes: Vec<u64> = (0..world.proj_len()).map(|i| world.proj_domain(i).size()).collect();
        let mut radix = vec![1u64; sizes.len()];
        // Last variable varies fastest.
        for i in (0..sizes.len()).rev() {
            if i + 1 < sizes.len() {
                radix[i] = radix[i + 1] * sizes[i + 1];
            }
        }
        let size = sizes.iter().product::<u64>().max(1);
        ProjSpace { sizes, radix, size }
    }

    pub fn encode(&self, store: &[u16]) -> u64 {
        store.iter().zip(&self.radix).map(|(c, r)| *c as u64 * r).sum()
    }

    pub fn decode(&self, mut idx: u64, out: &mut [u16]) {
        for i in 0..self.sizes.len() {
            out[i] = (idx / self.radix[i]) as u16;
            idx %= self.radix[i];
        }
    }

    pub fn decode_vec(&self, idx: u64) -> Vec<u16> {
        let mut v = vec![0u16; self.sizes.len()];
        self.decode(idx, &mut v);
        v
    }
}

/// Evaluates an expression containing no variables, `tid`, or `old(..)`.
pub fn const_eval(world: &World, e: &Expr) -> Option<Val> {
    eval(world, e, 0, &|_, _| None)
}

/// Strict evaluation: `None` means the expression is undefined here (partial
/// operation, out-of-domain list, or unresolvable variable).
///
/// `lookup(name, is_old)` supplies variable values; `tid` supplies `tid`.
pub fn eval(
    world: &World,
    e: &Expr,
    tid: u32,
    lookup: &dyn Fn(&str, bool) -> Option<Val>,
) -> Option<Val> {
    let wrap = |n: i64| {
        let d = Domain {
            kind: DomainKind::Int,
            bits: world.bits,
            depth: world.list_depth,
            n_threads: world.n_threads,
        };
        Val::Int(d.wrap(n))
    };
    match e {
        Expr::IntLit(n) => Some(wrap(*n)),
        Expr::BoolLit(b) => Some(Val::Bool(*b)),
        Expr::NoneLit => Some(Val::NoneV),
        Expr::NilLit => Some(Val::List(Vec::new())),
        Expr::Tid => Some(Val::Int(tid as i64)),
        Expr::Var(n, _) => lookup(n, false),
        Expr::Old(n, _) => lookup(n, true),
        Expr::Unary(op, a) => {
            let av = eval(world, a, tid, lookup)?;
            match (op, av) {
                (UnOp::Not, Val::Bool(b)) => Some(Val::Bool(!b)),
                (UnOp::Neg, Val::Int(n)) => Some(wrap(-n)),
                (UnOp::Even, Val::Int(n)) => Some(Val::Bool(n.rem_euclid(2) == 0)),
                (UnOp::Head, Val::List(l)) => l.first().map(|n| Val::Int(*n)),
                (UnOp::Tail, Val::List(l)) => {
                    if l.is_empty() {
                        None
                    } else {
                        Some(Val::List(l[1..].to_vec()))
                    }
                }
                _ => None,
            }
        }
        Expr::Binary(op, a, b) => {
            let av = eval(world, a, tid, lookup)?;
            let bv = eval(world, b, tid, lookup)?;
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul => match (av, bv) {
                    (Val::Int(x), Val::Int(y)) => Some(wrap(match op {
                        BinOp::Add => x + y,
                        BinOp::Sub => x - y,
                        _ => x * y,
                    })),
                    _ => None,
                },
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => match (av, bv) {
                    (Val::Int(x), Val::Int(y)) => Some(Val::Bool(match op {
                        BinOp::Lt => x < y,
                        BinOp::Le => x <= y,
                        BinOp::Gt => x > y,
                        _ => x >= y,
                    })),
                    _ => None,
                },
                BinOp::Eq | BinOp::Ne => {
                    let eq = val_eq(&av, &bv)?;
                    Some(Val::Bool(if *op == BinOp::Eq { eq } else { !eq }))
                }
                BinOp::And | BinOp::Or | BinOp::Implies => match (av, bv) {
                    (Val::Bool(x), Val::Bool(y)) => Some(Val::Bool(match op {
                        BinOp::And => x && y,
                        BinOp::Or => x || y,
                        _ => !x || y,
                    })),
                    _ => None,
                },
                BinOp::Cons => match (av, bv) {
                    (Val::Int(x), Val::List(mut l)) => {
                        if l.len() as u32 >= world.list_depth {
                            // Pushing past the depth bound is undefined.
                            None
                        } else {
                            l.insert(0, x);
                            Some(Val::List(l))
                        }
                    }
                    _ => None,
                },
            }
        }
    }
}

/// Equality across compatible value shapes; comparing an optional against a
/// plain int is allowed, bools and lists compare structurally.
fn val_eq(a: &Val, b: &Val) -> Option<bool> {
    match (a, b) {
        (Val::Int(x), Val::Int(y)) => Some(x == y),
        (Val::NoneV, Val::NoneV) => Some(true),
        (Val::NoneV, Val::Int(_)) | (Val::Int(_), Val::NoneV) => Some(false),
        (Val::Bool(x), Val::Bool(y)) => Some(x == y),
        (Val::List(x), Val::List(y)) => Some(x == y),
        (Val::NoneV, Val::List(_)) | (Val::List(_), Val::NoneV) => None,
        _ => None,
    }
}

/// A formula holds iff it evaluates to `true`; undefined counts as false.
pub fn holds(
    world: &World,
    f: &Formula,
    tid: u32,
    lookup: &dyn Fn(&str, bool) -> Option<Val>,
) -> bool {
    matches!(eval(world, f, tid, lookup), Some(Val::Bool(true)))
}

/// Lookup over a projected store (one thread's view).
pub fn proj_lookup<'a>(
    world: &'a World,
    store: &'a [u16],
) -> impl Fn(&str, bool) -> Option<Val> + 'a {
    move |name, _| {
        let id = world.resolve(name)?;
        let idx = world.proj_index(id);
        Some(world.proj_domain(idx).decode(store[idx]))
    }
}

/// Lookup over pre/post projected stores; `old(x)` reads the pre store.
pub fn proj_lookup2<'a>(
    world: &'a World,
    pre: &'a [u16],
    post: &'a [u16],
) -> impl Fn(&str, bool) -> Option<Val> + 'a {
    move |name, is_old| {
        let id = world.resolve(name)?;
        let idx = world.proj_index(id);
        let store = if is_old { pre } else { post };
        Some(world.proj_domain(idx).decode(store[idx]))
    }
}

/// Lookup over a full store for a given thread.
pub fn full_lookup<'a>(
    world: &'a World,
    store: &'a [u16],
    tid: u32,
) -> impl Fn(&str, bool) -> Option<Val> + 'a {
    move |name, _| {
        let id = world.resolve(name)?;
        let idx = world.full_index(id, tid);
        Some(world.full_domain(idx).decode(store[idx]))
    }
}

/// Lookup over pre/post full stores for a given thread; `old(x)` reads pre.
pub fn full_lookup2<'a>(
    world: &'a World,
    pre: &'a [u16],
    post: &'a [u16],
    tid: u32,
) -> impl Fn(&str, bool) -> Option<Val> + 'a {
    move |name, is_old| {
        let id = world.resolve(name)?;
        let idx = world.full_index(id, tid);
        let store = if is_old { pre } else { post };
        Some(world.full_domain(idx).decode(store[idx]))
    }
}

/// Infers the type of an expression; `old(x)` has `x`'s type.  Optionals and
/// ints may be compared for equality; other mixes are rejected.
pub fn type_of(world: &World, e: &Expr) -> Result<Ty, Diagnostic> {
    let err = |sp: Span, msg: String| Err(Diagnostic { span: sp, message: msg });
    match e {
        Expr::IntLit(_) | Expr::Tid => Ok(Ty::Int),
        Expr::BoolLit(_) => Ok(Ty::Bool),
        Expr::NoneLit => Ok(Ty::OptInt),
        Expr::NilLit => Ok(Ty::ListInt),
        Expr::Var(n, sp) | Expr::Old(n, sp) => match world.resolve(n) {
            Some(id) => Ok(world.info(id).domain.ty()),
            None => err(*sp, format!("reference to undeclared variable `{}`", n)),
        },
        Expr::Unary(op, a) => {
            let at = type_of(world, a)?;
            let want = match op {
                UnOp::Not => Ty::Bool,
                UnOp::Neg | UnOp::Even => Ty::Int,
                UnOp::Head | UnOp::Tail => Ty::ListInt,
            };
            if at != want {
                return err(Span::default(), format!("operand of {:?} has type {:?}", op, at));
            }
            Ok(match op {
                UnOp::Not | UnOp::Even => Ty::Bool,
                UnOp::Neg => Ty::Int,
                UnOp::Head => Ty::Int,
                UnOp::Tail => Ty::ListInt,
            })
        }
        Expr::Binary(op, a, b) => {
            let at = type_of(world, a)?;
            let bt = type_of(world, b)?;
            let numeric = |t: Ty| t == Ty::Int;
            let optish = |t: Ty| t == Ty::Int || t == Ty::OptInt;
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul => {
                    if numeric(at) && numeric(bt) {
                        Ok(Ty::Int)
                    } else {
                        err(Span::default(), format!("arithmetic on {:?} and {:?}", at, bt))
                    }
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    if numeric(at) && numeric(bt) {
                        Ok(Ty::Bool)
                    } else {
                        err(Span::default(), format!("comparison of {:?} and {:?}", at, bt))
                    }
                }
                BinOp::Eq | BinOp::Ne => {
                    let ok = (optish(at) && optish(bt))
                        || (at == Ty::Bool && bt == Ty::Bool)
                        || (at == Ty::ListInt && bt == Ty::ListInt);
                    if ok {
                        Ok(Ty::Bool)
                    } else {
                        err(Span::default(), format!("equality between {:?} and {:?}", at, bt))
                    }
                }
                BinOp::And | BinOp::Or | BinOp::Implies => {
                    if at == Ty::Bool && bt == Ty::Bool {
                        Ok(Ty::Bool)
                    } else {
                        err(Span::default(), format!("boolean operator on {:?} and {:?}", at, bt))
                    }
                }
                BinOp::Cons => {
                    if at == Ty::Int && bt == Ty::ListInt {
                        Ok(Ty::ListInt)
                    } else {
                        err(Span::default(), format!("cons of {:?} onto {:?}", at, bt))
                    }
                }
            }
        }
    }
}

/// Whether a value of type `src` may be stored into a variable of type `dst`.
pub fn assignable(dst: Ty, src: Ty) -> bool {
    dst == src || (dst == Ty::OptInt && src == Ty::Int)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(bits: u32, depth: u32, n_threads: u32) -> World {
        World {
            bits,
            list_depth: depth,
            n_threads,
            globals: Vec::new(),
            locals: Vec::new(),
        }
    }

    fn dom(kind: DomainKind, bits: u32, depth: u32, n_threads: u32) -> Domain {
        Domain { kind, bits, depth, n_threads }
    }

    #[test]
    fn int_domain_window() {
        let d = dom(DomainKind::Int, 5, 3, 2);
        assert_eq!(d.size(), 32);
        assert_eq!(d.int_min(), -16);
        assert_eq!(d.int_max(), 15);
        assert_eq!(d.wrap(16), -16);
        assert_eq!(d.wrap(-17), 15);
        assert_eq!(d.wrap(15), 15);
        for c in 0..d.size() as u16 {
            assert_eq!(d.encode(&d.decode(c)), Some(c));
        }
    }

    #[test]
    fn lock_and_opt_domains() {
        let l = dom(DomainKind::Lock, 5, 3, 3);
        assert_eq!(l.size(), 4);
        assert_eq!(l.decode(0), Val::Int(0));
        assert_eq!(l.encode(&Val::Int(3)), Some(3));
        assert_eq!(l.encode(&Val::Int(4)), None);

        let o = dom(DomainKind::OptInt, 4, 3, 2);
        assert_eq!(o.size(), 17);
        assert_eq!(o.decode(0), Val::NoneV);
        for c in 0..o.size() as u16 {
            assert_eq!(o.encode(&o.decode(c)), Some(c));
        }
    }

    #[test]
    fn list_domain_roundtrip() {
        // bits=2, depth=3: 1 + 4 + 16 + 64 = 85 lists.
        let d = dom(DomainKind::ListInt, 2, 3, 2);
        assert_eq!(d.size(), 85);
        assert_eq!(d.decode(0), Val::List(vec![]));
        for c in 0..d.size() as u16 {
            assert_eq!(d.encode(&d.decode(c)), Some(c));
        }
        assert_eq!(d.encode(&Val::List(vec![0, 0, 0, 0])), None);
    }

    #[test]
    fn eval_arith_wraps() {
        let w = world(4, 3, 2);
        let e = Expr::Binary(
            BinOp::Add,
            Box::new(Expr::IntLit(7)),
            Box::new(Expr::IntLit(3)),
        );
        assert_eq!(eval(&w, &e, 1, &|_, _| None), Some(Val::Int(-6)));
    }

    #[test]
    fn eval_partial_ops() {
        let w = world(4, 2, 2);
        let nil = Expr::NilLit;
        assert_eq!(eval(&w, &Expr::Unary(UnOp::Head, Box::new(nil.clone())), 1, &|_, _| None), None);
        assert_eq!(eval(&w, &Expr::Unary(UnOp::Tail, Box::new(nil.clone())), 1, &|_, _| None), None);
        // Cons within the bound succeeds; past the bound it is undefined.
        let one = Expr::Binary(BinOp::Cons, Box::new(Expr::IntLit(1)), Box::new(nil.clone()));
        let two = Expr::Binary(BinOp::Cons, Box::new(Expr::IntLit(2)), Box::new(one.clone()));
        let three = Expr::Binary(BinOp::Cons, Box::new(Expr::IntLit(3)), Box::new(two.clone()));
        assert_eq!(eval(&w, &two, 1, &|_, _| None), Some(Val::List(vec![2, 1])));
        assert_eq!(eval(&w, &three, 1, &|_, _| None), None);
    }

    #[test]
    fn opt_int_equality() {
        let w = world(4, 3, 2);
        let e = Expr::Binary(BinOp::Eq, Box::new(Expr::NoneLit), Box::new(Expr::IntLit(0)));
        assert_eq!(eval(&w, &e, 1, &|_, _| None), Some(Val::Bool(false)));
        let e2 = Expr::Binary(BinOp::Eq, Box::new(Expr::NoneLit), Box::new(Expr::NoneLit));
        assert!(holds(&w, &e2, 1, &|_, _| None));
    }

    #[test]
    fn proj_space_roundtrip() {
        let w = World {
            bits: 3,
            list_depth: 3,
            n_threads: 2,
            globals: vec![
                VarInfo {
                    name: "x".into(),
                    domain: dom(DomainKind::Int, 3, 3, 2),
                    is_local: false,
                },
                VarInfo {
                    name: "m".into(),
                    domain: dom(DomainKind::Lock, 3, 3, 2),
                    is_local: false,
                },
            ],
            locals: vec![VarInfo {
                name: "r".into(),
                domain: dom(DomainKind::Int, 3, 3, 2),
                is_local: true,
            }],
        };
        let sp = ProjSpace::new(&w);
        assert_eq!(sp.size, 8 * 3 * 8);
        for idx in 0..sp.size {
            assert_eq!(sp.encode(&sp.decode_vec(idx)), idx);
        }
    }
}
