//! Concrete syntax for `.mvl` files.
//!
//! Line comments `//` and block comments `/* */` are skipped.  The negated
//! form `!cas(..)` in a condition is normalized by swapping the success and
//! failure actions of the pair.

use crate::ast::*;
use crate::effects::Effect;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Mover(Effect),
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Comma,
    Assign,
    UnstableAssign,
    EqEq,
    NotEq,
    Le,
    Ge,
    Lt,
    Gt,
    Plus,
    Minus,
    Star,
    Bang,
    AndAnd,
    OrOr,
    Implies,
    ColonColon,
    Eof,
}

#[derive(Debug, Clone)]
struct SpannedTok {
    tok: Tok,
    span: Span,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> (u32, u32) {
        (self.line, self.col)
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek2() == Some(b'/') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(b'/') if self.peek2() == Some(b'*') => {
                    let start = self.span_here();
                    self.bump();
                    self.bump();
                    loop {
                        match self.peek() {
                            Some(b'*') if self.peek2() == Some(b'/') => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            Some(_) => {
                                self.bump();
                            }
                            None => {
                                return Err(ParseError {
                                    span: start,
                                    message: "unterminated block comment".into(),
                                })
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn span_here(&self) -> Span {
        Span {
            start_line: self.line,
            start_col: self.col,
            end_line: self.line,
            end_col: self.col,
        }
    }

    fn tokenize(mut self) -> Result<Vec<SpannedTok>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let (sl, sc) = self.here();
            let mk = |t: Tok, me: &Lexer| SpannedTok {
                tok: t,
                span: Span { start_line: sl, start_col: sc, end_line: me.line, end_col: me.col },
            };
            let c = match self.peek() {
                None => {
                    out.push(SpannedTok { tok: Tok::Eof, span: self.span_here() });
                    return Ok(out);
                }
                Some(c) => c,
            };
            if c.is_ascii_alphabetic() || c == b'_' {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == b'_' {
                        s.push(c as char);
                        self.bump();
                    } else {
                        break;
                    }
                }
                // Mover keywords contain a hyphen.
                let mover = match s.as_str() {
                    "both" | "right" | "left" | "non"
                        if self.src[self.pos..].starts_with(b"-mover") =>
                    {
                        for _ in 0.."-mover".len() {
                            self.bump();
                        }
                        Some(match s.as_str() {
                            "both" => Effect::B,
                            "right" => Effect::R,
                            "left" => Effect::L,
                            _ => Effect::N,
                        })
                    }
                    _ => None,
                };
                let t = match mover {
                    Some(e) => Tok::Mover(e),
                    None => Tok::Ident(s),
                };
                out.push(mk(t, &self));
                continue;
            }
            if c.is_ascii_digit() {
                let mut n: i64 = 0;
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() {
                        n = n.saturating_mul(10).saturating_add((c - b'0') as i64);
                        self.bump();
                    } else {
                        break;
                    }
                }
                out.push(mk(Tok::Int(n), &self));
                continue;
            }
            self.bump();
            let t = match c {
                b'{' => Tok::LBrace,
                b'}' => Tok::RBrace,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b';' => Tok::Semi,
                b',' => Tok::Comma,
                b'+' => Tok::Plus,
                b'*' => Tok::Star,
                b'-' => Tok::Minus,
                b':' if self.peek() == Some(b':') => {
                    self.bump();
                    Tok::ColonColon
                }
                b'~' if self.peek() == Some(b'=') => {
                    self.bump();
                    Tok::UnstableAssign
                }
                b'=' if self.peek() == Some(b'=') => {
                    self.bump();
                    if self.peek() == Some(b'>') {
                        self.bump();
                        Tok::Implies
                    } else {
                        Tok::EqEq
                    }
                }
                b'=' => Tok::Assign,
                b'!' if self.peek() == Some(b'=') => {
                    self.bump();
                    Tok::NotEq
                }
                b'!' => Tok::Bang,
                b'<' if self.peek() == Some(b'=') => {
                    self.bump();
                    Tok::Le
                }
                b'<' => Tok::Lt,
                b'>' if self.peek() == Some(b'=') => {
                    self.bump();
                    Tok::Ge
                }
                b'>' => Tok::Gt,
                b'&' if self.peek() == Some(b'&') => {
                    self.bump();
                    Tok::AndAnd
                }
                b'|' if self.peek() == Some(b'|') => {
                    self.bump();
                    Tok::OrOr
                }
                other => {
                    return Err(ParseError {
                        span: Span {
                            start_line: sl,
                            start_col: sc,
                            end_line: self.line,
                            end_col: self.col,
                        },
                        message: format!("unexpected character `{}`", other as char),
                    })
                }
            };
            out.push(mk(t, &self));
        }
    }
}

pub struct Parser {
    toks: Vec<SpannedTok>,
    pos: usize,
    next_node: u32,
}

pub fn parse(text: &str) -> Result<Program, Vec<ParseError>> {
    if text.trim().is_empty() {
        return Err(vec![ParseError { span: Span::default(), message: "empty program".into() }]);
    }
    let toks = Lexer::new(text).tokenize().map_err(|e| vec![e])?;
    let mut p = Parser { toks, pos: 0, next_node: 0 };
    p.program().map_err(|e| vec![e])
}

impl Parser {
    fn cur(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn cur_span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { span: self.cur_span(), message: msg.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<Span, ParseError> {
        if *self.cur() == t {
            let sp = self.cur_span();
            self.bump();
            Ok(sp)
        } else {
            self.err(format!("expected {}, found {:?}", what, self.cur()))
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if let Tok::Ident(s) = self.cur() {
            if s == kw {
                self.bump();
                return true;
            }
        }
        false
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.cur(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Span, ParseError> {
        let sp = self.cur_span();
        if self.eat_kw(kw) {
            Ok(sp)
        } else {
            self.err(format!("expected `{}`, found {:?}", kw, self.cur()))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        match self.cur().clone() {
            Tok::Ident(s) => {
                let sp = self.cur_span();
                self.bump();
                Ok((s, sp))
            }
            _ => self.err(format!("expected {}, found {:?}", what, self.cur())),
        }
    }

    fn node(&mut self) -> NodeId {
        self.next_node += 1;
        NodeId(self.next_node - 1)
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut bits = DEFAULT_BITS;
        let mut list_depth = DEFAULT_LIST_DEPTH;
        if self.at_kw("bits") {
            self.bump();
            bits = self.int_literal()? as u32;
            self.expect(Tok::Semi, "`;`")?;
        }
        if self.at_kw("listdepth") {
            self.bump();
            list_depth = self.int_literal()? as u32;
            self.expect(Tok::Semi, "`;`")?;
        }
        let mut vars = Vec::new();
        let mut fns = Vec::new();
        while !self.at_kw("init") {
            if matches!(self.cur(), Tok::Eof) {
                return self.err("expected declaration or `init` block");
            }
            self.decl(&mut vars, &mut fns)?;
        }
        self.expect_kw("init")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut init = Vec::new();
        while !matches!(self.cur(), Tok::RBrace) {
            let (name, sp) = self.ident("variable name")?;
            self.expect(Tok::Assign, "`=`")?;
            let e = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
            init.push((name, e, sp));
        }
        self.expect(Tok::RBrace, "`}`")?;
        let mut relies = Expr::BoolLit(true);
        let mut guarantees = Expr::BoolLit(true);
        if self.at_kw("relies") {
            self.bump();
            relies = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
        }
        if self.at_kw("guarantees") {
            self.bump();
            guarantees = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
        }
        let mut threads = Vec::new();
        while self.at_kw("thread") {
            self.bump();
            threads.push(self.block()?);
        }
        if threads.is_empty() {
            return self.err("expected at least one `thread` block");
        }
        if !matches!(self.cur(), Tok::Eof) {
            return self.err("unexpected trailing input");
        }
        Ok(Program { bits, list_depth, vars, fns, init, relies, guarantees, threads })
    }

    fn int_literal(&mut self) -> Result<i64, ParseError> {
        match self.cur().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.err("expected integer literal"),
        }
    }

    fn decl(&mut self, vars: &mut Vec<VarDecl>, fns: &mut Vec<FnDecl>) -> Result<(), ParseError> {
        let start = self.cur_span();
        if self.eat_kw("local") {
            let domain = self.domain()?;
            let (name, _) = self.ident("variable name")?;
            self.expect(Tok::Semi, "`;`")?;
            vars.push(VarDecl {
                name,
                domain,
                is_local: true,
                clauses: Vec::new(),
                span: start.join(self.prev_span()),
            });
            return Ok(());
        }
        if self.at_kw("int") || self.at_kw("lock") || self.at_kw("optional") || self.at_kw("list") {
            let domain = self.domain()?;
            let (name, _) = self.ident("variable name")?;
            let mut clauses = Vec::new();
            while !matches!(self.cur(), Tok::Semi) {
                self.clause(&mut clauses)?;
            }
            self.expect(Tok::Semi, "`;`")?;
            vars.push(VarDecl {
                name,
                domain,
                is_local: false,
                clauses,
                span: start.join(self.prev_span()),
            });
            return Ok(());
        }
        fns.push(self.fndecl()?);
        Ok(())
    }

    fn domain(&mut self) -> Result<DomainKind, ParseError> {
        if self.eat_kw("int") {
            Ok(DomainKind::Int)
        } else if self.eat_kw("lock") {
            Ok(DomainKind::Lock)
        } else if self.eat_kw("optional") {
            self.expect_kw("int")?;
            Ok(DomainKind::OptInt)
        } else if self.eat_kw("list") {
            self.expect_kw("int")?;
            Ok(DomainKind::ListInt)
        } else {
            self.err("expected a domain (`int`, `lock`, `optional int`, `list int`)")
        }
    }

    fn clause(&mut self, out: &mut Vec<MoverClause>) -> Result<(), ParseError> {
        let start = self.cur_span();
        let kind = if self.eat_kw("read") {
            Some(ClauseKind::Read)
        } else if self.eat_kw("write") {
            Some(ClauseKind::Write)
        } else {
            None
        };
        let effect = match self.cur().clone() {
            Tok::Mover(e) => {
                self.bump();
                e
            }
            _ => return self.err("expected a mover keyword"),
        };
        let condition = if self.eat_kw("if") { self.expr()? } else { Expr::BoolLit(true) };
        let span = start.join(self.prev_span());
        match kind {
            Some(k) => out.push(MoverClause { kind: k, effect, condition, from_combined: false, span }),
            None => {
                // A bare clause abbreviates identical read and write cases.
                out.push(MoverClause {
                    kind: ClauseKind::Read,
                    effect,
                    condition: condition.clone(),
                    from_combined: true,
                    span,
                });
                out.push(MoverClause {
                    kind: ClauseKind::Write,
                    effect,
                    condition,
                    from_combined: true,
                    span,
                });
            }
        }
        Ok(())
    }

    fn fndecl(&mut self) -> Result<FnDecl, ParseError> {
        let start = self.cur_span();
        let spec = if self.eat_kw("atomic") {
            let (effect, effect_elided) = match self.cur().clone() {
                Tok::Mover(e) => {
                    self.bump();
                    (e, false)
                }
                _ => (Effect::N, true),
            };
            self.expect_kw("requires")?;
            let requires = self.expr()?;
            self.expect_kw("ensures")?;
            let ensures = self.expr()?;
            FnSpec::Atomic { effect, effect_elided, requires, ensures }
        } else if self.at_kw("relies") {
            self.bump();
            let relies = self.expr()?;
            self.expect_kw("guarantees")?;
            let guarantees = self.expr()?;
            self.expect_kw("requires")?;
            let requires = self.expr()?;
            self.expect_kw("ensures")?;
            let ensures = self.expr()?;
            FnSpec::NonAtomic { relies, guarantees, requires, ensures }
        } else {
            return self.err("expected a declaration");
        };
        let (name, _) = self.ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        self.expect(Tok::RParen, "`)`")?;
        let body = self.block()?;
        Ok(FnDecl { name, spec, body, span: start.join(self.prev_span()) })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        while !matches!(self.cur(), Tok::RBrace) {
            out.push(self.stmt()?);
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let start = self.cur_span();
        let id = self.node();
        let mk = |kind: StmtKind, me: &Parser| Stmt { id, span: start.join(me.prev_span()), kind };
        if self.eat_kw("skip") {
            self.expect(Tok::Semi, "`;`")?;
            return Ok(mk(StmtKind::Skip, self));
        }
        if self.eat_kw("wrong") {
            self.expect(Tok::Semi, "`;`")?;
            return Ok(mk(StmtKind::Wrong, self));
        }
        if self.eat_kw("yield") {
            self.expect(Tok::Semi, "`;`")?;
            return Ok(mk(StmtKind::Yield, self));
        }
        if self.eat_kw("acquire") {
            self.expect(Tok::LParen, "`(`")?;
            let (m, _) = self.ident("lock name")?;
            self.expect(Tok::RParen, "`)`")?;
            self.expect(Tok::Semi, "`;`")?;
            return Ok(mk(StmtKind::Acquire(m), self));
        }
        if self.eat_kw("release") {
            self.expect(Tok::LParen, "`(`")?;
            let (m, _) = self.ident("lock name")?;
            self.expect(Tok::RParen, "`)`")?;
            self.expect(Tok::Semi, "`;`")?;
            return Ok(mk(StmtKind::Release(m), self));
        }
        if self.eat_kw("assert") {
            let f = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
            return Ok(mk(StmtKind::Assert(f), self));
        }
        if self.eat_kw("if") {
            self.expect(Tok::LParen, "`(`")?;
            let cond = self.cond()?;
            self.expect(Tok::RParen, "`)`")?;
            let then_branch = self.block()?;
            self.expect_kw("else")?;
            let else_branch = self.block()?;
            return Ok(mk(StmtKind::If { cond, then_branch, else_branch }, self));
        }
        if self.eat_kw("while") {
            self.expect(Tok::LParen, "`(`")?;
            let cond = self.cond()?;
            self.expect(Tok::RParen, "`)`")?;
            let invariant = if self.eat_kw("invariant") { Some(self.expr()?) } else { None };
            let body = self.block()?;
            return Ok(mk(StmtKind::While { cond, invariant, body }, self));
        }
        // IDENT-led statements: assignment, unstable read, call.
        let (name, name_span) = self.ident("statement")?;
        match self.cur().clone() {
            Tok::Assign => {
                self.bump();
                let expr = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(mk(StmtKind::Assign { target: name, target_span: name_span, expr }, self))
            }
            Tok::UnstableAssign => {
                self.bump();
                let (g, gsp) = self.ident("variable name")?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(mk(StmtKind::UnstableRead { local: name, global: g, span2: gsp }, self))
            }
            Tok::LParen => {
                self.bump();
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(mk(StmtKind::Call(name), self))
            }
            _ => self.err("expected `=`, `~=`, or `(` after identifier"),
        }
    }

    fn cond(&mut self) -> Result<Cond, ParseError> {
        let negated = if matches!(self.cur(), Tok::Bang)
            && matches!(&self.toks[self.pos + 1].tok, Tok::Ident(s) if s == "cas")
        {
            self.bump();
            true
        } else {
            false
        };
        if self.at_kw("cas") {
            self.bump();
            self.expect(Tok::LParen, "`(`")?;
            let (var, var_span) = self.ident("variable name")?;
            self.expect(Tok::Comma, "`,`")?;
            let expected = self.expr()?;
            self.expect(Tok::Comma, "`,`")?;
            let new = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Cond::Cas { var, var_span, expected, new, negated });
        }
        Ok(Cond::Test(self.expr()?))
    }

    // Expression precedence, loosest first:
    //   ==>  ||  &&  comparisons  ::  + -  *  unary  primary
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.or_expr()?;
        if matches!(self.cur(), Tok::Implies) {
            self.bump();
            let rhs = self.expr()?; // right-assoc
            return Ok(Expr::Binary(BinOp::Implies, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while matches!(self.cur(), Tok::OrOr) {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.cmp_expr()?;
        while matches!(self.cur(), Tok::AndAnd) {
            self.bump();
            let rhs = self.cmp_expr()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.cons_expr()?;
        let op = match self.cur() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.cons_expr()?;
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn cons_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        if matches!(self.cur(), Tok::ColonColon) {
            self.bump();
            let rhs = self.cons_expr()?; // right-assoc
            return Ok(Expr::Binary(BinOp::Cons, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.cur() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary_expr()?;
        while matches!(self.cur(), Tok::Star) {
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        match self.cur() {
            Tok::Bang => {
                self.bump();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary_expr()?)))
            }
            Tok::Minus => {
                self.bump();
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary_expr()?)))
            }
            _ => self.primary(),
        }
    }

    fn unary_call(&mut self, op: UnOp) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let e = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(Expr::Unary(op, Box::new(e)))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let span = self.cur_span();
        match self.cur().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::IntLit(n))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(s) => match s.as_str() {
                "true" => {
                    self.bump();
                    Ok(Expr::BoolLit(true))
                }
                "false" => {
                    self.bump();
                    Ok(Expr::BoolLit(false))
                }
                "None" => {
                    self.bump();
                    Ok(Expr::NoneLit)
                }
                "Nil" => {
                    self.bump();
                    Ok(Expr::NilLit)
                }
                "tid" => {
                    self.bump();
                    Ok(Expr::Tid)
                }
                "even" => {
                    self.bump();
                    self.unary_call(UnOp::Even)
                }
                "head" => {
                    self.bump();
                    self.unary_call(UnOp::Head)
                }
                "tail" => {
                    self.bump();
                    self.unary_call(UnOp::Tail)
                }
                "old" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(`")?;
                    let (name, nsp) = self.ident("variable name")?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Expr::Old(name, span.join(nsp)))
                }
                _ => {
                    self.bump();
                    Ok(Expr::Var(s, span))
                }
            },
            other => self.err(format!("expected expression, found {:?}", other)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::printer;

    const SAMPLE: &str = r#"
bits 4;
listdepth 2;

lock m;
int x
    both-mover if m == tid
    read right-mover
    write non-mover if old(x) == x;
optional int buf;
list int top;
local int r;
local optional int o;
local list int t;

atomic right-mover requires true ensures x == old(x) + 1
bump() {
    acquire(m);
    r = x;
    x = r + 1;
    release(m);
}

relies even(x) guarantees even(x)
requires true ensures r >= 0
work() {
    yield;
    if (x == 0) {
        skip;
    } else {
        wrong;
    }
    while (!cas(buf, None, r)) invariant true {
        skip;
    }
    o ~= buf;
    assert r * 2 - -1 > 0 ==> even(r) && (true || false);
    t = 1 :: 2 :: Nil;
    r = head(t) + 1;
    bump();
}

init {
    x = 0;
    top = 1 :: 2 :: Nil;
}
relies x >= 0;
guarantees x >= 0;

thread {
    yield;
    work();
}
"#;

    #[test]
    fn parses_sample() {
        let p = parse(SAMPLE).expect("sample should parse");
        assert_eq!(p.bits, 4);
        assert_eq!(p.list_depth, 2);
        assert_eq!(p.vars.len(), 7);
        assert_eq!(p.fns.len(), 2);
        assert_eq!(p.threads.len(), 1);
        // Combined clause expanded into a read and a write case.
        let x = p.var("x").unwrap();
        assert_eq!(x.clauses.len(), 4);
        assert!(x.clauses[0].from_combined && x.clauses[1].from_combined);
        assert_eq!(x.clauses[0].kind, ClauseKind::Read);
        assert_eq!(x.clauses[1].kind, ClauseKind::Write);
        assert_eq!(x.clauses[0].condition, x.clauses[1].condition);
        assert_eq!(x.clauses[2].kind, ClauseKind::Read);
        assert_eq!(x.clauses[2].effect, Effect::R);
        assert_eq!(x.clauses[2].condition, Expr::BoolLit(true));
    }

    #[test]
    fn negated_cas() {
        let p = parse(SAMPLE).unwrap();
        let work = p.func("work").unwrap();
        let w = work
            .body
            .iter()
            .find_map(|s| match &s.kind {
                StmtKind::While { cond, .. } => Some(cond.clone()),
                _ => None,
            })
            .unwrap();
        match w {
            Cond::Cas { var, negated, .. } => {
                assert_eq!(var, "buf");
                assert!(negated);
            }
            other => panic!("expected cas condition, got {:?}", other),
        }
    }

    #[test]
    fn cons_is_right_associative() {
        let p = parse(SAMPLE).unwrap();
        let (_, e, _) = &p.init[1];
        match e {
            Expr::Binary(BinOp::Cons, a, b) => {
                assert_eq!(**a, Expr::IntLit(1));
                assert!(matches!(**b, Expr::Binary(BinOp::Cons, ..)));
            }
            other => panic!("expected cons, got {:?}", other),
        }
    }

    #[test]
    fn print_parse_roundtrip() {
        let p = parse(SAMPLE).unwrap();
        let text = printer::print(&p);
        let q = parse(&text).unwrap_or_else(|e| panic!("reparse failed: {:?}\n{}", e, text));
        assert_eq!(printer::strip(&p), printer::strip(&q), "printed form:\n{}", text);
        // Printing is a fixpoint after one round.
        assert_eq!(text, printer::print(&q));
    }

    #[test]
    fn defaults_when_header_elided() {
        let p = parse("int x; init { } thread { yield; skip; }").unwrap();
        assert_eq!(p.bits, crate::ast::DEFAULT_BITS);
        assert_eq!(p.list_depth, crate::ast::DEFAULT_LIST_DEPTH);
        assert_eq!(p.relies, Expr::BoolLit(true));
        assert_eq!(p.guarantees, Expr::BoolLit(true));
    }

    #[test]
    fn comments_are_skipped() {
        let p = parse("// hi\nint x; /* multi\nline */ init { x = 3; } thread { yield; }").unwrap();
        assert_eq!(p.init.len(), 1);
    }

    #[test]
    fn errors_have_positions() {
        let e = parse("int x init { }").unwrap_err();
        assert_eq!(e[0].span.start_line, 1);
        assert!(parse("").is_err());
        assert!(parse("int x; init { }").is_err(), "missing thread");
        assert!(parse("int x; init { } thread { x = ; }").is_err());
    }

    #[test]
    fn mover_keywords_lex_with_hyphen() {
        let p = parse("int a both-mover; int b right-mover; int c left-mover; int d non-mover; init { } thread { yield; }").unwrap();
        assert_eq!(p.var("a").unwrap().clauses[0].effect, Effect::B);
        assert_eq!(p.var("b").unwrap().clauses[0].effect, Effect::R);
        assert_eq!(p.var("c").unwrap().clauses[0].effect, Effect::L);
        assert_eq!(p.var("d").unwrap().clauses[0].effect, Effect::N);
    }
}
