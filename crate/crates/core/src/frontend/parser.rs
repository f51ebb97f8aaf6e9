use std::collections::BTreeMap;

use num_traits::{One, Signed, ToPrimitive, Zero};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use crate::error::{Error, Result};
use crate::Rat;

/// Recursive-descent parser over a token vector.
///
/// Shared by program files, invariant files, certificates and derivations.
pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_label: Label,
    pub(crate) sites: BTreeMap<Label, Site>,
}

impl Parser {
    pub fn new(src: &str) -> Result<Self> {
        Ok(Parser { toks: tokenize(src)?, pos: 0, next_label: 1, sites: BTreeMap::new() })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        let t = &self.toks[self.pos];
        Err(Error::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    pub fn line(&self) -> usize {
        self.toks[self.pos].line
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, t: &Tok, what: &str) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", describe(self.peek())))
        }
    }

    pub fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(s)
            }
            t => self.error(format!("expected identifier, found {}", describe(&t))),
        }
    }

    /// Restarts label numbering (for standalone fragments).
    pub fn reset_labels(&mut self) {
        self.next_label = 1;
        self.sites.clear();
    }

    pub fn next_label(&self) -> Label {
        self.next_label
    }

    fn fresh_label(&mut self, kind: SiteKind, line: usize) -> Label {
        let l = self.next_label;
        self.next_label += 1;
        self.sites.insert(l, Site { kind, line });
        l
    }

    // ---- expressions ----

    pub fn expr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    e = Expr::Add(Box::new(e), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    e = Expr::Sub(Box::new(e), Box::new(self.term()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star | Tok::Times => {
                    self.bump();
                    e = Expr::Mul(Box::new(e), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    let d = self.factor()?;
                    e = match (&e, &d) {
                        (Expr::Num(n), Expr::Num(m)) if !m.is_zero() => Expr::Num(n / m),
                        _ => Expr::Div(Box::new(e), Box::new(d)),
                    };
                }
                _ => return Ok(e),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                Ok(match self.factor()? {
                    Expr::Num(n) if !n.is_negative() => Expr::Num(-n),
                    e => Expr::Neg(Box::new(e)),
                })
            }
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Num(n))
            }
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(Expr::Var(s))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            t => self.error(format!("expected expression, found {}", describe(&t))),
        }
    }

    // ---- predicates ----

    pub fn bexpr(&mut self) -> Result<BExpr> {
        let mut e = self.band()?;
        while self.eat(&Tok::Or) {
            e = BExpr::Or(Box::new(e), Box::new(self.band()?));
        }
        Ok(e)
    }

    fn band(&mut self) -> Result<BExpr> {
        let mut e = self.bunary()?;
        while self.eat(&Tok::And) {
            e = BExpr::And(Box::new(e), Box::new(self.bunary()?));
        }
        Ok(e)
    }

    fn bunary(&mut self) -> Result<BExpr> {
        if self.eat(&Tok::Not) {
            return Ok(BExpr::Not(Box::new(self.bunary()?)));
        }
        if self.eat_keyword("true") {
            return Ok(BExpr::True);
        }
        if self.eat_keyword("false") {
            return Ok(BExpr::False);
        }
        if matches!(self.peek(), Tok::LParen) {
            let save = self.pos;
            if let Ok(c) = self.comparison() {
                return Ok(c);
            }
            self.pos = save;
            self.bump();
            let e = self.bexpr()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(e);
        }
        self.comparison()
    }

    /// `e op e (op e)*`; chains read as conjunctions.
    fn comparison(&mut self) -> Result<BExpr> {
        let mut lhs = self.expr()?;
        let mut out: Option<BExpr> = None;
        while let Some(op) = cmp_op(self.peek()) {
            self.bump();
            let rhs = self.expr()?;
            let atom = BExpr::Cmp(lhs, op, rhs.clone());
            out = Some(match out {
                None => atom,
                Some(prev) => BExpr::And(Box::new(prev), Box::new(atom)),
            });
            lhs = rhs;
        }
        match out {
            Some(b) => Ok(b),
            None => self.error(format!("expected comparison operator, found {}", describe(self.peek()))),
        }
    }

    // ---- statements ----

    /// `stmt (; stmt)* [;]`
    pub fn prog(&mut self) -> Result<Stmt> {
        let first = self.stmt()?;
        let mut rest = Vec::new();
        while matches!(self.peek(), Tok::Semi) {
            self.bump();
            if !self.starts_stmt() {
                break;
            }
            rest.push(self.stmt()?);
        }
        let mut all = vec![first];
        all.extend(rest);
        let mut it = all.into_iter().rev();
        let mut acc = it.next().expect("nonempty");
        for s in it {
            acc = Stmt::Seq(Box::new(s), Box::new(acc));
        }
        Ok(acc)
    }

    fn starts_stmt(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !matches!(s.as_str(), "od" | "fi" | "else" | "then" | "do"),
            _ => false,
        }
    }

    fn stmt(&mut self) -> Result<Stmt> {
        let line = self.line();
        if self.eat_keyword("skip") {
            let label = self.fresh_label(SiteKind::Skip, line);
            return Ok(Stmt::Skip { label });
        }
        if self.eat_keyword("if") {
            let (kind, cond) = if self.eat(&Tok::Star) {
                (SiteKind::IfStar, None)
            } else if self.is_keyword("prob") && matches!(self.peek_at(1), Tok::LParen) {
                self.bump();
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                let p = match e.constant_value() {
                    Some(p) => p,
                    None => return self.error("probability must be a constant"),
                };
                if p.is_negative() || p > Rat::one() {
                    return Err(Error::Semantic(format!("probability {p} outside [0,1] at line {line}")));
                }
                (SiteKind::IfProb, Some(Cond::Prob(p)))
            } else {
                (SiteKind::IfGuard, Some(Cond::Guard(self.bexpr()?)))
            };
            let label = self.fresh_label(kind, line);
            let cond = cond.unwrap_or(Cond::Star);
            self.expect_keyword("then")?;
            let t = self.prog()?;
            self.expect_keyword("else")?;
            let e = self.prog()?;
            self.expect_keyword("fi")?;
            return Ok(Stmt::If { label, cond, then_branch: Box::new(t), else_branch: Box::new(e) });
        }
        if self.eat_keyword("while") {
            let guard = self.bexpr()?;
            let label = self.fresh_label(SiteKind::While, line);
            self.expect_keyword("do")?;
            let body = self.prog()?;
            self.expect_keyword("od")?;
            return Ok(Stmt::While { label, guard, body: Box::new(body) });
        }
        let var = self.ident()?;
        self.expect(&Tok::Assign, "`:=`")?;
        let label = self.fresh_label(SiteKind::Assign, line);
        let expr = self.expr()?;
        Ok(Stmt::Assign { label, var, expr })
    }

    /// `{v: p, ...}`
    pub fn dist_body(&mut self) -> Result<DiscreteDist> {
        self.expect(&Tok::LBrace, "`{`")?;
        let mut support = Vec::new();
        loop {
            let v = self.expr()?;
            let v = match v.constant_value() {
                Some(v) if v.is_integer() => v.to_integer().to_i64(),
                _ => None,
            };
            let Some(v) = v else { return self.error("support values must be integer constants") };
            self.expect(&Tok::Colon, "`:`")?;
            let p = self.expr()?;
            let Some(p) = p.constant_value() else {
                return self.error("probabilities must be constants");
            };
            support.push((v, p));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RBrace, "`}`")?;
        DiscreteDist::new(support)
    }
}

fn cmp_op(t: &Tok) -> Option<CmpOp> {
    Some(match t {
        Tok::Le => CmpOp::Le,
        Tok::Lt => CmpOp::Lt,
        Tok::Ge => CmpOp::Ge,
        Tok::Gt => CmpOp::Gt,
        Tok::Eq => CmpOp::Eq,
        _ => return None,
    })
}

fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "skip" | "if" | "then" | "else" | "fi" | "while" | "do" | "od" | "true" | "false"
    )
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(n) => format!("number {n}"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

/// Parses a `.pp` program file.
pub fn parse_program(text: &str) -> Result<Program> {
    let mut p = Parser::new(text)?;
    let mut dists: BTreeMap<String, DiscreteDist> = BTreeMap::new();
    let mut rvars = Vec::new();
    let mut declared = Vec::new();
    loop {
        if p.is_keyword("dist") && matches!(p.peek_at(1), Tok::Ident(_)) && matches!(p.peek_at(2), Tok::Eq)
        {
            p.bump();
            let name = p.ident()?;
            p.expect(&Tok::Eq, "`=`")?;
            let d = p.dist_body()?;
            p.expect(&Tok::Semi, "`;`")?;
            if dists.insert(name.clone(), d).is_some() {
                return Err(Error::Semantic(format!("distribution of {name} declared twice")));
            }
            rvars.push(name);
        } else if p.is_keyword("pvar") && matches!(p.peek_at(1), Tok::Ident(_)) {
            p.bump();
            loop {
                declared.push(p.ident()?);
                if !p.eat(&Tok::Comma) {
                    break;
                }
            }
            p.expect(&Tok::Semi, "`;`")?;
        } else {
            break;
        }
    }
    let root = p.prog()?;
    if !p.at_eof() {
        return p.error(format!("unexpected {} after program", describe(p.peek())));
    }
    let terminal = p.next_label();
    let sites = std::mem::take(&mut p.sites);
    let pvars = classify_vars(&root, &dists, &declared)?;
    Ok(Program { root, pvars, rvars, dists, sites, terminal, declared })
}

/// Orders program variables and enforces the variable discipline.
fn classify_vars(
    root: &Stmt,
    dists: &BTreeMap<String, DiscreteDist>,
    declared: &[String],
) -> Result<Vec<String>> {
    let mut order: Vec<String> = declared.to_vec();
    let mut assigned = Vec::new();
    let mut guarded = Vec::new();
    let mut used = Vec::new();
    let mut err = None;
    let note = |v: &str, order: &mut Vec<String>| {
        if !dists.contains_key(v) && !order.iter().any(|o| o == v) {
            order.push(v.to_string());
        }
    };
    root.visit(&mut |s| match s {
        Stmt::Assign { var, expr, .. } => {
            assigned.push(var.clone());
            note(var, &mut order);
            expr.visit_vars(&mut |v| {
                used.push(v.to_string());
                note(v, &mut order);
            });
            if expr.contains_div() && err.is_none() {
                err = Some(Error::Semantic(format!("division in assignment `{var} := {expr}`")));
            }
            if let Ok(a) = expr.to_affine() {
                if a.terms().any(|(_, c)| !c.is_integer()) || !a.get_constant().is_integer() {
                    err.get_or_insert(Error::Semantic(format!(
                        "non-integer coefficient in `{var} := {expr}`"
                    )));
                }
            }
        }
        Stmt::If { cond: Cond::Guard(g), .. } | Stmt::While { guard: g, .. } => {
            g.visit_vars(&mut |v| {
                guarded.push(v.to_string());
                note(v, &mut order);
            });
        }
        _ => {}
    });
    if let Some(e) = err {
        return Err(e);
    }
    if let Some(v) = assigned.iter().find(|v| dists.contains_key(*v)) {
        return Err(Error::Semantic(format!("sampling variable {v} is assigned")));
    }
    if let Some(v) = guarded.iter().find(|v| dists.contains_key(*v)) {
        return Err(Error::Semantic(format!("sampling variable {v} occurs in a guard")));
    }
    if let Some(v) = declared.iter().find(|v| dists.contains_key(*v)) {
        return Err(Error::Semantic(format!("{v} is declared both as pvar and as sampling variable")));
    }
    for v in &used {
        if !dists.contains_key(v) && !assigned.contains(v) && !guarded.contains(v) && !declared.contains(v)
        {
            return Err(Error::Semantic(format!(
                "variable {v} is never assigned or tested; declare a distribution for it or list it with `pvar`"
            )));
        }
    }
    Ok(order)
}

/// Parses a standalone predicate (no labels involved).
pub fn parse_bexpr(text: &str) -> Result<BExpr> {
    let mut p = Parser::new(text)?;
    let b = p.bexpr()?;
    if !p.at_eof() {
        return p.error(format!("unexpected {} after predicate", describe(p.peek())));
    }
    Ok(b)
}

/// Parses a standalone arithmetic expression.
pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return p.error(format!("unexpected {} after expression", describe(p.peek())));
    }
    Ok(e)
}
