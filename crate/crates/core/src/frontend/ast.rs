use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::{LinExpr, Rat};

pub type Label = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Num(Rat),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Num(Rat::from_integer(n.into()))
    }

    pub fn var(n: &str) -> Expr {
        Expr::Var(n.to_string())
    }

    /// Affine normal form, or an error naming the offending subterm.
    pub fn to_affine(&self) -> Result<LinExpr> {
        Ok(match self {
            Expr::Num(r) => LinExpr::constant(r.clone()),
            Expr::Var(v) => LinExpr::var(v),
            Expr::Neg(e) => e.to_affine()?.neg(),
            Expr::Add(a, b) => a.to_affine()?.add(&b.to_affine()?),
            Expr::Sub(a, b) => a.to_affine()?.sub(&b.to_affine()?),
            Expr::Mul(a, b) => {
                let (x, y) = (a.to_affine()?, b.to_affine()?);
                if x.is_constant() {
                    y.scale(x.get_constant())
                } else if y.is_constant() {
                    x.scale(y.get_constant())
                } else {
                    return Err(Error::Nonlinear(self.to_string()));
                }
            }
            Expr::Div(a, b) => {
                let y = b.to_affine()?;
                if !y.is_constant() {
                    return Err(Error::Nonlinear(self.to_string()));
                }
                if y.get_constant().is_zero() {
                    return Err(Error::Semantic(format!("division by zero in {self}")));
                }
                a.to_affine()?.scale(&(Rat::one() / y.get_constant()))
            }
        })
    }

    /// Constant value, if the expression has no variables.
    pub fn constant_value(&self) -> Option<Rat> {
        let a = self.to_affine().ok()?;
        a.is_constant().then(|| a.get_constant().clone())
    }

    pub fn visit_vars<'a>(&'a self, f: &mut dyn FnMut(&'a str)) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => f(v),
            Expr::Neg(e) => e.visit_vars(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    pub fn contains_div(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Div(..) => true,
            Expr::Neg(e) => e.contains_div(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.contains_div() || b.contains_div(),
        }
    }

    /// Evaluates over the integers.
    pub fn eval_int(&self, value: &dyn Fn(&str) -> i64) -> i64 {
        match self {
            Expr::Num(r) => {
                assert!(r.is_integer(), "non-integer constant in integer evaluation");
                num_traits::ToPrimitive::to_i64(r.numer()).expect("constant fits in i64")
            }
            Expr::Var(v) => value(v),
            Expr::Neg(e) => -e.eval_int(value),
            Expr::Add(a, b) => a.eval_int(value) + b.eval_int(value),
            Expr::Sub(a, b) => a.eval_int(value) - b.eval_int(value),
            Expr::Mul(a, b) => a.eval_int(value) * b.eval_int(value),
            Expr::Div(..) => panic!("division in integer evaluation"),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(r) if r.is_negative() => 3,
            Expr::Num(_) | Expr::Var(_) => 4,
        }
    }
}

fn write_sub(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if e.prec() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(r) if r.is_negative() => write!(f, "-{}", -r),
            Expr::Num(r) => write!(f, "{r}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                write_sub(f, e, 3)
            }
            Expr::Add(a, b) => {
                write_sub(f, a, 1)?;
                write!(f, " + ")?;
                write_sub(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_sub(f, a, 1)?;
                write!(f, " - ")?;
                write_sub(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_sub(f, a, 2)?;
                write!(f, " * ")?;
                write_sub(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_sub(f, a, 2)?;
                write!(f, " / ")?;
                write_sub(f, b, 3)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BExpr {
    True,
    False,
    Cmp(Expr, CmpOp, Expr),
    Not(Box<BExpr>),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
}

impl BExpr {
    pub fn visit_vars<'a>(&'a self, f: &mut dyn FnMut(&'a str)) {
        match self {
            BExpr::True | BExpr::False => {}
            BExpr::Cmp(a, _, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            BExpr::Not(x) => x.visit_vars(f),
            BExpr::And(a, b) | BExpr::Or(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            BExpr::Or(..) => 1,
            BExpr::And(..) => 2,
            _ => 3,
        }
    }
}

fn write_bsub(f: &mut fmt::Formatter<'_>, e: &BExpr, min: u8) -> fmt::Result {
    if e.prec() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for BExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BExpr::True => write!(f, "true"),
            BExpr::False => write!(f, "false"),
            BExpr::Cmp(a, op, b) => write!(f, "{a} {} {b}", op.symbol()),
            BExpr::Not(x) => {
                write!(f, "not ")?;
                write_bsub(f, x, 3)
            }
            BExpr::And(a, b) => {
                write_bsub(f, a, 2)?;
                write!(f, " and ")?;
                write_bsub(f, b, 3)
            }
            BExpr::Or(a, b) => {
                write_bsub(f, a, 1)?;
                write!(f, " or ")?;
                write_bsub(f, b, 2)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cond {
    Guard(BExpr),
    Star,
    Prob(Rat),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Skip { label: Label },
    Assign { label: Label, var: String, expr: Expr },
    Seq(Box<Stmt>, Box<Stmt>),
    If { label: Label, cond: Cond, then_branch: Box<Stmt>, else_branch: Box<Stmt> },
    While { label: Label, guard: BExpr, body: Box<Stmt> },
}

impl Stmt {
    /// Label of the first executed statement.
    pub fn entry_label(&self) -> Label {
        match self {
            Stmt::Skip { label }
            | Stmt::Assign { label, .. }
            | Stmt::If { label, .. }
            | Stmt::While { label, .. } => *label,
            Stmt::Seq(a, _) => a.entry_label(),
        }
    }

    /// Sequence components with nesting flattened.
    pub fn flatten(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        fn go<'a>(s: &'a Stmt, out: &mut Vec<&'a Stmt>) {
            match s {
                Stmt::Seq(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                other => out.push(other),
            }
        }
        go(self, &mut out);
        out
    }

    /// Structural equality ignoring labels and sequence association.
    pub fn same_shape(&self, other: &Stmt) -> bool {
        let (xs, ys) = (self.flatten(), other.flatten());
        if xs.len() != ys.len() {
            return false;
        }
        xs.iter().zip(&ys).all(|(x, y)| match (x, y) {
            (Stmt::Skip { .. }, Stmt::Skip { .. }) => true,
            (Stmt::Assign { var: v1, expr: e1, .. }, Stmt::Assign { var: v2, expr: e2, .. }) => {
                v1 == v2 && expr_equiv(e1, e2)
            }
            (
                Stmt::If { cond: c1, then_branch: t1, else_branch: f1, .. },
                Stmt::If { cond: c2, then_branch: t2, else_branch: f2, .. },
            ) => c1 == c2 && t1.same_shape(t2) && f1.same_shape(f2),
            (Stmt::While { guard: g1, body: b1, .. }, Stmt::While { guard: g2, body: b2, .. }) => {
                g1 == g2 && b1.same_shape(b2)
            }
            _ => false,
        })
    }

    /// All labels in pre-order.
    pub fn labels(&self) -> Vec<Label> {
        let mut out = Vec::new();
        self.visit(&mut |s| match s {
            Stmt::Seq(..) => {}
            other => out.push(other.entry_label()),
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        match self {
            Stmt::Seq(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Stmt::If { then_branch, else_branch, .. } => {
                then_branch.visit(f);
                else_branch.visit(f);
            }
            Stmt::While { body, .. } => body.visit(f),
            _ => {}
        }
    }

    fn write_indented(&self, f: &mut fmt::Formatter<'_>, ind: usize) -> fmt::Result {
        let pad = "    ".repeat(ind);
        match self {
            Stmt::Skip { .. } => write!(f, "{pad}skip"),
            Stmt::Assign { var, expr, .. } => write!(f, "{pad}{var} := {expr}"),
            Stmt::Seq(a, b) => {
                a.write_indented(f, ind)?;
                writeln!(f, ";")?;
                b.write_indented(f, ind)
            }
            Stmt::If { cond, then_branch, else_branch, .. } => {
                match cond {
                    Cond::Guard(g) => writeln!(f, "{pad}if {g} then")?,
                    Cond::Star => writeln!(f, "{pad}if * then")?,
                    Cond::Prob(p) => writeln!(f, "{pad}if prob({p}) then")?,
                }
                then_branch.write_indented(f, ind + 1)?;
                writeln!(f)?;
                writeln!(f, "{pad}else")?;
                else_branch.write_indented(f, ind + 1)?;
                writeln!(f)?;
                write!(f, "{pad}fi")
            }
            Stmt::While { guard, body, .. } => {
                writeln!(f, "{pad}while {guard} do")?;
                body.write_indented(f, ind + 1)?;
                writeln!(f)?;
                write!(f, "{pad}od")
            }
        }
    }

    /// Single-line rendering used in derivations and reports.
    pub fn inline(&self) -> String {
        match self {
            Stmt::Skip { .. } => "skip".into(),
            Stmt::Assign { var, expr, .. } => format!("{var} := {expr}"),
            Stmt::Seq(a, b) => format!("{}; {}", a.inline(), b.inline()),
            Stmt::If { cond, then_branch, else_branch, .. } => {
                let c = match cond {
                    Cond::Guard(g) => g.to_string(),
                    Cond::Star => "*".into(),
                    Cond::Prob(p) => format!("prob({p})"),
                };
                format!("if {c} then {} else {} fi", then_branch.inline(), else_branch.inline())
            }
            Stmt::While { guard, body, .. } => format!("while {guard} do {} od", body.inline()),
        }
    }
}

/// Equality of expressions up to affine normal form when both are affine.
pub fn expr_equiv(a: &Expr, b: &Expr) -> bool {
    match (a.to_affine(), b.to_affine()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_indented(f, 0)
    }
}

/// Finite-support distribution over integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteDist {
    support: Vec<(i64, Rat)>,
}

impl DiscreteDist {
    /// Validates distinct values and positive probabilities summing to one.
    pub fn new(mut support: Vec<(i64, Rat)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Semantic("distribution with empty support".into()));
        }
        support.sort_by_key(|(v, _)| *v);
        if support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Semantic("duplicate support value in distribution".into()));
        }
        if let Some((v, p)) = support.iter().find(|(_, p)| !p.is_positive() || *p > Rat::one()) {
            return Err(Error::Semantic(format!("probability {p} of value {v} is not in (0,1]")));
        }
        let total: Rat = support.iter().map(|(_, p)| p.clone()).sum();
        if !total.is_one() {
            return Err(Error::Semantic(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteDist { support })
    }

    pub fn support(&self) -> &[(i64, Rat)] {
        &self.support
    }

    pub fn expectation(&self) -> Rat {
        self.support.iter().map(|(v, p)| Rat::from_integer((*v).into()) * p).sum()
    }

    pub fn min(&self) -> i64 {
        self.support[0].0
    }

    pub fn max(&self) -> i64 {
        self.support[self.support.len() - 1].0
    }
}

impl fmt::Display for DiscreteDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, p)) in self.support.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}: {p}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteKind {
    Skip,
    Assign,
    IfGuard,
    IfStar,
    IfProb,
    While,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Site {
    pub kind: SiteKind,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub root: Stmt,
    /// Program variables in order of first appearance.
    pub pvars: Vec<String>,
    /// Sampling variables in declaration order.
    pub rvars: Vec<String>,
    pub dists: BTreeMap<String, DiscreteDist>,
    pub sites: BTreeMap<Label, Site>,
    pub terminal: Label,
    /// Variables declared with `pvar`.
    pub declared: Vec<String>,
}

impl Program {
    /// Finds the statement carrying `label`.
    pub fn stmt_at(&self, label: Label) -> Option<&Stmt> {
        let mut found = None;
        self.root.visit(&mut |s| {
            if !matches!(s, Stmt::Seq(..)) && s.entry_label() == label && found.is_none() {
                found = Some(s);
            }
        });
        found
    }
}

impl fmt::Display for Program {
    /// Source rendering that parses back to the same program.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.declared.is_empty() {
            writeln!(f, "pvar {};", self.declared.join(", "))?;
        }
        for r in &self.rvars {
            writeln!(f, "dist {r} = {};", self.dists[r])?;
        }
        writeln!(f, "{}", self.root)
    }
}
