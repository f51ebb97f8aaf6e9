use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::ast::{BExpr, CmpOp};
use super::parser::parse_bexpr;
use crate::error::{Error, Result};
use crate::{Dnf, LinExpr, Poly, Rat};

/// Disjunctive normal form of `b` over the ordered variables `vars`.
///
/// Strict atoms are tightened using integrality of the variables:
/// `e < 0` becomes `e' ≤ -1` where `e'` is `e` scaled to integer data.
pub fn to_dnf(b: &BExpr, vars: &[String]) -> Result<Dnf> {
    dnf(b, false, vars)
}

fn dnf(b: &BExpr, neg: bool, vars: &[String]) -> Result<Dnf> {
    Ok(match b {
        BExpr::True if !neg => Dnf::universe(vars),
        BExpr::False if neg => Dnf::universe(vars),
        BExpr::True | BExpr::False => Dnf::empty(vars),
        BExpr::Not(x) => dnf(x, !neg, vars)?,
        BExpr::And(x, y) | BExpr::Or(x, y) => {
            let (l, r) = (dnf(x, neg, vars)?, dnf(y, neg, vars)?);
            let is_and = matches!(b, BExpr::And(..));
            if is_and != neg {
                l.conjoin(&r)
            } else {
                l.union(&r)
            }
        }
        BExpr::Cmp(lhs, op, rhs) => {
            let e = lhs.to_affine()?.sub(&rhs.to_affine()?);
            if let Some(v) = e.vars().find(|v| !vars.iter().any(|w| w == v)) {
                return Err(Error::Semantic(format!("predicate mentions unknown variable {v}")));
            }
            let op = if neg { negate(*op) } else { vec![*op] };
            let mut out = Dnf::empty(vars);
            for o in op {
                out = out.union(&atom(&e, o, vars));
            }
            out
        }
    })
}

fn negate(op: CmpOp) -> Vec<CmpOp> {
    match op {
        CmpOp::Le => vec![CmpOp::Gt],
        CmpOp::Lt => vec![CmpOp::Ge],
        CmpOp::Ge => vec![CmpOp::Lt],
        CmpOp::Gt => vec![CmpOp::Le],
        CmpOp::Eq => vec![CmpOp::Lt, CmpOp::Gt],
    }
}

/// Scales `e` to coprime integer data.
pub fn integer_scaled(e: &LinExpr) -> LinExpr {
    let mut l = e.get_constant().denom().clone();
    for (_, c) in e.terms() {
        l = l.lcm(c.denom());
    }
    let scaled = e.scale(&Rat::from_integer(l));
    let mut g = scaled.get_constant().numer().abs();
    for (_, c) in scaled.terms() {
        g = g.gcd(c.numer());
    }
    if g.is_zero() || g.is_one() {
        scaled
    } else {
        scaled.scale(&(Rat::one() / Rat::from_integer(g)))
    }
}

/// `e ≤ -1` after integer scaling, i.e. `e < 0` over the integers.
pub fn strict_row(e: &LinExpr) -> LinExpr {
    integer_scaled(e).add(&LinExpr::constant(Rat::one()))
}

/// The set `{e op 0}` as a one-disjunct (or empty, or full) union.
fn atom(e: &LinExpr, op: CmpOp, vars: &[String]) -> Dnf {
    if e.is_constant() {
        let c = e.get_constant();
        let holds = match op {
            CmpOp::Le => !c.is_positive(),
            CmpOp::Lt => c.is_negative(),
            CmpOp::Ge => !c.is_negative(),
            CmpOp::Gt => c.is_positive(),
            CmpOp::Eq => c.is_zero(),
        };
        return if holds { Dnf::universe(vars) } else { Dnf::empty(vars) };
    }
    let rows = match op {
        CmpOp::Le => vec![e.clone()],
        CmpOp::Ge => vec![e.neg()],
        CmpOp::Lt => vec![strict_row(e)],
        CmpOp::Gt => vec![strict_row(&e.neg())],
        CmpOp::Eq => vec![e.clone(), e.neg()],
    };
    let mut p = Poly::universe(vars);
    for r in rows {
        p.push_le0(&r).expect("variables checked");
    }
    Dnf::single(p)
}

/// Parses a predicate and normalizes it over its variables in order of appearance.
pub fn parse_linear_predicate(text: &str) -> Result<Dnf> {
    let b = parse_bexpr(text)?;
    let mut vars: Vec<String> = Vec::new();
    b.visit_vars(&mut |v| {
        if !vars.iter().any(|w| w == v) {
            vars.push(v.to_string());
        }
    });
    to_dnf(&b, &vars)
}
