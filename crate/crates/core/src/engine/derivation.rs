//! Hand-written derivations in the triple calculus.
//!
//! A `.drv` file declares distributions and default parameters, then lists
//! numbered steps:
//!
//! ```text
//! dist r = {1: 1/4, -1: 3/4};
//! params epsilon = 1, a = -100, b = 100, c = 0;
//! step i rule 3: <6*y> y := y + r <6*y + 2>
//! step iii rule 4 from i, ii: <6*y> y := y + r; x := x + r <6*y + 1>
//! step iv rule 1 from iii: {6*y + 1} while y >= 0 do y := y + r; x := x + r od {6*y}
//! step v rule 9: Tm(y := y + r)
//! ```
//!
//! `<R> P <R'>` is the plain triple and `{R} P {R'}` the one that also
//! bounds loop heads from below by `c`. A step may override parameters with
//! `with epsilon = 1/2, ...` and restrict its side conditions with
//! `under <predicate>`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, ToPrimitive};

use crate::cfg::{build_cfg, Guard};
use crate::dsm::DsmMap;
use crate::error::{Error, Result};
use crate::frontend::{to_dnf, BExpr, Cond, DiscreteDist, Label, Parser, Program, Stmt, Tok};
use crate::invariants::Invariant;
use crate::ratlp::polyhedron_includes;
use crate::{Dnf, LinExpr, Poly, Rat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TripleKind {
    /// `{R} P {R'}`
    Curly,
    /// `<R> P <R'>`
    Angle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProofTriple {
    pub kind: TripleKind,
    pub pre: LinExpr,
    pub prog: Stmt,
    pub post: LinExpr,
}

impl fmt::Display for ProofTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (l, r) = match self.kind {
            TripleKind::Curly => ("{", "}"),
            TripleKind::Angle => ("<", ">"),
        };
        write!(f, "{l}{}{r} {} {l}{}{r}", self.pre, self.prog.inline(), self.post)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Judgement {
    Triple(ProofTriple),
    /// `Tm(P)`: `P` terminates almost surely.
    Tm(Stmt),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Params {
    pub epsilon: Rat,
    pub a: Rat,
    pub b: Rat,
    pub c: Rat,
}

#[derive(Clone, Debug, Default)]
struct PartialParams {
    epsilon: Option<Rat>,
    a: Option<Rat>,
    b: Option<Rat>,
    c: Option<Rat>,
}

impl PartialParams {
    fn over(&self, base: &PartialParams) -> PartialParams {
        PartialParams {
            epsilon: self.epsilon.clone().or_else(|| base.epsilon.clone()),
            a: self.a.clone().or_else(|| base.a.clone()),
            b: self.b.clone().or_else(|| base.b.clone()),
            c: self.c.clone().or_else(|| base.c.clone()),
        }
    }

    fn complete(self) -> Option<Params> {
        Some(Params { epsilon: self.epsilon?, a: self.a?, b: self.b?, c: self.c? })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub id: String,
    pub line: usize,
    pub rule: u8,
    pub premises: Vec<String>,
    /// Present on triple steps.
    pub params: Option<Params>,
    pub domain: Option<BExpr>,
    pub judgement: Judgement,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    /// Program variables over all steps, in order of first appearance.
    pub pvars: Vec<String>,
    pub rvars: Vec<String>,
    pub dists: BTreeMap<String, DiscreteDist>,
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DerivationVerdict {
    /// `params` are the effective parameters (smallest ε, a and c, largest b)
    /// over the triple steps; `None` when there are none.
    Valid { params: Option<Params> },
    Invalid { index: usize, step: String, rule: u8, reason: String },
}

pub fn parse_derivation(text: &str) -> Result<Derivation> {
    let mut p = Parser::new(text)?;
    let mut dists = BTreeMap::new();
    let mut rvars = Vec::new();
    let mut defaults = PartialParams::default();
    let mut raw = Vec::new();
    while !p.at_eof() {
        if p.eat_keyword("dist") {
            let name = p.ident()?;
            p.expect(&Tok::Eq, "`=`")?;
            let d = p.dist_body()?;
            p.expect(&Tok::Semi, "`;`")?;
            if dists.insert(name.clone(), d).is_some() {
                return Err(Error::Semantic(format!("distribution of {name} declared twice")));
            }
            rvars.push(name);
        } else if p.eat_keyword("params") {
            assignments(&mut p, &mut defaults)?;
            p.expect(&Tok::Semi, "`;`")?;
        } else if p.is_keyword("step") {
            raw.push(parse_step(&mut p)?);
        } else {
            return p.error("expected `dist`, `params` or `step`");
        }
    }
    let mut steps = Vec::new();
    for (step, overrides) in raw {
        let params = match &step.judgement {
            Judgement::Tm(_) => None,
            Judgement::Triple(_) => Some(overrides.over(&defaults).complete().ok_or_else(|| {
                Error::MalformedDerivation(format!("step {} lacks one of epsilon, a, b, c", step.id))
            })?),
        };
        steps.push(Step { params, ..step });
    }

    let mut pvars: Vec<String> = Vec::new();
    let mut note = |v: &str| {
        if !rvars.iter().any(|r| r == v) && !pvars.iter().any(|p| p == v) {
            pvars.push(v.to_string());
        }
    };
    for s in &steps {
        match &s.judgement {
            Judgement::Tm(prog) => stmt_vars(prog, &mut note),
            Judgement::Triple(t) => {
                t.pre.vars().for_each(&mut note);
                stmt_vars(&t.prog, &mut note);
                t.post.vars().for_each(&mut note);
            }
        }
        if let Some(d) = &s.domain {
            d.visit_vars(&mut note);
        }
    }
    for s in &steps {
        if let Judgement::Triple(t) = &s.judgement {
            if let Some(r) = rvars.iter().find(|r| t.pre.mentions(r) || t.post.mentions(r)) {
                return Err(Error::Semantic(format!("step {}: assertion mentions sampled {r}", s.id)));
            }
        }
    }
    Ok(Derivation { pvars, rvars, dists, steps })
}

fn stmt_vars(s: &Stmt, note: &mut dyn FnMut(&str)) {
    s.visit(&mut |s| match s {
        Stmt::Assign { var, expr, .. } => {
            note(var);
            expr.visit_vars(note);
        }
        Stmt::If { cond: Cond::Guard(g), .. } | Stmt::While { guard: g, .. } => g.visit_vars(note),
        _ => {}
    });
}

fn step_id(p: &mut Parser) -> Result<String> {
    match p.peek().clone() {
        Tok::Ident(s) => {
            p.bump();
            Ok(s)
        }
        Tok::Num(n) if n.is_integer() => {
            p.bump();
            Ok(n.to_string())
        }
        _ => p.error("expected step id"),
    }
}

fn assignments(p: &mut Parser, out: &mut PartialParams) -> Result<()> {
    loop {
        let name = p.ident()?;
        p.expect(&Tok::Eq, "`=`")?;
        let Some(v) = p.expr()?.constant_value() else { return p.error("parameter values must be constants") };
        let slot = match name.as_str() {
            "epsilon" => &mut out.epsilon,
            "a" => &mut out.a,
            "b" => &mut out.b,
            "c" => &mut out.c,
            _ => return p.error(format!("unknown parameter `{name}`")),
        };
        *slot = Some(v);
        if !p.eat(&Tok::Comma) {
            return Ok(());
        }
    }
}

fn parse_step(p: &mut Parser) -> Result<(Step, PartialParams)> {
    let line = p.line();
    p.expect_keyword("step")?;
    let id = step_id(p)?;
    p.expect_keyword("rule")?;
    let rule = match p.peek().clone() {
        Tok::Num(n) if n.is_integer() => n.to_integer().to_u8().filter(|r| (1..=11).contains(r)),
        _ => None,
    };
    let Some(rule) = rule else { return p.error("expected a rule number between 1 and 11") };
    p.bump();
    let mut premises = Vec::new();
    if p.eat_keyword("from") {
        loop {
            premises.push(step_id(p)?);
            if !p.eat(&Tok::Comma) {
                break;
            }
        }
    }
    let mut overrides = PartialParams::default();
    if p.eat_keyword("with") {
        assignments(p, &mut overrides)?;
    }
    let domain = if p.eat_keyword("under") { Some(p.bexpr()?) } else { None };
    p.expect(&Tok::Colon, "`:`")?;

    let judgement = if p.is_keyword("Tm") && matches!(p.peek_at(1), Tok::LParen) {
        p.bump();
        p.bump();
        p.reset_labels();
        let prog = p.prog()?;
        p.expect(&Tok::RParen, "`)`")?;
        Judgement::Tm(prog)
    } else {
        let (kind, open, close, what) = if p.eat(&Tok::Lt) {
            (TripleKind::Angle, Tok::Lt, Tok::Gt, "`>`")
        } else if p.eat(&Tok::LBrace) {
            (TripleKind::Curly, Tok::LBrace, Tok::RBrace, "`}`")
        } else {
            return p.error("expected `Tm(`, `<` or `{`");
        };
        let pre = p.expr()?.to_affine()?;
        p.expect(&close, what)?;
        p.reset_labels();
        let prog = p.prog()?;
        p.expect(&open, "opening bracket of the post-assertion")?;
        let post = p.expr()?.to_affine()?;
        p.expect(&close, what)?;
        Judgement::Triple(ProofTriple { kind, pre, prog, post })
    };
    p.eat(&Tok::Semi);
    let step = Step { id, line, rule, premises, params: None, domain, judgement };
    Ok((step, overrides))
}

/// Checks every step in order and reports the first invalid one.
pub fn check_derivation(d: &Derivation) -> Result<DerivationVerdict> {
    if d.steps.is_empty() {
        return Err(Error::MalformedDerivation("no steps".into()));
    }
    let mut index = HashMap::new();
    for (i, s) in d.steps.iter().enumerate() {
        for p in &s.premises {
            if !index.contains_key(p.as_str()) {
                return Err(Error::MalformedDerivation(format!(
                    "step {} cites {p}, which is not an earlier step",
                    s.id
                )));
            }
        }
        if index.insert(s.id.as_str(), i).is_some() {
            return Err(Error::MalformedDerivation(format!("step id {} used twice", s.id)));
        }
    }
    let ck = Checker { d, index };
    for (i, s) in d.steps.iter().enumerate() {
        if let Err(reason) = ck.step(s) {
            return Ok(DerivationVerdict::Invalid { index: i, step: s.id.clone(), rule: s.rule, reason });
        }
    }
    Ok(DerivationVerdict::Valid { params: effective_params(d) })
}

fn effective_params(d: &Derivation) -> Option<Params> {
    d.steps.iter().filter_map(|s| s.params.clone()).reduce(|x, y| Params {
        epsilon: x.epsilon.min(y.epsilon),
        a: x.a.min(y.a),
        b: x.b.max(y.b),
        c: x.c.min(y.c),
    })
}

type Check = std::result::Result<(), String>;

struct Checker<'a> {
    d: &'a Derivation,
    index: HashMap<&'a str, usize>,
}

impl<'a> Checker<'a> {
    fn premise(&self, id: &str) -> &'a Step {
        &self.d.steps[self.index[id]]
    }

    fn triple(&self, id: &str) -> std::result::Result<&'a ProofTriple, String> {
        match &self.premise(id).judgement {
            Judgement::Triple(t) => Ok(t),
            Judgement::Tm(_) => Err(format!("premise {id} is a termination assertion, not a triple")),
        }
    }

    fn tm(&self, id: &str) -> std::result::Result<&'a Stmt, String> {
        match &self.premise(id).judgement {
            Judgement::Tm(p) => Ok(p),
            Judgement::Triple(_) => Err(format!("premise {id} is a triple, not a termination assertion")),
        }
    }

    /// Nonempty pieces of the step's domain, optionally cut by a guard side.
    fn region(&self, s: &Step, guard: Option<(&BExpr, bool)>) -> std::result::Result<Vec<Poly>, String> {
        let vars = &self.d.pvars;
        let mut dnf = match &s.domain {
            Some(b) => to_dnf(b, vars).map_err(|e| format!("domain: {e}"))?,
            None => Dnf::universe(vars),
        };
        if let Some((g, positive)) = guard {
            let g = Guard::new(g, vars);
            let side = g.side(positive).ok_or_else(|| format!("guard {} is not affine", g.expr))?;
            dnf = dnf.conjoin(side);
        }
        Ok(dnf.disjuncts().iter().filter(|p| !p.is_empty()).cloned().collect())
    }

    /// `e ≤ bound` everywhere on `region`.
    fn below(&self, region: &[Poly], e: &LinExpr, bound: &Rat, what: &str) -> Check {
        let row = e.row(&self.d.pvars).ok_or_else(|| format!("{what}: {e} mentions a non-program variable"))?;
        let rhs = bound - e.get_constant();
        for p in region {
            if !polyhedron_includes(p, &row, &rhs).map_err(|e| e.to_string())? {
                return Err(format!("{what}: {e} <= {bound} does not hold"));
            }
        }
        Ok(())
    }

    /// `a ≤ diff ≤ b` on `region`.
    fn within(&self, region: &[Poly], diff: &LinExpr, k: &Params, what: &str) -> Check {
        self.below(region, &diff.neg(), &-k.a.clone(), &format!("{what}, lower bound a"))?;
        self.below(region, diff, &k.b, &format!("{what}, upper bound b"))
    }

    /// `a ≤ diff ≤ -ε` (and `≤ b`) on `region`.
    fn descends(&self, region: &[Poly], diff: &LinExpr, k: &Params, what: &str) -> Check {
        self.within(region, diff, k, what)?;
        self.below(region, diff, &-k.epsilon.clone(), &format!("{what}, descent by epsilon"))
    }

    fn arity(&self, s: &Step, n: usize) -> Check {
        if s.premises.len() == n {
            Ok(())
        } else {
            Err(format!("rule {} takes {n} premise(s), got {}", s.rule, s.premises.len()))
        }
    }

    fn step(&self, s: &Step) -> Check {
        match (&s.judgement, s.rule) {
            (Judgement::Triple(t), 1..=7) => {
                let k = s.params.as_ref().expect("triple steps carry parameters");
                if k.epsilon <= Rat::from_integer(0.into()) || k.a > k.b {
                    return Err("parameters need epsilon > 0 and a <= b".into());
                }
                self.triple_rule(s, t, k)
            }
            (Judgement::Tm(p), 8..=11) => self.tm_rule(s, p),
            (Judgement::Tm(_), r) => Err(format!("rule {r} concludes a triple")),
            (Judgement::Triple(_), r) => Err(format!("rule {r} concludes a termination assertion")),
        }
    }

    fn triple_rule(&self, s: &Step, t: &ProofTriple, k: &Params) -> Check {
        let single = single(&t.prog);
        match s.rule {
            1 => {
                self.arity(s, 1)?;
                let Some(Stmt::While { guard, body, .. }) = single else {
                    return Err("conclusion is not a while loop".into());
                };
                let prem = self.triple(&s.premises[0])?;
                if prem.kind != TripleKind::Angle {
                    return Err("the loop body premise must be a plain <R> P <R'> triple".into());
                }
                if !prem.prog.same_shape(body) {
                    return Err("premise program differs from the loop body".into());
                }
                if prem.post != t.pre {
                    return Err(format!("body post-assertion {} differs from loop head {}", prem.post, t.pre));
                }
                let inside = self.region(s, Some((guard, true)))?;
                let outside = self.region(s, Some((guard, false)))?;
                self.descends(&inside, &prem.pre.sub(&t.pre), k, "guard holds, entering the body")?;
                self.descends(&outside, &t.post.sub(&t.pre), k, "guard fails, leaving the loop")?;
                if t.kind == TripleKind::Curly {
                    self.below(&inside, &t.pre.neg(), &-k.c.clone(), "guard holds, head bounded below by c")?;
                }
                Ok(())
            }
            2 => {
                self.arity(s, 0)?;
                if !matches!(single, Some(Stmt::Skip { .. })) {
                    return Err("rule 2 applies to skip".into());
                }
                self.descends(&self.region(s, None)?, &t.post.sub(&t.pre), k, "skip")
            }
            3 => {
                self.arity(s, 0)?;
                let Some(Stmt::Assign { var, expr, .. }) = single else {
                    return Err("rule 3 applies to a single assignment".into());
                };
                let rhs = expr.to_affine().map_err(|e| e.to_string())?;
                let moved = t.post.substitute(var, &rhs);
                let region = self.region(s, None)?;
                let mut expected = moved.clone();
                for r in &self.d.rvars {
                    expected = expected.substitute(r, &LinExpr::constant(self.d.dists[r].expectation()));
                }
                self.descends(&region, &expected.sub(&t.pre), k, "expected change")?;
                for (sample, values) in self.samples(&rhs) {
                    let mut point = moved.clone();
                    for (r, v) in values {
                        point = point.substitute(r, &LinExpr::constant(Rat::from_integer(v.into())));
                    }
                    self.within(&region, &point.sub(&t.pre), k, &format!("change at {sample}"))?;
                }
                Ok(())
            }
            4 => {
                self.arity(s, 2)?;
                let (p1, p2) = (self.triple(&s.premises[0])?, self.triple(&s.premises[1])?);
                if p1.kind != t.kind || p2.kind != t.kind {
                    return Err("premises and conclusion must use the same triple form".into());
                }
                let joined = Stmt::Seq(Box::new(p1.prog.clone()), Box::new(p2.prog.clone()));
                if !joined.same_shape(&t.prog) {
                    return Err("conclusion program is not the first premise followed by the second".into());
                }
                if p1.pre != t.pre || p1.post != p2.pre || p2.post != t.post {
                    return Err("assertions do not chain".into());
                }
                Ok(())
            }
            5..=7 => {
                self.arity(s, 2)?;
                let Some(Stmt::If { cond, then_branch, else_branch, .. }) = single else {
                    return Err("conclusion is not a conditional".into());
                };
                let (p1, p2) = (self.triple(&s.premises[0])?, self.triple(&s.premises[1])?);
                if p1.kind != t.kind || p2.kind != t.kind {
                    return Err("premises and conclusion must use the same triple form".into());
                }
                if !p1.prog.same_shape(then_branch) || !p2.prog.same_shape(else_branch) {
                    return Err("premise programs differ from the branches".into());
                }
                if p1.post != t.post || p2.post != t.post {
                    return Err("branch post-assertions differ from the conclusion's".into());
                }
                let (d1, d2) = (p1.pre.sub(&t.pre), p2.pre.sub(&t.pre));
                match (s.rule, cond) {
                    (5, Cond::Guard(g)) => {
                        self.descends(&self.region(s, Some((g, true)))?, &d1, k, "then branch")?;
                        self.descends(&self.region(s, Some((g, false)))?, &d2, k, "else branch")
                    }
                    (6, Cond::Star) => {
                        let region = self.region(s, None)?;
                        self.descends(&region, &d1, k, "first branch")?;
                        self.descends(&region, &d2, k, "second branch")
                    }
                    (7, Cond::Prob(p)) => {
                        let region = self.region(s, None)?;
                        self.within(&region, &d1, k, "first branch")?;
                        self.within(&region, &d2, k, "second branch")?;
                        let mix = d1.scale(p).add(&d2.scale(&(Rat::one() - p)));
                        self.below(&region, &mix, &-k.epsilon.clone(), "expected change")
                    }
                    (r, _) => Err(format!("rule {r} does not match this kind of conditional")),
                }
            }
            _ => unreachable!(),
        }
    }

    fn tm_rule(&self, s: &Step, prog: &Stmt) -> Check {
        let single = single(prog);
        match s.rule {
            8 => {
                self.arity(s, 2)?;
                let Some(Stmt::While { body, .. }) = single else {
                    return Err("conclusion is not a while loop".into());
                };
                let body_tm = self.tm(&s.premises[0])?;
                let t = self.triple(&s.premises[1])?;
                if t.kind != TripleKind::Curly {
                    return Err("the loop premise must be a {R} P {R'} triple".into());
                }
                if !body_tm.same_shape(body) {
                    return Err("first premise is not termination of the loop body".into());
                }
                if !t.prog.same_shape(prog) {
                    return Err("second premise is about a different loop".into());
                }
                Ok(())
            }
            9 => {
                self.arity(s, 0)?;
                match single {
                    Some(Stmt::Skip { .. } | Stmt::Assign { .. }) => Ok(()),
                    _ => Err("rule 9 applies to skip or a single assignment".into()),
                }
            }
            10 => {
                self.arity(s, 2)?;
                let joined = Stmt::Seq(
                    Box::new(self.tm(&s.premises[0])?.clone()),
                    Box::new(self.tm(&s.premises[1])?.clone()),
                );
                if joined.same_shape(prog) {
                    Ok(())
                } else {
                    Err("conclusion program is not the first premise followed by the second".into())
                }
            }
            11 => {
                self.arity(s, 2)?;
                let Some(Stmt::If { then_branch, else_branch, .. }) = single else {
                    return Err("conclusion is not a conditional".into());
                };
                let (p1, p2) = (self.tm(&s.premises[0])?, self.tm(&s.premises[1])?);
                if p1.same_shape(then_branch) && p2.same_shape(else_branch) {
                    Ok(())
                } else {
                    Err("premise programs differ from the branches".into())
                }
            }
            _ => unreachable!(),
        }
    }

    /// Support points of the sampled variables in `e`, rendered and as values.
    fn samples(&self, e: &LinExpr) -> Vec<(String, Vec<(&'a str, i64)>)> {
        let mut acc: Vec<Vec<(&'a str, i64)>> = vec![Vec::new()];
        for r in self.d.rvars.iter().filter(|r| e.mentions(r)) {
            acc = acc
                .into_iter()
                .flat_map(|pre| {
                    self.d.dists[r].support().iter().map(move |(v, _)| {
                        let mut x = pre.clone();
                        x.push((r.as_str(), *v));
                        x
                    })
                })
                .collect();
        }
        acc.into_iter()
            .map(|vals| {
                let s: Vec<String> = vals.iter().map(|(r, v)| format!("{r}={v}")).collect();
                (s.join(","), vals)
            })
            .collect()
    }
}

/// The statement when `s` is not a sequence.
fn single(s: &Stmt) -> Option<&Stmt> {
    match s {
        Stmt::Seq(..) => None,
        other => Some(other),
    }
}

/// Turns a valid `{R'} while G do P od {R''}` step into a DSM-map on the loop.
///
/// Each statement's map value is the pre-assertion of the step that derived
/// it and the exit label gets the final post-assertion. Step domains become
/// the invariant at the labels they annotate.
pub fn compile_while(d: &Derivation, id: &str) -> Result<(Program, DsmMap, Invariant)> {
    let params = match check_derivation(d)? {
        DerivationVerdict::Valid { params } => params.expect("a while step carries parameters"),
        DerivationVerdict::Invalid { step, reason, .. } => {
            return Err(Error::Semantic(format!("derivation is invalid at step {step}: {reason}")))
        }
    };
    let index: HashMap<&str, usize> = d.steps.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let root = index.get(id).map(|i| &d.steps[*i]).ok_or_else(|| Error::MalformedDerivation(format!("no step {id}")))?;
    let t = match (&root.judgement, root.rule) {
        (Judgement::Triple(t), 1) if t.kind == TripleKind::Curly => t,
        _ => return Err(Error::Semantic(format!("step {id} is not a {{R}} while ... {{R'}} step"))),
    };
    let terminal = t.prog.labels().into_iter().max().expect("nonempty") + 1;
    let prog = Program {
        root: t.prog.clone(),
        pvars: d.pvars.clone(),
        rvars: d.rvars.clone(),
        dists: d.dists.clone(),
        sites: BTreeMap::new(),
        terminal,
        declared: Vec::new(),
    };
    let cfg = build_cfg(&prog);
    let mut eta = BTreeMap::new();
    let mut inv = Invariant::trivial(&cfg);
    let walk = Walk { d, index };
    walk.assign(root, &[&prog.root], &mut eta, &mut inv)?;
    eta.insert(terminal, t.post.clone());
    let dsm = DsmMap { eta, epsilon: params.epsilon, a: params.a, b: params.b, c: params.c };
    Ok((prog, dsm, inv))
}

struct Walk<'a> {
    d: &'a Derivation,
    index: HashMap<&'a str, usize>,
}

impl Walk<'_> {
    fn assign(
        &self,
        s: &Step,
        stmts: &[&Stmt],
        eta: &mut BTreeMap<Label, LinExpr>,
        inv: &mut Invariant,
    ) -> Result<()> {
        let Judgement::Triple(t) = &s.judgement else {
            return Err(Error::Semantic(format!("step {} is not a triple", s.id)));
        };
        let prem = |i: usize| &self.d.steps[self.index[s.premises[i].as_str()]];
        let own = |label: Label, eta: &mut BTreeMap<Label, LinExpr>, inv: &mut Invariant| -> Result<()> {
            eta.insert(label, t.pre.clone());
            if let Some(b) = &s.domain {
                let cur = inv.get(label);
                inv.set(label, cur.conjoin(&to_dnf(b, &self.d.pvars)?));
            }
            Ok(())
        };
        match (s.rule, stmts) {
            (2 | 3, [one]) => own(one.entry_label(), eta, inv),
            (1, [Stmt::While { label, body, .. }]) => {
                own(*label, eta, inv)?;
                self.assign(prem(0), &body.flatten(), eta, inv)
            }
            (5..=7, [Stmt::If { label, then_branch, else_branch, .. }]) => {
                own(*label, eta, inv)?;
                self.assign(prem(0), &then_branch.flatten(), eta, inv)?;
                self.assign(prem(1), &else_branch.flatten(), eta, inv)
            }
            (4, _) => {
                let Judgement::Triple(first) = &prem(0).judgement else { unreachable!("checked") };
                let k = first.prog.flatten().len();
                self.assign(prem(0), &stmts[..k], eta, inv)?;
                self.assign(prem(1), &stmts[k..], eta, inv)
            }
            _ => Err(Error::Semantic(format!("step {} does not match the program shape", s.id))),
        }
    }
}
