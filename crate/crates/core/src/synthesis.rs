//! Template-based DSM synthesis through Farkas' lemma and one LP.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};

use crate::cfg::{Cfg, Node, Update};
use crate::dsm::{check_dsm, Condition, DsmMap};
use crate::error::{Error, Result};
use crate::frontend::Label;
use crate::invariants::{live_disjuncts, Invariant};
use crate::ratlp::{farkas_encode, lp_solve, LpOutcome, Sense};
use crate::{Dnf, LinExpr, Lp, Poly, Rat};

/// `Σ coeffs[v]·v + constant`, where every coefficient is affine in the unknowns.
#[derive(Clone, Debug, PartialEq)]
pub struct SymAffine {
    pub coeffs: Vec<LinExpr>,
    pub constant: LinExpr,
}

impl SymAffine {
    fn sub(&self, o: &SymAffine) -> SymAffine {
        SymAffine {
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.sub(b)).collect(),
            constant: self.constant.sub(&o.constant),
        }
    }

    fn scale(&self, k: &Rat) -> SymAffine {
        SymAffine {
            coeffs: self.coeffs.iter().map(|c| c.scale(k)).collect(),
            constant: self.constant.scale(k),
        }
    }

    fn add(&self, o: &SymAffine) -> SymAffine {
        self.sub(&o.scale(&-Rat::one()))
    }

    /// Composition with `target := rhs` where `rhs` is affine over `vars`
    /// (sampled variables already replaced by numbers).
    fn compose(&self, vars: &[String], target: &str, rhs: &LinExpr) -> SymAffine {
        let t = vars.iter().position(|v| v == target).expect("target is a program variable");
        let ct = self.coeffs[t].clone();
        let mut coeffs = self.coeffs.clone();
        coeffs[t] = LinExpr::zero();
        for (i, v) in vars.iter().enumerate() {
            let k = rhs.coeff(v);
            if !k.is_zero() {
                coeffs[i] = coeffs[i].add(&ct.scale(&k));
            }
        }
        let constant = self.constant.add(&ct.scale(rhs.get_constant()));
        SymAffine { coeffs, constant }
    }
}

/// Unknown per-label coefficients `alpha_{l}_{v}` and constants `beta_{l}`.
#[derive(Clone, Debug)]
pub struct Template {
    pub vars: Vec<String>,
    pub eta: BTreeMap<Label, SymAffine>,
}

impl Template {
    pub fn new(cfg: &Cfg) -> Self {
        let eta = cfg
            .labels()
            .into_iter()
            .map(|l| {
                let coeffs = cfg.pvars.iter().map(|v| LinExpr::var(&format!("alpha_{l}_{v}"))).collect();
                (l, SymAffine { coeffs, constant: LinExpr::var(&format!("beta_{l}")) })
            })
            .collect();
        Template { vars: cfg.pvars.clone(), eta }
    }

    /// Every unknown in declaration order.
    pub fn unknowns(&self) -> Vec<String> {
        let mut out = Vec::new();
        for l in self.eta.keys() {
            out.extend(self.vars.iter().map(|v| format!("alpha_{l}_{v}")));
            out.push(format!("beta_{l}"));
        }
        out.push("a".into());
        out.push("b".into());
        out
    }

    /// Instantiates the template with LP values.
    pub fn instantiate(&self, values: &BTreeMap<String, Rat>) -> BTreeMap<Label, LinExpr> {
        let val = |e: &LinExpr| e.eval_map(values);
        self.eta
            .iter()
            .map(|(l, s)| {
                let e = LinExpr::from_terms(
                    self.vars.iter().zip(&s.coeffs).map(|(v, c)| (v.as_str(), val(c))),
                    val(&s.constant),
                );
                (*l, e)
            })
            .collect()
    }
}

/// Farkas assertions generated for one (label, condition, disjunct).
#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub label: Label,
    pub condition: Condition,
    pub disjunct: usize,
    pub region: Poly,
    /// `(form coefficients, bound)` of each inclusion `P ⊆ {form ≤ bound}`.
    pub inclusions: Vec<(Vec<LinExpr>, LinExpr)>,
}

/// The assembled LP and where its Farkas blocks came from.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub lp: Lp,
    pub template: Template,
    pub groups: Vec<Group>,
}

impl Assembly {
    pub fn assertion_count(&self) -> usize {
        self.groups.iter().map(|g| g.inclusions.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FailReason {
    LpInfeasible,
    EmptyInvariant,
    UnsupportedFeature(String),
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailReason::LpInfeasible => write!(f, "LP infeasible"),
            FailReason::EmptyInvariant => write!(f, "invariant at the loop head is empty"),
            FailReason::UnsupportedFeature(s) => write!(f, "unsupported feature: {s}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SynthesisOutcome {
    Success(DsmMap),
    Fail(FailReason),
}

struct Builder<'a> {
    cfg: &'a Cfg,
    template: &'a Template,
    groups: Vec<Group>,
}

impl Builder<'_> {
    fn eta(&self, l: Label) -> &SymAffine {
        &self.template.eta[&l]
    }

    fn group(&mut self, label: Label, condition: Condition, disjunct: usize, region: &Poly) -> &mut Group {
        self.groups.push(Group { label, condition, disjunct, region: region.clone(), inclusions: Vec::new() });
        self.groups.last_mut().expect("just pushed")
    }

    /// `a ≤ diff ≤ b`, plus `diff ≤ -ε` when `strict`.
    fn bounded(g: &mut Group, diff: &SymAffine, strict: bool) {
        let (a, b) = (LinExpr::var("a"), LinExpr::var("b"));
        let neg = diff.scale(&-Rat::one());
        g.inclusions.push((neg.coeffs.clone(), a.neg().sub(&neg.constant)));
        g.inclusions.push((diff.coeffs.clone(), b.sub(&diff.constant)));
        if strict {
            g.inclusions.push((diff.coeffs.clone(), LinExpr::constant(-Rat::one()).sub(&diff.constant)));
        }
    }

    /// `η(target) ∘ u - η(src)` for each corner of the sampled box, and the expected difference.
    fn assign_diffs(&self, src: Label, next: Label, u: &Update) -> Result<(Vec<SymAffine>, SymAffine)> {
        let tgt = self.eta(next);
        let Some(target) = &u.target else {
            let d = tgt.sub(self.eta(src));
            return Ok((vec![d.clone()], d));
        };
        let rhs = u
            .affine
            .as_ref()
            .ok_or_else(|| Error::UnsupportedFeature(format!("non-affine update {}", u.render())))?;
        let mut corners = vec![rhs.clone()];
        let mut mean = rhs.clone();
        for r in u.sampled(&self.cfg.rvars) {
            let d = self.cfg.dists.get(r).ok_or_else(|| Error::UnboundedSupport(r.clone()))?;
            let ends: BTreeSet<i64> = [d.min(), d.max()].into();
            corners = corners
                .iter()
                .flat_map(|c| {
                    ends.iter().map(|v| c.substitute(r, &LinExpr::constant(Rat::from_integer((*v).into()))))
                })
                .collect();
            mean = mean.substitute(r, &LinExpr::constant(d.expectation()));
        }
        let vars = &self.cfg.pvars;
        let diffs = corners.iter().map(|c| tgt.compose(vars, target, c).sub(self.eta(src))).collect();
        Ok((diffs, tgt.compose(vars, target, &mean).sub(self.eta(src))))
    }

    fn build(&mut self, inv: &Invariant) -> Result<()> {
        let cfg = self.cfg;
        let pruned = |d: &Dnf| -> Vec<Poly> { d.disjuncts().iter().filter(|p| !p.is_empty()).cloned().collect() };
        for (l, node) in cfg.nodes() {
            let here = live_disjuncts(inv, l);
            match node {
                Node::Terminal => {}
                Node::Assign { update, next } => {
                    let (diffs, mean) = self.assign_diffs(l, *next, update)?;
                    for (k, p) in here.iter().enumerate() {
                        let g = self.group(l, Condition::D1, k, p);
                        for d in &diffs {
                            Self::bounded(g, d, false);
                        }
                        g.inclusions.push((mean.coeffs.clone(), LinExpr::constant(-Rat::one()).sub(&mean.constant)));
                    }
                }
                Node::Branch { guard, then_to, else_to } => {
                    for (positive, target) in [(true, *then_to), (false, *else_to)] {
                        let side = guard.side(positive).ok_or_else(|| {
                            Error::UnsupportedFeature(format!("non-affine guard {}", guard.expr))
                        })?;
                        let diff = self.eta(target).sub(self.eta(l));
                        for (k, p) in pruned(&inv.get(l).conjoin(side)).iter().enumerate() {
                            Self::bounded(self.group(l, Condition::D2, k, p), &diff, true);
                        }
                    }
                }
                Node::Nondet { then_to, else_to } => {
                    for target in [*then_to, *else_to] {
                        let diff = self.eta(target).sub(self.eta(l));
                        for (k, p) in here.iter().enumerate() {
                            Self::bounded(self.group(l, Condition::D3, k, p), &diff, true);
                        }
                    }
                }
                Node::Prob { p, then_to, else_to } => {
                    let d1 = self.eta(*then_to).sub(self.eta(l));
                    let d2 = self.eta(*else_to).sub(self.eta(l));
                    let mean = d1.scale(p).add(&d2.scale(&(Rat::one() - p)));
                    for (k, p) in here.iter().enumerate() {
                        let g = self.group(l, Condition::D4, k, p);
                        Self::bounded(g, &d1, false);
                        Self::bounded(g, &d2, false);
                        g.inclusions.push((mean.coeffs.clone(), LinExpr::constant(-Rat::one()).sub(&mean.constant)));
                    }
                }
            }
        }
        Ok(())
    }
}

fn head_region(cfg: &Cfg, inv: &Invariant) -> Result<Dnf> {
    let here = inv.get(cfg.l_in);
    Ok(match cfg.node(cfg.l_in) {
        Some(Node::Branch { guard, .. }) => here.conjoin(guard.holds.as_ref().ok_or_else(|| {
            Error::UnsupportedFeature(format!("non-affine guard {}", guard.expr))
        })?),
        _ => here,
    })
}

/// Builds the LP whose solutions are DSM-maps with `ε = 1` and `c = 0`.
pub fn assemble_lp(template: &Template, cfg: &Cfg, inv: &Invariant) -> Result<Assembly> {
    let mut b = Builder { cfg, template, groups: Vec::new() };
    b.build(inv)?;
    let mut groups = b.groups;
    let eta_in = &template.eta[&cfg.l_in];
    let neg = eta_in.scale(&-Rat::one());
    let head = head_region(cfg, inv)?;
    for (k, p) in head.disjuncts().iter().filter(|p| !p.is_empty()).enumerate() {
        groups.push(Group {
            label: cfg.l_in,
            condition: Condition::D5,
            disjunct: k,
            region: p.clone(),
            inclusions: vec![(neg.coeffs.clone(), neg.constant.neg())],
        });
    }
    // Stable: transition order and disjunct order survive within a label.
    groups.sort_by_key(|g| (g.label, g.condition));

    let mut lp = Lp::new();
    for u in template.unknowns() {
        lp.add_var(&u);
    }
    let mut n = 0usize;
    for g in &groups {
        for (c, d) in &g.inclusions {
            farkas_encode(&g.region, c, d, &format!("xi{n}"))?.add_to(&mut lp);
            n += 1;
        }
    }
    lp.le0(LinExpr::var("a").sub(&LinExpr::var("b")).add(&LinExpr::constant(Rat::one())));
    lp.set_objective(Sense::Minimize, LinExpr::var("b").sub(&LinExpr::var("a")));
    Ok(Assembly { lp, template: template.clone(), groups })
}

/// Synthesizes a DSM-map for a loop sub-CFG, or explains why none was found.
pub fn synthesize_dsm(cfg: &Cfg, inv: &Invariant) -> Result<SynthesisOutcome> {
    let inv = inv.restrict(cfg);
    if live_disjuncts(&inv, cfg.l_in).is_empty() {
        return Ok(SynthesisOutcome::Fail(FailReason::EmptyInvariant));
    }
    let template = Template::new(cfg);
    let asm = match assemble_lp(&template, cfg, &inv) {
        Ok(a) => a,
        Err(Error::UnboundedSupport(r)) => {
            return Ok(SynthesisOutcome::Fail(FailReason::UnsupportedFeature(format!(
                "distribution of {r} lacks finite support"
            ))))
        }
        Err(e) => return Err(e),
    };
    let values = match lp_solve(&asm.lp) {
        LpOutcome::Feasible { values, .. } => values,
        LpOutcome::Infeasible => return Ok(SynthesisOutcome::Fail(FailReason::LpInfeasible)),
        LpOutcome::Unbounded => unreachable!("b - a is bounded below by 1"),
    };
    let dsm = DsmMap {
        eta: template.instantiate(&values),
        epsilon: Rat::one(),
        a: values["a"].clone(),
        b: values["b"].clone(),
        c: Rat::zero(),
    };
    let report = check_dsm(&dsm, cfg, &inv)?;
    assert!(report.passed(), "synthesized map failed its self-check: {:?}", report.violations);
    Ok(SynthesisOutcome::Success(dsm))
}
