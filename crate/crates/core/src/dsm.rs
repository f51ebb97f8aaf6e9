//! DSM-maps and their exact checker.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use num_traits::{One, Signed, Zero};

use crate::cfg::{Cfg, Node, Update};
use crate::error::{Error, Result};
use crate::frontend::{parse_expr, DiscreteDist, Label};
use crate::invariants::{live_disjuncts, Invariant};
use crate::ratlp::Extremum;
use crate::{Dnf, LinExpr, Poly, Rat};

/// Per-label affine map together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DsmMap {
    pub eta: BTreeMap<Label, LinExpr>,
    pub epsilon: Rat,
    pub a: Rat,
    pub b: Rat,
    pub c: Rat,
}

impl DsmMap {
    pub fn eta(&self, l: Label) -> Result<&LinExpr> {
        self.eta.get(&l).ok_or(Error::Coverage(l))
    }

    /// Multiplies the map and all parameters by `k`.
    pub fn scale(&self, k: &Rat) -> DsmMap {
        DsmMap {
            eta: self.eta.iter().map(|(l, e)| (*l, e.scale(k))).collect(),
            epsilon: &self.epsilon * k,
            a: &self.a * k,
            b: &self.b * k,
            c: &self.c * k,
        }
    }

    /// Adds `k` to every entry and to `c`.
    pub fn shift(&self, k: &Rat) -> DsmMap {
        DsmMap {
            eta: self.eta.iter().map(|(l, e)| (*l, e.add(&LinExpr::constant(k.clone())))).collect(),
            c: &self.c + k,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Condition {
    D1,
    D2,
    D3,
    D4,
    D5,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    /// The form grows without bound on the region.
    Unbounded,
    /// A point of the region where the form exceeds its bound.
    Point { value: Rat, valuation: Vec<(String, Rat)> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub condition: Condition,
    pub label: Label,
    pub target: Option<Label>,
    /// Index among the nonempty disjuncts of the checked region.
    pub disjunct: usize,
    /// Sampled values (`r=v,...`), empty when none.
    pub sample: String,
    /// The inclusion that failed, as `form <= bound`.
    pub requirement: String,
    pub witness: Witness,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}", self.condition, self.label)?;
        if let Some(t) = self.target {
            write!(f, " -> {t}")?;
        }
        write!(f, " (disjunct {}", self.disjunct)?;
        if !self.sample.is_empty() {
            write!(f, ", {}", self.sample)?;
        }
        write!(f, "): {}", self.requirement)?;
        match &self.witness {
            Witness::Unbounded => write!(f, " fails, form unbounded"),
            Witness::Point { value, valuation } => {
                let vals: Vec<String> = valuation.iter().map(|(v, x)| format!("{v}={x}")).collect();
                write!(f, " fails, form reaches {value} at {}", vals.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckReport {
    /// Sorted by label, then condition.
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `η` after the update with each sampled variable replaced by its mean.
pub fn expected_post(
    eta: &LinExpr,
    upd: &Update,
    dists: &BTreeMap<String, DiscreteDist>,
) -> Result<LinExpr> {
    let post = upd
        .apply_to(eta)
        .ok_or_else(|| Error::UnsupportedFeature(format!("non-affine update {}", upd.render())))?;
    let mut out = post.clone();
    for v in post.vars() {
        if let Some(d) = dists.get(v) {
            out = out.substitute(v, &LinExpr::constant(d.expectation()));
        }
    }
    Ok(out)
}

/// One `η(ℓ′, u(ν, μ)) − η(ℓ, ν)` per support point μ.
fn sampled_diffs(
    src: &LinExpr,
    tgt: &LinExpr,
    upd: &Update,
    cfg: &Cfg,
) -> Result<Vec<(String, LinExpr)>> {
    let post = upd
        .apply_to(tgt)
        .ok_or_else(|| Error::UnsupportedFeature(format!("non-affine update {}", upd.render())))?;
    Ok(cfg.samples(upd)?.into_iter().map(|s| (s.render(), s.apply(&post).sub(src))).collect())
}

/// Extremes of the one-step difference over the support when it does not
/// depend on the valuation; `None` otherwise.
pub fn extreme_post_diffs(
    eta_src: &LinExpr,
    eta_target: &LinExpr,
    upd: &Update,
    cfg: &Cfg,
) -> Result<Option<(Rat, Rat)>> {
    let diffs = sampled_diffs(eta_src, eta_target, upd, cfg)?;
    let mut lo: Option<Rat> = None;
    let mut hi: Option<Rat> = None;
    for (_, d) in diffs {
        if !d.is_constant() {
            return Ok(None);
        }
        let v = d.get_constant().clone();
        if lo.as_ref().is_none_or(|l| v < *l) {
            lo = Some(v.clone());
        }
        if hi.as_ref().is_none_or(|h| v > *h) {
            hi = Some(v);
        }
    }
    Ok(lo.zip(hi))
}

fn nonempty(d: &Dnf) -> Vec<Poly> {
    d.disjuncts().iter().filter(|p| !p.is_empty()).cloned().collect()
}

fn loop_guard(cfg: &Cfg) -> Result<Dnf> {
    match cfg.node(cfg.l_in) {
        Some(Node::Branch { guard, .. }) => guard.holds.clone().ok_or_else(|| {
            Error::UnsupportedFeature(format!("non-affine guard {}", guard.expr))
        }),
        _ => Ok(Dnf::universe(&cfg.pvars)),
    }
}

struct Checker<'a> {
    cfg: &'a Cfg,
    dsm: &'a DsmMap,
    out: Vec<Violation>,
}

struct Site {
    condition: Condition,
    label: Label,
    target: Option<Label>,
}

impl Checker<'_> {
    /// Records a violation unless `form <= bound` on every point of `p`.
    fn require(&mut self, site: &Site, k: usize, sample: &str, p: &Poly, form: &LinExpr, bound: &Rat, text: &str) {
        let witness = match p.maximize_expr(form).expect("forms are over pvars") {
            Extremum::Empty => return,
            Extremum::Unbounded => Witness::Unbounded,
            Extremum::Attained { value, point } => {
                if value <= *bound {
                    return;
                }
                Witness::Point { value, valuation: self.cfg.pvars.iter().cloned().zip(point).collect() }
            }
        };
        self.out.push(Violation {
            condition: site.condition,
            label: site.label,
            target: site.target,
            disjunct: k,
            sample: sample.to_string(),
            requirement: format!("{text} <= {bound}"),
            witness,
        });
    }

    /// `a <= diff <= b` (and `diff <= -ε` when `strict`).
    fn bounded(&mut self, site: &Site, k: usize, sample: &str, p: &Poly, diff: &LinExpr, strict: bool) {
        let (a, b, eps) = (self.dsm.a.clone(), self.dsm.b.clone(), self.dsm.epsilon.clone());
        self.require(site, k, sample, p, &diff.neg(), &-a, &format!("-({diff})"));
        self.require(site, k, sample, p, diff, &b, &diff.to_string());
        if strict {
            self.require(site, k, sample, p, diff, &-eps, &diff.to_string());
        }
    }
}

/// Checks all five conditions.
pub fn check_dsm(dsm: &DsmMap, cfg: &Cfg, inv: &Invariant) -> Result<CheckReport> {
    check(dsm, cfg, inv, true)
}

/// Checks everything except the lower bound at the loop head.
pub fn check_partial_dsm(dsm: &DsmMap, cfg: &Cfg, inv: &Invariant) -> Result<CheckReport> {
    check(dsm, cfg, inv, false)
}

fn check(dsm: &DsmMap, cfg: &Cfg, inv: &Invariant, with_d5: bool) -> Result<CheckReport> {
    for l in cfg.labels() {
        let e = dsm.eta(l)?;
        if let Some(v) = e.vars().find(|v| !cfg.pvars.iter().any(|p| p == v)) {
            return Err(Error::Semantic(format!("eta at {l} mentions {v}, not a program variable")));
        }
    }
    if !dsm.epsilon.is_positive() {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    if dsm.b < dsm.a {
        return Err(Error::Domain("b must be at least a".into()));
    }
    let mut ck = Checker { cfg, dsm, out: Vec::new() };
    for (l, node) in cfg.nodes() {
        let src = dsm.eta(l)?;
        let here = live_disjuncts(inv, l);
        match node {
            Node::Terminal => {}
            Node::Assign { update, next } => {
                let site = Site { condition: Condition::D1, label: l, target: Some(*next) };
                let tgt = dsm.eta(*next)?;
                let diffs = sampled_diffs(src, tgt, update, cfg)?;
                let mean = expected_post(tgt, update, &cfg.dists)?.sub(src);
                for (k, p) in here.iter().enumerate() {
                    for (s, d) in &diffs {
                        ck.bounded(&site, k, s, p, d, false);
                    }
                    let text = format!("E[eta({next})] - eta({l})");
                    ck.require(&site, k, "", p, &mean, &-dsm.epsilon.clone(), &text);
                }
            }
            Node::Branch { guard, then_to, else_to } => {
                for (positive, target) in [(true, *then_to), (false, *else_to)] {
                    let side = guard.side(positive).ok_or_else(|| {
                        Error::UnsupportedFeature(format!("non-affine guard {}", guard.expr))
                    })?;
                    let site = Site { condition: Condition::D2, label: l, target: Some(target) };
                    let diff = dsm.eta(target)?.sub(src);
                    for (k, p) in nonempty(&inv.get(l).conjoin(side)).iter().enumerate() {
                        ck.bounded(&site, k, "", p, &diff, true);
                    }
                }
            }
            Node::Nondet { then_to, else_to } => {
                for target in [*then_to, *else_to] {
                    let site = Site { condition: Condition::D3, label: l, target: Some(target) };
                    let diff = dsm.eta(target)?.sub(src);
                    for (k, p) in here.iter().enumerate() {
                        ck.bounded(&site, k, "", p, &diff, true);
                    }
                }
            }
            Node::Prob { p: prob, then_to, else_to } => {
                let site = Site { condition: Condition::D4, label: l, target: None };
                let (d1, d2) = (dsm.eta(*then_to)?.sub(src), dsm.eta(*else_to)?.sub(src));
                let mean = d1.scale(prob).add(&d2.scale(&(Rat::one() - prob)));
                for (k, p) in here.iter().enumerate() {
                    ck.bounded(&site, k, "", p, &d1, false);
                    ck.bounded(&site, k, "", p, &d2, false);
                    let text = format!("{prob}*eta({then_to}) + {}*eta({else_to}) - eta({l})", Rat::one() - prob);
                    ck.require(&site, k, "", p, &mean, &-dsm.epsilon.clone(), &text);
                }
            }
        }
    }
    if with_d5 {
        let site = Site { condition: Condition::D5, label: cfg.l_in, target: None };
        let head = dsm.eta(cfg.l_in)?;
        let region = inv.get(cfg.l_in).conjoin(&loop_guard(cfg)?);
        for (k, p) in nonempty(&region).iter().enumerate() {
            let text = format!("-({head})");
            ck.require(&site, k, "", p, &head.neg(), &-dsm.c.clone(), &text);
        }
    }
    let mut violations = ck.out;
    violations.sort_by_key(|v| (v.label, v.condition));
    Ok(CheckReport { violations })
}

/// Smallest and largest one-step difference over all transitions, support
/// values and invariant disjuncts; `None` marks an unbounded side.
pub fn diff_range(dsm: &DsmMap, cfg: &Cfg, inv: &Invariant) -> Result<(Option<Rat>, Option<Rat>)> {
    let mut lo: Option<Option<Rat>> = None;
    let mut hi: Option<Option<Rat>> = None;
    let mut see = |p: &Poly, d: &LinExpr| {
        for (form, slot, sign) in [(d.neg(), &mut lo, -1), (d.clone(), &mut hi, 1)] {
            let v = match p.maximize_expr(&form).expect("over pvars") {
                Extremum::Empty => continue,
                Extremum::Unbounded => None,
                Extremum::Attained { value, .. } => Some(if sign < 0 { -value } else { value }),
            };
            let better = match (&*slot, &v) {
                (None, _) => true,
                (Some(None), _) => false,
                (Some(Some(_)), None) => true,
                (Some(Some(cur)), Some(v)) => (sign < 0 && v < cur) || (sign > 0 && v > cur),
            };
            if better {
                *slot = Some(v);
            }
        }
    };
    for (l, node) in cfg.nodes() {
        let src = dsm.eta(l)?;
        let here = live_disjuncts(inv, l);
        match node {
            Node::Terminal => {}
            Node::Assign { update, next } => {
                for (_, d) in sampled_diffs(src, dsm.eta(*next)?, update, cfg)? {
                    here.iter().for_each(|p| see(p, &d));
                }
            }
            Node::Branch { guard, then_to, else_to } => {
                for (positive, target) in [(true, *then_to), (false, *else_to)] {
                    let side = guard.side(positive).ok_or_else(|| {
                        Error::UnsupportedFeature(format!("non-affine guard {}", guard.expr))
                    })?;
                    let d = dsm.eta(target)?.sub(src);
                    nonempty(&inv.get(l).conjoin(side)).iter().for_each(|p| see(p, &d));
                }
            }
            Node::Nondet { then_to, else_to } | Node::Prob { then_to, else_to, .. } => {
                for target in [*then_to, *else_to] {
                    let d = dsm.eta(target)?.sub(src);
                    here.iter().for_each(|p| see(p, &d));
                }
            }
        }
    }
    Ok((lo.flatten(), hi.flatten()))
}

/// Reads `.dsm` text: one or more `loop <label>` blocks closed by `end`.
pub fn load_dsm(text: &str) -> Result<Vec<(Label, DsmMap)>> {
    let mut out = Vec::new();
    let mut cur: Option<(Label, BTreeMap<&str, Rat>, BTreeMap<Label, LinExpr>)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |msg: String| Error::Syntax { line: line_no, col: 1, msg };
        let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match (head, cur.as_mut()) {
            ("loop", None) => {
                let l = rest.parse().map_err(|_| syntax(format!("bad loop label `{rest}`")))?;
                cur = Some((l, BTreeMap::new(), BTreeMap::new()));
            }
            ("end", Some(_)) => {
                let (l, params, eta) = cur.take().expect("inside a block");
                let get = |k: &str| {
                    params.get(k).cloned().ok_or_else(|| syntax(format!("block for loop {l} lacks `{k}`")))
                };
                out.push((l, DsmMap { eta, epsilon: get("epsilon")?, a: get("a")?, b: get("b")?, c: get("c")? }));
            }
            (k @ ("epsilon" | "a" | "b" | "c"), Some((_, params, _))) => {
                let v = parse_expr(rest)
                    .map_err(|e| relocate(e, line_no))?
                    .constant_value()
                    .ok_or_else(|| syntax(format!("`{k}` must be a constant")))?;
                params.insert(k, v);
            }
            ("eta", Some((_, _, eta))) => {
                let (l, e) = rest.split_once(':').ok_or_else(|| syntax("missing `:`".into()))?;
                let l: Label = l.trim().parse().map_err(|_| syntax(format!("bad label `{}`", l.trim())))?;
                let e = parse_expr(e).map_err(|e| relocate(e, line_no))?.to_affine()?;
                if eta.insert(l, e).is_some() {
                    return Err(syntax(format!("label {l} given twice")));
                }
            }
            _ => return Err(syntax(format!("unexpected `{head}`"))),
        }
    }
    if let Some((l, ..)) = cur {
        return Err(Error::Syntax { line: text.lines().count(), col: 1, msg: format!("block for loop {l} not closed") });
    }
    Ok(out)
}

fn relocate(e: Error, line: usize) -> Error {
    match e {
        Error::Syntax { col, msg, .. } => Error::Syntax { line, col, msg },
        other => other,
    }
}

/// Renders one `.dsm` block.
pub fn render_dsm(loop_label: Label, dsm: &DsmMap) -> String {
    let mut s = format!("loop {loop_label}\n");
    let _ = writeln!(s, "epsilon {}", dsm.epsilon);
    let _ = writeln!(s, "a {}", dsm.a);
    let _ = writeln!(s, "b {}", dsm.b);
    let _ = writeln!(s, "c {}", dsm.c);
    for (l, e) in &dsm.eta {
        let _ = writeln!(s, "eta {l}: {e}");
    }
    s.push_str("end\n");
    s
}

/// All-zero map over the labels of `cfg`.
pub fn zero_map(cfg: &Cfg, epsilon: Rat) -> DsmMap {
    DsmMap {
        eta: cfg.labels().into_iter().map(|l| (l, LinExpr::zero())).collect(),
        epsilon,
        a: -Rat::one(),
        b: Rat::one(),
        c: Rat::zero(),
    }
}
