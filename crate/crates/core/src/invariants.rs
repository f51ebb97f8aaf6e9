//! Per-label linear invariants.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cfg::{Cfg, Node, TransKind};
use crate::error::{Error, Result};
use crate::frontend::{parse_bexpr, to_dnf, Label};
use crate::{Dnf, Poly};

/// Finite union of polyhedra over the program variables, per label.
#[derive(Clone, Debug, PartialEq)]
pub struct Invariant {
    vars: Vec<String>,
    map: BTreeMap<Label, Dnf>,
}

impl Invariant {
    /// `true` at every label of `cfg`.
    pub fn trivial(cfg: &Cfg) -> Self {
        Invariant {
            vars: cfg.pvars.clone(),
            map: cfg.labels().into_iter().map(|l| (l, Dnf::universe(&cfg.pvars))).collect(),
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// The invariant at `l`; labels without an entry are `true`.
    pub fn get(&self, l: Label) -> Dnf {
        self.map.get(&l).cloned().unwrap_or_else(|| Dnf::universe(&self.vars))
    }

    pub fn set(&mut self, l: Label, d: Dnf) {
        assert_eq!(d.vars(), self.vars.as_slice());
        self.map.insert(l, d);
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, &Dnf)> {
        self.map.iter().map(|(l, d)| (*l, d))
    }

    /// Keeps only the labels of `cfg` (e.g. a loop sub-CFG).
    pub fn restrict(&self, cfg: &Cfg) -> Self {
        Invariant {
            vars: self.vars.clone(),
            map: cfg.labels().into_iter().map(|l| (l, self.get(l))).collect(),
        }
    }

    /// Invariant file text; labels whose invariant is `true` are omitted.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (l, d) in &self.map {
            if d.disjuncts().len() == 1 && d.is_universe() {
                continue;
            }
            let _ = writeln!(s, "inv {l}: {d}");
        }
        s
    }

    /// Whether every nonempty disjunct of `other` lies in a single disjunct of `self`.
    pub fn weaker_than(&self, other: &Invariant) -> bool {
        self.map.keys().chain(other.map.keys()).all(|l| {
            let mine = self.get(*l);
            other.get(*l).disjuncts().iter().all(|p| mine.covers(p))
        })
    }
}

/// Reads `inv <label>: <predicate>` lines.
pub fn load_invariant(text: &str, cfg: &Cfg) -> Result<Invariant> {
    let mut inv = Invariant::trivial(cfg);
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |col: usize, msg: &str| Error::Syntax { line: line_no, col, msg: msg.into() };
        let rest = line
            .strip_prefix("inv")
            .filter(|r| r.starts_with(char::is_whitespace))
            .ok_or_else(|| syntax(1, "expected `inv <label>: <predicate>`"))?;
        let (label, pred) = rest.split_once(':').ok_or_else(|| syntax(1, "missing `:`"))?;
        let label: Label =
            label.trim().parse().map_err(|_| syntax(5, &format!("bad label `{}`", label.trim())))?;
        if cfg.node(label).is_none() {
            return Err(Error::UnknownLabel(label));
        }
        if seen.insert(label, line_no).is_some() {
            return Err(Error::Semantic(format!("label {label} has two invariant lines")));
        }
        let b = parse_bexpr(pred).map_err(|e| match e {
            Error::Syntax { col, msg, .. } => Error::Syntax { line: line_no, col, msg },
            other => other,
        })?;
        inv.set(label, to_dnf(&b, &cfg.pvars)?);
    }
    Ok(inv)
}

/// Propagates branch guards one step into their targets.
///
/// The then-target gets the guard. The else-target gets the negated guard
/// only when the branch is its sole predecessor, since otherwise other
/// incoming paths need not satisfy it. The terminal label stays `true`.
pub fn guard_default_invariant(cfg: &Cfg) -> Invariant {
    let mut inv = Invariant::trivial(cfg);
    let indeg = cfg.in_degrees();
    for (_, node) in cfg.nodes() {
        let Node::Branch { guard, then_to, else_to } = node else { continue };
        for (target, side) in [(*then_to, guard.holds.as_ref()), (*else_to, guard.fails.as_ref())] {
            let Some(side) = side else { continue };
            if target == cfg.l_out || indeg[&target] != 1 {
                continue;
            }
            let cur = inv.get(target);
            inv.set(target, cur.conjoin(side).prune_empty());
        }
    }
    inv
}

/// A transition whose post-image escapes the target invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct InductivenessViolation {
    pub from: Label,
    pub to: Label,
    /// Index of the offending disjunct of the source invariant (after conjoining the guard).
    pub disjunct: usize,
    /// Sampled values, rendered `r=v,...`; empty when nothing is sampled.
    pub sample: String,
}

/// Checks per transition, disjunct and support value that the post-image of
/// `I(from)` lies in one disjunct of `I(to)`. Non-affine transitions are skipped.
pub fn check_inductive(inv: &Invariant, cfg: &Cfg) -> Vec<InductivenessViolation> {
    let mut out = Vec::new();
    for t in cfg.transitions() {
        let post = inv.get(t.to);
        if post.is_universe() {
            continue;
        }
        let mut pre = inv.get(t.from);
        let mut update = None;
        match &t.kind {
            TransKind::Guard { guard, positive } => match guard.side(*positive) {
                Some(side) => pre = pre.conjoin(side),
                None => continue,
            },
            TransKind::Update(u) => {
                if !u.is_identity() && u.affine.is_none() {
                    continue;
                }
                update = Some(*u);
            }
            TransKind::Prob(_) | TransKind::Star => {}
        }
        let samples = match update {
            Some(u) => match cfg.samples(u) {
                Ok(s) => s,
                Err(_) => continue,
            },
            None => vec![crate::cfg::Sample { values: Vec::new(), prob: crate::Rat::from_integer(1.into()) }],
        };
        for (k, p) in pre.disjuncts().iter().enumerate() {
            if p.is_empty() {
                continue;
            }
            for s in &samples {
                let image_ok = post.disjuncts().iter().any(|q| {
                    (0..q.num_rows()).all(|i| {
                        let row = q.row_expr(i);
                        let moved = match update {
                            Some(u) => s.apply(&u.apply_to(&row).expect("affine")),
                            None => row,
                        };
                        let c = moved.row(&cfg.pvars).expect("over pvars");
                        let d = -moved.get_constant().clone();
                        crate::ratlp::polyhedron_includes(p, &c, &d).expect("nonempty")
                    })
                });
                if !image_ok {
                    out.push(InductivenessViolation {
                        from: t.from,
                        to: t.to,
                        disjunct: k,
                        sample: s.render(),
                    });
                }
            }
        }
    }
    out
}

/// Nonempty disjuncts of `I(l)`.
pub fn live_disjuncts(inv: &Invariant, l: Label) -> Vec<Poly> {
    inv.get(l).disjuncts().iter().filter(|p| !p.is_empty()).cloned().collect()
}
