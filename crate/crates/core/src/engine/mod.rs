//! Modular proof engine.
//!
//! `prove_termination` follows the program structure: straight-line
//! statements terminate outright, sequences and branches compose, and each
//! while-loop needs a terminating body plus a synthesized DSM-map on its own
//! sub-CFG. Hand-written derivations are checked by [`derivation`].

pub mod derivation;

use std::fmt::{self, Write as _};

use crate::cfg::{build_cfg, find_loop, loop_forest, loop_subcfg, Cfg, LoopNode};
use crate::dsm::{check_dsm, render_dsm, DsmMap};
use crate::error::Result;
use crate::frontend::{Cond, Label, Program, Stmt};
use crate::invariants::Invariant;
use crate::synthesis::{synthesize_dsm, FailReason, SynthesisOutcome};

pub use derivation::{
    check_derivation, compile_while, parse_derivation, Derivation, DerivationVerdict, Judgement, Params,
    ProofTriple, Step, TripleKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchKind {
    Guard,
    Star,
    Prob,
}

impl fmt::Display for BranchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchKind::Guard => "guard",
            BranchKind::Star => "star",
            BranchKind::Prob => "prob",
        })
    }
}

/// Termination proof tree shaped like the program.
#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    AtomTerm(Label),
    SeqTerm(Box<Certificate>, Box<Certificate>),
    BranchTerm { label: Label, kind: BranchKind, left: Box<Certificate>, right: Box<Certificate> },
    LoopTerm { label: Label, body: Box<Certificate>, dsm: DsmMap, invariant: Invariant },
}

impl Certificate {
    /// Loop heads, post-order.
    pub fn loop_labels(&self) -> Vec<Label> {
        let mut out = Vec::new();
        self.walk_loops(&mut |l, _, _| out.push(l));
        out
    }

    /// Calls `f(label, dsm, invariant)` for every loop, post-order.
    pub fn walk_loops<'a>(&'a self, f: &mut dyn FnMut(Label, &'a DsmMap, &'a Invariant)) {
        match self {
            Certificate::AtomTerm(_) => {}
            Certificate::SeqTerm(a, b) => {
                a.walk_loops(f);
                b.walk_loops(f);
            }
            Certificate::BranchTerm { left, right, .. } => {
                left.walk_loops(f);
                right.walk_loops(f);
            }
            Certificate::LoopTerm { label, body, dsm, invariant } => {
                body.walk_loops(f);
                f(*label, dsm, invariant);
            }
        }
    }

    /// `.dsm` blocks, one per loop.
    pub fn render_dsm(&self) -> String {
        let mut s = String::new();
        self.walk_loops(&mut |l, d, _| s.push_str(&render_dsm(l, d)));
        s
    }

    /// Indented rule tree.
    pub fn render_tree(&self) -> String {
        let mut s = String::new();
        self.tree_into(&mut s, 0);
        s
    }

    fn tree_into(&self, s: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        match self {
            Certificate::AtomTerm(l) => {
                let _ = writeln!(s, "{pad}atom {l}");
            }
            Certificate::SeqTerm(a, b) => {
                let _ = writeln!(s, "{pad}seq");
                a.tree_into(s, depth + 1);
                b.tree_into(s, depth + 1);
            }
            Certificate::BranchTerm { label, kind, left, right } => {
                let _ = writeln!(s, "{pad}branch {label} ({kind})");
                left.tree_into(s, depth + 1);
                right.tree_into(s, depth + 1);
            }
            Certificate::LoopTerm { label, body, dsm, .. } => {
                let _ = writeln!(s, "{pad}loop {label} [a={}, b={}, eta={}]", dsm.a, dsm.b, dsm.eta[label]);
                body.tree_into(s, depth + 1);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProofOutcome {
    Proved(Certificate),
    NotProved { label: Label, reason: FailReason },
}

/// Builds a termination certificate, or names the innermost loop that blocked.
///
/// Sibling subtrees are handled in parallel; when both fail, the earlier one
/// in program order is reported.
pub fn prove_termination(prog: &Program, inv: &Invariant) -> Result<ProofOutcome> {
    let cfg = build_cfg(prog);
    let forest = loop_forest(prog);
    let ctx = Ctx { cfg: &cfg, forest: &forest, inv };
    ctx.prove(&prog.root)
}

struct Ctx<'a> {
    cfg: &'a Cfg,
    forest: &'a [LoopNode],
    inv: &'a Invariant,
}

impl Ctx<'_> {
    fn prove(&self, s: &Stmt) -> Result<ProofOutcome> {
        use ProofOutcome::*;
        match s {
            Stmt::Skip { label } | Stmt::Assign { label, .. } => Ok(Proved(Certificate::AtomTerm(*label))),
            Stmt::Seq(a, b) => {
                let (x, y) = rayon::join(|| self.prove(a), || self.prove(b));
                Ok(match (x?, y?) {
                    (Proved(x), Proved(y)) => Proved(Certificate::SeqTerm(Box::new(x), Box::new(y))),
                    (n @ NotProved { .. }, _) | (_, n @ NotProved { .. }) => n,
                })
            }
            Stmt::If { label, cond, then_branch, else_branch } => {
                let kind = match cond {
                    Cond::Guard(_) => BranchKind::Guard,
                    Cond::Star => BranchKind::Star,
                    Cond::Prob(_) => BranchKind::Prob,
                };
                let (x, y) = rayon::join(|| self.prove(then_branch), || self.prove(else_branch));
                Ok(match (x?, y?) {
                    (Proved(x), Proved(y)) => Proved(Certificate::BranchTerm {
                        label: *label,
                        kind,
                        left: Box::new(x),
                        right: Box::new(y),
                    }),
                    (n @ NotProved { .. }, _) | (_, n @ NotProved { .. }) => n,
                })
            }
            Stmt::While { label, body, .. } => {
                let body = match self.prove(body)? {
                    Proved(c) => c,
                    n => return Ok(n),
                };
                let node = find_loop(self.forest, *label).expect("loop forest covers every while");
                let sub = loop_subcfg(self.cfg, node);
                let inv = self.inv.restrict(&sub);
                match synthesize_dsm(&sub, &inv)? {
                    SynthesisOutcome::Success(dsm) => {
                        assert!(check_dsm(&dsm, &sub, &inv)?.passed(), "loop {label}: unchecked DSM");
                        Ok(Proved(Certificate::LoopTerm { label: *label, body: Box::new(body), dsm, invariant: inv }))
                    }
                    SynthesisOutcome::Fail(reason) => Ok(NotProved { label: *label, reason }),
                }
            }
        }
    }
}
