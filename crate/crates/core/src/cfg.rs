//! Control flow graphs and loop structure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::Result;
use crate::frontend::{to_dnf, BExpr, Cond, DiscreteDist, Expr, Label, Program, Stmt};
use crate::{Dnf, LinExpr, Rat};

/// `target := rhs`; a skip has no target.
#[derive(Clone, Debug, PartialEq)]
pub struct Update {
    pub target: Option<String>,
    pub rhs: Expr,
    /// Affine form of `rhs` when it has one.
    pub affine: Option<LinExpr>,
}

impl Update {
    pub fn identity() -> Self {
        Update { target: None, rhs: Expr::int(0), affine: None }
    }

    pub fn is_identity(&self) -> bool {
        self.target.is_none()
    }

    /// Sampling variables read by the right-hand side.
    pub fn sampled<'a>(&self, rvars: &'a [String]) -> Vec<&'a String> {
        if self.target.is_none() {
            return Vec::new();
        }
        let mut seen = BTreeSet::new();
        self.rhs.visit_vars(&mut |v| {
            seen.insert(v.to_string());
        });
        rvars.iter().filter(|r| seen.contains(*r)).collect()
    }

    /// Substitutes the update into `e`; identity updates leave it unchanged.
    pub fn apply_to(&self, e: &LinExpr) -> Option<LinExpr> {
        match &self.target {
            None => Some(e.clone()),
            Some(t) => Some(e.substitute(t, self.affine.as_ref()?)),
        }
    }

    pub fn render(&self) -> String {
        match &self.target {
            None => "skip".into(),
            Some(t) => format!("{t} := {}", self.rhs),
        }
    }
}

/// Loop or branch condition together with its normal forms.
#[derive(Clone, Debug, PartialEq)]
pub struct Guard {
    pub expr: BExpr,
    /// `None` when the guard is not affine.
    pub holds: Option<Dnf>,
    pub fails: Option<Dnf>,
}

impl Guard {
    pub fn new(expr: &BExpr, pvars: &[String]) -> Self {
        let holds = to_dnf(expr, pvars).ok();
        let fails = to_dnf(&BExpr::Not(Box::new(expr.clone())), pvars).ok();
        Guard { expr: expr.clone(), holds, fails }
    }

    pub fn side(&self, positive: bool) -> Option<&Dnf> {
        if positive {
            self.holds.as_ref()
        } else {
            self.fails.as_ref()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Assign { update: Update, next: Label },
    Branch { guard: Guard, then_to: Label, else_to: Label },
    Prob { p: Rat, then_to: Label, else_to: Label },
    Nondet { then_to: Label, else_to: Label },
    Terminal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum LabelKind {
    Assign,
    Branch,
    Prob,
    Nondet,
    Terminal,
}

#[derive(Clone, Debug)]
pub enum TransKind<'a> {
    Update(&'a Update),
    Guard { guard: &'a Guard, positive: bool },
    Prob(Rat),
    Star,
}

#[derive(Clone, Debug)]
pub struct Transition<'a> {
    pub from: Label,
    pub to: Label,
    pub kind: TransKind<'a>,
}

/// One joint value of the sampled variables with its probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub values: Vec<(String, i64)>,
    pub prob: Rat,
}

impl Sample {
    /// Replaces each sampled variable in `e` by its value.
    pub fn apply(&self, e: &LinExpr) -> LinExpr {
        self.values.iter().fold(e.clone(), |acc, (r, v)| {
            acc.substitute(r, &LinExpr::constant(Rat::from_integer((*v).into())))
        })
    }

    pub fn render(&self) -> String {
        let parts: Vec<String> = self.values.iter().map(|(r, v)| format!("{r}={v}")).collect();
        parts.join(",")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cfg {
    pub pvars: Vec<String>,
    pub rvars: Vec<String>,
    pub dists: BTreeMap<String, DiscreteDist>,
    nodes: BTreeMap<Label, Node>,
    pub l_in: Label,
    pub l_out: Label,
}

impl Cfg {
    pub fn node(&self, l: Label) -> Option<&Node> {
        self.nodes.get(&l)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (Label, &Node)> {
        self.nodes.iter().map(|(l, n)| (*l, n))
    }

    /// All labels, terminal included, ascending.
    pub fn labels(&self) -> Vec<Label> {
        self.nodes.keys().copied().collect()
    }

    pub fn kind(&self, l: Label) -> Option<LabelKind> {
        Some(match self.nodes.get(&l)? {
            Node::Assign { .. } => LabelKind::Assign,
            Node::Branch { .. } => LabelKind::Branch,
            Node::Prob { .. } => LabelKind::Prob,
            Node::Nondet { .. } => LabelKind::Nondet,
            Node::Terminal => LabelKind::Terminal,
        })
    }

    pub fn labels_of(&self, kind: LabelKind) -> Vec<Label> {
        self.nodes.keys().copied().filter(|l| self.kind(*l) == Some(kind)).collect()
    }

    /// Outgoing transitions of `l` (then-edge before else-edge).
    pub fn out(&self, l: Label) -> Vec<Transition<'_>> {
        let t = |to, kind| Transition { from: l, to, kind };
        match &self.nodes[&l] {
            Node::Assign { update, next } => vec![t(*next, TransKind::Update(update))],
            Node::Branch { guard, then_to, else_to } => vec![
                t(*then_to, TransKind::Guard { guard, positive: true }),
                t(*else_to, TransKind::Guard { guard, positive: false }),
            ],
            Node::Prob { p, then_to, else_to } => vec![
                t(*then_to, TransKind::Prob(p.clone())),
                t(*else_to, TransKind::Prob(Rat::from_integer(1.into()) - p)),
            ],
            Node::Nondet { then_to, else_to } => {
                vec![t(*then_to, TransKind::Star), t(*else_to, TransKind::Star)]
            }
            Node::Terminal => Vec::new(),
        }
    }

    pub fn transitions(&self) -> Vec<Transition<'_>> {
        self.nodes.keys().flat_map(|l| self.out(*l)).collect()
    }

    /// Number of incoming transitions per label (the entry counts as one for `l_in`).
    pub fn in_degrees(&self) -> BTreeMap<Label, usize> {
        let mut d: BTreeMap<Label, usize> = self.nodes.keys().map(|l| (*l, 0)).collect();
        *d.entry(self.l_in).or_default() += 1;
        for t in self.transitions() {
            *d.entry(t.to).or_default() += 1;
        }
        d
    }

    /// Labels not reachable from `l_in`.
    pub fn unreachable(&self) -> Vec<Label> {
        let mut seen = BTreeSet::from([self.l_in]);
        let mut stack = vec![self.l_in];
        while let Some(l) = stack.pop() {
            for t in self.out(l) {
                if seen.insert(t.to) {
                    stack.push(t.to);
                }
            }
        }
        self.nodes.keys().copied().filter(|l| !seen.contains(l)).collect()
    }

    /// Joint support of the variables sampled by `update` (product of marginals).
    pub fn samples(&self, update: &Update) -> Result<Vec<Sample>> {
        let mut out = vec![Sample { values: Vec::new(), prob: Rat::from_integer(1.into()) }];
        for r in update.sampled(&self.rvars) {
            let d = self.dists.get(r).ok_or_else(|| crate::Error::UnboundedSupport(r.clone()))?;
            let mut next = Vec::with_capacity(out.len() * d.support().len());
            for s in &out {
                for (v, p) in d.support() {
                    let mut values = s.values.clone();
                    values.push((r.clone(), *v));
                    next.push(Sample { values, prob: &s.prob * p });
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// Rendering in Graphviz DOT.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph cfg {\n  node [shape=circle];\n");
        for (l, n) in &self.nodes {
            let shape = match n {
                Node::Terminal => "doublecircle",
                Node::Branch { .. } => "diamond",
                Node::Prob { .. } | Node::Nondet { .. } => "box",
                Node::Assign { .. } => "circle",
            };
            let _ = writeln!(s, "  {l} [shape={shape}];");
        }
        for t in self.transitions() {
            let label = match &t.kind {
                TransKind::Update(u) => u.render(),
                TransKind::Guard { guard, positive: true } => guard.expr.to_string(),
                TransKind::Guard { guard, positive: false } => format!("not ({})", guard.expr),
                TransKind::Prob(p) => p.to_string(),
                TransKind::Star => "*".into(),
            };
            let _ = writeln!(s, "  {} -> {} [label=\"{}\"];", t.from, t.to, label.replace('"', "'"));
        }
        s.push_str("}\n");
        s
    }
}

/// Lowers a program to its control flow graph.
pub fn build_cfg(prog: &Program) -> Cfg {
    let mut nodes = BTreeMap::new();
    lower(&prog.root, prog.terminal, &prog.pvars, &mut nodes);
    nodes.insert(prog.terminal, Node::Terminal);
    Cfg {
        pvars: prog.pvars.clone(),
        rvars: prog.rvars.clone(),
        dists: prog.dists.clone(),
        nodes,
        l_in: prog.root.entry_label(),
        l_out: prog.terminal,
    }
}

fn lower(s: &Stmt, next: Label, pvars: &[String], nodes: &mut BTreeMap<Label, Node>) {
    match s {
        Stmt::Skip { label } => {
            nodes.insert(*label, Node::Assign { update: Update::identity(), next });
        }
        Stmt::Assign { label, var, expr } => {
            let update =
                Update { target: Some(var.clone()), rhs: expr.clone(), affine: expr.to_affine().ok() };
            nodes.insert(*label, Node::Assign { update, next });
        }
        Stmt::Seq(a, b) => {
            lower(b, next, pvars, nodes);
            lower(a, b.entry_label(), pvars, nodes);
        }
        Stmt::If { label, cond, then_branch, else_branch } => {
            let (then_to, else_to) = (then_branch.entry_label(), else_branch.entry_label());
            let node = match cond {
                Cond::Guard(g) => Node::Branch { guard: Guard::new(g, pvars), then_to, else_to },
                Cond::Star => Node::Nondet { then_to, else_to },
                Cond::Prob(p) => Node::Prob { p: p.clone(), then_to, else_to },
            };
            nodes.insert(*label, node);
            lower(then_branch, next, pvars, nodes);
            lower(else_branch, next, pvars, nodes);
        }
        Stmt::While { label, guard, body } => {
            nodes.insert(
                *label,
                Node::Branch { guard: Guard::new(guard, pvars), then_to: body.entry_label(), else_to: next },
            );
            lower(body, *label, pvars, nodes);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopNode {
    pub label: Label,
    pub guard: BExpr,
    /// Labels of the loop body (the head itself excluded).
    pub body_labels: BTreeSet<Label>,
    /// Target of the exit edge.
    pub exit: Label,
    pub children: Vec<LoopNode>,
}

impl LoopNode {
    /// Depth of the nesting chain below and including this node.
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(LoopNode::depth).max().unwrap_or(0)
    }

    /// This node and all descendants, post-order.
    pub fn post_order(&self) -> Vec<&LoopNode> {
        let mut out = Vec::new();
        for c in &self.children {
            out.extend(c.post_order());
        }
        out.push(self);
        out
    }
}

/// While-nesting forest in source order.
pub fn loop_forest(prog: &Program) -> Vec<LoopNode> {
    let mut out = Vec::new();
    collect_loops(&prog.root, prog.terminal, &mut out);
    out
}

fn collect_loops(s: &Stmt, next: Label, out: &mut Vec<LoopNode>) {
    match s {
        Stmt::Skip { .. } | Stmt::Assign { .. } => {}
        Stmt::Seq(a, b) => {
            collect_loops(a, b.entry_label(), out);
            collect_loops(b, next, out);
        }
        Stmt::If { then_branch, else_branch, .. } => {
            collect_loops(then_branch, next, out);
            collect_loops(else_branch, next, out);
        }
        Stmt::While { label, guard, body } => {
            let mut children = Vec::new();
            collect_loops(body, *label, &mut children);
            out.push(LoopNode {
                label: *label,
                guard: guard.clone(),
                body_labels: body.labels().into_iter().collect(),
                exit: next,
                children,
            });
        }
    }
}

/// The loop restricted to its head, body and exit target.
///
/// The head becomes `l_in` and the exit target becomes a terminal `l_out`.
pub fn loop_subcfg(cfg: &Cfg, node: &LoopNode) -> Cfg {
    let mut nodes = BTreeMap::new();
    for l in std::iter::once(node.label).chain(node.body_labels.iter().copied()) {
        nodes.insert(l, cfg.nodes[&l].clone());
    }
    nodes.insert(node.exit, Node::Terminal);
    Cfg {
        pvars: cfg.pvars.clone(),
        rvars: cfg.rvars.clone(),
        dists: cfg.dists.clone(),
        nodes,
        l_in: node.label,
        l_out: node.exit,
    }
}

/// Finds the loop node with head `label`.
pub fn find_loop(forest: &[LoopNode], label: Label) -> Option<&LoopNode> {
    for n in forest {
        if n.label == label {
            return Some(n);
        }
        if let Some(f) = find_loop(&n.children, label) {
            return Some(f);
        }
    }
    None
}

/// Convenience: parse-free lowering check that every label is reachable.
pub fn validate(cfg: &Cfg) -> Result<()> {
    let u = cfg.unreachable();
    if u.is_empty() {
        Ok(())
    } else {
        Err(crate::Error::Semantic(format!("unreachable labels {u:?}")))
    }
}
