//! Two-phase tableau simplex with exact arithmetic.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::linear::LinearExpr;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

/// `expr rel rhs`; `expr` never carries a constant.
#[derive(Clone, Debug, PartialEq)]
pub struct LpConstraint<S> {
    pub expr: LinearExpr<S>,
    pub rel: Relation,
    pub rhs: S,
}

impl<S: Scalar> LpConstraint<S> {
    /// Builds `expr rel 0`, moving the constant of `expr` to the right.
    pub fn new(expr: LinearExpr<S>, rel: Relation) -> Self {
        let rhs = -expr.get_constant().clone();
        LpConstraint { expr: expr.homogeneous(), rel, rhs }
    }

    pub fn holds(&self, values: &BTreeMap<String, S>) -> bool {
        let lhs = self.expr.eval_map(values);
        match self.rel {
            Relation::Le => lhs <= self.rhs,
            Relation::Eq => lhs == self.rhs,
        }
    }
}

impl<S: Scalar> fmt::Display for LpConstraint<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.rel {
            Relation::Le => "<=",
            Relation::Eq => "=",
        };
        write!(f, "{} {} {}", self.expr, op, self.rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Objective<S> {
    pub sense: Sense,
    pub expr: LinearExpr<S>,
}

/// Variables are free unless declared nonnegative.
#[derive(Clone, Debug, Default)]
pub struct LpProblem<S> {
    vars: Vec<String>,
    index: HashMap<String, usize>,
    nonneg: Vec<bool>,
    constraints: Vec<LpConstraint<S>>,
    objective: Option<Objective<S>>,
}

impl<S: Scalar> LpProblem<S> {
    pub fn new() -> Self {
        LpProblem {
            vars: Vec::new(),
            index: HashMap::new(),
            nonneg: Vec::new(),
            constraints: Vec::new(),
            objective: None,
        }
    }

    pub fn add_var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.vars.push(name.to_string());
        self.nonneg.push(false);
        self.index.insert(name.to_string(), self.vars.len() - 1);
        self.vars.len() - 1
    }

    pub fn add_nonneg_var(&mut self, name: &str) -> usize {
        let i = self.add_var(name);
        self.nonneg[i] = true;
        i
    }

    pub fn is_nonneg(&self, name: &str) -> bool {
        self.index.get(name).is_some_and(|&i| self.nonneg[i])
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn constraints(&self) -> &[LpConstraint<S>] {
        &self.constraints
    }

    pub fn objective(&self) -> Option<&Objective<S>> {
        self.objective.as_ref()
    }

    pub fn push(&mut self, c: LpConstraint<S>) {
        for v in c.expr.vars() {
            if !self.index.contains_key(v) {
                self.add_var(v);
            }
        }
        self.constraints.push(c);
    }

    /// `expr ≤ 0`.
    pub fn le0(&mut self, expr: LinearExpr<S>) {
        self.push(LpConstraint::new(expr, Relation::Le));
    }

    /// `expr = 0`.
    pub fn eq0(&mut self, expr: LinearExpr<S>) {
        self.push(LpConstraint::new(expr, Relation::Eq));
    }

    /// `lhs ≤ rhs`.
    pub fn le(&mut self, lhs: &LinearExpr<S>, rhs: &LinearExpr<S>) {
        self.le0(lhs.sub(rhs));
    }

    pub fn set_objective(&mut self, sense: Sense, expr: LinearExpr<S>) {
        for v in expr.vars() {
            if !self.index.contains_key(v) {
                self.add_var(v);
            }
        }
        self.objective = Some(Objective { sense, expr });
    }

    /// Plain-text rendering, one constraint per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.objective {
            Some(o) => {
                let s = match o.sense {
                    Sense::Minimize => "minimize",
                    Sense::Maximize => "maximize",
                };
                out.push_str(&format!("{s}: {}\n", o.expr));
            }
            None => out.push_str("feasibility\n"),
        }
        let free: Vec<&str> =
            self.vars.iter().zip(&self.nonneg).filter(|(_, &n)| !n).map(|(v, _)| v.as_str()).collect();
        let pos: Vec<&str> =
            self.vars.iter().zip(&self.nonneg).filter(|(_, &n)| n).map(|(v, _)| v.as_str()).collect();
        out.push_str(&format!("free: {}\n", free.join(" ")));
        out.push_str(&format!("nonneg: {}\n", pos.join(" ")));
        for (i, c) in self.constraints.iter().enumerate() {
            out.push_str(&format!("c{}: {}\n", i + 1, c));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome<S> {
    Feasible { values: BTreeMap<String, S>, optimum: Option<S> },
    Infeasible,
    Unbounded,
}

impl<S> LpOutcome<S> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Feasible { .. })
    }
}

struct Tableau<S> {
    rows: Vec<Vec<S>>,
    rhs: Vec<S>,
    basis: Vec<usize>,
    /// Reduced costs, one per column.
    cost: Vec<S>,
    /// Negated objective value.
    cost_rhs: S,
    /// Columns that may enter the basis.
    allowed: Vec<bool>,
    /// Starting basis, used for lexicographic tie-breaking.
    lex_cols: Vec<usize>,
}

impl<S: Scalar> Tableau<S> {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        if !p.is_one() {
            for x in self.rows[r].iter_mut() {
                if !x.is_zero() {
                    x.div_assign_ref(&p);
                }
            }
            self.rhs[r].div_assign_ref(&p);
        }
        let nz: Vec<usize> =
            (0..self.rows[r].len()).filter(|&j| !self.rows[r][j].is_zero()).collect();
        let prow = std::mem::take(&mut self.rows[r]);
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][col].clone();
            if f.is_zero() {
                continue;
            }
            let row = &mut self.rows[i];
            for &j in &nz {
                row[j].sub_mul_assign(&f, &prow[j]);
            }
            self.rhs[i].sub_mul_assign(&f, &prhs);
        }
        let f = self.cost[col].clone();
        if !f.is_zero() {
            for &j in &nz {
                self.cost[j].sub_mul_assign(&f, &prow[j]);
            }
            self.cost_rhs.sub_mul_assign(&f, &prhs);
        }
        self.rows[r] = prow;
        self.basis[r] = col;
    }

    /// Pivots to optimality. Returns false if unbounded.
    ///
    /// The entering column has the most negative reduced cost and ties in
    /// the ratio test are broken lexicographically. A long run of
    /// degenerate pivots switches to Bland's rule for good, so the loop
    /// always terminates.
    fn optimize(&mut self) -> bool {
        let mut degenerate = 0usize;
        let limit = 20 * (self.rows.len() + 10);
        loop {
            let bland = degenerate > limit;
            let candidates =
                (0..self.cost.len()).filter(|&j| self.allowed[j] && self.cost[j] < S::zero());
            let entering = if bland {
                candidates.min()
            } else {
                candidates.fold(None, |best: Option<usize>, j| match best {
                    Some(b) if self.cost[b] <= self.cost[j] => Some(b),
                    _ => Some(j),
                })
            };
            let Some(col) = entering else { return true };
            let mut best: Option<(usize, S)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][col];
                if *a > S::zero() {
                    let ratio = self.rhs[i].clone() / a.clone();
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => {
                            ratio < *br
                                || (ratio == *br
                                    && if bland {
                                        self.basis[i] < self.basis[*bi]
                                    } else {
                                        self.lex_less(i, *bi, col)
                                    })
                        }
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                None => return false,
                Some((r, ratio)) => {
                    if ratio.is_zero() {
                        degenerate += 1;
                    } else {
                        degenerate = 0;
                    }
                    self.pivot(r, col)
                }
            }
        }
    }

    /// Compares rows `i` and `k` divided by their entries in `col` on the
    /// columns of the starting basis.
    fn lex_less(&self, i: usize, k: usize, col: usize) -> bool {
        let (ai, ak) = (&self.rows[i][col], &self.rows[k][col]);
        for &j in &self.lex_cols {
            let (x, y) = (&self.rows[i][j], &self.rows[k][j]);
            if x.is_zero() && y.is_zero() {
                continue;
            }
            let (u, v) = (x.clone() * ak.clone(), y.clone() * ai.clone());
            if u != v {
                return u < v;
            }
        }
        self.basis[i] < self.basis[k]
    }

    fn set_costs(&mut self, c: &[S]) {
        self.cost = c.to_vec();
        self.cost_rhs = S::zero();
        for i in 0..self.rows.len() {
            let cb = c[self.basis[i]].clone();
            if cb.is_zero() {
                continue;
            }
            for (j, a) in self.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    self.cost[j].sub_mul_assign(&cb, a);
                }
            }
            self.cost_rhs.sub_mul_assign(&cb, &self.rhs[i]);
        }
    }
}

/// Solves `p` exactly.
///
/// Free variables are split into positive and negative parts; `≤` rows get
/// slacks and rows without an obvious basic column get phase-one artificials.
pub fn lp_solve<S: Scalar>(p: &LpProblem<S>) -> LpOutcome<S> {
    // Column layout: structural columns, then slacks, then artificials.
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(p.vars.len());
    let mut ncols = 0;
    for &nn in &p.nonneg {
        if nn {
            col_of.push((ncols, None));
            ncols += 1;
        } else {
            col_of.push((ncols, Some(ncols + 1)));
            ncols += 2;
        }
    }
    let n_struct = ncols;
    let n_slack = p.constraints.iter().filter(|c| c.rel == Relation::Le).count();
    let m = p.constraints.len();

    let mut rows: Vec<Vec<S>> = Vec::with_capacity(m);
    let mut rhs: Vec<S> = Vec::with_capacity(m);
    let mut basis: Vec<Option<usize>> = Vec::with_capacity(m);
    let mut slack = n_struct;
    for c in &p.constraints {
        let mut row = vec![S::zero(); n_struct + n_slack];
        for (v, k) in c.expr.terms() {
            let (pc, nc) = col_of[p.index[v]];
            row[pc] = row[pc].clone() + k.clone();
            if let Some(nc) = nc {
                row[nc] = row[nc].clone() - k.clone();
            }
        }
        let mut b = c.rhs.clone();
        let mut natural = None;
        if c.rel == Relation::Le {
            row[slack] = S::one();
            natural = Some(slack);
            slack += 1;
        }
        if b < S::zero() {
            for x in row.iter_mut() {
                if !x.is_zero() {
                    *x = -x.clone();
                }
            }
            b = -b;
            natural = None;
        }
        rows.push(row);
        rhs.push(b);
        basis.push(natural);
    }

    let n_art = basis.iter().filter(|b| b.is_none()).count();
    let total = n_struct + n_slack + n_art;
    let mut art = n_struct + n_slack;
    let mut final_basis = Vec::with_capacity(m);
    for (i, row) in rows.iter_mut().enumerate() {
        row.resize(total, S::zero());
        match basis[i] {
            Some(c) => final_basis.push(c),
            None => {
                row[art] = S::one();
                final_basis.push(art);
                art += 1;
            }
        }
    }
    let first_art = n_struct + n_slack;
    let mut t = Tableau {
        rows,
        rhs,
        basis: final_basis,
        cost: vec![S::zero(); total],
        cost_rhs: S::zero(),
        allowed: vec![true; total],
        lex_cols: Vec::new(),
    };
    t.lex_cols = t.basis.clone();

    if n_art > 0 {
        let mut c1 = vec![S::zero(); total];
        for c in c1.iter_mut().skip(first_art) {
            *c = S::one();
        }
        t.set_costs(&c1);
        t.optimize();
        if t.cost_rhs < S::zero() {
            return LpOutcome::Infeasible;
        }
        // Drive remaining (zero-valued) artificials out of the basis.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= first_art {
                match (0..first_art).find(|&j| !t.rows[i][j].is_zero()) {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.rows.swap_remove(i);
                        t.rhs.swap_remove(i);
                        t.basis.swap_remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for a in t.allowed.iter_mut().skip(first_art) {
            *a = false;
        }
    }

    let mut optimum = None;
    if let Some(obj) = &p.objective {
        let mut c = vec![S::zero(); total];
        let flip = obj.sense == Sense::Maximize;
        for (v, k) in obj.expr.terms() {
            let k = if flip { -k.clone() } else { k.clone() };
            let (pc, nc) = col_of[p.index[v]];
            c[pc] = c[pc].clone() + k.clone();
            if let Some(nc) = nc {
                c[nc] = c[nc].clone() - k;
            }
        }
        t.set_costs(&c);
        if !t.optimize() {
            return LpOutcome::Unbounded;
        }
        // cost_rhs = -(min value of the possibly flipped objective)
        let mut v = -t.cost_rhs.clone();
        if flip {
            v = -v;
        }
        optimum = Some(v + obj.expr.get_constant().clone());
    }

    let mut colval = vec![S::zero(); total];
    for (i, &b) in t.basis.iter().enumerate() {
        colval[b] = t.rhs[i].clone();
    }
    let values = p
        .vars
        .iter()
        .zip(&col_of)
        .map(|(v, &(pc, nc))| {
            let mut x = colval[pc].clone();
            if let Some(nc) = nc {
                x = x - colval[nc].clone();
            }
            (v.clone(), x)
        })
        .collect();
    LpOutcome::Feasible { values, optimum }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rat;

    fn int(n: i64) -> Rat {
        Rat::from_integer(n.into())
    }

    fn x() -> LinearExpr<Rat> {
        LinearExpr::var("x")
    }

    #[test]
    fn bounded_maximum() {
        let mut p = LpProblem::new();
        p.le0(x().sub(&LinearExpr::constant(int(3))));
        p.le0(x().neg());
        p.set_objective(Sense::Maximize, x());
        match lp_solve(&p) {
            LpOutcome::Feasible { values, optimum } => {
                assert_eq!(optimum, Some(int(3)));
                assert_eq!(values["x"], int(3));
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn infeasible() {
        let mut p = LpProblem::new();
        p.le0(x());
        p.le0(x().neg().add(&LinearExpr::constant(int(1))));
        assert_eq!(lp_solve(&p), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded() {
        let mut p = LpProblem::new();
        let y = LinearExpr::var("y");
        p.le0(x().sub(&y).sub(&LinearExpr::constant(int(1))));
        p.set_objective(Sense::Maximize, x().add(&y));
        assert_eq!(lp_solve(&p), LpOutcome::Unbounded);
    }

    #[test]
    fn equalities_and_nonneg() {
        // min x + y s.t. x + 2y = 4, x - y = 1, x,y >= 0
        let mut p = LpProblem::<Rat>::new();
        p.add_nonneg_var("x");
        p.add_nonneg_var("y");
        let y = LinearExpr::var("y");
        p.eq0(x().add(&y.scale(&int(2))).sub(&LinearExpr::constant(int(4))));
        p.eq0(x().sub(&y).sub(&LinearExpr::constant(int(1))));
        p.set_objective(Sense::Minimize, x().add(&y));
        match lp_solve(&p) {
            LpOutcome::Feasible { values, optimum } => {
                assert_eq!(values["x"], int(2));
                assert_eq!(values["y"], int(1));
                assert_eq!(optimum, Some(int(3)));
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn redundant_equalities() {
        let mut p = LpProblem::<Rat>::new();
        p.eq0(x().sub(&LinearExpr::constant(int(2))));
        p.eq0(x().scale(&int(2)).sub(&LinearExpr::constant(int(4))));
        match lp_solve(&p) {
            LpOutcome::Feasible { values, .. } => assert_eq!(values["x"], int(2)),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn float_instance() {
        let mut p = LpProblem::<f64>::new();
        p.le0(LinearExpr::from_terms([("x", 1.0)], -2.5));
        p.set_objective(Sense::Maximize, LinearExpr::var("x"));
        match lp_solve(&p) {
            LpOutcome::Feasible { optimum, .. } => assert_eq!(optimum, Some(2.5)),
            o => panic!("{o:?}"),
        }
    }
}
