use std::fmt;

use crate::error::{Error, Result};
use crate::linear::LinearExpr;
use crate::ratlp::simplex::{lp_solve, LpOutcome, LpProblem, Sense};
use crate::scalar::Scalar;

/// `{x | Ax ≤ b}` over an ordered list of named variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyhedron<S> {
    vars: Vec<String>,
    a: Vec<Vec<S>>,
    b: Vec<S>,
}

/// Result of maximizing a linear form over a polyhedron.
#[derive(Clone, Debug, PartialEq)]
pub enum Extremum<S> {
    Empty,
    Unbounded,
    Attained { value: S, point: Vec<S> },
}

impl<S: Scalar> Polyhedron<S> {
    /// The whole space.
    pub fn universe(vars: &[String]) -> Self {
        Polyhedron { vars: vars.to_vec(), a: Vec::new(), b: Vec::new() }
    }

    pub fn from_rows(vars: &[String], a: Vec<Vec<S>>, b: Vec<S>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Dimension(format!("{} rows but {} bounds", a.len(), b.len())));
        }
        if let Some(r) = a.iter().find(|r| r.len() != vars.len()) {
            return Err(Error::Dimension(format!(
                "row of length {} over {} variables",
                r.len(),
                vars.len()
            )));
        }
        Ok(Polyhedron { vars: vars.to_vec(), a, b })
    }

    pub fn push_row(&mut self, row: Vec<S>, rhs: S) {
        assert_eq!(row.len(), self.vars.len());
        self.a.push(row);
        self.b.push(rhs);
    }

    /// Adds the constraint `expr ≤ 0`.
    pub fn push_le0(&mut self, expr: &LinearExpr<S>) -> Result<()> {
        let row = expr.row(&self.vars).ok_or_else(|| {
            Error::Dimension(format!("constraint {expr} mentions variables outside {:?}", self.vars))
        })?;
        self.push_row(row, -expr.get_constant().clone());
        Ok(())
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn a(&self) -> &[Vec<S>] {
        &self.a
    }

    pub fn b(&self) -> &[S] {
        &self.b
    }

    pub fn num_rows(&self) -> usize {
        self.a.len()
    }

    pub fn is_universe(&self) -> bool {
        self.a.is_empty()
    }

    /// Row `i` as the form `aᵢx - bᵢ` (constraint reads `≤ 0`).
    pub fn row_expr(&self, i: usize) -> LinearExpr<S> {
        LinearExpr::from_terms(
            self.vars.iter().zip(&self.a[i]).map(|(v, c)| (v.as_str(), c.clone())),
            -self.b[i].clone(),
        )
    }

    pub fn contains(&self, point: &[S]) -> bool {
        self.a.iter().zip(&self.b).all(|(row, b)| {
            let lhs = row
                .iter()
                .zip(point)
                .fold(S::zero(), |acc, (a, x)| acc + a.clone() * x.clone());
            lhs <= *b
        })
    }

    pub fn intersect(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars, "intersecting polyhedra over different variables");
        let mut p = self.clone();
        p.a.extend(other.a.iter().cloned());
        p.b.extend(other.b.iter().cloned());
        p
    }

    fn to_lp(&self) -> LpProblem<S> {
        let mut lp = LpProblem::new();
        for v in &self.vars {
            lp.add_var(v);
        }
        for i in 0..self.a.len() {
            lp.le0(self.row_expr(i));
        }
        lp
    }

    pub fn is_empty(&self) -> bool {
        if self.a.is_empty() {
            return false;
        }
        !lp_solve(&self.to_lp()).is_feasible()
    }

    /// Maximizes `cᵀx` over the polyhedron.
    pub fn maximize(&self, c: &[S]) -> Extremum<S> {
        assert_eq!(c.len(), self.vars.len());
        let mut lp = self.to_lp();
        let obj = LinearExpr::from_terms(
            self.vars.iter().zip(c).map(|(v, k)| (v.as_str(), k.clone())),
            S::zero(),
        );
        lp.set_objective(Sense::Maximize, obj);
        match lp_solve(&lp) {
            LpOutcome::Infeasible => Extremum::Empty,
            LpOutcome::Unbounded => Extremum::Unbounded,
            LpOutcome::Feasible { values, optimum } => Extremum::Attained {
                value: optimum.expect("objective was set"),
                point: self.vars.iter().map(|v| values[v].clone()).collect(),
            },
        }
    }

    /// Maximizes an affine form (constant included) over the polyhedron.
    pub fn maximize_expr(&self, e: &LinearExpr<S>) -> Result<Extremum<S>> {
        let c = e.row(&self.vars).ok_or_else(|| {
            Error::Dimension(format!("objective {e} mentions variables outside {:?}", self.vars))
        })?;
        Ok(match self.maximize(&c) {
            Extremum::Attained { value, point } => {
                Extremum::Attained { value: value + e.get_constant().clone(), point }
            }
            other => other,
        })
    }
}

impl<S: Scalar> Polyhedron<S> {
    /// `self ⊆ other`; an empty `self` is included in anything.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        assert_eq!(self.vars, other.vars);
        if self.is_empty() {
            return true;
        }
        (0..other.num_rows()).all(|i| {
            polyhedron_includes(self, &other.a[i], &other.b[i]).expect("nonempty")
        })
    }
}

impl<S: Scalar> fmt::Display for Polyhedron<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.a.is_empty() {
            return write!(f, "true");
        }
        for i in 0..self.a.len() {
            if i > 0 {
                write!(f, " and ")?;
            }
            let lhs = LinearExpr::from_terms(
                self.vars.iter().zip(&self.a[i]).map(|(v, c)| (v.as_str(), c.clone())),
                S::zero(),
            );
            write!(f, "{} <= {}", lhs, self.b[i])?;
        }
        Ok(())
    }
}

/// Decides `H ⊆ {x | cᵀx ≤ d}` by maximizing `cᵀx` over `H`.
pub fn polyhedron_includes<S: Scalar>(h: &Polyhedron<S>, c: &[S], d: &S) -> Result<bool> {
    if c.len() != h.vars.len() {
        return Err(Error::Dimension(format!(
            "halfspace over {} variables, polyhedron over {}",
            c.len(),
            h.vars.len()
        )));
    }
    if h.is_universe() {
        // Only the zero functional is bounded over all of space.
        return Ok(c.iter().all(|x| x.is_zero()) && S::zero() <= *d);
    }
    match h.maximize(c) {
        Extremum::Empty => Err(Error::EmptyPolyhedron),
        Extremum::Unbounded => Ok(false),
        Extremum::Attained { value, .. } => Ok(value <= *d),
    }
}

/// Finite union of polyhedra over a shared variable list.
///
/// No disjuncts denotes the empty set; a single row-free disjunct is `true`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyUnion<S> {
    vars: Vec<String>,
    disjuncts: Vec<Polyhedron<S>>,
}

impl<S: Scalar> PolyUnion<S> {
    pub fn universe(vars: &[String]) -> Self {
        PolyUnion { vars: vars.to_vec(), disjuncts: vec![Polyhedron::universe(vars)] }
    }

    pub fn empty(vars: &[String]) -> Self {
        PolyUnion { vars: vars.to_vec(), disjuncts: Vec::new() }
    }

    pub fn single(p: Polyhedron<S>) -> Self {
        PolyUnion { vars: p.vars.clone(), disjuncts: vec![p] }
    }

    pub fn from_disjuncts(vars: &[String], disjuncts: Vec<Polyhedron<S>>) -> Self {
        assert!(disjuncts.iter().all(|d| d.vars == vars));
        PolyUnion { vars: vars.to_vec(), disjuncts }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn disjuncts(&self) -> &[Polyhedron<S>] {
        &self.disjuncts
    }

    pub fn is_universe(&self) -> bool {
        self.disjuncts.iter().any(|d| d.is_universe())
    }

    pub fn contains(&self, point: &[S]) -> bool {
        self.disjuncts.iter().any(|d| d.contains(point))
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars);
        let mut u = self.clone();
        u.disjuncts.extend(other.disjuncts.iter().cloned());
        u
    }

    /// Pairwise intersection of disjuncts (conjunction in DNF).
    pub fn conjoin(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars);
        let mut out = Vec::with_capacity(self.disjuncts.len() * other.disjuncts.len());
        for p in &self.disjuncts {
            for q in &other.disjuncts {
                out.push(p.intersect(q));
            }
        }
        PolyUnion { vars: self.vars.clone(), disjuncts: out }
    }

    /// Whether some single disjunct contains `p`.
    pub fn covers(&self, p: &Polyhedron<S>) -> bool {
        self.disjuncts.iter().any(|q| p.is_subset_of(q))
    }

    /// Drops disjuncts that are empty.
    pub fn prune_empty(&self) -> Self {
        PolyUnion {
            vars: self.vars.clone(),
            disjuncts: self.disjuncts.iter().filter(|d| !d.is_empty()).cloned().collect(),
        }
    }
}

impl<S: Scalar> fmt::Display for PolyUnion<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.disjuncts.is_empty() {
            return write!(f, "false");
        }
        for (i, d) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}
