use std::fmt;

use crate::error::{Error, Result};
use crate::linear::LinearExpr;
use crate::ratlp::polyhedron::Polyhedron;
use crate::ratlp::simplex::{LpConstraint, LpProblem, Relation};
use crate::scalar::Scalar;

/// `ξ ≥ 0 ∧ Aᵀξ = c ∧ bᵀξ ≤ d` for a numeric `H = {Ax ≤ b}`.
///
/// `c` and `d` may contain unknowns, so the constraints are linear in the
/// multipliers and the unknowns jointly.
#[derive(Clone, Debug, PartialEq)]
pub struct FarkasAssertion<S> {
    /// One nonnegative multiplier per row of `H`.
    pub multipliers: Vec<String>,
    /// `Aᵀξ = c` (one per column, trivial ones omitted) then `bᵀξ ≤ d`.
    pub constraints: Vec<LpConstraint<S>>,
}

impl<S: Scalar> FarkasAssertion<S> {
    pub fn add_to(&self, lp: &mut LpProblem<S>) {
        for m in &self.multipliers {
            lp.add_nonneg_var(m);
        }
        for c in &self.constraints {
            lp.push(c.clone());
        }
    }
}

impl<S: Scalar> fmt::Display for FarkasAssertion<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.multipliers {
            writeln!(f, "{m} >= 0")?;
        }
        for c in &self.constraints {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Encodes `H ⊆ {x | cᵀx ≤ d}` with fresh multipliers named `{prefix}_{i}`.
pub fn farkas_encode<S: Scalar>(
    h: &Polyhedron<S>,
    c: &[LinearExpr<S>],
    d: &LinearExpr<S>,
    prefix: &str,
) -> Result<FarkasAssertion<S>> {
    if c.len() != h.vars().len() {
        return Err(Error::Dimension(format!(
            "{} coefficients for a polyhedron over {} variables",
            c.len(),
            h.vars().len()
        )));
    }
    let multipliers: Vec<String> = (0..h.num_rows()).map(|i| format!("{prefix}_{i}")).collect();
    let mut constraints = Vec::with_capacity(c.len() + 1);
    for (j, cj) in c.iter().enumerate() {
        let mut e = cj.neg();
        for (i, m) in multipliers.iter().enumerate() {
            e.add_term(m, h.a()[i][j].clone());
        }
        if e.is_constant() && e.get_constant().is_zero() {
            continue;
        }
        constraints.push(LpConstraint::new(e, Relation::Eq));
    }
    let mut e = d.neg();
    for (i, m) in multipliers.iter().enumerate() {
        e.add_term(m, h.b()[i].clone());
    }
    constraints.push(LpConstraint::new(e, Relation::Le));
    Ok(FarkasAssertion { multipliers, constraints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratlp::simplex::lp_solve;
    use crate::Rat;

    fn int(n: i64) -> Rat {
        Rat::from_integer(n.into())
    }

    fn feasible(fa: &FarkasAssertion<Rat>) -> bool {
        let mut lp = LpProblem::new();
        fa.add_to(&mut lp);
        lp_solve(&lp).is_feasible()
    }

    #[test]
    fn trivial_inclusion() {
        let v = vec!["x".to_string()];
        let h = Polyhedron::from_rows(&v, vec![vec![int(1)]], vec![int(0)]).unwrap();
        let fa = farkas_encode(&h, &[LinearExpr::constant(int(1))], &LinearExpr::zero(), "xi")
            .unwrap();
        assert_eq!(fa.multipliers, vec!["xi_0"]);
        assert_eq!(fa.to_string(), "xi_0 >= 0\nxi_0 = 1\n0 <= 0\n");
        assert!(feasible(&fa));

        let fa = farkas_encode(
            &h,
            &[LinearExpr::constant(int(-1))],
            &LinearExpr::constant(int(-1)),
            "xi",
        )
        .unwrap();
        assert!(!feasible(&fa));
    }

    #[test]
    fn dimension_mismatch() {
        let v = vec!["x".to_string()];
        let h = Polyhedron::<Rat>::universe(&v);
        assert!(farkas_encode(&h, &[], &LinearExpr::zero(), "xi").is_err());
    }

    #[test]
    fn worked_example_shape() {
        // H = {x >= -7, y <= 9, y >= 1}, c = alpha5 - alpha6, d = -a + beta6 - beta5
        let v = vec!["x".to_string(), "y".to_string()];
        let h = Polyhedron::from_rows(
            &v,
            vec![vec![int(-1), int(0)], vec![int(0), int(1)], vec![int(0), int(-1)]],
            vec![int(7), int(9), int(-1)],
        )
        .unwrap();
        let c: Vec<LinearExpr<Rat>> = ["x", "y"]
            .iter()
            .map(|n| {
                LinearExpr::var(&format!("alpha_5_{n}")).sub(&LinearExpr::var(&format!("alpha_6_{n}")))
            })
            .collect();
        let d = LinearExpr::var("beta_6")
            .sub(&LinearExpr::var("beta_5"))
            .sub(&LinearExpr::var("a"));
        let fa = farkas_encode(&h, &c, &d, "xi").unwrap();
        assert_eq!(fa.multipliers.len(), 3);
        assert_eq!(fa.constraints.len(), 3);
        assert_eq!(fa.constraints[0].to_string(), "-alpha_5_x + alpha_6_x - xi_0 = 0");
        assert_eq!(
            fa.constraints[2].to_string(),
            "a + beta_5 - beta_6 + 7*xi_0 + 9*xi_1 - xi_2 <= 0"
        );
    }
}
