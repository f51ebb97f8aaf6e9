mod common;

use std::collections::BTreeMap;

use common::*;
use dsmv_core::frontend::{parse_bexpr, to_dnf, BExpr, CmpOp, Expr};
use dsmv_core::ratlp::{lp_solve, polyhedron_includes, LpOutcome, LpProblem, Sense};
use dsmv_core::{Error, LinExpr, Rat};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn farkas_agrees_with_vertex_oracle(seed in any::<u64>()) {
        let case = random_case(&mut ChaCha8Rng::seed_from_u64(seed));
        let farkas = farkas_feasible(&case);
        prop_assert_eq!(farkas, vertex_included(&case));
        let c: Vec<Rat> = case.c.iter().map(|k| int(*k)).collect();
        match polyhedron_includes(&case.poly, &c, &int(case.d)) {
            Ok(inc) => prop_assert_eq!(inc, farkas),
            Err(e) => {
                prop_assert_eq!(e, Error::EmptyPolyhedron);
                prop_assert!(vertex_max(&case.poly, case.c).is_none());
            }
        }
        if farkas {
            prop_assert_eq!(grid_counterexample(&case), None);
        }
    }
}

/// Random bounded LP `max c·x, Ax ≤ b, 0 ≤ x` in three variables.
fn arb_lp() -> impl Strategy<Value = (Vec<Vec<i64>>, Vec<i64>, Vec<i64>)> {
    (1usize..=4).prop_flat_map(|m| {
        (
            prop::collection::vec(prop::collection::vec(-3i64..=4, 3), m),
            prop::collection::vec(0i64..=8, m),
            prop::collection::vec(-3i64..=5, 3),
        )
    })
}

fn var(i: usize) -> String {
    format!("v{i}")
}

fn form(coeffs: &[i64], names: impl Fn(usize) -> String) -> LinExpr {
    let mut e = LinExpr::zero();
    for (i, k) in coeffs.iter().enumerate() {
        e.add_term(&names(i), int(*k));
    }
    e
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn strong_duality((a, b, c) in arb_lp()) {
        // Primal, boxed so that it is bounded; b ≥ 0 keeps 0 feasible.
        let mut primal = LpProblem::new();
        for j in 0..3 {
            primal.add_nonneg_var(&var(j));
        }
        let mut rows = a.clone();
        let mut rhs = b.clone();
        for j in 0..3 {
            let mut r = vec![0; 3];
            r[j] = 1;
            rows.push(r);
            rhs.push(5);
        }
        for (r, k) in rows.iter().zip(&rhs) {
            primal.le(&form(r, var), &LinExpr::constant(int(*k)));
        }
        primal.set_objective(Sense::Maximize, form(&c, var));
        let LpOutcome::Feasible { values, optimum: Some(p) } = lp_solve(&primal) else {
            return Err(TestCaseError::fail("primal should be feasible and bounded"));
        };
        // The witness satisfies every row exactly and attains the optimum.
        let point: BTreeMap<String, Rat> = values.clone();
        for c in primal.constraints() {
            prop_assert!(c.holds(&point));
        }
        prop_assert_eq!(form(&c, var).eval_map(&point), p.clone());

        // Dual: min b·y, Aᵀy ≥ c, y ≥ 0.
        let dual_name = |i: usize| format!("u{i}");
        let mut dual = LpProblem::new();
        for i in 0..rows.len() {
            dual.add_nonneg_var(&dual_name(i));
        }
        for j in 0..3 {
            let col: Vec<i64> = rows.iter().map(|r| r[j]).collect();
            dual.le(&LinExpr::constant(int(c[j])), &form(&col, dual_name));
        }
        dual.set_objective(Sense::Minimize, form(&rhs, dual_name));
        let LpOutcome::Feasible { optimum: Some(d), .. } = lp_solve(&dual) else {
            return Err(TestCaseError::fail("dual should be feasible and bounded"));
        };
        prop_assert_eq!(p, d);
    }
}

fn arb_atom() -> impl Strategy<Value = BExpr> {
    let op = prop_oneof![Just(CmpOp::Le), Just(CmpOp::Lt), Just(CmpOp::Ge), Just(CmpOp::Gt), Just(CmpOp::Eq)];
    (-3i64..=3, -3i64..=3, -4i64..=4, op).prop_map(|(p, q, k, op)| {
        let lhs = Expr::Add(
            Box::new(Expr::Mul(Box::new(Expr::int(p)), Box::new(Expr::var("x")))),
            Box::new(Expr::Mul(Box::new(Expr::int(q)), Box::new(Expr::var("y")))),
        );
        BExpr::Cmp(lhs, op, Expr::int(k))
    })
}

fn arb_pred() -> impl Strategy<Value = BExpr> {
    arb_atom().prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|b| BExpr::Not(Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| BExpr::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| BExpr::Or(Box::new(a), Box::new(b))),
        ]
    })
}

fn eval_int(e: &Expr, x: i64, y: i64) -> i64 {
    match e {
        Expr::Num(r) => r.to_integer().try_into().unwrap(),
        Expr::Var(v) => if v == "x" { x } else { y },
        Expr::Neg(a) => -eval_int(a, x, y),
        Expr::Add(a, b) => eval_int(a, x, y) + eval_int(b, x, y),
        Expr::Sub(a, b) => eval_int(a, x, y) - eval_int(b, x, y),
        Expr::Mul(a, b) => eval_int(a, x, y) * eval_int(b, x, y),
        Expr::Div(..) => unreachable!(),
    }
}

fn holds(b: &BExpr, x: i64, y: i64) -> bool {
    match b {
        BExpr::True => true,
        BExpr::False => false,
        BExpr::Cmp(l, op, r) => {
            let (l, r) = (eval_int(l, x, y), eval_int(r, x, y));
            match op {
                CmpOp::Le => l <= r,
                CmpOp::Lt => l < r,
                CmpOp::Ge => l >= r,
                CmpOp::Gt => l > r,
                CmpOp::Eq => l == r,
            }
        }
        BExpr::Not(a) => !holds(a, x, y),
        BExpr::And(a, b) => holds(a, x, y) && holds(b, x, y),
        BExpr::Or(a, b) => holds(a, x, y) || holds(b, x, y),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dnf_matches_direct_evaluation(b in arb_pred()) {
        let vars = vec!["x".to_string(), "y".to_string()];
        let dnf = to_dnf(&b, &vars).unwrap();
        for x in -5..=5 {
            for y in -5..=5 {
                prop_assert_eq!(dnf.contains(&[int(x), int(y)]), holds(&b, x, y), "at ({}, {})", x, y);
            }
        }
    }
}

#[test]
fn dnf_of_parsed_guard() {
    let vars = vec!["x".to_string(), "y".to_string()];
    let b = parse_bexpr("not (x >= 1 and y < 2) or x == y").unwrap();
    let dnf = to_dnf(&b, &vars).unwrap();
    assert!(dnf.contains(&[int(0), int(5)]));
    assert!(dnf.contains(&[int(3), int(3)]));
    assert!(!dnf.contains(&[int(3), int(1)]));
}
