//! Oracles shared by the integration tests. Each one recomputes its answer
//! from first principles rather than through the library.
#![allow(dead_code)]

use std::path::PathBuf;

use dsmv_core::frontend::parse_expr;
use dsmv_core::ratlp::{farkas_encode, lp_solve, LpProblem, Polyhedron};
use dsmv_core::{LinExpr, Poly, Rat};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(root().join(rel)).unwrap()
}

pub fn rat(s: &str) -> Rat {
    parse_expr(s).unwrap().constant_value().unwrap()
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(n.into())
}

/// Single-step edits to the shipped derivation, each breaking exactly the named step.
pub const MUTANTS: [(&str, &str, &str); 10] = [
    ("i", "<6*y + 2>", "<6*y + 3>"),
    ("ii", "<6*y + 1>", "<6*y + 2>"),
    ("iii", "from i, ii", "from ii, i"),
    ("iv", "{6*y}", "{6*y + 1}"),
    ("iv", "while y >= 0", "while y >= -1"),
    ("viii", "from vii, iv", "from vi, iv"),
    ("ix", "<10*x + 2>", "<10*x + 1>"),
    ("xiii", "<10*x>", "<10*x + 1>"),
    ("xix", "from xviii:", "from xviii with epsilon = 5:"),
    ("xxvi", "from xxv, xix", "from xviii, xix"),
];

/// The shipped derivation with `from` replaced by `to` inside step `id`.
pub fn mutate(id: &str, from: &str, to: &str) -> String {
    let text = read("derivations/appendix_c.drv");
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().position(|l| l.starts_with(&format!("step {id} "))).unwrap();
    // Steps may continue on indented lines.
    let end = (start + 1..lines.len()).find(|&i| !lines[i].starts_with(' ')).unwrap_or(lines.len());
    let block = lines[start..end].join("\n");
    assert_eq!(block.matches(from).count(), 1, "{from} in step {id}");
    let mut out: Vec<String> = lines[..start].iter().map(|s| s.to_string()).collect();
    out.push(block.replace(from, to));
    out.extend(lines[end..].iter().map(|s| s.to_string()));
    out.join("\n")
}

/// Fair ±1 walk from 1 over all `2^steps` sign sequences; fraction reaching 2.
pub fn enumerate_absorption(steps: u32) -> Rat {
    let hits = (0u32..1 << steps)
        .filter(|mask| {
            let mut x = 1;
            (0..steps).any(|i| {
                x += if mask >> i & 1 == 1 { 1 } else { -1 };
                x == 2
            })
        })
        .count();
    Rat::new(hits.into(), BigInt::one() << steps)
}

/// Exact `P(S_n ≥ λ)` for the ±1 walk with `P(+1) = 1/4`, over all `2^n` paths.
pub fn drifted_tail(n: u32, lam: &Rat) -> Rat {
    let (up, down) = (rat("1/4"), rat("3/4"));
    let mut total = Rat::zero();
    for mask in 0u32..1 << n {
        let ups = mask.count_ones() as i64;
        if &int(2 * ups - n as i64) >= lam {
            let mut p = Rat::one();
            for i in 0..n {
                p *= if mask >> i & 1 == 1 { &up } else { &down };
            }
            total += p;
        }
    }
    total
}

/// A random polyhedron in the plane: a box plus a few random rows, and a
/// random halfspace `c·(x, y) ≤ d`.
pub struct FarkasCase {
    pub poly: Poly,
    pub c: [i64; 2],
    pub d: i64,
    pub bound: i64,
}

pub fn random_case(rng: &mut impl Rng) -> FarkasCase {
    let vars = vec!["x".to_string(), "y".to_string()];
    let bound = rng.random_range(1..=4i64);
    let mut p = Polyhedron::universe(&vars);
    for (row, rhs) in [([1, 0], bound), ([-1, 0], bound), ([0, 1], bound), ([0, -1], bound)] {
        p.push_row(row.iter().map(|k| int(*k)).collect(), int(rhs));
    }
    for _ in 0..rng.random_range(0..=3) {
        let row = [rng.random_range(-3..=3i64), rng.random_range(-3..=3i64)];
        p.push_row(row.iter().map(|k| int(*k)).collect(), int(rng.random_range(-4..=4)));
    }
    FarkasCase {
        poly: p,
        c: [rng.random_range(-3..=3), rng.random_range(-3..=3)],
        d: rng.random_range(-6..=6),
        bound,
    }
}

/// Maximum of `c·v` over the vertices of a bounded plane polyhedron, found
/// by intersecting every pair of boundary lines; `None` when it is empty.
pub fn vertex_max(p: &Poly, c: [i64; 2]) -> Option<Rat> {
    let (a, b) = (p.a(), p.b());
    let mut best: Option<Rat> = None;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let det = &a[i][0] * &a[j][1] - &a[i][1] * &a[j][0];
            if det.is_zero() {
                continue;
            }
            let x = (&b[i] * &a[j][1] - &a[i][1] * &b[j]) / &det;
            let y = (&a[i][0] * &b[j] - &b[i] * &a[j][0]) / &det;
            let inside = (0..a.len()).all(|k| &a[k][0] * &x + &a[k][1] * &y <= b[k]);
            if inside {
                let v = int(c[0]) * &x + int(c[1]) * &y;
                if best.as_ref().is_none_or(|m| v > *m) {
                    best = Some(v);
                }
            }
        }
    }
    best
}

/// Whether the Farkas encoding of `poly ⊆ {c·x ≤ d}` is satisfiable.
pub fn farkas_feasible(case: &FarkasCase) -> bool {
    let c: Vec<LinExpr> = case.c.iter().map(|k| LinExpr::constant(int(*k))).collect();
    let fa = farkas_encode(&case.poly, &c, &LinExpr::constant(int(case.d)), "xi").unwrap();
    let mut lp = LpProblem::new();
    fa.add_to(&mut lp);
    lp_solve(&lp).is_feasible()
}

/// Exact real inclusion by vertex enumeration; an empty polyhedron is included.
pub fn vertex_included(case: &FarkasCase) -> bool {
    vertex_max(&case.poly, case.c).is_none_or(|m| m <= int(case.d))
}

/// An integer point of the box that lies in the polyhedron but violates the halfspace.
pub fn grid_counterexample(case: &FarkasCase) -> Option<(i64, i64)> {
    let b = case.bound;
    (-b..=b).flat_map(|x| (-b..=b).map(move |y| (x, y))).find(|&(x, y)| {
        case.poly.contains(&[int(x), int(y)]) && case.c[0] * x + case.c[1] * y > case.d
    })
}
