use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use dsmv_core::cfg::{build_cfg, find_loop, loop_forest, loop_subcfg, Cfg, Node};
use dsmv_core::dsm::{check_dsm, check_partial_dsm, diff_range, load_dsm, Condition, DsmMap};
use dsmv_core::frontend::{parse_bexpr, parse_program, to_dnf};
use dsmv_core::invariants::{load_invariant, Invariant};
use dsmv_core::{LinExpr, Rat};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(root().join(rel)).unwrap()
}

fn rat(n: i64, d: i64) -> Rat {
    Rat::new(n.into(), d.into())
}

/// Program, invariant and first certificate, scoped to the certified loop.
fn fixture(name: &str, cert: &str) -> (Cfg, Invariant, DsmMap) {
    let prog = parse_program(&read(&format!("programs/{name}.pp"))).unwrap();
    let cfg = build_cfg(&prog);
    let inv = load_invariant(&read(&format!("inv/{name}.inv")), &cfg).unwrap();
    let (l, dsm) = load_dsm(&read(&format!("certs/{cert}.dsm"))).unwrap().remove(0);
    let forest = loop_forest(&prog);
    let sub = loop_subcfg(&cfg, find_loop(&forest, l).unwrap());
    let inv = inv.restrict(&sub);
    (sub, inv, dsm)
}

#[test]
fn mini_roulette_table() {
    let (cfg, inv, dsm) = fixture("mini_roulette", "mini_roulette");
    assert_eq!((dsm.a.clone(), dsm.b.clone()), (rat(-353, 5), rat(778, 5)));
    assert!(check_dsm(&dsm, &cfg, &inv).unwrap().passed());
}

#[test]
fn mini_roulette_hand_map() {
    let (cfg, inv, dsm) = fixture("mini_roulette", "mini_roulette_hand");
    assert_eq!(dsm.epsilon, rat(4, 299));
    assert_eq!(dsm.c, Rat::one());
    assert!(check_dsm(&dsm, &cfg, &inv).unwrap().passed());
    // The differences realized on the invariant span exactly [a, b].
    assert_eq!(diff_range(&dsm, &cfg, &inv).unwrap(), (Some(rat(-280, 299)), Some(rat(617, 299))));
}

#[test]
fn hand_map_inner_loop_is_partial() {
    let prog = parse_program(&read("programs/mini_roulette.pp")).unwrap();
    let cfg = build_cfg(&prog);
    let inv = load_invariant(&read("inv/mini_roulette.inv"), &cfg).unwrap();
    let (_, dsm) = load_dsm(&read("certs/mini_roulette_hand.dsm")).unwrap().remove(0);
    let inner = loop_subcfg(&cfg, find_loop(&loop_forest(&prog), 3).unwrap());
    let mut eta: BTreeMap<_, _> = dsm.eta.iter().filter(|(l, _)| (3..=11).contains(*l)).map(|(l, e)| (*l, e.clone())).collect();
    // The inner exit target is the outer head, which becomes the sub-CFG's terminal.
    eta.insert(inner.l_out, dsm.eta[&inner.l_out].clone());
    let part = DsmMap { eta, ..dsm };
    assert!(check_partial_dsm(&part, &inner, &inv.restrict(&inner)).unwrap().passed());
}

#[test]
fn program1_table() {
    let (cfg, inv, dsm) = fixture("program1", "program1");
    assert!(check_dsm(&dsm, &cfg, &inv).unwrap().passed());
    assert_eq!(diff_range(&dsm, &cfg, &inv).unwrap(), (Some(rat(-4, 1)), Some(rat(8, 1))));
}

#[test]
fn program2_table() {
    let (cfg, inv, dsm) = fixture("program2", "program2");
    assert_eq!(dsm.b, rat(19, 2));
    assert!(check_dsm(&dsm, &cfg, &inv).unwrap().passed());
}

#[test]
fn program3_table_breaks_lower_difference_bound() {
    // eta(9) - eta(6) = b - z on I(6) with b < 0 has no lower bound.
    let (cfg, inv, dsm) = fixture("program3", "program3");
    let r = check_dsm(&dsm, &cfg, &inv).unwrap();
    assert_eq!(r.violations.len(), 1);
    let v = &r.violations[0];
    assert_eq!((v.condition, v.label, v.target), (Condition::D2, 6, Some(9)));
    assert_eq!(diff_range(&dsm, &cfg, &inv).unwrap().0, None);
}

#[test]
fn checks_are_fast() {
    for (p, c) in [("mini_roulette", "mini_roulette"), ("program1", "program1"), ("program2", "program2"), ("program3", "program3")] {
        let (cfg, inv, dsm) = fixture(p, c);
        let t = Instant::now();
        check_dsm(&dsm, &cfg, &inv).unwrap();
        assert!(t.elapsed().as_secs_f64() < 1.0, "{c}");
    }
}

#[test]
fn scale_invariance() {
    for (p, c) in [
        ("mini_roulette", "mini_roulette"),
        ("mini_roulette", "mini_roulette_hand"),
        ("program1", "program1"),
        ("program2", "program2"),
        ("program3", "program3"),
    ] {
        let (cfg, inv, dsm) = fixture(p, c);
        let base = check_dsm(&dsm, &cfg, &inv).unwrap();
        let key = |r: &dsmv_core::dsm::CheckReport| {
            r.violations.iter().map(|v| (v.condition, v.label, v.target, v.disjunct)).collect::<Vec<_>>()
        };
        for k in [rat(1, 3), rat(2, 1), rat(299, 1)] {
            let r = check_dsm(&dsm.scale(&k), &cfg, &inv).unwrap();
            assert_eq!(key(&r), key(&base), "{c} scaled by {k}");
        }
    }
}

#[test]
fn strengthening_invariants_keeps_passes() {
    let (cfg, inv, dsm) = fixture("program1", "program1");
    let mut strong = inv.clone();
    for l in cfg.labels() {
        let extra = to_dnf(&parse_bexpr("y <= 50 and x <= 40").unwrap(), &cfg.pvars).unwrap();
        strong.set(l, inv.get(l).conjoin(&extra));
    }
    assert!(check_dsm(&dsm, &cfg, &strong).unwrap().passed());
}

// Brute force over integer boxes.

const BOX_PROG: &str = "
dist r = {-1: 1/2, 1: 1/4, 2: 1/4};
while y >= 1 do
    if * then x := x + r else skip fi;
    if prob(1/3) then y := y - 1 else y := y - 2 fi
od
";

fn box_inv(cfg: &Cfg) -> Invariant {
    let mut inv = Invariant::trivial(cfg);
    let b = to_dnf(&parse_bexpr("-3 <= x and x <= 3 and -1 <= y and y <= 4").unwrap(), &cfg.pvars).unwrap();
    for l in cfg.labels() {
        inv.set(l, b.clone());
    }
    inv
}

fn eval(e: &LinExpr, x: i64, y: i64) -> Rat {
    let mut env = BTreeMap::new();
    env.insert("x".to_string(), Rat::from_integer(x.into()));
    env.insert("y".to_string(), Rat::from_integer(y.into()));
    e.eval_map(&env)
}

/// Pointwise evaluation of every condition; returns the violated (label, condition) pairs.
fn brute(dsm: &DsmMap, cfg: &Cfg) -> Vec<(u32, Condition)> {
    let mut bad = std::collections::BTreeSet::new();
    let eta = |l: u32, x: i64, y: i64| eval(&dsm.eta[&l], x, y);
    let inb = |a: i64, lo, hi| a >= lo && a <= hi;
    let (a, b, eps) = (&dsm.a, &dsm.b, &dsm.epsilon);
    for x in -3..=3i64 {
        for y in -1..=4i64 {
            for (l, node) in cfg.nodes() {
                let here = eta(l, x, y);
                let within = |d: &Rat| a <= d && d <= b;
                match node {
                    Node::Terminal => {}
                    Node::Assign { update, next } => {
                        let mut mean = Rat::zero();
                        for s in cfg.samples(update).unwrap() {
                            let rv = s.values.first().map(|(_, v)| *v).unwrap_or(0);
                            // Updates of BOX_PROG by label.
                            let (nx, ny) = match l {
                                3 => (x + rv, y),
                                6 => (x, y - 1),
                                7 => (x, y - 2),
                                _ => (x, y),
                            };
                            let d = eta(*next, nx, ny) - &here;
                            if !within(&d) {
                                bad.insert((l, Condition::D1));
                            }
                            mean += d * &s.prob;
                        }
                        if mean > -eps.clone() {
                            bad.insert((l, Condition::D1));
                        }
                    }
                    Node::Branch { then_to, else_to, .. } => {
                        let target = if y >= 1 { *then_to } else { *else_to };
                        let d = eta(target, x, y) - &here;
                        if !within(&d) || d > -eps.clone() {
                            bad.insert((l, Condition::D2));
                        }
                    }
                    Node::Nondet { then_to, else_to } => {
                        for t in [*then_to, *else_to] {
                            let d = eta(t, x, y) - &here;
                            if !within(&d) || d > -eps.clone() {
                                bad.insert((l, Condition::D3));
                            }
                        }
                    }
                    Node::Prob { p, then_to, else_to } => {
                        let d1 = eta(*then_to, x, y) - &here;
                        let d2 = eta(*else_to, x, y) - &here;
                        if !within(&d1) || !within(&d2) || &d1 * p + &d2 * (Rat::one() - p) > -eps.clone() {
                            bad.insert((l, Condition::D4));
                        }
                    }
                }
            }
            if y >= 1 && inb(x, -3, 3) && eta(cfg.l_in, x, y) < dsm.c {
                bad.insert((cfg.l_in, Condition::D5));
            }
        }
    }
    bad.into_iter().collect()
}

fn arb_map(labels: Vec<u32>) -> impl Strategy<Value = DsmMap> {
    let n = labels.len();
    (
        prop::collection::vec((-3i64..=3, -3i64..=3, -12i64..=12), n),
        1i64..=3,
        -12i64..=0,
        0i64..=12,
        -6i64..=2,
    )
        .prop_map(move |(coeffs, eps, a, b, c)| DsmMap {
            eta: labels
                .iter()
                .zip(&coeffs)
                .map(|(l, (cx, cy, k))| {
                    let e = LinExpr::from_terms(
                        [("x", Rat::from_integer((*cx).into())), ("y", Rat::from_integer((*cy).into()))],
                        Rat::from_integer((*k).into()),
                    );
                    (*l, e)
                })
                .collect(),
            epsilon: Rat::from_integer(eps.into()),
            a: Rat::from_integer(a.into()),
            b: Rat::from_integer(b.into()),
            c: Rat::from_integer(c.into()),
        })
}

fn violated(dsm: &DsmMap, cfg: &Cfg, inv: &Invariant) -> Vec<(u32, Condition)> {
    let mut v: Vec<_> = check_dsm(dsm, cfg, inv).unwrap().violations.iter().map(|v| (v.label, v.condition)).collect();
    v.dedup();
    v
}

#[test]
fn brute_force_agrees_on_a_passing_map() {
    let cfg = build_cfg(&parse_program(BOX_PROG).unwrap());
    let inv = box_inv(&cfg);
    // eta = 4y + k_l with decreasing offsets along the body.
    let offs = [(1, 12), (2, 11), (3, 10), (4, 10), (5, 9), (6, 9), (7, 5), (8, 0)];
    let dsm = DsmMap {
        eta: offs
            .iter()
            .map(|(l, k)| {
                let e = if *l == 8 { LinExpr::zero() } else { LinExpr::term("y", Rat::from_integer(4.into())) };
                (*l, e.add(&LinExpr::constant(Rat::from_integer((*k).into()))))
            })
            .collect(),
        epsilon: Rat::one(),
        a: rat(-30, 1),
        b: rat(30, 1),
        c: Rat::zero(),
    };
    assert_eq!(brute(&dsm, &cfg), vec![]);
    assert_eq!(violated(&dsm, &cfg, &inv), vec![]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]
    #[test]
    fn brute_force_agrees(dsm in arb_map((1..=8).collect())) {
        let cfg = build_cfg(&parse_program(BOX_PROG).unwrap());
        let inv = box_inv(&cfg);
        prop_assert_eq!(violated(&dsm, &cfg, &inv), brute(&dsm, &cfg));
    }
}
