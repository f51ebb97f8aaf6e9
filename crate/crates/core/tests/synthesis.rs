use std::path::PathBuf;
use std::time::Instant;

use dsmv_core::cfg::{build_cfg, loop_forest, loop_subcfg, Cfg};
use dsmv_core::dsm::{check_dsm, Condition};
use dsmv_core::frontend::{parse_bexpr, parse_program, to_dnf};
use dsmv_core::invariants::{guard_default_invariant, load_invariant, Invariant};
use dsmv_core::synthesis::{assemble_lp, synthesize_dsm, FailReason, SynthesisOutcome, Template};
use dsmv_core::{LinExpr, Rat};

fn read(rel: &str) -> String {
    std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)).unwrap()
}

/// Outermost loop of a program with the given invariant text (guard defaults when `None`).
fn outer_src(src: &str, inv_text: Option<&str>) -> (Cfg, Invariant) {
    let prog = parse_program(src).unwrap();
    let cfg = build_cfg(&prog);
    let inv = match inv_text {
        Some(t) => load_invariant(t, &cfg).unwrap(),
        None => guard_default_invariant(&cfg),
    };
    let sub = loop_subcfg(&cfg, &loop_forest(&prog)[0]);
    let inv = inv.restrict(&sub);
    (sub, inv)
}

fn outer(name: &str, with_inv: bool) -> (Cfg, Invariant) {
    let inv = with_inv.then(|| read(&format!("inv/{name}.inv")));
    outer_src(&read(&format!("programs/{name}.pp")), inv.as_deref())
}

fn succeeds(cfg: &Cfg, inv: &Invariant) -> bool {
    let t = Instant::now();
    let out = synthesize_dsm(cfg, inv).unwrap();
    assert!(t.elapsed().as_secs_f64() < 2.0);
    match out {
        SynthesisOutcome::Success(d) => {
            assert!(check_dsm(&d, cfg, inv).unwrap().passed());
            assert_eq!(d.epsilon, Rat::from_integer(1.into()));
            assert!(d.b >= &d.a + Rat::from_integer(1.into()));
            true
        }
        SynthesisOutcome::Fail(_) => false,
    }
}

#[test]
fn table1_successes() {
    for name in ["mini_roulette", "program1", "program2", "program3"] {
        let (cfg, inv) = outer(name, true);
        assert!(succeeds(&cfg, &inv), "{name}");
    }
}

#[test]
fn counterexample_is_infeasible() {
    let (cfg, inv) = outer("counterexample", true);
    assert_eq!(synthesize_dsm(&cfg, &inv).unwrap(), SynthesisOutcome::Fail(FailReason::LpInfeasible));
}

#[test]
fn stuttering_loop_is_infeasible() {
    let (cfg, inv) = outer_src("while x >= 0 do x := x od", None);
    assert_eq!(synthesize_dsm(&cfg, &inv).unwrap(), SynthesisOutcome::Fail(FailReason::LpInfeasible));
}

#[test]
fn table2_subset() {
    for name in ["ber", "bin", "sprdwalk", "rdwalk"] {
        let (cfg, inv) = outer(name, false);
        assert!(succeeds(&cfg, &inv), "{name}");
    }
    let (cfg, inv) = outer("geo", true);
    assert!(succeeds(&cfg, &inv), "geo");
}

#[test]
fn empty_head_invariant() {
    let (cfg, inv) = outer_src("while x >= 0 do x := x - 1 od", Some("inv 1: x >= 1 and x <= 0"));
    assert_eq!(synthesize_dsm(&cfg, &inv).unwrap(), SynthesisOutcome::Fail(FailReason::EmptyInvariant));
}

#[test]
fn group_counts_for_a_countdown() {
    let (cfg, inv) = outer_src("while x >= 1 do x := x - 1 od", None);
    let asm = assemble_lp(&Template::new(&cfg), &cfg, &inv).unwrap();
    let kinds: Vec<(u32, Condition)> = asm.groups.iter().map(|g| (g.label, g.condition)).collect();
    assert_eq!(kinds, vec![(1, Condition::D2), (1, Condition::D2), (1, Condition::D5), (2, Condition::D1)]);
}

#[test]
fn two_disjuncts_double_the_groups() {
    let src = "while x >= 1 do x := x - 1 od";
    let (cfg, one) = outer_src(src, Some("inv 2: x >= 1"));
    let (_, two) = outer_src(src, Some("inv 2: x >= 1 and x <= 5 | x >= 7"));
    let count = |inv: &Invariant| {
        let asm = assemble_lp(&Template::new(&cfg), &cfg, inv).unwrap();
        asm.groups.iter().filter(|g| g.label == 2).map(|g| g.inclusions.len()).sum::<usize>()
    };
    assert_eq!(count(&two), 2 * count(&one));
}

#[test]
fn worked_example_at_the_probabilistic_label() {
    let (cfg, inv) = outer("mini_roulette", true);
    let asm = assemble_lp(&Template::new(&cfg), &cfg, &inv).unwrap();
    let g = asm.groups.iter().find(|g| g.label == 5).unwrap();
    assert_eq!(g.condition, Condition::D4);
    let h = to_dnf(&parse_bexpr("x >= -7 and 1 <= y and y <= 9").unwrap(), &cfg.pvars).unwrap();
    assert_eq!(g.region, h.disjuncts()[0]);

    let v = |s: &str| LinExpr::var(s);
    let alpha = |l: u32, x: &str| v(&format!("alpha_{l}_{x}"));
    let coeffs = |f: &dyn Fn(&str) -> LinExpr| cfg.pvars.iter().map(|x| f(x)).collect::<Vec<_>>();
    let third = Rat::new(6.into(), 13.into());
    let rest = Rat::new(7.into(), 13.into());
    // a <= eta6 - eta5, eta6 - eta5 <= b, and the mixture decrease.
    let want = [
        (coeffs(&|x| alpha(5, x).sub(&alpha(6, x))), v("beta_6").sub(&v("beta_5")).sub(&v("a"))),
        (coeffs(&|x| alpha(6, x).sub(&alpha(5, x))), v("b").sub(&v("beta_6")).add(&v("beta_5"))),
        (
            coeffs(&|x| alpha(6, x).scale(&third).add(&alpha(7, x).scale(&rest)).sub(&alpha(5, x))),
            LinExpr::constant(Rat::from_integer((-1).into()))
                .sub(&v("beta_6").scale(&third))
                .sub(&v("beta_7").scale(&rest))
                .add(&v("beta_5")),
        ),
    ];
    for w in &want {
        assert!(g.inclusions.contains(w), "missing {:?}", w);
    }
}

#[test]
fn dump_is_deterministic() {
    for name in ["mini_roulette", "program2"] {
        let (cfg, inv) = outer(name, true);
        let a = assemble_lp(&Template::new(&cfg), &cfg, &inv).unwrap().lp.to_text();
        let b = assemble_lp(&Template::new(&cfg), &cfg, &inv).unwrap().lp.to_text();
        assert_eq!(a, b);
        assert!(a.starts_with("minimize: -a + b\n"));
    }
}
