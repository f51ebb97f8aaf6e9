use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn dsmv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsmv"))
        .args(args)
        .current_dir(root())
        .env_remove("DSMV_CI")
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    dsmv(args).status.code().unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    let out = dsmv(&full);
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{args:?}: {e}\n{}", String::from_utf8_lossy(&out.stderr)))
}

fn fixtures() -> Vec<(String, Option<String>)> {
    let mut out: Vec<_> = std::fs::read_dir(root().join("programs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "pp"))
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let inv = format!("inv/{name}.inv");
            let inv = root().join(&inv).exists().then_some(inv);
            (name, inv)
        })
        .collect();
    out.sort();
    out
}

fn with_inv<'a>(mut args: Vec<&'a str>, inv: &'a Option<String>) -> Vec<&'a str> {
    if let Some(i) = inv {
        args.extend(["--inv", i.as_str()]);
    }
    args
}

#[test]
fn exit_code_matrix() {
    let not_provable = ["counterexample", "program3"];
    for (name, inv) in fixtures() {
        let prog = format!("programs/{name}.pp");
        assert_eq!(code(&["parse", &prog]), 0, "parse {name}");
        let want_synth = if name == "counterexample" { 1 } else { 0 };
        assert_eq!(code(&with_inv(vec!["synth", &prog], &inv)), want_synth, "synth {name}");
        let want_prove = if not_provable.contains(&name.as_str()) { 1 } else { 0 };
        assert_eq!(code(&with_inv(vec!["prove", &prog], &inv)), want_prove, "prove {name}");
    }
    for (prog, cert, want) in [
        ("mini_roulette", "mini_roulette", 0),
        ("mini_roulette", "mini_roulette_hand", 0),
        ("program1", "program1", 0),
        ("program2", "program2", 0),
        ("program3", "program3", 1),
    ] {
        let args = [
            "check",
            &format!("programs/{prog}.pp"),
            "--inv",
            &format!("inv/{prog}.inv"),
            "--dsm",
            &format!("certs/{cert}.dsm"),
        ];
        assert_eq!(code(&args), want, "check {cert}");
    }
    assert_eq!(code(&["check-derivation", "derivations/appendix_c.drv", "--compile", "xix"]), 0);
}

#[test]
fn input_errors_exit_two() {
    let dir = std::env::temp_dir().join(format!("dsmv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.pp");
    std::fs::write(&bad, "while x >= do od").unwrap();
    let dangling = dir.join("dangling.drv");
    std::fs::write(&dangling, "step 1 rule 10 from 7, 8: Tm(skip; skip)").unwrap();
    let bad = bad.to_str().unwrap();
    for args in [
        vec!["synth", "missing.pp"],
        vec!["parse", bad],
        vec!["prove", "programs/program1.pp", "--inv", "missing.inv"],
        vec!["check-derivation", dangling.to_str().unwrap()],
        vec!["synth", "programs/program1.pp", "--loop", "4"],
        vec!["sim", "programs/geo.pp", "--sched", "sideways"],
        vec!["sim", "programs/geo.pp", "--budget", "0"],
        vec!["analyze-ce", "--y0", "7"],
        vec!["frobnicate"],
        vec!["--format", "yaml", "parse", "programs/geo.pp"],
    ] {
        assert_eq!(code(&args), 2, "{args:?}");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn invalid_derivation_exits_one() {
    let text = std::fs::read_to_string(root().join("derivations/appendix_c.drv")).unwrap();
    let path = std::env::temp_dir().join(format!("dsmv-mutant-{}.drv", std::process::id()));
    std::fs::write(&path, text.replacen("<6*y + 2>", "<6*y + 3>", 1)).unwrap();
    let out = json(&["check-derivation", path.to_str().unwrap()]);
    assert_eq!(out["result"], "invalid");
    assert_eq!(out["step"], "i");
    assert_eq!(out["rule"], 3);
    assert_eq!(code(&["check-derivation", path.to_str().unwrap()]), 1);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn synth_report_fields() {
    let out = json(&["synth", "programs/program1.pp", "--inv", "inv/program1.inv"]);
    for key in ["program", "result", "runtime_s", "eta_in", "a", "b", "epsilon", "c", "eta"] {
        assert!(out.get(key).is_some(), "missing {key}");
    }
    assert_eq!(out["result"], "success");
    let fail = json(&["synth", "programs/counterexample.pp", "--inv", "inv/counterexample.inv"]);
    assert_eq!(fail["result"], "failure");
    assert_eq!(fail["reason"], "LP infeasible");
}

#[test]
fn ci_mode_is_deterministic() {
    let args = ["--ci", "synth", "programs/program2.pp", "--inv", "inv/program2.inv"];
    let a = dsmv(&args);
    assert_eq!(a.stdout, dsmv(&args).stdout);
    assert!(!String::from_utf8_lossy(&a.stdout).contains(" s)"));

    let sim = ["--ci", "--format", "json", "sim", "programs/rdwalk.pp", "--init", "x=10", "--runs", "500", "--seed", "5"];
    let a = dsmv(&sim);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, dsmv(&sim).stdout);
    assert_eq!(code(&["--ci", "sim", "programs/rdwalk.pp", "--init", "x=10"]), 2);
    assert_eq!(code(&["--ci", "analyze-ce", "--k", "1"]), 2);
}

#[test]
fn dump_lp_is_byte_identical() {
    let dir = std::env::temp_dir().join(format!("dsmv-lp-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (p1, p2) = (dir.join("a.lp"), dir.join("b.lp"));
    for p in [&p1, &p2] {
        let args = ["synth", "programs/mini_roulette.pp", "--inv", "inv/mini_roulette.inv", "--dump-lp", p.to_str().unwrap()];
        assert_eq!(code(&args), 0);
    }
    let a = std::fs::read(&p1).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(&p2).unwrap());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn emitted_certificate_checks() {
    let path = std::env::temp_dir().join(format!("dsmv-cert-{}.dsm", std::process::id()));
    let p = path.to_str().unwrap();
    assert_eq!(code(&["prove", "programs/mini_roulette.pp", "--inv", "inv/mini_roulette.inv", "--emit-cert", p]), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.matches("loop ").count(), 2);
    assert_eq!(code(&["check", "programs/mini_roulette.pp", "--inv", "inv/mini_roulette.inv", "--dsm", p]), 0);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn sim_histogram_and_stats() {
    let out = json(&[
        "sim",
        "programs/program1.pp",
        "--init",
        "x=5,y=3",
        "--runs",
        "200",
        "--seed",
        "1",
        "--trace-dsm",
        "certs/program1.dsm",
    ]);
    assert_eq!(out["runs"], 200);
    assert_eq!(out["terminated"].as_u64().unwrap() + out["censored"].as_u64().unwrap(), 200);
    for bin in out["diff_histogram"].as_array().unwrap() {
        let d: f64 = bin[0].as_str().unwrap().parse().unwrap();
        assert!((-4.0..=8.0).contains(&d));
    }
}

#[test]
fn analyze_ce_report() {
    let out = json(&["analyze-ce", "--y0", "100", "--k", "0", "--runs", "100", "--seed", "1"]);
    assert_eq!(out["bound"], "1");
    assert_eq!(out["frequency"], 1.0);
    let out = json(&["analyze-ce", "--y0", "100", "--k", "3", "--runs", "2000", "--seed", "1"]);
    assert_eq!(out["absorption"].as_array().unwrap().len(), 3);
    assert_eq!(out["agrees"], true);
}

#[test]
fn parse_emits_cfg() {
    let out = json(&["parse", "programs/counterexample.pp", "--emit-cfg"]);
    assert_eq!(out["loops"], serde_json::json!([3, 1]));
    assert!(out["cfg"].as_str().unwrap().starts_with("digraph"));
}
