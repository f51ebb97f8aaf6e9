use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dsmv_core::cfg::{build_cfg, find_loop, loop_forest, loop_subcfg, Cfg};
use dsmv_core::dsm::{check_dsm, load_dsm, render_dsm};
use dsmv_core::engine::{check_derivation, compile_while, parse_derivation, prove_termination, DerivationVerdict, ProofOutcome};
use dsmv_core::frontend::{parse_program, Program};
use dsmv_core::invariants::{guard_default_invariant, load_invariant, Invariant};
use dsmv_core::simulator::{analyze_ce, run_many, run_one, trace_eta, ExecCfg, Policy, RunOutcome};
use dsmv_core::synthesis::{assemble_lp, synthesize_dsm, SynthesisOutcome, Template};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] dsmv_core::Error),
    #[error("{0}")]
    Usage(String),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "dsmv", version, about = "Almost-sure termination prover for probabilistic programs")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Require explicit seeds for randomized commands (also set by DSMV_CI).
    #[arg(long, global = true)]
    ci: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a program and print its labels and loops.
    Parse {
        program: PathBuf,
        /// Print the control-flow graph in DOT syntax.
        #[arg(long)]
        emit_cfg: bool,
    },
    /// Synthesize a DSM-map for the whole program or one loop.
    Synth {
        program: PathBuf,
        #[arg(long)]
        inv: Option<PathBuf>,
        /// Restrict to the loop headed at this label.
        #[arg(long = "loop")]
        loop_label: Option<u32>,
        /// Write the LP to this file ("-" for stdout).
        #[arg(long)]
        dump_lp: Option<PathBuf>,
        /// Write the certificate in .dsm syntax to this file.
        #[arg(long)]
        emit_cert: Option<PathBuf>,
    },
    /// Check DSM certificates against a program and invariant.
    Check {
        program: PathBuf,
        #[arg(long)]
        inv: Option<PathBuf>,
        #[arg(long)]
        dsm: PathBuf,
    },
    /// Prove almost-sure termination loop by loop.
    Prove {
        program: PathBuf,
        #[arg(long)]
        inv: Option<PathBuf>,
        /// Write all loop certificates in .dsm syntax to this file.
        #[arg(long)]
        emit_cert: Option<PathBuf>,
    },
    /// Validate a hand-written derivation.
    CheckDerivation {
        derivation: PathBuf,
        /// Also compile the while step with this id into a DSM-map and check it.
        #[arg(long)]
        compile: Option<String>,
    },
    /// Monte-Carlo simulation.
    Sim {
        program: PathBuf,
        /// Initial values, e.g. "x=1,y=100"; unset variables are 0.
        #[arg(long, default_value = "")]
        init: String,
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        #[arg(long, default_value = "uniform")]
        sched: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Histogram of one-step differences of this map along the runs (CSV).
        #[arg(long)]
        trace_dsm: Option<PathBuf>,
    },
    /// Survival analysis for the nested random-walk counterexample.
    AnalyzeCe {
        #[arg(long, default_value_t = 100)]
        y0: i64,
        #[arg(long, default_value_t = 10)]
        k: u32,
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Command result: exit status plus both renderings.
struct Report {
    ok: bool,
    text: String,
    json: Value,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if path == Path::new("-") {
        print!("{contents}");
        return Ok(());
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load_program(path: &Path) -> Result<(Program, Cfg)> {
    let prog = parse_program(&read(path)?)?;
    let cfg = build_cfg(&prog);
    Ok((prog, cfg))
}

fn load_inv(path: Option<&Path>, cfg: &Cfg) -> Result<Invariant> {
    match path {
        Some(p) => Ok(load_invariant(&read(p)?, cfg)?),
        None => Ok(guard_default_invariant(cfg)),
    }
}

fn loop_cfg(prog: &Program, cfg: &Cfg, label: u32) -> Result<Cfg> {
    let forest = loop_forest(prog);
    let node = find_loop(&forest, label).ok_or_else(|| CliError::Usage(format!("no loop at label {label}")))?;
    Ok(loop_subcfg(cfg, node))
}

fn seed(seed: Option<u64>, ci: bool) -> Result<u64> {
    match (seed, ci) {
        (Some(s), _) => Ok(s),
        (None, false) => Ok(0),
        (None, true) => Err(CliError::Usage("--seed is required in CI mode".into())),
    }
}

fn cmd_parse(program: &Path, emit_cfg: bool) -> Result<Report> {
    let (prog, cfg) = load_program(program)?;
    let loops: Vec<u32> = loop_forest(&prog).iter().flat_map(|n| n.post_order()).map(|n| n.label).collect();
    let mut text = format!(
        "program variables: {}\nsampled variables: {}\nlabels: {} (entry {}, exit {})\nloops: {}\n",
        cfg.pvars.join(", "),
        cfg.rvars.join(", "),
        cfg.labels().len(),
        cfg.l_in,
        cfg.l_out,
        loops.iter().map(u32::to_string).collect::<Vec<_>>().join(", ")
    );
    if emit_cfg {
        text.push_str(&cfg.to_dot());
    }
    let mut json = json!({
        "command": "parse",
        "pvars": cfg.pvars,
        "rvars": cfg.rvars,
        "labels": cfg.labels(),
        "l_in": cfg.l_in,
        "l_out": cfg.l_out,
        "loops": loops,
    });
    if emit_cfg {
        json["cfg"] = json!(cfg.to_dot());
    }
    Ok(Report { ok: true, text, json })
}

struct SynthArgs<'a> {
    program: &'a Path,
    inv: Option<&'a Path>,
    loop_label: Option<u32>,
    dump_lp: Option<&'a Path>,
    emit_cert: Option<&'a Path>,
    timing: bool,
}

fn cmd_synth(a: SynthArgs) -> Result<Report> {
    let (prog, whole) = load_program(a.program)?;
    let inv = load_inv(a.inv, &whole)?;
    let cfg = match a.loop_label {
        Some(l) => loop_cfg(&prog, &whole, l)?,
        None => whole,
    };
    let inv = inv.restrict(&cfg);
    if let Some(path) = a.dump_lp {
        let asm = assemble_lp(&Template::new(&cfg), &cfg, &inv)?;
        write(path, &asm.lp.to_text())?;
    }
    let start = Instant::now();
    let outcome = synthesize_dsm(&cfg, &inv)?;
    let secs = start.elapsed().as_secs_f64();
    let name = a.program.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut json = json!({ "command": "synth", "program": name, "loop": cfg.l_in });
    if a.timing {
        json["runtime_s"] = json!(secs);
    }
    let timing = if a.timing { format!(" ({secs:.3} s)") } else { String::new() };
    Ok(match outcome {
        SynthesisOutcome::Success(dsm) => {
            if let Some(path) = a.emit_cert {
                write(path, &render_dsm(cfg.l_in, &dsm))?;
            }
            let eta_in = dsm.eta[&cfg.l_in].to_string();
            json["result"] = json!("success");
            json["eta_in"] = json!(eta_in);
            json["a"] = json!(dsm.a.to_string());
            json["b"] = json!(dsm.b.to_string());
            json["epsilon"] = json!(dsm.epsilon.to_string());
            json["c"] = json!(dsm.c.to_string());
            json["eta"] = dsm.eta.iter().map(|(l, e)| (l.to_string(), json!(e.to_string()))).collect();
            let text = format!(
                "{name}: success{timing}\neta({}) = {eta_in}\n[a, b] = [{}, {}]\n{}",
                cfg.l_in,
                dsm.a,
                dsm.b,
                render_dsm(cfg.l_in, &dsm)
            );
            Report { ok: true, text, json }
        }
        SynthesisOutcome::Fail(reason) => {
            json["result"] = json!("failure");
            json["reason"] = json!(reason.to_string());
            Report { ok: false, text: format!("{name}: failure{timing}: {reason}\n"), json }
        }
    })
}

fn cmd_check(program: &Path, inv: Option<&Path>, dsm_path: &Path) -> Result<Report> {
    let (prog, whole) = load_program(program)?;
    let inv = load_inv(inv, &whole)?;
    let blocks = load_dsm(&read(dsm_path)?)?;
    if blocks.is_empty() {
        return Err(CliError::Usage(format!("{}: no loop blocks", dsm_path.display())));
    }
    let mut ok = true;
    let mut text = String::new();
    let mut results = Vec::new();
    for (label, dsm) in &blocks {
        let cfg = loop_cfg(&prog, &whole, *label)?;
        let report = check_dsm(dsm, &cfg, &inv.restrict(&cfg))?;
        ok &= report.passed();
        let violations: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        text.push_str(&format!("loop {label}: {}\n", if report.passed() { "pass" } else { "fail" }));
        for v in &violations {
            text.push_str(&format!("  {v}\n"));
        }
        results.push(json!({ "loop": label, "passed": report.passed(), "violations": violations }));
    }
    Ok(Report { ok, text, json: json!({ "command": "check", "passed": ok, "loops": results }) })
}

fn cmd_prove(program: &Path, inv: Option<&Path>, emit_cert: Option<&Path>) -> Result<Report> {
    let (prog, cfg) = load_program(program)?;
    let inv = load_inv(inv, &cfg)?;
    Ok(match prove_termination(&prog, &inv)? {
        ProofOutcome::Proved(cert) => {
            if let Some(path) = emit_cert {
                write(path, &cert.render_dsm())?;
            }
            let mut loops = Vec::new();
            cert.walk_loops(&mut |l, d, _| {
                loops.push(json!({
                    "loop": l,
                    "eta_in": d.eta[&l].to_string(),
                    "a": d.a.to_string(),
                    "b": d.b.to_string(),
                    "epsilon": d.epsilon.to_string(),
                    "c": d.c.to_string(),
                }))
            });
            let text = format!("proved\n{}{}", cert.render_tree(), cert.render_dsm());
            Report { ok: true, text, json: json!({ "command": "prove", "result": "proved", "loops": loops }) }
        }
        ProofOutcome::NotProved { label, reason } => Report {
            ok: false,
            text: format!("not proved: loop {label}: {reason}\n"),
            json: json!({ "command": "prove", "result": "not proved", "loop": label, "reason": reason.to_string() }),
        },
    })
}

fn cmd_check_derivation(path: &Path, compile: Option<&str>) -> Result<Report> {
    let d = parse_derivation(&read(path)?)?;
    let verdict = check_derivation(&d)?;
    let mut report = match &verdict {
        DerivationVerdict::Valid { params } => {
            let mut json = json!({ "command": "check-derivation", "result": "valid", "steps": d.steps.len() });
            let mut text = format!("valid ({} steps)\n", d.steps.len());
            if let Some(k) = params {
                text.push_str(&format!("epsilon = {}, a = {}, b = {}, c = {}\n", k.epsilon, k.a, k.b, k.c));
                json["params"] = json!({
                    "epsilon": k.epsilon.to_string(),
                    "a": k.a.to_string(),
                    "b": k.b.to_string(),
                    "c": k.c.to_string(),
                });
            }
            Report { ok: true, text, json }
        }
        DerivationVerdict::Invalid { index, step, rule, reason } => Report {
            ok: false,
            text: format!("invalid at step {step} (#{index}, rule {rule}): {reason}\n"),
            json: json!({
                "command": "check-derivation",
                "result": "invalid",
                "index": index,
                "step": step,
                "rule": rule,
                "reason": reason,
            }),
        },
    };
    if let (Some(id), true) = (compile, report.ok) {
        let (prog, dsm, inv) = compile_while(&d, id)?;
        let cfg = build_cfg(&prog);
        let passed = check_dsm(&dsm, &cfg, &inv)?.passed();
        report.ok &= passed;
        report.text.push_str(&format!("compiled step {id}: {}\n", if passed { "pass" } else { "fail" }));
        report.text.push_str(&render_dsm(cfg.l_in, &dsm));
        report.json["compiled"] = json!({ "step": id, "passed": passed, "dsm": render_dsm(cfg.l_in, &dsm) });
    }
    Ok(report)
}

struct SimArgs<'a> {
    program: &'a Path,
    init: &'a str,
    runs: u64,
    budget: u64,
    sched: &'a str,
    seed: u64,
    trace_dsm: Option<&'a Path>,
}

fn cmd_sim(a: SimArgs) -> Result<Report> {
    if a.budget == 0 {
        return Err(CliError::Usage("--budget must be at least 1".into()));
    }
    let (_, cfg) = load_program(a.program)?;
    let exec = ExecCfg::new(&cfg)?;
    let init = exec.init_from_str(a.init)?;
    let policy: Policy = a.sched.parse()?;
    let stats = run_many(&exec, &init, policy, a.runs, a.budget, a.seed);
    let (lo, hi) = stats.wilson(1.96);
    let mean_time = {
        let done: Vec<u64> = stats.times.iter().flatten().copied().collect();
        if done.is_empty() {
            None
        } else {
            Some(done.iter().sum::<u64>() as f64 / done.len() as f64)
        }
    };
    let mut text = format!(
        "runs {}\nterminated {}\ncensored {}\noverflowed {}\nfrequency {:.6}\nwilson95 [{lo:.6}, {hi:.6}]\n",
        stats.runs,
        stats.terminated,
        stats.censored,
        stats.overflowed,
        stats.frequency()
    );
    if let Some(m) = mean_time {
        text.push_str(&format!("mean steps (terminated) {m:.3}\n"));
    }
    let mut json = json!({
        "command": "sim",
        "runs": stats.runs,
        "terminated": stats.terminated,
        "censored": stats.censored,
        "overflowed": stats.overflowed,
        "frequency": stats.frequency(),
        "wilson95": [lo, hi],
        "mean_steps": mean_time,
        "seed": a.seed,
    });
    if let Some(path) = a.trace_dsm {
        let blocks = load_dsm(&read(path)?)?;
        let (_, dsm) = blocks
            .into_iter()
            .find(|(l, _)| *l == cfg.l_in)
            .ok_or_else(|| CliError::Usage(format!("{}: no block for loop {}", path.display(), cfg.l_in)))?;
        let mut hist = std::collections::BTreeMap::new();
        for run in 0..a.runs {
            let r = run_one(&exec, &init, policy, a.budget, a.seed, run, true);
            let trace = r.trace.unwrap_or_default();
            let m = trace_eta(&exec, &dsm, &trace)?;
            for (i, d) in m.diffs().into_iter().enumerate() {
                if trace[i].label != exec.l_out {
                    *hist.entry(d).or_insert(0u64) += 1;
                }
            }
            if matches!(r.outcome, RunOutcome::Overflow(_)) {
                break;
            }
        }
        text.push_str("diff,count\n");
        for (d, n) in &hist {
            text.push_str(&format!("{d},{n}\n"));
        }
        json["diff_histogram"] = hist.iter().map(|(d, n)| json!([d.to_string(), n])).collect();
    }
    Ok(Report { ok: true, text, json })
}

fn cmd_analyze_ce(y0: i64, k: u32, runs: u64, seed: u64) -> Result<Report> {
    let r = analyze_ce(y0, k, runs, seed)?;
    let bound = num_traits::ToPrimitive::to_f64(&r.bound).unwrap_or(f64::NAN);
    let mut text = format!("y0 {y0}, k {k}, runs {runs}, seed {seed}\nanalytic survival bound {bound:.6}\n");
    for (i, p) in r.absorption.iter().enumerate() {
        text.push_str(&format!("  iteration {i}: absorption {p:.6}\n"));
    }
    text.push_str(&format!(
        "empirical survival {:.6} ({} of {}), sigma {:.6}, wilson95 [{:.6}, {:.6}]\n{}\n",
        r.frequency,
        r.survived,
        r.runs,
        r.sigma,
        r.wilson.0,
        r.wilson.1,
        if r.agrees { "agrees: empirical >= bound - 3 sigma" } else { "DISAGREES: empirical < bound - 3 sigma" }
    ));
    let json = json!({
        "command": "analyze-ce",
        "y0": y0,
        "k": k,
        "runs": runs,
        "seed": seed,
        "bound": r.bound.to_string(),
        "bound_f64": bound,
        "absorption": r.absorption,
        "survived": r.survived,
        "frequency": r.frequency,
        "sigma": r.sigma,
        "wilson95": [r.wilson.0, r.wilson.1],
        "agrees": r.agrees,
    });
    Ok(Report { ok: r.agrees, text, json })
}

fn run(cli: &Cli, ci: bool) -> Result<Report> {
    match &cli.command {
        Command::Parse { program, emit_cfg } => cmd_parse(program, *emit_cfg),
        Command::Synth { program, inv, loop_label, dump_lp, emit_cert } => cmd_synth(SynthArgs {
            program,
            inv: inv.as_deref(),
            loop_label: *loop_label,
            dump_lp: dump_lp.as_deref(),
            emit_cert: emit_cert.as_deref(),
            timing: !ci,
        }),
        Command::Check { program, inv, dsm } => cmd_check(program, inv.as_deref(), dsm),
        Command::Prove { program, inv, emit_cert } => cmd_prove(program, inv.as_deref(), emit_cert.as_deref()),
        Command::CheckDerivation { derivation, compile } => cmd_check_derivation(derivation, compile.as_deref()),
        Command::Sim { program, init, runs, budget, sched, seed: s, trace_dsm } => cmd_sim(SimArgs {
            program,
            init,
            runs: *runs,
            budget: *budget,
            sched,
            seed: seed(*s, ci)?,
            trace_dsm: trace_dsm.as_deref(),
        }),
        Command::AnalyzeCe { y0, k, runs, seed: s } => cmd_analyze_ce(*y0, *k, *runs, seed(*s, ci)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ci = cli.ci || std::env::var("DSMV_CI").is_ok_and(|v| !v.is_empty() && v != "0");
    match run(&cli, ci) {
        Ok(report) => {
            match cli.format {
                Format::Text => print!("{}", report.text),
                Format::Json => println!("{}", serde_json::to_string_pretty(&report.json).expect("JSON values serialize")),
            }
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
