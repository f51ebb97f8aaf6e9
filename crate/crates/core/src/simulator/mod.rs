//! Monte-Carlo execution of the program's Markov decision process.
//!
//! Runs are independent: run `i` draws from a ChaCha8 stream keyed by
//! `(seed, i)`, so results do not depend on how runs are scheduled across
//! threads.

pub mod bounds;
pub mod counterexample;

use std::collections::BTreeMap;

use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cfg::{Cfg, Node};
use crate::dsm::DsmMap;
use crate::error::{Error, Result};
use crate::frontend::{BExpr, CmpOp, Expr, Label};
use crate::Rat;

pub use bounds::{barrier_absorption_prob, e_upper, hoeffding_bound, nontermination_lower_bound, pi_lower};
pub use counterexample::{analyze_ce, CeReport};

/// A label together with integer values for the program variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub label: Label,
    /// Indexed like [`ExecCfg::pvars`].
    pub vals: Vec<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    AlwaysThen,
    AlwaysElse,
    Uniform,
    RoundRobin,
}

impl std::str::FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "then" | "always-then" => Policy::AlwaysThen,
            "else" | "always-else" => Policy::AlwaysElse,
            "uniform" => Policy::Uniform,
            "round-robin" | "rr" => Policy::RoundRobin,
            _ => return Err(Error::Semantic(format!("unknown scheduler `{s}`"))),
        })
    }
}

/// Resolves `if *` branches for one run.
#[derive(Clone, Debug)]
pub struct Scheduler {
    pub policy: Policy,
    rng: ChaCha8Rng,
    turns: u64,
}

impl Scheduler {
    pub fn new(policy: Policy, seed: u64, run: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run);
        Scheduler { policy, rng, turns: 0 }
    }

    fn choose_then(&mut self) -> bool {
        let t = self.turns;
        self.turns += 1;
        match self.policy {
            Policy::AlwaysThen => true,
            Policy::AlwaysElse => false,
            Policy::Uniform => self.rng.random::<bool>(),
            Policy::RoundRobin => t.is_multiple_of(2),
        }
    }
}

#[derive(Clone, Debug)]
enum Term {
    /// `Σ coeff·slot + constant`; slots index program variables first, then sampled ones.
    Affine { terms: Vec<(usize, i64)>, constant: i64 },
    General(Expr),
}

#[derive(Clone, Debug)]
enum Test {
    Const(bool),
    /// `term op 0`
    Cmp(Term, CmpOp),
    Not(Box<Test>),
    And(Box<Test>, Box<Test>),
    Or(Box<Test>, Box<Test>),
}

#[derive(Clone, Debug)]
enum ExecNode {
    Assign { target: Option<usize>, rhs: Term, sampled: Vec<usize>, next: Label },
    Branch { test: Test, then_to: Label, else_to: Label },
    Prob { p: f64, then_to: Label, else_to: Label },
    Nondet { then_to: Label, else_to: Label },
    Terminal,
}

/// A CFG compiled for fast integer execution.
#[derive(Clone, Debug)]
pub struct ExecCfg {
    pub pvars: Vec<String>,
    pub rvars: Vec<String>,
    pub l_in: Label,
    pub l_out: Label,
    nodes: Vec<Option<ExecNode>>,
    /// Per sampled variable: support values and cumulative probabilities.
    dists: Vec<(Vec<i64>, Vec<f64>)>,
}

impl ExecCfg {
    pub fn new(cfg: &Cfg) -> Result<Self> {
        let slots: Vec<&String> = cfg.pvars.iter().chain(&cfg.rvars).collect();
        let max = cfg.labels().into_iter().max().unwrap_or(0) as usize;
        let mut nodes = vec![None; max + 1];
        for (l, node) in cfg.nodes() {
            let n = match node {
                Node::Assign { update, next } => {
                    let rhs = compile_term(&update.rhs, &slots)?;
                    let sampled = cfg
                        .rvars
                        .iter()
                        .enumerate()
                        .filter(|(_, r)| mentions(&update.rhs, r))
                        .map(|(i, _)| i)
                        .collect();
                    let target = match &update.target {
                        Some(t) => Some(cfg.pvars.iter().position(|v| v == t).ok_or_else(|| {
                            Error::Semantic(format!("assignment to sampled variable {t}"))
                        })?),
                        None => None,
                    };
                    ExecNode::Assign { target, rhs, sampled, next: *next }
                }
                Node::Branch { guard, then_to, else_to } => ExecNode::Branch {
                    test: compile_test(&guard.expr, &slots)?,
                    then_to: *then_to,
                    else_to: *else_to,
                },
                Node::Prob { p, then_to, else_to } => {
                    ExecNode::Prob { p: p.to_f64().unwrap_or(0.0), then_to: *then_to, else_to: *else_to }
                }
                Node::Nondet { then_to, else_to } => ExecNode::Nondet { then_to: *then_to, else_to: *else_to },
                Node::Terminal => ExecNode::Terminal,
            };
            nodes[l as usize] = Some(n);
        }
        let mut dists = Vec::new();
        for r in &cfg.rvars {
            let d = cfg.dists.get(r).ok_or_else(|| Error::UnboundedSupport(r.clone()))?;
            let mut acc = 0.0;
            let (vals, cum) = d
                .support()
                .iter()
                .map(|(v, p)| {
                    acc += p.to_f64().unwrap_or(0.0);
                    (*v, acc)
                })
                .unzip();
            dists.push((vals, cum));
        }
        Ok(ExecCfg { pvars: cfg.pvars.clone(), rvars: cfg.rvars.clone(), l_in: cfg.l_in, l_out: cfg.l_out, nodes, dists })
    }

    /// Configuration at `l_in` from `name=value` pairs; missing variables are 0.
    pub fn init(&self, values: &[(&str, i64)]) -> Result<Configuration> {
        let mut vals = vec![0; self.pvars.len()];
        for (name, v) in values {
            let i = self
                .pvars
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| Error::Semantic(format!("unknown program variable {name}")))?;
            vals[i] = *v;
        }
        Ok(Configuration { label: self.l_in, vals })
    }

    /// Parses `x=1,y=100`.
    pub fn init_from_str(&self, text: &str) -> Result<Configuration> {
        let mut pairs = Vec::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Semantic(format!("expected name=value, got `{part}`")))?;
            let v: i64 = v.trim().parse().map_err(|_| Error::Semantic(format!("bad integer in `{part}`")))?;
            pairs.push((k.trim(), v));
        }
        let pairs: Vec<(&str, i64)> = pairs.iter().map(|(k, v)| (*k, *v)).collect();
        self.init(&pairs)
    }

    fn node(&self, l: Label) -> &ExecNode {
        self.nodes.get(l as usize).and_then(Option::as_ref).expect("label belongs to the CFG")
    }

    fn sample(&self, r: usize, rng: &mut ChaCha8Rng) -> i64 {
        let (vals, cum) = &self.dists[r];
        let u: f64 = rng.random();
        vals[cum.iter().position(|c| u < *c).unwrap_or(vals.len() - 1)]
    }
}

fn mentions(e: &Expr, name: &str) -> bool {
    let mut found = false;
    e.visit_vars(&mut |v| found |= v == name);
    found
}

fn compile_term(e: &Expr, slots: &[&String]) -> Result<Term> {
    if e.contains_div() {
        return Err(Error::UnsupportedFeature(format!("division in {e}")));
    }
    let Ok(lin) = e.to_affine() else { return Ok(Term::General(e.clone())) };
    let int = |r: &Rat| -> Result<i64> {
        if !r.is_integer() {
            return Err(Error::UnsupportedFeature(format!("non-integer coefficient in {e}")));
        }
        r.to_integer().to_i64().ok_or_else(|| Error::Domain(format!("coefficient too large in {e}")))
    };
    let mut terms = Vec::new();
    for (v, c) in lin.terms() {
        let i = slots
            .iter()
            .position(|s| s.as_str() == v)
            .ok_or_else(|| Error::Semantic(format!("unknown variable {v}")))?;
        terms.push((i, int(c)?));
    }
    Ok(Term::Affine { terms, constant: int(lin.get_constant())? })
}

fn compile_test(b: &BExpr, slots: &[&String]) -> Result<Test> {
    Ok(match b {
        BExpr::True => Test::Const(true),
        BExpr::False => Test::Const(false),
        BExpr::Cmp(l, op, r) => Test::Cmp(compile_term(&Expr::Sub(Box::new(l.clone()), Box::new(r.clone())), slots)?, *op),
        BExpr::Not(x) => Test::Not(Box::new(compile_test(x, slots)?)),
        BExpr::And(a, b) => Test::And(Box::new(compile_test(a, slots)?), Box::new(compile_test(b, slots)?)),
        BExpr::Or(a, b) => Test::Or(Box::new(compile_test(a, slots)?), Box::new(compile_test(b, slots)?)),
    })
}

/// Integer value at the slot vector `[pvars..., rvars...]`; `None` on overflow.
fn eval_term(t: &Term, slots: &[i64], names: &[&str]) -> Option<i64> {
    match t {
        Term::Affine { terms, constant } => terms
            .iter()
            .try_fold(*constant, |acc, (i, c)| acc.checked_add(c.checked_mul(slots[*i])?)),
        Term::General(e) => eval_expr(e, &|v| names.iter().position(|n| *n == v).map(|i| slots[i])),
    }
}

fn eval_expr(e: &Expr, value: &dyn Fn(&str) -> Option<i64>) -> Option<i64> {
    match e {
        Expr::Num(r) => r.to_integer().to_i64().filter(|_| r.is_integer()),
        Expr::Var(v) => value(v),
        Expr::Neg(a) => eval_expr(a, value)?.checked_neg(),
        Expr::Add(a, b) => eval_expr(a, value)?.checked_add(eval_expr(b, value)?),
        Expr::Sub(a, b) => eval_expr(a, value)?.checked_sub(eval_expr(b, value)?),
        Expr::Mul(a, b) => eval_expr(a, value)?.checked_mul(eval_expr(b, value)?),
        Expr::Div(..) => None,
    }
}

fn eval_test(t: &Test, slots: &[i64], names: &[&str]) -> Option<bool> {
    Some(match t {
        Test::Const(b) => *b,
        Test::Cmp(term, op) => {
            let v = eval_term(term, slots, names)?;
            match op {
                CmpOp::Le => v <= 0,
                CmpOp::Lt => v < 0,
                CmpOp::Ge => v >= 0,
                CmpOp::Gt => v > 0,
                CmpOp::Eq => v == 0,
            }
        }
        Test::Not(x) => !eval_test(x, slots, names)?,
        Test::And(a, b) => eval_test(a, slots, names)? && eval_test(b, slots, names)?,
        Test::Or(a, b) => eval_test(a, slots, names)? || eval_test(b, slots, names)?,
    })
}

/// One transition. Sampled variables are drawn fresh for every assignment
/// that reads them; `l_out` steps to itself.
pub fn step(
    exec: &ExecCfg,
    conf: &Configuration,
    sched: &mut Scheduler,
    rng: &mut ChaCha8Rng,
) -> Result<Configuration> {
    let overflow = || Error::Domain(format!("integer overflow at label {}", conf.label));
    let names: Vec<&str> = exec.pvars.iter().chain(&exec.rvars).map(String::as_str).collect();
    let mut slots = conf.vals.clone();
    slots.resize(exec.pvars.len() + exec.rvars.len(), 0);
    let jump = |label: Label| Configuration { label, vals: conf.vals.clone() };
    Ok(match exec.node(conf.label) {
        ExecNode::Assign { target, rhs, sampled, next } => {
            for r in sampled {
                slots[exec.pvars.len() + r] = exec.sample(*r, rng);
            }
            let mut vals = conf.vals.clone();
            if let Some(t) = target {
                vals[*t] = eval_term(rhs, &slots, &names).ok_or_else(overflow)?;
            }
            Configuration { label: *next, vals }
        }
        ExecNode::Branch { test, then_to, else_to } => {
            let holds = eval_test(test, &slots, &names).ok_or_else(overflow)?;
            jump(if holds { *then_to } else { *else_to })
        }
        ExecNode::Prob { p, then_to, else_to } => jump(if rng.random::<f64>() < *p { *then_to } else { *else_to }),
        ExecNode::Nondet { then_to, else_to } => jump(if sched.choose_then() { *then_to } else { *else_to }),
        ExecNode::Terminal => conf.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    /// Reached `l_out` after this many steps.
    Terminated(u64),
    /// Still running when the step budget ran out.
    Censored,
    /// A value left the i64 range at this step.
    Overflow(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub outcome: RunOutcome,
    /// Steps at which the run was at `l_in`, starting with 0 when it starts there.
    pub arrivals: Vec<u64>,
    pub last: Configuration,
    /// Every configuration visited, when recording was requested.
    pub trace: Option<Vec<Configuration>>,
}

/// Per-run generator for the sampled variables and probabilistic branches.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Executes run number `run` for at most `budget` steps.
pub fn run_one(
    exec: &ExecCfg,
    init: &Configuration,
    policy: Policy,
    budget: u64,
    seed: u64,
    run: u64,
    record: bool,
) -> RunResult {
    let mut rng = run_rng(seed, run);
    // Scheduler draws come from a stream disjoint from the sampling one.
    let mut sched = Scheduler::new(policy, seed ^ 0x5eed_5c4e_d01e_0000, run);
    let mut conf = init.clone();
    let mut arrivals = Vec::new();
    let mut trace = record.then(|| vec![conf.clone()]);
    let mut n = 0;
    let outcome = loop {
        if conf.label == exec.l_out {
            break RunOutcome::Terminated(n);
        }
        if conf.label == exec.l_in {
            arrivals.push(n);
        }
        if n == budget {
            break RunOutcome::Censored;
        }
        conf = match step(exec, &conf, &mut sched, &mut rng) {
            Ok(c) => c,
            Err(_) => break RunOutcome::Overflow(n),
        };
        n += 1;
        if let Some(t) = trace.as_mut() {
            t.push(conf.clone());
        }
    };
    RunResult { outcome, arrivals, last: conf, trace }
}

/// Aggregated results of independent runs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunStats {
    pub runs: u64,
    pub terminated: u64,
    pub censored: u64,
    pub overflowed: u64,
    /// Termination time per run in run order; `None` for runs that did not terminate.
    pub times: Vec<Option<u64>>,
    /// Arrival steps at `l_in` per run.
    pub arrivals: Vec<Vec<u64>>,
}

impl RunStats {
    pub fn frequency(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.terminated as f64 / self.runs as f64
        }
    }

    /// Wilson score interval for the termination frequency.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.terminated, self.runs, z)
    }
}

pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Runs `f` on every run in parallel; results come back in run order.
pub fn run_many_map<T: Send>(
    exec: &ExecCfg,
    init: &Configuration,
    policy: Policy,
    runs: u64,
    budget: u64,
    seed: u64,
    f: impl Fn(RunResult) -> T + Sync,
) -> Vec<T> {
    (0..runs).into_par_iter().map(|i| f(run_one(exec, init, policy, budget, seed, i, false))).collect()
}

pub fn run_many(exec: &ExecCfg, init: &Configuration, policy: Policy, runs: u64, budget: u64, seed: u64) -> RunStats {
    let results = run_many_map(exec, init, policy, runs, budget, seed, |r| (r.outcome, r.arrivals));
    let mut stats = RunStats {
        runs,
        terminated: 0,
        censored: 0,
        overflowed: 0,
        times: Vec::with_capacity(results.len()),
        arrivals: Vec::with_capacity(results.len()),
    };
    for (outcome, arrivals) in results {
        match outcome {
            RunOutcome::Terminated(t) => {
                stats.terminated += 1;
                stats.times.push(Some(t));
            }
            RunOutcome::Censored => {
                stats.censored += 1;
                stats.times.push(None);
            }
            RunOutcome::Overflow(_) => {
                stats.overflowed += 1;
                stats.times.push(None);
            }
        }
        stats.arrivals.push(arrivals);
    }
    stats
}

/// `X_n = η(ℓ_n, ν_n)` along a run and `Y_n = X_n + n·ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleTrace {
    pub x: Vec<Rat>,
    pub y: Vec<Rat>,
}

impl MartingaleTrace {
    pub fn diffs(&self) -> Vec<Rat> {
        self.x.windows(2).map(|w| &w[1] - &w[0]).collect()
    }
}

pub fn trace_eta(exec: &ExecCfg, dsm: &DsmMap, trace: &[Configuration]) -> Result<MartingaleTrace> {
    let mut x = Vec::with_capacity(trace.len());
    let mut y = Vec::with_capacity(trace.len());
    for (n, c) in trace.iter().enumerate() {
        let eta = dsm.eta(c.label)?;
        let point: BTreeMap<String, Rat> =
            exec.pvars.iter().zip(&c.vals).map(|(v, k)| (v.clone(), Rat::from_integer((*k).into()))).collect();
        let v = eta.eval(|name| point.get(name).cloned().unwrap_or_else(Rat::zero));
        y.push(&v + &dsm.epsilon * Rat::from_integer((n as i64).into()));
        x.push(v);
    }
    Ok(MartingaleTrace { x, y })
}
