//! Timing of verdict-complete monitoring: every prefix of every trace gets
//! a verdict, computed three ways.

use std::time::{Duration, Instant};

use ppstl::engine::{robustness, trace_check, ReferenceEvaluator};
use ppstl::formula::{parse, Formula};
use ppstl::trace::{batch, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const PROPERTY: &str = "O(x1 >= 0.3) -> H(x2 >= 0.1)";
const VARS: [&str; 2] = ["x1", "x2"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Length,
    Traces,
    Formulas,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Trace-check every prefix from scratch.
    NaivePrefix,
    /// Reference evaluation extended one position at a time.
    Incremental,
    /// One vectorized robustness pass.
    Vectorized,
}

#[derive(Clone, Debug)]
pub struct BenchPlan {
    pub mode: Mode,
    pub sweep: Vec<usize>,
    pub strategies: Vec<Strategy>,
    /// Cumulative time allowed per strategy and sweep point.
    pub budget: Duration,
    pub reps: usize,
    /// Trace length used when the sweep varies something else.
    pub base_len: usize,
    pub seed: u64,
}

impl BenchPlan {
    pub fn validate(&self) -> Result<(), String> {
        if self.sweep.is_empty() || self.sweep.contains(&0) {
            return Err("sweep must be a nonempty list of positive values".into());
        }
        if self.strategies.is_empty() {
            return Err("at least one strategy is required".into());
        }
        if self.budget.is_zero() {
            return Err("budget must be positive".into());
        }
        if self.reps == 0 || self.base_len == 0 {
            return Err("reps and base length must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub mode: Mode,
    pub value: usize,
    pub strategy: Strategy,
    pub reps: usize,
    pub mean_s: Option<f64>,
    pub std_s: Option<f64>,
    pub timed_out: bool,
    /// Prefixes on which the property is violated; equal across strategies.
    pub violations: Option<usize>,
}

struct Workload {
    formulas: Vec<Formula<f64>>,
    traces: Vec<Trace<f64>>,
}

fn random_walk(rng: &mut ChaCha8Rng, id: String, len: usize) -> Trace<f64> {
    let mut x = [0.5f64, 0.5];
    let rows = (0..len)
        .map(|_| {
            for v in &mut x {
                *v = (*v + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0);
            }
            x.to_vec()
        })
        .collect();
    Trace::new(id, rows, false).expect("nonempty rows")
}

fn workload(plan: &BenchPlan, value: usize) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let (n_traces, len, n_formulas) = match plan.mode {
        Mode::Length => (1, value, 1),
        Mode::Traces => (value, plan.base_len, 1),
        Mode::Formulas => (1, plan.base_len, value),
    };
    let traces = (0..n_traces).map(|k| random_walk(&mut rng, format!("t{k}"), len)).collect();
    let formulas = (0..n_formulas)
        .map(|k| {
            if k == 0 {
                parse(PROPERTY, &VARS).expect("valid property")
            } else {
                let c = 0.3 + 0.4 * k as f64 / n_formulas as f64;
                parse(&format!("O(x1 >= {c}) -> H(x2 >= 0.1)"), &VARS).expect("valid property")
            }
        })
        .collect();
    Workload { formulas, traces }
}

/// Number of violated prefixes, or `None` once `deadline` passes.
fn run_strategy(s: Strategy, w: &Workload, deadline: Instant) -> Option<usize> {
    let mut violations = 0;
    match s {
        Strategy::NaivePrefix => {
            for f in &w.formulas {
                for t in &w.traces {
                    for p in 1..=t.len() {
                        let prefix = t.cut(p).expect("valid prefix");
                        if !trace_check(f, &prefix).expect("matching arity") {
                            violations += 1;
                        }
                        if p % 64 == 0 && Instant::now() > deadline {
                            return None;
                        }
                    }
                }
            }
        }
        Strategy::Incremental => {
            for f in &w.formulas {
                for t in &w.traces {
                    let mut ev = ReferenceEvaluator::new(f, t).expect("matching arity");
                    for i in 0..t.len() {
                        if ev.eval(i) < 0.0 {
                            violations += 1;
                        }
                        if i % 64 == 0 && Instant::now() > deadline {
                            return None;
                        }
                    }
                }
            }
        }
        Strategy::Vectorized => {
            let b = batch(w.traces.iter()).expect("nonempty batch");
            let rob = robustness(&w.formulas, &b).expect("matching arity");
            for q in 0..w.formulas.len() {
                for k in 0..w.traces.len() {
                    violations += rob.row(q, k).iter().filter(|&&v| v < 0.0).count();
                }
            }
        }
    }
    Some(violations)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Rows in sweep order, strategies in the given order. A strategy that
/// exceeds its budget is marked timed out there and skipped afterwards.
pub fn run_bench(plan: &BenchPlan) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    let mut dead = vec![false; plan.strategies.len()];
    for &value in &plan.sweep {
        let w = workload(plan, value);
        for (s_idx, &strategy) in plan.strategies.iter().enumerate() {
            let mut row =
                BenchRow { mode: plan.mode, value, strategy, reps: 0, mean_s: None, std_s: None, timed_out: true, violations: None };
            if !dead[s_idx] {
                let deadline = Instant::now() + plan.budget;
                let mut times = Vec::with_capacity(plan.reps);
                for _ in 0..plan.reps {
                    let start = Instant::now();
                    match run_strategy(strategy, &w, deadline) {
                        Some(v) => {
                            times.push(start.elapsed().as_secs_f64());
                            row.violations = Some(v);
                        }
                        None => break,
                    }
                    if Instant::now() > deadline {
                        break;
                    }
                }
                row.timed_out = times.len() < plan.reps || Instant::now() > deadline;
                row.reps = times.len();
                if !times.is_empty() {
                    let (m, s) = mean_std(&times);
                    row.mean_s = Some(m);
                    row.std_s = Some(s);
                }
                dead[s_idx] = row.timed_out;
            }
            rows.push(row);
        }
    }
    rows
}

/// Least-squares slope of log(mean time) against log(value), over the
/// rows of one strategy that finished.
pub fn loglog_slope(rows: &[BenchRow], strategy: Strategy) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.strategy == strategy && !r.timed_out)
        .filter_map(|r| r.mean_s.map(|m| ((r.value as f64).ln(), m.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

pub fn write_rows<W: std::io::Write>(rows: &[BenchRow], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
