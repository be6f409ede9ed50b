//! Robustness evaluation over padded trace batches, trace checking, and
//! monitors for the safety and cosafety fragments.

mod kernels;
mod reference;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{BinaryOp, Formula, Fragment, UnaryOp};
use crate::scalar::Scalar;
use crate::trace::{batch, Trace, TraceBatch};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("formula references variable {var} but traces have {arity} variables")]
    VariableOutOfRange { var: usize, arity: usize },
    #[error("monitoring needs a formula of the form G(psi) or F(psi) with psi pure past, got {0}")]
    NotMonitorable(String),
}

/// `values[q][k][j]` is the robustness of formula `q` on trace `k` at `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessMatrix<T> {
    values: Vec<T>,
    r: usize,
    m: usize,
    l_max: usize,
    lengths: Vec<usize>,
}

impl<T: Scalar> RobustnessMatrix<T> {
    pub fn num_formulas(&self) -> usize {
        self.r
    }

    pub fn num_traces(&self) -> usize {
        self.m
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    /// Valid part of the robustness vector of formula `q` on trace `k`.
    pub fn row(&self, q: usize, k: usize) -> &[T] {
        let start = (q * self.m + k) * self.l_max;
        &self.values[start..start + self.lengths[k]]
    }

    pub fn get(&self, q: usize, k: usize, j: usize) -> T {
        self.row(q, k)[j]
    }
}

fn check_vars<T: Scalar>(f: &Formula<T>, arity: usize) -> Result<(), EngineError> {
    match f.max_var() {
        Some(var) if var >= arity => Err(EngineError::VariableOutOfRange { var, arity }),
        _ => Ok(()),
    }
}

/// Robustness of every formula on every trace at every valid position.
/// Each operator node of the core rewrite is evaluated once over the whole
/// batch; formulas are spread over the rayon pool.
pub fn robustness<T: Scalar>(
    formulas: &[Formula<T>],
    batch: &TraceBatch<T>,
) -> Result<RobustnessMatrix<T>, EngineError> {
    for f in formulas {
        check_vars(f, batch.arity())?;
    }
    let per: Vec<Vec<T>> = formulas.par_iter().map(|f| eval_block(&f.rewrite_to_core(), batch)).collect();
    let mut values = Vec::with_capacity(formulas.len() * batch.num_traces() * batch.l_max());
    for v in per {
        values.extend(v);
    }
    Ok(RobustnessMatrix {
        values,
        r: formulas.len(),
        m: batch.num_traces(),
        l_max: batch.l_max(),
        lengths: batch.lengths().to_vec(),
    })
}

/// Bottom-up evaluation of a core formula; returns an `m * l_max` block.
fn eval_block<T: Scalar>(f: &Formula<T>, b: &TraceBatch<T>) -> Vec<T> {
    let (m, lm) = (b.num_traces(), b.l_max());
    let lens = b.lengths();
    let mut out = vec![T::neg_infinity(); m * lm];
    match f {
        Formula::True => out.fill(T::infinity()),
        Formula::Atom(a) => {
            for k in 0..m {
                for j in 0..lens[k] {
                    out[k * lm + j] = a.robustness(b.state(k, j));
                }
            }
        }
        Formula::Unary(op, g) => {
            let x = eval_block(g, b);
            for k in 0..m {
                let range = k * lm..k * lm + lens[k];
                let (xs, os) = (&x[range.clone()], &mut out[range]);
                match op {
                    UnaryOp::Not => os.iter_mut().zip(xs).for_each(|(o, &v)| *o = -v),
                    UnaryOp::Next => kernels::next(xs, os),
                    UnaryOp::Yesterday => kernels::yesterday(xs, os),
                    _ => unreachable!("derived operator after core rewrite"),
                }
            }
        }
        Formula::Binary(op, l, r) => {
            let left_true = matches!(**l, Formula::True);
            let x = if left_true { Vec::new() } else { eval_block(l, b) };
            let y = eval_block(r, b);
            for k in 0..m {
                let range = k * lm..k * lm + lens[k];
                let xs = if left_true { &[][..] } else { &x[range.clone()] };
                let (ys, os) = (&y[range.clone()], &mut out[range]);
                match *op {
                    BinaryOp::Or => {
                        if left_true {
                            os.fill(T::infinity());
                        } else {
                            for ((o, &p), &q) in os.iter_mut().zip(xs).zip(ys) {
                                *o = if q > p { q } else { p };
                            }
                        }
                    }
                    BinaryOp::Since(iv) => kernels::since(xs, ys, iv, left_true, os),
                    BinaryOp::Until(iv) => kernels::until(xs, ys, iv, left_true, os),
                    _ => unreachable!("derived operator after core rewrite"),
                }
            }
        }
    }
    out
}

/// Robustness at one position by direct recursion on the formula as written.
pub fn robustness_ref<T: Scalar>(f: &Formula<T>, t: &Trace<T>, i: usize) -> T {
    assert!(i < t.len(), "position {i} outside trace of length {}", t.len());
    reference::RefEval::new(t).eval(f, i)
}

/// Reference robustness at every position of `t`.
pub fn robustness_ref_all<T: Scalar>(f: &Formula<T>, t: &Trace<T>) -> Vec<T> {
    let mut ev = reference::RefEval::new(t);
    (0..t.len()).map(|i| ev.eval(f, i)).collect()
}

/// Reference evaluation of one formula over one trace, position by position.
/// Values already computed for earlier positions are reused, so sweeping
/// positions in order evaluates each prefix incrementally.
pub struct ReferenceEvaluator<'a, T> {
    formula: &'a Formula<T>,
    inner: reference::RefEval<'a, T>,
}

impl<'a, T: Scalar> ReferenceEvaluator<'a, T> {
    pub fn new(formula: &'a Formula<T>, trace: &'a Trace<T>) -> Result<Self, EngineError> {
        check_vars(formula, trace.arity())?;
        Ok(ReferenceEvaluator { formula, inner: reference::RefEval::new(trace) })
    }

    pub fn eval(&mut self, i: usize) -> T {
        self.inner.eval(self.formula, i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Unknown,
    Top,
    Bot,
}

impl Verdict {
    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Unknown => "?",
            Verdict::Top => "T",
            Verdict::Bot => "F",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorTrace {
    pub verdicts: Vec<Verdict>,
    pub first_decision: Option<usize>,
}

/// The detector whose firing decides the monitor, and the verdict it yields.
/// For `G(psi)` the detector is `!psi` (with a double negation absorbed),
/// deciding Bot on strictly positive robustness; for `F(psi)` it is `psi`
/// itself, deciding Top on non-negative robustness.
fn monitor_parts<T: Scalar>(f: &Formula<T>) -> Result<(Formula<T>, Verdict), EngineError> {
    match f.fragment() {
        Fragment::GppStl => Ok((f.safety_body().expect("GppSTL has a body"), Verdict::Bot)),
        Fragment::FppStl => match f {
            Formula::Unary(_, psi) => Ok(((**psi).clone(), Verdict::Top)),
            _ => unreachable!(),
        },
        _ => Err(EngineError::NotMonitorable(f.display::<&str>(&[]).to_string())),
    }
}

fn decides<T: Scalar>(v: Verdict, rob: T) -> bool {
    match v {
        Verdict::Bot => rob > T::zero(),
        _ => rob >= T::zero(),
    }
}

/// Verdicts at every prefix of every trace, by one robustness pass over
/// the pure-past body followed by a cumulative fold.
pub fn monitor<T: Scalar>(f: &Formula<T>, batch: &TraceBatch<T>) -> Result<Vec<MonitorTrace>, EngineError> {
    let (body, decided) = monitor_parts(f)?;
    let rob = robustness(std::slice::from_ref(&body), batch)?;
    Ok((0..batch.num_traces())
        .map(|k| {
            let row = rob.row(0, k);
            let first = row.iter().position(|&v| decides(decided, v));
            let verdicts = (0..row.len())
                .map(|i| if first.is_some_and(|p| p <= i) { decided } else { Verdict::Unknown })
                .collect();
            MonitorTrace { verdicts, first_decision: first }
        })
        .collect())
}

/// First position at which any detector has strictly positive robustness.
pub fn earliest_violation<T: Scalar>(
    pool_bodies: &[Formula<T>],
    t: &Trace<T>,
) -> Result<Option<usize>, EngineError> {
    let b = batch([t]).expect("single trace batch");
    Ok(earliest_violations(pool_bodies, &b)?[0])
}

/// [`earliest_violation`] for every trace of a batch.
pub fn earliest_violations<T: Scalar>(
    pool_bodies: &[Formula<T>],
    batch: &TraceBatch<T>,
) -> Result<Vec<Option<usize>>, EngineError> {
    let rob = robustness(pool_bodies, batch)?;
    Ok((0..batch.num_traces())
        .map(|k| {
            (0..pool_bodies.len())
                .filter_map(|q| rob.row(q, k).iter().position(|&v| v > T::zero()))
                .min()
        })
        .collect())
}

/// Whether `t` satisfies `f`: pure-past formulas are read at the last
/// position, all others at position 0.
pub fn trace_check<T: Scalar>(f: &Formula<T>, t: &Trace<T>) -> Result<bool, EngineError> {
    check_vars(f, t.arity())?;
    let b = batch([t]).expect("single trace batch");
    let rob = robustness(std::slice::from_ref(f), &b)?;
    let at = if f.is_pure_past() { t.len() - 1 } else { 0 };
    Ok(rob.get(0, 0, at) >= T::zero())
}

#[cfg(test)]
mod tests;
