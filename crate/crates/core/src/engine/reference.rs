//! Direct recursive evaluation of the robustness semantics, one position at a
//! time. Slow but independent of the vectorized kernels.

use std::collections::HashMap;

use crate::formula::{BinaryOp, Formula, Interval, UnaryOp};
use crate::scalar::Scalar;
use crate::trace::Trace;

pub(crate) struct RefEval<'a, T> {
    trace: &'a Trace<T>,
    memo: HashMap<(usize, usize), T>,
}

/// Positions of a future window anchored at `i`, or `None` if it does not fit.
fn future_window(iv: Interval, i: usize, len: usize) -> Option<(usize, usize)> {
    let start = i + iv.lo();
    match iv.hi() {
        Some(hi) if i + hi < len => Some((start, i + hi)),
        Some(_) => None,
        None if start < len => Some((start, len - 1)),
        None => None,
    }
}

fn past_window(iv: Interval, i: usize) -> Option<(usize, usize)> {
    match iv.hi() {
        Some(hi) if i >= hi => Some((i - hi, i - iv.lo())),
        Some(_) => None,
        None if i >= iv.lo() => Some((0, i - iv.lo())),
        None => None,
    }
}

impl<'a, T: Scalar> RefEval<'a, T> {
    pub(crate) fn new(trace: &'a Trace<T>) -> Self {
        RefEval { trace, memo: HashMap::new() }
    }

    pub(crate) fn eval(&mut self, f: &Formula<T>, i: usize) -> T {
        let key = (f as *const Formula<T> as usize, i);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let v = self.compute(f, i);
        self.memo.insert(key, v);
        v
    }

    fn compute(&mut self, f: &Formula<T>, i: usize) -> T {
        let len = self.trace.len();
        let inf = T::infinity();
        let ninf = T::neg_infinity();
        match f {
            Formula::True => inf,
            Formula::Atom(a) => a.robustness(self.trace.state(i)),
            Formula::Unary(op, g) => match *op {
                UnaryOp::Not => -self.eval(g, i),
                UnaryOp::Next => {
                    if i + 1 < len {
                        self.eval(g, i + 1)
                    } else {
                        ninf
                    }
                }
                UnaryOp::WeakNext => {
                    if i + 1 < len {
                        self.eval(g, i + 1)
                    } else {
                        inf
                    }
                }
                UnaryOp::Yesterday => {
                    if i > 0 {
                        self.eval(g, i - 1)
                    } else {
                        ninf
                    }
                }
                UnaryOp::WeakYesterday => {
                    if i > 0 {
                        self.eval(g, i - 1)
                    } else {
                        inf
                    }
                }
                UnaryOp::Eventually(iv) => match future_window(iv, i, len) {
                    Some((s, e)) => (s..=e).map(|j| self.eval(g, j)).fold(ninf, T::max),
                    None => ninf,
                },
                UnaryOp::Globally(iv) => match future_window(iv, i, len) {
                    Some((s, e)) => (s..=e).map(|j| self.eval(g, j)).fold(inf, T::min),
                    None => inf,
                },
                UnaryOp::Once(iv) => match past_window(iv, i) {
                    Some((s, e)) => (s..=e).map(|j| self.eval(g, j)).fold(ninf, T::max),
                    None => ninf,
                },
                UnaryOp::Historically(iv) => match past_window(iv, i) {
                    Some((s, e)) => (s..=e).map(|j| self.eval(g, j)).fold(inf, T::min),
                    None => inf,
                },
            },
            Formula::Binary(op, l, r) => match *op {
                BinaryOp::Or => self.eval(l, i).max(self.eval(r, i)),
                BinaryOp::And => self.eval(l, i).min(self.eval(r, i)),
                BinaryOp::Until(iv) => match future_window(iv, i, len) {
                    Some((s, e)) => {
                        let mut best = ninf;
                        for j in s..=e {
                            let guard = (i..j).map(|k| self.eval(l, k)).fold(inf, T::min);
                            best = best.max(self.eval(r, j).min(guard));
                        }
                        best
                    }
                    None => ninf,
                },
                BinaryOp::Release(iv) => match future_window(iv, i, len) {
                    Some((s, e)) => {
                        let mut best = inf;
                        for j in s..=e {
                            let guard = (i..j).map(|k| self.eval(l, k)).fold(ninf, T::max);
                            best = best.min(self.eval(r, j).max(guard));
                        }
                        best
                    }
                    None => inf,
                },
                BinaryOp::Since(iv) => match past_window(iv, i) {
                    Some((s, e)) => {
                        let mut best = ninf;
                        for j in s..=e {
                            let guard = (j + 1..=i).map(|k| self.eval(l, k)).fold(inf, T::min);
                            best = best.max(self.eval(r, j).min(guard));
                        }
                        best
                    }
                    None => ninf,
                },
                BinaryOp::Triggers(iv) => match past_window(iv, i) {
                    Some((s, e)) => {
                        let mut best = inf;
                        for j in s..=e {
                            let guard = (j + 1..=i).map(|k| self.eval(l, k)).fold(ninf, T::max);
                            best = best.min(self.eval(r, j).max(guard));
                        }
                        best
                    }
                    None => inf,
                },
            },
        }
    }
}
