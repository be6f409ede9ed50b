//! Signal Temporal Logic formulas: syntax tree, fragments, derived-operator
//! rewriting, textual form, and random generation of pure-past detectors.

mod parse;
mod print;
pub(crate) mod sample;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use parse::{parse, ParseError};
pub use print::Display;
pub use sample::{sample_ppstl, sample_stl, GenConfig};

/// Hard cap on tree height for formulas produced by the learner.
pub const MAX_HEIGHT: usize = 17;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulaError {
    #[error("formula is not pure past: {0}")]
    NotPurePast(String),
    #[error("malformed interval [{lo},{hi}]")]
    MalformedInterval { lo: usize, hi: usize },
}

/// Discrete time interval `[lo, hi]` or `[lo, inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    lo: usize,
    hi: Option<usize>,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval { lo: 0, hi: None };

    pub fn bounded(lo: usize, hi: usize) -> Result<Self, FormulaError> {
        if lo > hi {
            return Err(FormulaError::MalformedInterval { lo, hi });
        }
        Ok(Interval { lo, hi: Some(hi) })
    }

    pub fn from(lo: usize) -> Self {
        Interval { lo, hi: None }
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    /// Upper bound, `None` for infinity.
    pub fn hi(&self) -> Option<usize> {
        self.hi
    }

    pub fn is_unbounded(&self) -> bool {
        self.hi.is_none()
    }

    pub fn is_default(&self) -> bool {
        *self == Self::UNBOUNDED
    }

    pub(crate) fn set(&mut self, lo: usize, hi: Option<usize>) {
        debug_assert!(hi.is_none_or(|h| lo <= h));
        self.lo = lo;
        self.hi = hi;
    }
}

impl Default for Interval {
    fn default() -> Self {
        Self::UNBOUNDED
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "[{},{}]", self.lo, hi),
            None => write!(f, "[{},inf]", self.lo),
        }
    }
}

/// Comparison operator of an atom as written. Only `Ge` survives
/// [`Formula::rewrite_to_core`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Ge,
    Gt,
    Le,
    Lt,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
            Cmp::Le => "<=",
            Cmp::Lt => "<",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term<T> {
    pub var: usize,
    pub weight: T,
}

/// Linear inequality `sum(weight * x[var]) CMP threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom<T> {
    pub terms: Vec<Term<T>>,
    pub cmp: Cmp,
    pub threshold: T,
}

impl<T: Scalar> Atom<T> {
    /// `x[var] >= threshold`
    pub fn ge(var: usize, threshold: T) -> Self {
        Atom {
            terms: vec![Term { var, weight: T::one() }],
            cmp: Cmp::Ge,
            threshold,
        }
    }

    /// `x[a] - x[b] >= threshold`
    pub fn diff_ge(a: usize, b: usize, threshold: T) -> Self {
        Atom {
            terms: vec![
                Term { var: a, weight: T::one() },
                Term { var: b, weight: -T::one() },
            ],
            cmp: Cmp::Ge,
            threshold,
        }
    }

    /// Value of the linear function on one state.
    pub fn lhs(&self, state: &[T]) -> T {
        let mut acc = T::zero();
        for (k, t) in self.terms.iter().enumerate() {
            let v = t.weight * state[t.var];
            acc = if k == 0 { v } else { acc + v };
        }
        acc
    }

    /// Robustness of the atom on one state, honoring its comparison:
    /// `f - c` for `>=`/`>`, `c - f` for `<=`/`<`.
    pub fn robustness(&self, state: &[T]) -> T {
        match self.cmp {
            Cmp::Ge | Cmp::Gt => self.lhs(state) - self.threshold,
            Cmp::Le | Cmp::Lt => self.threshold - self.lhs(state),
        }
    }

    pub fn max_var(&self) -> usize {
        self.terms.iter().map(|t| t.var).max().unwrap_or(0)
    }

    fn negated_terms(&self) -> Vec<Term<T>> {
        self.terms
            .iter()
            .map(|t| Term { var: t.var, weight: -t.weight })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Next,
    WeakNext,
    Yesterday,
    WeakYesterday,
    Eventually(Interval),
    Globally(Interval),
    Once(Interval),
    Historically(Interval),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Or,
    And,
    Until(Interval),
    Release(Interval),
    Since(Interval),
    Triggers(Interval),
}

impl UnaryOp {
    pub fn is_future(self) -> bool {
        matches!(
            self,
            UnaryOp::Next | UnaryOp::WeakNext | UnaryOp::Eventually(_) | UnaryOp::Globally(_)
        )
    }

    pub fn interval(self) -> Option<Interval> {
        match self {
            UnaryOp::Eventually(i)
            | UnaryOp::Globally(i)
            | UnaryOp::Once(i)
            | UnaryOp::Historically(i) => Some(i),
            _ => None,
        }
    }

    pub(crate) fn interval_mut(&mut self) -> Option<&mut Interval> {
        match self {
            UnaryOp::Eventually(i)
            | UnaryOp::Globally(i)
            | UnaryOp::Once(i)
            | UnaryOp::Historically(i) => Some(i),
            _ => None,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            UnaryOp::Not => "!",
            UnaryOp::Next => "X",
            UnaryOp::WeakNext => "wX",
            UnaryOp::Yesterday => "Y",
            UnaryOp::WeakYesterday => "wY",
            UnaryOp::Eventually(_) => "F",
            UnaryOp::Globally(_) => "G",
            UnaryOp::Once(_) => "O",
            UnaryOp::Historically(_) => "H",
        }
    }
}

impl BinaryOp {
    pub fn is_future(self) -> bool {
        matches!(self, BinaryOp::Until(_) | BinaryOp::Release(_))
    }

    pub fn interval(self) -> Option<Interval> {
        match self {
            BinaryOp::Until(i) | BinaryOp::Release(i) | BinaryOp::Since(i) | BinaryOp::Triggers(i) => {
                Some(i)
            }
            _ => None,
        }
    }

    pub(crate) fn interval_mut(&mut self) -> Option<&mut Interval> {
        match self {
            BinaryOp::Until(i) | BinaryOp::Release(i) | BinaryOp::Since(i) | BinaryOp::Triggers(i) => {
                Some(i)
            }
            _ => None,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            BinaryOp::Or => "|",
            BinaryOp::And => "&",
            BinaryOp::Until(_) => "U",
            BinaryOp::Release(_) => "R",
            BinaryOp::Since(_) => "S",
            BinaryOp::Triggers(_) => "T",
        }
    }
}

/// Syntactic fragment, most specific first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fragment {
    /// No future operator anywhere.
    PpStl,
    /// `G(psi)` with unbounded `G` and `psi` pure past.
    GppStl,
    /// `F(psi)` with unbounded `F` and `psi` pure past.
    FppStl,
    FullStl,
}

/// STL formula over variables addressed by column index.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula<T> {
    True,
    Atom(Atom<T>),
    Unary(UnaryOp, Box<Formula<T>>),
    Binary(BinaryOp, Box<Formula<T>>, Box<Formula<T>>),
}

impl<T: Scalar> Formula<T> {
    pub fn atom(a: Atom<T>) -> Self {
        Formula::Atom(a)
    }

    pub fn unary(op: UnaryOp, f: Self) -> Self {
        Formula::Unary(op, Box::new(f))
    }

    pub fn binary(op: BinaryOp, l: Self, r: Self) -> Self {
        Formula::Binary(op, Box::new(l), Box::new(r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Self) -> Self {
        Self::unary(UnaryOp::Not, f)
    }

    pub fn or(l: Self, r: Self) -> Self {
        Self::binary(BinaryOp::Or, l, r)
    }

    pub fn and(l: Self, r: Self) -> Self {
        Self::binary(BinaryOp::And, l, r)
    }

    pub fn once(i: Interval, f: Self) -> Self {
        Self::unary(UnaryOp::Once(i), f)
    }

    pub fn historically(i: Interval, f: Self) -> Self {
        Self::unary(UnaryOp::Historically(i), f)
    }

    pub fn eventually(i: Interval, f: Self) -> Self {
        Self::unary(UnaryOp::Eventually(i), f)
    }

    pub fn globally(i: Interval, f: Self) -> Self {
        Self::unary(UnaryOp::Globally(i), f)
    }

    pub fn since(i: Interval, l: Self, r: Self) -> Self {
        Self::binary(BinaryOp::Since(i), l, r)
    }

    pub fn until(i: Interval, l: Self, r: Self) -> Self {
        Self::binary(BinaryOp::Until(i), l, r)
    }

    /// Height of the tree; leaves have height 1.
    pub fn height(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 1,
            Formula::Unary(_, f) => 1 + f.height(),
            Formula::Binary(_, l, r) => 1 + l.height().max(r.height()),
        }
    }

    /// Number of symbols: operators plus leaves.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 1,
            Formula::Unary(_, f) => 1 + f.size(),
            Formula::Binary(_, l, r) => 1 + l.size() + r.size(),
        }
    }

    pub fn is_pure_past(&self) -> bool {
        match self {
            Formula::True | Formula::Atom(_) => true,
            Formula::Unary(op, f) => !op.is_future() && f.is_pure_past(),
            Formula::Binary(op, l, r) => !op.is_future() && l.is_pure_past() && r.is_pure_past(),
        }
    }

    pub fn fragment(&self) -> Fragment {
        if self.is_pure_past() {
            return Fragment::PpStl;
        }
        match self {
            Formula::Unary(UnaryOp::Globally(i), body) if i.is_default() && body.is_pure_past() => {
                Fragment::GppStl
            }
            Formula::Unary(UnaryOp::Eventually(i), body) if i.is_default() && body.is_pure_past() => {
                Fragment::FppStl
            }
            _ => Fragment::FullStl,
        }
    }

    /// Largest variable index referenced, if any atom exists.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Formula::True => None,
            Formula::Atom(a) => Some(a.max_var()),
            Formula::Unary(_, f) => f.max_var(),
            Formula::Binary(_, l, r) => match (l.max_var(), r.max_var()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
        }
    }

    /// Wrap a pure-past detector into the safety property `G(!f)`.
    pub fn safety_wrap(self) -> Result<Self, FormulaError> {
        if !self.is_pure_past() {
            return Err(FormulaError::NotPurePast(self.display::<&str>(&[]).to_string()));
        }
        Ok(Self::globally(Interval::UNBOUNDED, Self::not(self)))
    }

    /// Inner detector `phi` of a safety property `G(!phi)`. For `G(psi)`
    /// where `psi` is not a negation, returns `!psi`.
    pub fn safety_body(&self) -> Option<Formula<T>> {
        if self.fragment() != Fragment::GppStl {
            return None;
        }
        match self {
            Formula::Unary(_, psi) => match psi.as_ref() {
                Formula::Unary(UnaryOp::Not, phi) => Some((**phi).clone()),
                other => Some(Self::not(other.clone())),
            },
            _ => None,
        }
    }

    /// Rewrite into the core connectives `{TRUE, atom(>=), !, |, X, U, Y, S}`
    /// using the standard shortcut definitions.
    pub fn rewrite_to_core(&self) -> Formula<T> {
        use BinaryOp as B;
        use UnaryOp as U;
        let neg = Self::not;
        match self {
            Formula::True => Formula::True,
            Formula::Atom(a) => match a.cmp {
                Cmp::Ge => Formula::Atom(a.clone()),
                Cmp::Lt => neg(Formula::Atom(Atom { cmp: Cmp::Ge, ..a.clone() })),
                Cmp::Le => Formula::Atom(Atom {
                    terms: a.negated_terms(),
                    cmp: Cmp::Ge,
                    threshold: -a.threshold,
                }),
                Cmp::Gt => neg(Formula::Atom(Atom {
                    terms: a.negated_terms(),
                    cmp: Cmp::Ge,
                    threshold: -a.threshold,
                })),
            },
            Formula::Unary(op, f) => {
                let f = f.rewrite_to_core();
                match *op {
                    U::Not => neg(f),
                    U::Next => Self::unary(U::Next, f),
                    U::Yesterday => Self::unary(U::Yesterday, f),
                    U::WeakNext => neg(Self::unary(U::Next, neg(f))),
                    U::WeakYesterday => neg(Self::unary(U::Yesterday, neg(f))),
                    U::Eventually(i) => Self::until(i, Formula::True, f),
                    U::Globally(i) => neg(Self::until(i, Formula::True, neg(f))),
                    U::Once(i) => Self::since(i, Formula::True, f),
                    U::Historically(i) => neg(Self::since(i, Formula::True, neg(f))),
                }
            }
            Formula::Binary(op, l, r) => {
                let l = l.rewrite_to_core();
                let r = r.rewrite_to_core();
                match *op {
                    B::Or => Self::or(l, r),
                    B::And => neg(Self::or(neg(l), neg(r))),
                    B::Until(i) => Self::until(i, l, r),
                    B::Since(i) => Self::since(i, l, r),
                    B::Release(i) => neg(Self::until(i, neg(l), neg(r))),
                    B::Triggers(i) => neg(Self::since(i, neg(l), neg(r))),
                }
            }
        }
    }

    /// Borrow a textual view using the given variable names.
    pub fn display<'a, S: AsRef<str>>(&'a self, names: &'a [S]) -> Display<'a, T, S> {
        Display::new(self, names)
    }

    // Pre-order node addressing used by the variation operators.

    pub fn node_count(&self) -> usize {
        self.size()
    }

    pub fn node(&self, idx: usize) -> &Formula<T> {
        fn go<'a, T: Scalar>(f: &'a Formula<T>, idx: &mut usize) -> Option<&'a Formula<T>> {
            if *idx == 0 {
                return Some(f);
            }
            *idx -= 1;
            match f {
                Formula::True | Formula::Atom(_) => None,
                Formula::Unary(_, c) => go(c, idx),
                Formula::Binary(_, l, r) => go(l, idx).or_else(|| go(r, idx)),
            }
        }
        let mut i = idx;
        go(self, &mut i).expect("node index in range")
    }

    pub fn node_mut(&mut self, idx: usize) -> &mut Formula<T> {
        fn go<'a, T: Scalar>(f: &'a mut Formula<T>, idx: &mut usize) -> Option<&'a mut Formula<T>> {
            if *idx == 0 {
                return Some(f);
            }
            *idx -= 1;
            match f {
                Formula::True | Formula::Atom(_) => None,
                Formula::Unary(_, c) => go(c, idx),
                Formula::Binary(_, l, r) => {
                    let ls = l.size();
                    if *idx < ls {
                        go(l, idx)
                    } else {
                        *idx -= ls;
                        go(r, idx)
                    }
                }
            }
        }
        let mut i = idx;
        go(self, &mut i).expect("node index in range")
    }

    /// Depth (root = 0) of the node at a pre-order index.
    pub fn node_depth(&self, idx: usize) -> usize {
        fn go<T: Scalar>(f: &Formula<T>, idx: usize, depth: usize) -> usize {
            if idx == 0 {
                return depth;
            }
            match f {
                Formula::True | Formula::Atom(_) => unreachable!("index past leaf"),
                Formula::Unary(_, c) => go(c, idx - 1, depth + 1),
                Formula::Binary(_, l, r) => {
                    let ls = l.size();
                    if idx - 1 < ls {
                        go(l, idx - 1, depth + 1)
                    } else {
                        go(r, idx - 1 - ls, depth + 1)
                    }
                }
            }
        }
        go(self, idx, 0)
    }

    pub fn atoms(&self) -> Vec<&Atom<T>> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Atom(a) = f {
                out.push(a);
            }
        });
        out
    }

    pub fn atoms_mut(&mut self) -> Vec<&mut Atom<T>> {
        fn go<'a, T>(f: &'a mut Formula<T>, out: &mut Vec<&'a mut Atom<T>>) {
            match f {
                Formula::True => {}
                Formula::Atom(a) => out.push(a),
                Formula::Unary(_, c) => go(c, out),
                Formula::Binary(_, l, r) => {
                    go(l, out);
                    go(r, out);
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    pub fn intervals_mut(&mut self) -> Vec<&mut Interval> {
        fn go<'a, T>(f: &'a mut Formula<T>, out: &mut Vec<&'a mut Interval>) {
            match f {
                Formula::True | Formula::Atom(_) => {}
                Formula::Unary(op, c) => {
                    if let Some(i) = op.interval_mut() {
                        out.push(i);
                    }
                    go(c, out);
                }
                Formula::Binary(op, l, r) => {
                    if let Some(i) = op.interval_mut() {
                        out.push(i);
                    }
                    go(l, out);
                    go(r, out);
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    /// Atom thresholds in pre-order.
    pub fn thresholds(&self) -> Vec<T> {
        self.atoms().iter().map(|a| a.threshold).collect()
    }

    pub fn set_thresholds(&mut self, values: &[T]) {
        let mut atoms = self.atoms_mut();
        assert_eq!(atoms.len(), values.len(), "one value per atom");
        for (a, v) in atoms.iter_mut().zip(values) {
            a.threshold = *v;
        }
    }

    fn visit<'a>(&'a self, cb: &mut impl FnMut(&'a Formula<T>)) {
        cb(self);
        match self {
            Formula::True | Formula::Atom(_) => {}
            Formula::Unary(_, c) => c.visit(cb),
            Formula::Binary(_, l, r) => {
                l.visit(cb);
                r.visit(cb);
            }
        }
    }
}
