use std::fmt;

use super::{Atom, Formula};
use crate::scalar::Scalar;

/// Canonical text of a formula. Binary nodes are always parenthesized and
/// default `[0,inf]` intervals are omitted, so the output parses back to the
/// same tree.
pub struct Display<'a, T, S> {
    formula: &'a Formula<T>,
    names: &'a [S],
}

impl<'a, T, S> Display<'a, T, S> {
    pub(crate) fn new(formula: &'a Formula<T>, names: &'a [S]) -> Self {
        Display { formula, names }
    }
}

impl<T: Scalar, S: AsRef<str>> fmt::Display for Display<'_, T, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self.formula, self.names)
    }
}

fn var_name<S: AsRef<str>>(names: &[S], var: usize) -> String {
    names.get(var).map(|s| s.as_ref().to_string()).unwrap_or_else(|| format!("x{var}"))
}

fn write_atom<T: Scalar, S: AsRef<str>>(
    f: &mut fmt::Formatter<'_>,
    a: &Atom<T>,
    names: &[S],
) -> fmt::Result {
    for (k, t) in a.terms.iter().enumerate() {
        let name = var_name(names, t.var);
        let w = t.weight;
        let neg = w.is_sign_negative();
        let mag = w.abs();
        match (k, neg) {
            (0, false) => {}
            (0, true) => f.write_str("-")?,
            (_, false) => f.write_str(" + ")?,
            (_, true) => f.write_str(" - ")?,
        }
        if mag == T::one() {
            f.write_str(&name)?;
        } else {
            write!(f, "{mag} * {name}")?;
        }
    }
    write!(f, " {} {}", a.cmp.symbol(), a.threshold)
}

fn write_formula<T: Scalar, S: AsRef<str>>(
    f: &mut fmt::Formatter<'_>,
    node: &Formula<T>,
    names: &[S],
) -> fmt::Result {
    match node {
        Formula::True => f.write_str("TRUE"),
        Formula::Atom(a) => write_atom(f, a, names),
        Formula::Unary(op, child) => {
            f.write_str(op.keyword())?;
            if let Some(iv) = op.interval() {
                if !iv.is_default() {
                    write!(f, "{iv}")?;
                }
            }
            if matches!(**child, Formula::Binary(..)) {
                write_formula(f, child, names)
            } else {
                f.write_str("(")?;
                write_formula(f, child, names)?;
                f.write_str(")")
            }
        }
        Formula::Binary(op, l, r) => {
            f.write_str("(")?;
            write_formula(f, l, names)?;
            write!(f, " {}", op.keyword())?;
            if let Some(iv) = op.interval() {
                if !iv.is_default() {
                    write!(f, "{iv}")?;
                }
            }
            f.write_str(" ")?;
            write_formula(f, r, names)?;
            f.write_str(")")
        }
    }
}
