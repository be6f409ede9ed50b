use rand::Rng;

use super::{Atom, BinaryOp, Cmp, Formula, Interval, Term, UnaryOp, MAX_HEIGHT};
use crate::scalar::Scalar;

/// Knobs of the random pure-past formula generator.
#[derive(Clone, Debug)]
pub struct GenConfig {
    /// Number of trace variables.
    pub arity: usize,
    /// Range of atom thresholds.
    pub const_range: (f64, f64),
    /// Largest interval bound.
    pub interval_cap: usize,
    /// Inclusive range the tree height is drawn from.
    pub height_range: (usize, usize),
    /// Allow `x_i - x_j >= c` leaves.
    pub multisignal: bool,
    /// Probability that a temporal operator gets the default `[0,inf]`.
    pub p_unbounded: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            arity: 1,
            const_range: (0.0, 1.0),
            interval_cap: 10,
            height_range: (2, 6),
            multisignal: false,
            p_unbounded: 0.5,
        }
    }
}

/// Draw a random pure-past formula whose height lies in `cfg.height_range`
/// (clamped to [`MAX_HEIGHT`]).
pub fn sample_ppstl<T: Scalar, R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> Formula<T> {
    let lo = cfg.height_range.0.clamp(1, MAX_HEIGHT);
    let hi = cfg.height_range.1.clamp(lo, MAX_HEIGHT);
    let h = rng.random_range(lo..=hi);
    with_height(rng, cfg, h)
}

/// Random pure-past formula of exactly height `h`: one child follows the
/// full-height spine, siblings grow to a random smaller height.
pub(crate) fn with_height<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &GenConfig,
    h: usize,
) -> Formula<T> {
    if h <= 1 {
        return Formula::Atom(random_atom(rng, cfg));
    }
    if rng.random_bool(0.5) {
        let op = random_unary(rng, cfg);
        Formula::unary(op, with_height(rng, cfg, h - 1))
    } else {
        let op = random_binary(rng, cfg);
        let spine = with_height(rng, cfg, h - 1);
        let other_h = rng.random_range(1..=h - 1);
        let other = with_height(rng, cfg, other_h);
        if rng.random_bool(0.5) {
            Formula::binary(op, spine, other)
        } else {
            Formula::binary(op, other, spine)
        }
    }
}

/// Draw a random formula over every connective, past and future, with
/// mixed comparison operators, weighted multi-term atoms and `TRUE` leaves.
pub fn sample_stl<T: Scalar, R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> Formula<T> {
    let lo = cfg.height_range.0.clamp(1, MAX_HEIGHT);
    let hi = cfg.height_range.1.clamp(lo, MAX_HEIGHT);
    let h = rng.random_range(lo..=hi);
    full_with_height(rng, cfg, h)
}

fn full_with_height<T: Scalar, R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig, h: usize) -> Formula<T> {
    if h <= 1 {
        if rng.random_bool(0.1) {
            return Formula::True;
        }
        let mut a: Atom<T> = random_atom(rng, cfg);
        if rng.random_bool(0.25) {
            let var = rng.random_range(0..cfg.arity.max(1));
            a.terms.push(Term { var, weight: T::lit(rng.random_range(-2.0..2.0)) });
        }
        a.cmp = [Cmp::Ge, Cmp::Gt, Cmp::Le, Cmp::Lt][rng.random_range(0..4)];
        return Formula::Atom(a);
    }
    if rng.random_bool(0.5) {
        let op = match rng.random_range(0..9) {
            0 => UnaryOp::Not,
            1 => UnaryOp::Next,
            2 => UnaryOp::WeakNext,
            3 => UnaryOp::Yesterday,
            4 => UnaryOp::WeakYesterday,
            5 => UnaryOp::Eventually(random_interval(rng, cfg)),
            6 => UnaryOp::Globally(random_interval(rng, cfg)),
            7 => UnaryOp::Once(random_interval(rng, cfg)),
            _ => UnaryOp::Historically(random_interval(rng, cfg)),
        };
        Formula::unary(op, full_with_height(rng, cfg, h - 1))
    } else {
        let op = match rng.random_range(0..6) {
            0 => BinaryOp::Or,
            1 => BinaryOp::And,
            2 => BinaryOp::Until(random_interval(rng, cfg)),
            3 => BinaryOp::Release(random_interval(rng, cfg)),
            4 => BinaryOp::Since(random_interval(rng, cfg)),
            _ => BinaryOp::Triggers(random_interval(rng, cfg)),
        };
        let spine = full_with_height(rng, cfg, h - 1);
        let other_h = rng.random_range(1..=h - 1);
        let other = full_with_height(rng, cfg, other_h);
        if rng.random_bool(0.5) {
            Formula::binary(op, spine, other)
        } else {
            Formula::binary(op, other, spine)
        }
    }
}

pub(crate) fn random_atom<T: Scalar, R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> Atom<T> {
    let (lo, hi) = cfg.const_range;
    let c = T::lit(if hi > lo { rng.random_range(lo..hi) } else { lo });
    let n = cfg.arity.max(1);
    let i = rng.random_range(0..n);
    if cfg.multisignal && n >= 2 && rng.random_bool(0.5) {
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        Atom::diff_ge(i, j, c)
    } else {
        Atom::ge(i, c)
    }
}

pub(crate) fn random_interval<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> Interval {
    if rng.random_bool(cfg.p_unbounded.clamp(0.0, 1.0)) {
        return Interval::UNBOUNDED;
    }
    let b = rng.random_range(0..=cfg.interval_cap);
    let a = rng.random_range(0..=b);
    Interval::bounded(a, b).expect("a <= b")
}

pub(crate) fn random_unary<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> UnaryOp {
    match rng.random_range(0..5) {
        0 => UnaryOp::Not,
        1 => UnaryOp::Yesterday,
        2 => UnaryOp::WeakYesterday,
        3 => UnaryOp::Once(random_interval(rng, cfg)),
        _ => UnaryOp::Historically(random_interval(rng, cfg)),
    }
}

pub(crate) fn random_binary<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> BinaryOp {
    match rng.random_range(0..4) {
        0 => BinaryOp::Or,
        1 => BinaryOp::And,
        2 => BinaryOp::Since(random_interval(rng, cfg)),
        _ => BinaryOp::Triggers(random_interval(rng, cfg)),
    }
}
