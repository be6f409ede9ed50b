//! Per-trace temporal kernels over robustness vectors of one valid length.
//! All of them use only `min`, `max` and negation, so results are exact.

use std::collections::VecDeque;

use crate::formula::Interval;
use crate::scalar::Scalar;

fn min<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

fn max<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

pub(crate) fn next<T: Scalar>(x: &[T], out: &mut [T]) {
    let l = x.len();
    out[..l - 1].copy_from_slice(&x[1..]);
    out[l - 1] = T::neg_infinity();
}

pub(crate) fn yesterday<T: Scalar>(x: &[T], out: &mut [T]) {
    let l = x.len();
    out[0] = T::neg_infinity();
    out[1..l].copy_from_slice(&x[..l - 1]);
}

/// Sliding minimum over windows of width `w` starting at each index:
/// `res[i] = min x[i..i+w]`, only for `i + w <= len`.
fn sliding_min_fwd<T: Scalar>(x: &[T], w: usize) -> Vec<T> {
    sliding(x, w, |a, b| a <= b)
}

fn sliding_max_fwd<T: Scalar>(x: &[T], w: usize) -> Vec<T> {
    sliding(x, w, |a, b| a >= b)
}

/// Monotone-deque sweep; `keep(a, b)` says `a` dominates `b` when `a` is older.
fn sliding<T: Scalar>(x: &[T], w: usize, keep: impl Fn(T, T) -> bool) -> Vec<T> {
    if w == 0 || w > x.len() {
        return Vec::new();
    }
    let mut res = Vec::with_capacity(x.len() + 1 - w);
    let mut dq: VecDeque<usize> = VecDeque::new();
    for (i, &v) in x.iter().enumerate() {
        while let Some(&back) = dq.back() {
            if keep(v, x[back]) {
                dq.pop_back();
            } else {
                break;
            }
        }
        dq.push_back(i);
        if dq[0] + w <= i {
            dq.pop_front();
        }
        if i + 1 >= w {
            res.push(x[dq[0]]);
        }
    }
    res
}

/// `a S_I b`. When `left_true` is set, `a` is ignored and treated as `+inf`.
pub(crate) fn since<T: Scalar>(a: &[T], b: &[T], iv: Interval, left_true: bool, out: &mut [T]) {
    let l = b.len();
    let lo = iv.lo();
    let ninf = T::neg_infinity();
    // amin(p) = min a over (p, p + lo]
    let win: Vec<T> = if lo > 0 && !left_true { sliding_min_fwd(a, lo) } else { Vec::new() };
    let amin = |p: usize, win: &[T]| if lo == 0 || left_true { T::infinity() } else { win[p + 1] };
    match iv.hi() {
        None => {
            let mut u = ninf;
            let mut core = vec![ninf; l];
            for i in 0..l {
                u = if left_true { max(b[i], u) } else { max(b[i], min(a[i], u)) };
                core[i] = u;
            }
            for i in 0..l {
                out[i] = if i < lo { ninf } else { min(core[i - lo], amin(i - lo, &win)) };
            }
        }
        Some(hi) => {
            let w = hi - lo;
            if left_true {
                let smax = sliding_max_fwd(b, w + 1);
                for i in 0..l {
                    out[i] = if i < hi { ninf } else { smax[i - hi] };
                }
                return;
            }
            for i in 0..l {
                if i < hi {
                    out[i] = ninf;
                    continue;
                }
                let p = i - lo;
                let mut acc = ninf;
                let mut m = T::infinity();
                for j in (p - w..=p).rev() {
                    acc = max(acc, min(b[j], m));
                    m = min(m, a[j]);
                }
                out[i] = min(acc, amin(p, &win));
            }
        }
    }
}

/// `a U_I b`, mirror image of [`since`].
pub(crate) fn until<T: Scalar>(a: &[T], b: &[T], iv: Interval, left_true: bool, out: &mut [T]) {
    let l = b.len();
    let lo = iv.lo();
    let ninf = T::neg_infinity();
    // win[i] = min a[i .. i+lo)
    let win: Vec<T> = if lo > 0 && !left_true { sliding_min_fwd(a, lo) } else { Vec::new() };
    let amin = |i: usize| if lo == 0 || left_true { T::infinity() } else { win[i] };
    match iv.hi() {
        None => {
            let mut u = ninf;
            let mut core = vec![ninf; l];
            for i in (0..l).rev() {
                u = if left_true { max(b[i], u) } else { max(b[i], min(a[i], u)) };
                core[i] = u;
            }
            for i in 0..l {
                out[i] = if i + lo >= l { ninf } else { min(core[i + lo], amin(i)) };
            }
        }
        Some(hi) => {
            let w = hi - lo;
            if left_true {
                let smax = sliding_max_fwd(b, w + 1);
                for i in 0..l {
                    out[i] = if i + hi >= l { ninf } else { smax[i + lo] };
                }
                return;
            }
            for i in 0..l {
                if i + hi >= l {
                    out[i] = ninf;
                    continue;
                }
                let p = i + lo;
                let mut acc = ninf;
                let mut m = T::infinity();
                for j in p..=p + w {
                    acc = max(acc, min(b[j], m));
                    m = min(m, a[j]);
                }
                out[i] = min(acc, amin(i));
            }
        }
    }
}
