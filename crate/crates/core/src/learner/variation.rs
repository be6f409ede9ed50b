use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Individual;
use crate::formula::sample::{random_atom, random_binary, random_unary};
use crate::formula::{Formula, GenConfig, MAX_HEIGHT};
use crate::scalar::Scalar;

/// Attempts at drawing subtree-swap points that respect the height cap.
pub const SWAP_RETRIES: usize = 8;
/// Standard deviation of threshold jitter.
pub const JITTER_STD: f64 = 0.1;

/// Two offspring from two parents: with probability one half swap random
/// subtrees, otherwise swap the reference pairs.
pub fn crossover<T: Scalar, R: Rng + ?Sized>(
    a: &Individual<T>,
    b: &Individual<T>,
    rng: &mut R,
) -> (Individual<T>, Individual<T>) {
    if rng.random_bool(0.5) {
        for _ in 0..SWAP_RETRIES {
            let ia = rng.random_range(0..a.formula.node_count());
            let ib = rng.random_range(0..b.formula.node_count());
            let (fa, fb) = swap_subtrees(&a.formula, ia, &b.formula, ib);
            if fa.height() <= MAX_HEIGHT && fb.height() <= MAX_HEIGHT {
                return (Individual::new(fa, a.pair_id), Individual::new(fb, b.pair_id));
            }
        }
    }
    pair_swap(a, b)
}

pub(crate) fn swap_subtrees<T: Scalar>(
    a: &Formula<T>,
    ia: usize,
    b: &Formula<T>,
    ib: usize,
) -> (Formula<T>, Formula<T>) {
    let (mut fa, mut fb) = (a.clone(), b.clone());
    let sa = a.node(ia).clone();
    let sb = b.node(ib).clone();
    *fa.node_mut(ia) = sb;
    *fb.node_mut(ib) = sa;
    (fa, fb)
}

fn pair_swap<T: Scalar>(a: &Individual<T>, b: &Individual<T>) -> (Individual<T>, Individual<T>) {
    (Individual::new(a.formula.clone(), b.pair_id), Individual::new(b.formula.clone(), a.pair_id))
}

/// Applied mutation probability at a 1-based generation index.
pub fn mutation_rate(mut_prob: f64, generation: usize) -> f64 {
    mut_prob / (generation.max(1) as f64).cbrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    ReplaceNode,
    Shrink,
    Jitter,
}

/// With the decayed probability, apply one of the three edits chosen
/// uniformly; otherwise return an unchanged copy.
pub fn mutate<T: Scalar, R: Rng + ?Sized>(
    ind: &Individual<T>,
    generation: usize,
    mut_prob: f64,
    gen: &GenConfig,
    rng: &mut R,
) -> Individual<T> {
    if !rng.random_bool(mutation_rate(mut_prob, generation).clamp(0.0, 1.0)) {
        return ind.clone();
    }
    let kind = [Mutation::ReplaceNode, Mutation::Shrink, Mutation::Jitter][rng.random_range(0..3)];
    Individual::new(apply_mutation(&ind.formula, kind, gen, rng), ind.pair_id)
}

fn internal_nodes<T: Scalar>(f: &Formula<T>) -> Vec<usize> {
    (0..f.node_count())
        .filter(|&i| matches!(f.node(i), Formula::Unary(..) | Formula::Binary(..)))
        .collect()
}

pub fn apply_mutation<T: Scalar, R: Rng + ?Sized>(
    f: &Formula<T>,
    kind: Mutation,
    gen: &GenConfig,
    rng: &mut R,
) -> Formula<T> {
    let mut out = f.clone();
    let internal = internal_nodes(f);
    match kind {
        Mutation::ReplaceNode if !internal.is_empty() => {
            let idx = internal[rng.random_range(0..internal.len())];
            let node = out.node_mut(idx);
            let replaced = match std::mem::replace(node, Formula::True) {
                Formula::Unary(_, c) => Formula::Unary(random_unary(rng, gen), c),
                Formula::Binary(_, l, r) => Formula::Binary(random_binary(rng, gen), l, r),
                leaf => leaf,
            };
            *node = replaced;
        }
        Mutation::ReplaceNode => {
            // a lone leaf: the only operation to replace is the atom itself
            out = Formula::Atom(random_atom(rng, gen));
        }
        Mutation::Shrink if !internal.is_empty() => {
            let idx = internal[rng.random_range(0..internal.len())];
            let node = out.node_mut(idx);
            let child = match std::mem::replace(node, Formula::True) {
                Formula::Unary(_, c) => *c,
                Formula::Binary(_, l, r) => {
                    if rng.random_bool(0.5) {
                        *l
                    } else {
                        *r
                    }
                }
                leaf => leaf,
            };
            *node = child;
        }
        Mutation::Shrink => {}
        Mutation::Jitter => jitter(&mut out, gen.interval_cap, rng),
    }
    out
}

/// Gaussian threshold noise clipped to `[0, 1]`, interval bounds moved by
/// one step within `[0, cap]`.
pub(crate) fn jitter<T: Scalar, R: Rng + ?Sized>(f: &mut Formula<T>, cap: usize, rng: &mut R) {
    let normal = Normal::new(0.0, JITTER_STD).expect("valid std");
    for a in f.atoms_mut() {
        let v = a.threshold.as_f64() + normal.sample(rng);
        a.threshold = T::lit(v.clamp(0.0, 1.0));
    }
    let shift = |v: usize, rng: &mut R| -> usize {
        if rng.random_bool(0.5) {
            (v + 1).min(cap)
        } else {
            v.saturating_sub(1)
        }
    };
    for iv in f.intervals_mut() {
        let lo = shift(iv.lo(), rng);
        match iv.hi() {
            None => iv.set(lo, None),
            Some(hi) => {
                let hi = shift(hi, rng);
                iv.set(lo.min(hi), Some(lo.max(hi)));
            }
        }
    }
}

/// Fresh random individual for initialization.
pub(crate) fn random_individual<T: Scalar, R: Rng + ?Sized>(
    pair_id: usize,
    gen: &GenConfig,
    rng: &mut R,
) -> Individual<T> {
    Individual::new(crate::formula::sample_ppstl(rng, gen), pair_id)
}
