use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::engine::robustness_ref_all;
use crate::formula::{parse, sample_ppstl};
use crate::trace::{augment, synth_generate, SynthConfig};

fn trace(id: &str, xs: &[f64], fail: bool) -> Trace<f64> {
    Trace::new(id, xs.iter().map(|&v| vec![v]).collect(), fail).unwrap()
}

fn rand_trace(rng: &mut impl Rng, id: String, len: usize, n: usize, fail: bool) -> Trace<f64> {
    let rows = (0..len).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    Trace::new(id, rows, fail).unwrap()
}

/// Straightforward per-trace recomputation from reference robustness.
fn scalar_fitness(
    f: &Formula<f64>,
    pair: &AugmentedPair<f64>,
    sel: &[&Trace<f64>],
    es: &[&Trace<f64>],
) -> (f64, bool, f64, f64, f64) {
    let maxr = |t: &Trace<f64>| robustness_ref_all(f, t).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let mut margin = f64::INFINITY;
    let mut hits = 0.0;
    let mut ok_orig = false;
    for (k, t) in pair.traces().enumerate() {
        let rob = robustness_ref_all(f, t);
        let l = rob.len();
        let mut best = f64::NEG_INFINITY;
        for i in 0..=l {
            let s = if i == 0 {
                (-(rob[0] + SCORE_EPS).tanh()).min(rob[0].tanh())
            } else if i < l {
                let pm = rob[..i].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (-pm.tanh()).min(rob[i].tanh())
            } else {
                let pm = rob.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sm = rob[1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (-pm.tanh()).min(sm.tanh())
            };
            best = best.max(s);
        }
        margin = margin.min(best);
        let ok = rob[0] < 0.0 && maxr(t) >= 0.0;
        if k == 0 {
            ok_orig = ok;
        }
        if ok {
            hits += 1.0;
        }
    }
    let gr = |s: &[&Trace<f64>]| s.iter().map(|t| maxr(t)).fold(f64::NEG_INFINITY, f64::max);
    (margin, ok_orig, hits / pair.len() as f64, gr(sel), gr(es))
}

#[test]
fn fitness_matches_scalar_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let gen = GenConfig { arity: 2, interval_cap: 8, multisignal: true, ..GenConfig::default() };
    for round in 0..100 {
        let pairs: Vec<AugmentedPair<f64>> = (0..2)
            .map(|p| {
                let len = rng.random_range(1..25);
                let orig = rand_trace(&mut rng, format!("f{round}_{p}"), len, 2, true);
                let augs = augment(&orig, 2, 0.05, &mut rng).unwrap();
                AugmentedPair { original: orig, augmentations: augs }
            })
            .collect();
        let goods: Vec<Trace<f64>> = (0..4)
            .map(|k| {
                let len = rng.random_range(1..25);
                rand_trace(&mut rng, format!("g{k}"), len, 2, false)
            })
            .collect();
        let sel: Vec<&Trace<f64>> = goods[..2].iter().collect();
        let es: Vec<&Trace<f64>> = goods[2..].iter().collect();
        let inds: Vec<Individual<f64>> =
            (0..6).map(|k| Individual::new(sample_ppstl(&mut rng, &gen), k % 2)).collect();
        let recs = evaluate_fitness(&inds, &pairs, &sel, &es).unwrap();
        let gb = batch(&goods).unwrap();
        let fars = good_set_metrics(&inds.iter().map(|i| i.formula.clone()).collect::<Vec<_>>(), &gb).unwrap();
        for ((ind, rec), (far, full)) in inds.iter().zip(&recs).zip(fars) {
            let (m, ok, acc, s, e) = scalar_fitness(&ind.formula, &pairs[ind.pair_id], &sel, &es);
            assert_eq!((rec.margin, rec.ok_orig, rec.acc, rec.good_rob_sel, rec.good_rob_es), (m, ok, acc, s, e));
            let maxes: Vec<f64> = goods
                .iter()
                .map(|t| robustness_ref_all(&ind.formula, t).into_iter().fold(f64::NEG_INFINITY, f64::max))
                .collect();
            assert_eq!(far, maxes.iter().filter(|&&v| v >= 0.0).count() as f64 / goods.len() as f64);
            assert_eq!(full, maxes.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
    }
}

#[test]
fn score_prefix_terms_match_literal_prefixes() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gen = GenConfig { arity: 2, ..GenConfig::default() };
    for _ in 0..100 {
        let f: Formula<f64> = sample_ppstl(&mut rng, &gen);
        let len = rng.random_range(2..30);
        let t = rand_trace(&mut rng, "t".into(), len, 2, true);
        let rob = robustness_ref_all(&f, &t);
        for i in 1..len {
            let prefix = t.cut(i).unwrap();
            let literal = robustness_ref_all(&f, &prefix).into_iter().fold(f64::NEG_INFINITY, f64::max);
            let indexed = rob[..i].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(literal, indexed);
        }
    }
}

fn toy() -> (AugmentedPair<f64>, Vec<Trace<f64>>) {
    let pair = AugmentedPair {
        original: trace("f", &[0.1, 0.2, 0.15, 0.3, 0.8, 0.9], true),
        augmentations: vec![],
    };
    let goods = vec![trace("g0", &[0.2, 0.5, 0.1, 0.4], false), trace("g1", &[0.3, 0.3, 0.45, 0.2], false)];
    (pair, goods)
}

#[test]
fn refine_matches_grid_search() {
    let (pair, goods) = toy();
    let objective = |c: f64| {
        let f: Formula<f64> = parse(&format!("x >= {c}"), &["x"]).unwrap();
        let (m, g) = refinement_terms(&f, &pair, &goods).unwrap();
        if g < 0.0 {
            m
        } else {
            f64::NEG_INFINITY
        }
    };
    let grid_best = (0..=1000).map(|k| k as f64 / 1000.0).max_by(|&a, &b| objective(a).total_cmp(&objective(b))).unwrap();
    for start in [0.7, 0.6, 0.45, 0.52] {
        let ind = Individual::new(parse(&format!("x >= {start}"), &["x"]).unwrap(), 0);
        let r = refine_constants(&ind, &pair, &goods, 50).unwrap();
        let c = r.formula.thresholds()[0];
        assert!((c - grid_best).abs() < 0.05, "start {start}: {c} vs {grid_best}");
    }
}

#[test]
fn refine_never_worse_and_noop_without_constants() {
    let (pair, goods) = toy();
    let t = Individual::new(Formula::True, 0);
    assert_eq!(refine_constants(&t, &pair, &goods, 50).unwrap(), t);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let gen = GenConfig::default();
    for _ in 0..30 {
        let ind = Individual::new(sample_ppstl(&mut rng, &gen), 0);
        let r = refine_constants(&ind, &pair, &goods, 50).unwrap();
        let before = refinement_terms(&ind.formula, &pair, &goods).unwrap();
        let after = refinement_terms(&r.formula, &pair, &goods).unwrap();
        let (b, a) = (refinement_point(before.0, before.1), refinement_point(after.0, after.1));
        assert!(!refinement_better(b, a), "{b:?} -> {a:?}");
        assert_eq!(r.formula.node_count(), ind.formula.node_count());
    }
}

fn planted_problem(seed: u64) -> (Vec<AugmentedPair<f64>>, Vec<Trace<f64>>) {
    let planted = parse("O(x0 >= 0.85 & x1 >= 0.7)", &["x0", "x1", "x2"]).unwrap();
    let cfg = SynthConfig { n_good: 20, n_fail: 2, len: 40, ..SynthConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = synth_generate(&planted, &cfg, &mut rng).unwrap();
    let pairs = d
        .failures()
        .map(|t| AugmentedPair { original: t.clone(), augmentations: augment(t, 2, 0.01, &mut rng).unwrap() })
        .collect();
    (pairs, d.goods().cloned().collect())
}

fn small_cfg() -> EAConfig {
    EAConfig { pop_size: 60, max_gen: 40, patience: 15, max_far: 0.0, ..EAConfig::default() }
}

#[test]
fn planted_pair_is_learned() {
    let (pairs, goods) = planted_problem(1);
    let out = learn_formulas(&pairs, &goods, &small_cfg(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert!(!out.formulas.is_empty());
    assert!(out.formulas.len() <= pairs.len());
    let gb = batch(&goods).unwrap();
    for l in &out.formulas {
        let f = &l.fitness;
        assert!(f.ok_orig && f.acc >= 0.75 && f.far.unwrap() == 0.0);
        let (far, _) = good_set_metrics(std::slice::from_ref(&l.formula), &gb).unwrap()[0];
        assert_eq!(far, 0.0);
        let rob = robustness_ref_all(&l.formula, &pairs[l.pair_id].original);
        assert!(rob[0] < 0.0 && rob.iter().any(|&v| v >= 0.0));
    }
}

#[test]
fn unsatisfiable_gate_returns_nothing() {
    let (pairs, goods) = planted_problem(3);
    let cfg = EAConfig { min_acc: 1.1, max_gen: 5, ..small_cfg() };
    let out = learn_formulas(&pairs, &goods, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(out.formulas.is_empty());
}

#[test]
fn same_seed_same_result() {
    let (pairs, goods) = planted_problem(5);
    let cfg = EAConfig { max_gen: 10, ..small_cfg() };
    let a = learn_formulas(&pairs, &goods, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = learn_formulas(&pairs, &goods, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_validation() {
    assert!(EAConfig { mut_prob: 1.5, ..EAConfig::default() }.validate().is_err());
    assert!(EAConfig { k_opt: 0, ..EAConfig::default() }.validate().is_err());
    let (pairs, _) = planted_problem(1);
    let r = learn_formulas(&pairs, &[], &small_cfg(), &mut ChaCha8Rng::seed_from_u64(0));
    assert!(matches!(r, Err(LearnError::EmptyGoodSample)));
}
