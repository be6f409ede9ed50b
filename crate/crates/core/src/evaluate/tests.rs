use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::engine::{monitor, Verdict};
use crate::formula::{parse, sample_ppstl, GenConfig};
use crate::trace::{synth_generate, SynthConfig};

const NAMES: [&str; 1] = ["x"];

fn xtrace(id: &str, xs: &[f64], fail: bool) -> Trace<f64> {
    Trace::new(id, xs.iter().map(|&v| vec![v]).collect(), fail).unwrap()
}

fn entry(text: &str) -> PoolEntry<f64> {
    PoolEntry::from_formula(parse(text, &NAMES).unwrap()).unwrap()
}

fn identity_norm(arity: usize) -> NormalizationParams<f64> {
    NormalizationParams { var_names: (0..arity).map(|k| format!("x{k}")).collect(), ranges: vec![(0.0, 1.0); arity] }
}

#[test]
fn classify_examples() {
    let t = xtrace("a", &[0.1, 0.9, 0.2], true);
    assert_eq!(classify_trace::<f64>(&[], &t).unwrap(), (false, None));
    assert_eq!(classify_trace(&[entry("G(!(x >= 0.8))")], &t).unwrap(), (true, Some(1)));

    let t = xtrace("b", &[0.0, 0.0, 0.3, 0.0, 0.6, 0.0], true);
    let late = entry("G(!(x >= 0.5))");
    let early = entry("G(!(x >= 0.2))");
    assert_eq!(classify_trace(std::slice::from_ref(&late), &t).unwrap(), (true, Some(4)));
    assert_eq!(classify_trace(&[late, early], &t).unwrap(), (true, Some(2)));

    let wide = PoolEntry::from_formula(parse("G(!(y >= 0.5))", &["x", "y"]).unwrap()).unwrap();
    assert!(classify_trace(&[wide], &t).is_err());
}

#[test]
fn metric_examples() {
    let m = compute_metrics(&ConfusionMatrix { tp: 3, fp: 1, tn: 5, fn_: 1 });
    assert!((m.precision - 0.75).abs() < 1e-12);
    assert!((m.recall - 0.75).abs() < 1e-12);
    assert!((m.f1 - 0.75).abs() < 1e-12);
    assert!((m.far - 1.0 / 6.0).abs() < 1e-12);
    assert!((m.mcc - 14.0 / 24.0).abs() < 1e-12);

    let m = compute_metrics(&ConfusionMatrix { tp: 2, fp: 0, tn: 2, fn_: 0 });
    assert_eq!((m.precision, m.recall, m.f1, m.far, m.mcc), (1.0, 1.0, 1.0, 0.0, 1.0));

    let m = compute_metrics(&ConfusionMatrix { tp: 0, fp: 0, tn: 4, fn_: 3 });
    assert_eq!((m.precision, m.recall, m.f1, m.far, m.mcc), (0.0, 0.0, 0.0, 0.0, 0.0));
}

#[test]
fn preemptiveness_examples() {
    assert_eq!(preemptiveness(10, 3), 6);
    assert_eq!(preemptiveness(10, 9), 0);
}

#[test]
fn planted_pool_is_perfect() {
    let names = ["x0", "x1", "x2"];
    let planted = parse("O(x0 >= 0.85 & x1 >= 0.7)", &names).unwrap();
    let cfg = SynthConfig { n_good: 20, n_fail: 10, len: 40, ..SynthConfig::default() };
    let test = synth_generate(&planted, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let pool = vec![PoolEntry::from_formula(planted.safety_wrap().unwrap()).unwrap()];
    let r = evaluate(&pool, &test, &identity_norm(3)).unwrap();
    assert_eq!(r.metrics.f1, 1.0);
    assert_eq!(r.metrics.far, 0.0);
    assert_eq!(r.confusion, ConfusionMatrix { tp: 10, fp: 0, tn: 20, fn_: 0 });

    let r = evaluate::<f64>(&[], &test, &identity_norm(3)).unwrap();
    assert_eq!(r.metrics.recall, 0.0);
    assert_eq!(r.metrics.far, 0.0);
    assert_eq!(r.mean_preemptiveness, None);
}

#[test]
fn normalization_is_applied() {
    let test = Dataset::new(vec![xtrace("a", &[10.0, 18.0, 25.0], true)], vec!["x".into()]).unwrap();
    let norm = NormalizationParams { var_names: vec!["x".into()], ranges: vec![(10.0, 20.0)] };
    let r = evaluate(&[entry("G(!(x >= 0.75))")], &test, &norm).unwrap();
    assert_eq!(r.traces[0].first_bot, Some(1));
    assert_eq!(r.mean_preemptiveness, Some(1.0));
}

#[test]
fn curve_checkpoints_per_batch() {
    let mut pool = vec![entry("G(!(x >= 0.9))"), entry("G(!(x >= 0.7))"), entry("G(!(x >= 0.5))")];
    pool[1].learned_at = Some((1, 0));
    pool[2].learned_at = Some((1, 0));
    let extra = {
        let mut e = entry("G(!(x >= 0.3))");
        e.learned_at = Some((2, 1));
        e
    };
    pool.push(extra);
    let test = Dataset::new(
        vec![xtrace("f", &[0.0, 0.4, 0.6, 0.8, 0.95], true), xtrace("g", &[0.1, 0.1, 0.1, 0.1, 0.1], false)],
        vec!["x".into()],
    )
    .unwrap();
    let curve = evaluate_curve(&pool, &test, &identity_norm(1)).unwrap();
    let steps: Vec<_> = curve.iter().map(|p| (p.epoch, p.batch, p.pool_size, p.mean_preemptiveness)).collect();
    assert_eq!(steps, vec![(0, 0, 1, Some(0.0)), (1, 0, 3, Some(2.0)), (2, 1, 4, Some(3.0))]);

    let mut buf = Vec::new();
    write_curve_csv(&curve, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("epoch,batch,pool_size,"));
}

#[test]
fn verdict_dump_matches_monitors() {
    let test = Dataset::new(vec![xtrace("f", &[0.0, 0.6, 0.2], true)], vec!["x".into()]).unwrap();
    let pool = vec![entry("G(!(x >= 0.5))")];
    let r = evaluate(&pool, &test, &identity_norm(1)).unwrap();
    let mut buf = Vec::new();
    write_verdicts_csv(&r, &test, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "trace_id,position,verdict\nf,0,?\nf,1,F\nf,2,F\n");
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"f1\":1.0"));
    assert_eq!(serde_json::from_str::<Report>(&json).unwrap(), r);
}

fn random_dataset(rng: &mut impl Rng, n_traces: usize) -> Dataset<f64> {
    let traces = (0..n_traces)
        .map(|k| {
            let len = rng.random_range(1..20);
            let rows = (0..len).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
            Trace::new(format!("t{k}"), rows, rng.random_bool(0.4)).unwrap()
        })
        .collect();
    Dataset::new(traces, vec!["x0".into(), "x1".into()]).unwrap()
}

fn random_pool(rng: &mut ChaCha8Rng, size: usize) -> Vec<PoolEntry<f64>> {
    let gen = GenConfig { arity: 2, height_range: (1, 4), ..GenConfig::default() };
    (0..size)
        .map(|_| PoolEntry::from_formula(sample_ppstl(rng, &gen).safety_wrap().unwrap()).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn metric_identities(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
        let m = compute_metrics(&ConfusionMatrix { tp, fp, tn, fn_ });
        for v in [m.precision, m.recall, m.f1, m.far] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((-1.0..=1.0).contains(&m.mcc));
        if m.precision + m.recall > 0.0 {
            let f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
            prop_assert!((m.f1 - f1).abs() < 1e-12);
        }
        let other = compute_metrics(&ConfusionMatrix { tp: tp + 7, fp, tn, fn_: fn_ + 3 });
        prop_assert_eq!(m.far, other.far);
    }

    #[test]
    fn report_ranges(seed in any::<u64>(), n in 1usize..12, size in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_dataset(&mut rng, n);
        let pool = random_pool(&mut rng, size);
        let r = evaluate(&pool, &data, &identity_norm(2)).unwrap();
        prop_assert_eq!(r.confusion.total(), n);
        let m = r.metrics;
        for v in [m.precision, m.recall, m.f1, m.far] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((-1.0..=1.0).contains(&m.mcc));
        // Each trace agrees with the per-entry monitors.
        let b = batch(data.traces.iter()).unwrap();
        let mut want: Vec<Option<usize>> = vec![None; n];
        for e in &pool {
            for (k, mt) in monitor(&e.formula, &b).unwrap().iter().enumerate() {
                if mt.verdicts.contains(&Verdict::Bot) {
                    want[k] = want[k].into_iter().chain(mt.first_decision).min();
                }
            }
        }
        let got: Vec<Option<usize>> = r.traces.iter().map(|d| d.first_bot).collect();
        prop_assert_eq!(got, want);
        prop_assert_eq!(evaluate(&pool, &data, &identity_norm(2)).unwrap(), r);
    }

    #[test]
    fn detection_survives_extension(seed in any::<u64>(), extra in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_dataset(&mut rng, 1);
        let pool = random_pool(&mut rng, 3);
        let t = &data.traces[0];
        let (hit, first) = classify_trace(&pool, t).unwrap();
        let mut rows: Vec<Vec<f64>> = (0..t.len()).map(|j| t.state(j).to_vec()).collect();
        rows.extend((0..extra).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]));
        let longer = Trace::new("ext", rows, t.is_failure).unwrap();
        let (hit2, first2) = classify_trace(&pool, &longer).unwrap();
        if hit {
            prop_assert!(hit2);
            prop_assert_eq!(first, first2);
        } else if let Some(p) = first2 {
            prop_assert!(p >= t.len());
        }
    }

    #[test]
    fn growing_pool_never_delays_detection(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_dataset(&mut rng, n);
        let pool = random_pool(&mut rng, 4);
        let small = evaluate(&pool[..2], &data, &identity_norm(2)).unwrap();
        let big = evaluate(&pool, &data, &identity_norm(2)).unwrap();
        let mut same_tps = true;
        for (a, b) in small.traces.iter().zip(&big.traces) {
            if let Some(p) = a.preemptiveness {
                prop_assert!(b.preemptiveness.unwrap() >= p);
            }
            same_tps &= a.preemptiveness.is_some() == b.preemptiveness.is_some();
        }
        if same_tps {
            prop_assert!(big.mean_preemptiveness >= small.mean_preemptiveness);
        }
    }
}

#[test]
fn strictly_earlier_entry_raises_mean() {
    let test = Dataset::new(
        vec![
            xtrace("f1", &[0.0, 0.3, 0.6, 0.9, 0.2], true),
            xtrace("f2", &[0.3, 0.1, 0.95, 0.1], true),
            xtrace("g", &[0.1, 0.1, 0.1], false),
        ],
        vec!["x".into()],
    )
    .unwrap();
    let mut pool = vec![entry("G(!(x >= 0.8))")];
    let before = evaluate(&pool, &test, &identity_norm(1)).unwrap();
    pool.push(entry("G(!(x >= 0.25))"));
    let after = evaluate(&pool, &test, &identity_norm(1)).unwrap();
    assert_eq!(before.mean_preemptiveness, Some(1.0));
    assert_eq!(after.mean_preemptiveness, Some(3.0));
    assert_eq!(after.metrics.far, 0.0);
}
