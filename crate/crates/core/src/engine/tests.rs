use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::formula::{parse, sample_ppstl, sample_stl, Atom, GenConfig, Interval};

const INF: f64 = f64::INFINITY;
const NINF: f64 = f64::NEG_INFINITY;

fn fig1() -> Trace<f64> {
    let x = [1.0, 4.0, 2.0, 5.0];
    let y = [0.0, 3.0, 1.0, 2.0];
    Trace::new("fig1", x.iter().zip(y).map(|(&a, b)| vec![a, b]).collect(), false).unwrap()
}

fn f(text: &str) -> Formula<f64> {
    parse(text, &["x", "y"]).unwrap()
}

fn rob(text: &str, t: &Trace<f64>) -> Vec<f64> {
    let b = batch([t]).unwrap();
    robustness(&[f(text)], &b).unwrap().row(0, 0).to_vec()
}

fn random_trace(rng: &mut impl Rng, len: usize, n: usize) -> Trace<f64> {
    let rows = (0..len).map(|_| (0..n).map(|_| (rng.random_range(0..=20) as f64) / 20.0).collect()).collect();
    Trace::new("r", rows, false).unwrap()
}

#[test]
fn fig1_robustness() {
    let t = fig1();
    assert_eq!(rob("x >= 3", &t), vec![-2.0, 1.0, -1.0, 2.0]);
    assert_eq!(rob("x + y >= 6", &t), vec![-5.0, 1.0, -3.0, 1.0]);
    assert_eq!(rob("O(x >= 3 & x + y >= 6)", &t), vec![-5.0, 1.0, 1.0, 1.0]);
    let phi = f("O(x >= 3 & x + y >= 6)");
    for i in 0..4 {
        assert_eq!(robustness_ref(&phi, &t, i), rob("O(x >= 3 & x + y >= 6)", &t)[i]);
    }
}

#[test]
fn base_cases() {
    let t = fig1();
    assert_eq!(rob("TRUE", &t), vec![INF; 4]);
    assert_eq!(rob("Y(x >= 0)", &t)[0], NINF);
    assert_eq!(rob("wY(x >= 0)", &t)[0], INF);
    assert_eq!(rob("X(x >= 0)", &t)[3], NINF);
    assert_eq!(rob("H(x >= 0)", &t), vec![1.0, 1.0, 1.0, 1.0]);
    assert_eq!(rob("O[2,3](x >= 0)", &t), vec![NINF, NINF, NINF, 4.0]);
    assert_eq!(rob("H[1,inf](x >= 2)", &t), vec![INF, -1.0, -1.0, -1.0]);
}

#[test]
fn until_window_example() {
    // rho1 = [1,1,1], rho2 = [-1,2,-1] via atoms on a one-variable trace
    let t = Trace::new("u", vec![vec![-1.0], vec![2.0], vec![-1.0]], false).unwrap();
    let phi: Formula<f64> = parse("x >= -2 U[0,1] x >= 0", &["x"]).unwrap();
    let b = batch([&t]).unwrap();
    assert_eq!(robustness(&[phi], &b).unwrap().row(0, 0), &[1.0, 2.0, NINF]);
}

#[test]
fn variable_out_of_range() {
    let b = batch([&fig1()]).unwrap();
    let bad = Formula::atom(Atom::ge(5, 0.0));
    assert_eq!(robustness(&[bad], &b), Err(EngineError::VariableOutOfRange { var: 5, arity: 2 }));
}

#[test]
fn monitors_on_fig1() {
    use Verdict::*;
    let b = batch([&fig1()]).unwrap();
    let fm = monitor(&f("F(O(x >= 3 & x + y >= 6))"), &b).unwrap();
    assert_eq!(fm[0].verdicts, vec![Unknown, Top, Top, Top]);
    assert_eq!(fm[0].first_decision, Some(1));
    let gm = monitor(&f("G(!O(x >= 3 & x + y >= 6))"), &b).unwrap();
    assert_eq!(gm[0].verdicts, vec![Unknown, Bot, Bot, Bot]);

    let t = Trace::new("q", vec![vec![0.0], vec![1.0], vec![1.0]], false).unwrap();
    let quiet = monitor(&parse::<f64, _>("G(!(x >= 2))", &["x"]).unwrap(), &batch([&t]).unwrap()).unwrap();
    assert_eq!(quiet[0].verdicts, vec![Unknown; 3]);
    assert_eq!(quiet[0].first_decision, None);

    assert!(matches!(monitor(&f("O(x >= 3)"), &b), Err(EngineError::NotMonitorable(_))));
    assert!(matches!(monitor(&f("F(G(x >= 0))"), &b), Err(EngineError::NotMonitorable(_))));
}

#[test]
fn g_monitor_zero_is_not_a_violation() {
    let t = Trace::new("z", vec![vec![0.4], vec![0.5]], false).unwrap();
    let g = parse::<f64, _>("G(!(x >= 0.5))", &["x"]).unwrap();
    assert_eq!(monitor(&g, &batch([&t]).unwrap()).unwrap()[0].first_decision, None);
    let fm = parse::<f64, _>("F(x >= 0.5)", &["x"]).unwrap();
    assert_eq!(monitor(&fm, &batch([&t]).unwrap()).unwrap()[0].first_decision, Some(1));
}

#[test]
fn earliest_violation_cases() {
    let t = Trace::new("e", (0..10).map(|i| vec![i as f64]).collect(), false).unwrap();
    let names = ["x"];
    assert_eq!(earliest_violation::<f64>(&[], &t).unwrap(), None);
    let a = parse("x >= 6.5", &names).unwrap();
    let b = parse("x >= 2.5", &names).unwrap();
    assert_eq!(earliest_violation(&[a, b], &t).unwrap(), Some(3));
    // rob = [-.1, 0, -.2]
    let s = Trace::new("s", vec![vec![0.4], vec![0.5], vec![0.3]], false).unwrap();
    assert_eq!(earliest_violation(&[parse("x >= 0.5", &names).unwrap()], &s).unwrap(), None);
}

#[test]
fn trace_check_cases() {
    let t = fig1();
    assert!(trace_check(&f("O(x >= 3 & x + y >= 6)"), &t).unwrap());
    assert!(trace_check(&Formula::True, &t).unwrap());
    assert!(trace_check(&f("F(O(x >= 3 & x + y >= 6))"), &t).unwrap());
    assert!(!trace_check(&f("G(!O(x >= 3 & x + y >= 6))"), &t).unwrap());
    assert!(!trace_check(&f("x >= 3"), &t.cut(3).unwrap()).unwrap());
}

#[test]
fn oracle_equivalence_f32() {
    let cfg = GenConfig { arity: 3, interval_cap: 8, height_range: (1, 5), multisignal: true, ..GenConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let phi: Formula<f32> = sample_stl(&mut rng, &cfg);
        let len = rng.random_range(1..=30);
        let rows = (0..len).map(|_| (0..3).map(|_| rng.random_range(0.0f32..1.0)).collect()).collect();
        let t = Trace::new("t", rows, false).unwrap();
        let got = robustness(std::slice::from_ref(&phi), &batch([&t]).unwrap()).unwrap();
        assert_eq!(got.row(0, 0), robustness_ref_all(&phi, &t).as_slice());
    }
}

#[test]
fn reference_evaluator_sweeps_positions() {
    let t = fig1();
    let phi = f("O(x >= 3 & x + y >= 6)");
    let mut ev = ReferenceEvaluator::new(&phi, &t).unwrap();
    let got: Vec<f64> = (0..t.len()).map(|i| ev.eval(i)).collect();
    assert_eq!(got, vec![-5.0, 1.0, 1.0, 1.0]);
    let wide: Formula<f64> = parse("z >= 0", &["x", "y", "z"]).unwrap();
    assert!(ReferenceEvaluator::new(&wide, &t).is_err());
}

#[test]
fn bench_property_is_linear_pass() {
    let t = Trace::new("long", (0..20_000).map(|i| vec![(i % 13) as f64 / 13.0, 0.5]).collect(), false).unwrap();
    let phi: Formula<f64> = parse("O(x1 >= 0.3) -> H(x2 >= 0.1)", &["x1", "x2"]).unwrap();
    let r = robustness(&[phi], &batch([&t]).unwrap()).unwrap();
    assert_eq!(r.row(0, 0).len(), 20_000);
}

fn oracle_case(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=4);
    let cfg = GenConfig { arity: n, interval_cap: 10, height_range: (1, 6), multisignal: true, ..GenConfig::default() };
    let formulas: Vec<Formula<f64>> = (0..3).map(|_| sample_stl(&mut rng, &cfg)).collect();
    let traces: Vec<Trace<f64>> = (0..3)
        .map(|k| {
            let mut t = { let len = rng.random_range(1..=50); random_trace(&mut rng, len, n) };
            t.id = format!("t{k}");
            t
        })
        .collect();
    let r = robustness(&formulas, &batch(&traces).unwrap()).unwrap();
    for (q, phi) in formulas.iter().enumerate() {
        for (k, t) in traces.iter().enumerate() {
            let expect = robustness_ref_all(phi, t);
            assert_eq!(r.row(q, k), expect.as_slice(), "formula {}", phi.display::<&str>(&[]));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn vectorized_matches_reference(seed in any::<u64>()) {
        oracle_case(seed);
    }

    #[test]
    fn negation_and_idempotence(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenConfig { arity: 2, height_range: (1, 4), ..GenConfig::default() };
        let phi: Formula<f64> = sample_stl(&mut rng, &cfg);
        let t = { let len = rng.random_range(1..=20); random_trace(&mut rng, len, 2) };
        let base = robustness_ref_all(&phi, &t);
        let neg = robustness_ref_all(&Formula::not(phi.clone()), &t);
        let dup = robustness_ref_all(&Formula::or(phi.clone(), phi.clone()), &t);
        let and = robustness(&[Formula::and(phi.clone(), Formula::not(phi.clone()))], &batch([&t]).unwrap()).unwrap();
        for i in 0..t.len() {
            prop_assert_eq!(neg[i], -base[i]);
            prop_assert_eq!(dup[i], base[i]);
            prop_assert_eq!(and.get(0, 0, i), base[i].min(-base[i]));
        }
    }

    #[test]
    fn pure_past_is_prefix_local(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenConfig { arity: 3, height_range: (1, 6), multisignal: true, ..GenConfig::default() };
        let phi: Formula<f64> = sample_ppstl(&mut rng, &cfg);
        let t = { let len = rng.random_range(1..=40); random_trace(&mut rng, len, 3) };
        let full = robustness(std::slice::from_ref(&phi), &batch([&t]).unwrap()).unwrap();
        for i in 0..t.len() {
            let prefix = t.cut(i + 1).unwrap();
            prop_assert_eq!(robustness_ref(&phi, &prefix, i), full.get(0, 0, i));
        }
    }

    #[test]
    fn monitor_agrees_with_prefix_trace_check(seed in any::<u64>(), safety in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenConfig { arity: 2, height_range: (1, 5), ..GenConfig::default() };
        let body: Formula<f64> = sample_ppstl(&mut rng, &cfg);
        let wrapped = if safety {
            Formula::globally(Interval::UNBOUNDED, body)
        } else {
            Formula::eventually(Interval::UNBOUNDED, body)
        };
        let t = { let len = rng.random_range(1..=40); random_trace(&mut rng, len, 2) };
        let mt = &monitor(&wrapped, &batch([&t]).unwrap()).unwrap()[0];
        for i in 0..t.len() {
            let sat = trace_check(&wrapped, &t.cut(i + 1).unwrap()).unwrap();
            let v = mt.verdicts[i];
            if safety {
                prop_assert_eq!(v == Verdict::Bot, !sat);
            } else {
                prop_assert_eq!(v == Verdict::Top, sat);
            }
            if i > 0 && mt.verdicts[i - 1] != Verdict::Unknown {
                prop_assert_eq!(v, mt.verdicts[i - 1]);
            }
        }
    }
}
