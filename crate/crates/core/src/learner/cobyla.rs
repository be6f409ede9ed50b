//! Derivative-free constrained minimization by linear interpolation over a
//! simplex with a shrinking trust region, in the manner of Powell's COBYLA.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct CobylaConfig {
    pub rho_begin: f64,
    pub rho_end: f64,
    /// Hard cap on objective evaluations.
    pub max_eval: usize,
}

impl Default for CobylaConfig {
    fn default() -> Self {
        CobylaConfig { rho_begin: 0.1, rho_end: 1e-4, max_eval: 50 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CobylaResult {
    pub x: Vec<f64>,
    pub f: f64,
    /// Constraint values at `x`; feasible when all are `>= 0`.
    pub constraints: Vec<f64>,
    pub evals: usize,
}

#[derive(Clone, Debug)]
struct Point {
    x: Vec<f64>,
    f: f64,
    c: Vec<f64>,
}

impl Point {
    fn violation(&self) -> f64 {
        self.c.iter().fold(0.0f64, |m, &v| m.max(-v))
    }

    /// Less violation wins; among equally feasible points, lower objective.
    fn better_than(&self, other: &Point) -> bool {
        let (a, b) = (self.violation(), other.violation());
        if a != b {
            a < b
        } else {
            self.f < other.f
        }
    }
}

/// Minimize `f(x).0` subject to every entry of `f(x).1` being non-negative.
pub fn minimize<F>(mut f: F, x0: &[f64], cfg: &CobylaConfig) -> CobylaResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: Vec<f64>, evals: &mut usize| {
        *evals += 1;
        let (fv, c) = f(&x);
        Point { x, f: if fv.is_nan() { f64::INFINITY } else { fv }, c }
    };
    let start = eval(x0.to_vec(), &mut evals);
    if n == 0 || cfg.max_eval <= 1 {
        return finish(start, evals);
    }
    let mut rho = cfg.rho_begin;
    let mut sim = vec![start];
    if !fill_simplex(&mut sim, rho, cfg.max_eval, &mut evals, &mut eval) {
        return finish(best_of(&sim).clone(), evals);
    }
    while evals < cfg.max_eval {
        let b = best_index(&sim);
        let step = model(&sim, b).map(|(g, a)| subproblem(&g, &a, &sim[b].c, rho));
        let d = match step {
            Some(d) if norm(&d) >= 0.5 * rho => d,
            _ => {
                if rho <= cfg.rho_end {
                    break;
                }
                rho = (rho * 0.5).max(cfg.rho_end);
                let keep = sim.swap_remove(b);
                sim = vec![keep];
                if !fill_simplex(&mut sim, rho, cfg.max_eval, &mut evals, &mut eval) {
                    break;
                }
                continue;
            }
        };
        let x: Vec<f64> = sim[b].x.iter().zip(&d).map(|(a, s)| a + s).collect();
        let p = eval(x, &mut evals);
        let w = worst_index(&sim);
        if p.better_than(&sim[b]) || p.better_than(&sim[w]) {
            sim[w] = p;
        } else {
            if rho <= cfg.rho_end {
                break;
            }
            rho = (rho * 0.5).max(cfg.rho_end);
            let keep = sim.swap_remove(b);
            sim = vec![keep];
            if !fill_simplex(&mut sim, rho, cfg.max_eval, &mut evals, &mut eval) {
                break;
            }
        }
    }
    finish(best_of(&sim).clone(), evals)
}

fn finish(p: Point, evals: usize) -> CobylaResult {
    CobylaResult { x: p.x, f: p.f, constraints: p.c, evals }
}

/// Add the axis vertices `x + rho * e_i`; false if the budget ran out.
fn fill_simplex(
    sim: &mut Vec<Point>,
    rho: f64,
    max_eval: usize,
    evals: &mut usize,
    eval: &mut impl FnMut(Vec<f64>, &mut usize) -> Point,
) -> bool {
    let base = sim[0].x.clone();
    for i in 0..base.len() {
        if *evals >= max_eval {
            return false;
        }
        let mut x = base.clone();
        x[i] += rho;
        sim.push(eval(x, evals));
    }
    true
}

fn best_index(sim: &[Point]) -> usize {
    let mut b = 0;
    for i in 1..sim.len() {
        if sim[i].better_than(&sim[b]) {
            b = i;
        }
    }
    b
}

fn worst_index(sim: &[Point]) -> usize {
    let mut w = 0;
    for i in 1..sim.len() {
        if sim[w].better_than(&sim[i]) {
            w = i;
        }
    }
    w
}

fn best_of(sim: &[Point]) -> &Point {
    &sim[best_index(sim)]
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradients of the linear interpolants of the objective and constraints
/// through the simplex, anchored at vertex `b`.
fn model(sim: &[Point], b: usize) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = sim[b].x.len();
    let others: Vec<&Point> = sim.iter().enumerate().filter(|&(i, _)| i != b).map(|(_, p)| p).collect();
    if others.len() != n {
        return None;
    }
    let dm = DMatrix::from_fn(n, n, |r, c| others[r].x[c] - sim[b].x[c]);
    let lu = dm.lu();
    let solve = |rhs: DVector<f64>| -> Option<Vec<f64>> {
        let s = lu.solve(&rhs)?;
        s.iter().all(|v| v.is_finite()).then(|| s.iter().copied().collect())
    };
    let df = DVector::from_fn(n, |r, _| finite(others[r].f - sim[b].f));
    let g = solve(df)?;
    let mut a = Vec::with_capacity(sim[b].c.len());
    for k in 0..sim[b].c.len() {
        let dc = DVector::from_fn(n, |r, _| finite(others[r].c[k] - sim[b].c[k]));
        a.push(solve(dc)?);
    }
    Some((g, a))
}

fn finite(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Approximate trust-region step for the linear models: restore feasibility
/// first, otherwise descend along `-g` and project back onto the linearized
/// constraints.
fn subproblem(g: &[f64], a: &[Vec<f64>], c: &[f64], delta: f64) -> Vec<f64> {
    let n = g.len();
    let worst = (0..c.len()).filter(|&k| c[k] < 0.0).min_by(|&i, &j| c[i].total_cmp(&c[j]));
    if let Some(k) = worst {
        let na = norm(&a[k]);
        if na > 0.0 {
            let t = (-c[k] / na).min(delta);
            return a[k].iter().map(|v| v * t / na).collect();
        }
    }
    let ng = norm(g);
    if ng == 0.0 {
        return vec![0.0; n];
    }
    let mut d: Vec<f64> = g.iter().map(|v| -v * delta / ng).collect();
    for _ in 0..10 {
        let bad = (0..c.len())
            .map(|k| (k, c[k] + dot(&a[k], &d)))
            .filter(|&(_, v)| v < 0.0)
            .min_by(|x, y| x.1.total_cmp(&y.1));
        let Some((k, v)) = bad else { break };
        let na2 = dot(&a[k], &a[k]);
        if na2 == 0.0 {
            break;
        }
        for (di, ai) in d.iter_mut().zip(&a[k]) {
            *di -= v / na2 * ai;
        }
        let nd = norm(&d);
        if nd > delta {
            d.iter_mut().for_each(|x| *x *= delta / nd);
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_quadratic() {
        let cfg = CobylaConfig { rho_begin: 0.5, rho_end: 1e-6, max_eval: 300 };
        let r = minimize(|x| ((x[0] - 0.3).powi(2) + (x[1] + 0.2).powi(2), vec![]), &[0.0, 0.0], &cfg);
        assert!((r.x[0] - 0.3).abs() < 1e-2 && (r.x[1] + 0.2).abs() < 1e-2, "{r:?}");
        assert!(r.evals <= 300);
    }

    #[test]
    fn linear_objective_on_disk() {
        let cfg = CobylaConfig { rho_begin: 0.5, rho_end: 1e-6, max_eval: 400 };
        let r = minimize(|x| (x[0] + x[1], vec![1.0 - x[0] * x[0] - x[1] * x[1]]), &[0.0, 0.0], &cfg);
        let h = -(0.5f64).sqrt();
        assert!((r.x[0] - h).abs() < 2e-2 && (r.x[1] - h).abs() < 2e-2, "{r:?}");
        assert!(r.constraints[0] > -1e-3);
    }

    #[test]
    fn respects_budget_and_empty_input() {
        let mut calls = 0;
        let r = minimize(
            |x| {
                calls += 1;
                (x.iter().map(|v| v.sin()).sum(), vec![])
            },
            &[0.1, 0.2, 0.3],
            &CobylaConfig::default(),
        );
        assert!(r.evals <= 50);
        assert_eq!(calls, r.evals);
        let e = minimize(|_| (1.0, vec![]), &[], &CobylaConfig::default());
        assert_eq!(e.evals, 1);
    }

    #[test]
    fn infeasible_start_moves_to_feasibility() {
        let cfg = CobylaConfig { rho_begin: 0.2, rho_end: 1e-5, max_eval: 200 };
        let r = minimize(|x| (x[0], vec![x[0] - 2.0]), &[0.0], &cfg);
        assert!((r.x[0] - 2.0).abs() < 1e-2, "{r:?}");
    }
}
