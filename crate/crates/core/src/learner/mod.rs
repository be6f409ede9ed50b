//! Evolutionary extraction of pure-past failure detectors from failure
//! traces, their augmentations and a sample of good traces.

mod cobyla;
mod fitness;
mod hypervolume;
mod nsga2;
mod variation;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{robustness, EngineError};
use crate::formula::{Formula, GenConfig};
use crate::scalar::Scalar;
use crate::trace::{batch, AugmentedPair, Trace, TraceBatch};

pub use cobyla::{minimize, CobylaConfig, CobylaResult};
pub use fitness::{max_rob, score_vector, FitnessRecord, SCORE_EPS};
pub use hypervolume::{hypervolume_2d, HV_REFERENCE};
pub use nsga2::{crowding_distance, non_dominated_fronts, nsga2_select, Objectives};
pub use variation::{apply_mutation, crossover, mutate, mutation_rate, Mutation};

use hypervolume::{clamp_unit, point_volume};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("robustness vector is empty")]
    EmptyRobustness,
    #[error("no good traces to sample from")]
    EmptyGoodSample,
    #[error("cannot select {target} survivors from {available} individuals")]
    SelectionTooLarge { target: usize, available: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Hyperparameters of the evolutionary search and the quality gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EAConfig {
    pub pop_size: usize,
    pub max_gen: usize,
    pub patience: usize,
    pub mut_prob: f64,
    pub cross_prob: f64,
    pub fract_good: f64,
    pub r_interval: usize,
    pub k_opt: usize,
    pub min_acc: f64,
    pub max_far: f64,
    pub refine_max_iter: usize,
    /// Allow `x_i - x_j >= c` atoms.
    pub multisignal: bool,
    /// Height range of initial formulas.
    pub init_height: (usize, usize),
    /// Largest interval bound; defaults to the longest training trace.
    pub interval_cap: Option<usize>,
}

impl Default for EAConfig {
    fn default() -> Self {
        EAConfig {
            pop_size: 500,
            max_gen: 500,
            patience: 100,
            mut_prob: 0.3,
            cross_prob: 0.9,
            fract_good: 0.33,
            r_interval: 10,
            k_opt: 5,
            min_acc: 0.75,
            max_far: 0.005,
            refine_max_iter: 50,
            multisignal: false,
            init_height: (2, 6),
            interval_cap: None,
        }
    }
}

impl EAConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(LearnError::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        prob("mut_prob", self.mut_prob)?;
        prob("cross_prob", self.cross_prob)?;
        prob("fract_good", self.fract_good)?;
        if self.k_opt == 0 {
            return Err(LearnError::Config("k_opt must be at least 1".into()));
        }
        if self.pop_size == 0 {
            return Err(LearnError::Config("pop_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Candidate detector bound to one failure pair of the current batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual<T> {
    pub formula: Formula<T>,
    pub pair_id: usize,
    pub fitness: Option<FitnessRecord>,
}

impl<T: Scalar> Individual<T> {
    pub fn new(formula: Formula<T>, pair_id: usize) -> Self {
        Individual { formula, pair_id, fitness: None }
    }

    fn fit(&self) -> &FitnessRecord {
        self.fitness.as_ref().expect("evaluated individual")
    }
}

/// Per-pair batches holding the pair's traces followed by the selection and
/// early-stopping samples of good traces.
struct Evaluator<T> {
    batches: Vec<TraceBatch<T>>,
    pair_sizes: Vec<usize>,
    n_sel: usize,
    n_es: usize,
}

impl<T: Scalar> Evaluator<T> {
    fn new(pairs: &[AugmentedPair<T>], sel: &[&Trace<T>], es: &[&Trace<T>]) -> Self {
        let batches = pairs
            .iter()
            .map(|p| batch(p.traces().chain(sel.iter().copied()).chain(es.iter().copied())).expect("uniform arity"))
            .collect();
        Evaluator { batches, pair_sizes: pairs.iter().map(|p| p.len()).collect(), n_sel: sel.len(), n_es: es.len() }
    }

    /// One engine call per pair over all formulas bound to it.
    fn evaluate(&self, inds: &mut [Individual<T>]) -> Result<(), LearnError> {
        for (pair, b) in self.batches.iter().enumerate() {
            let idx: Vec<usize> = (0..inds.len()).filter(|&i| inds[i].pair_id == pair).collect();
            if idx.is_empty() {
                continue;
            }
            let formulas: Vec<Formula<T>> = idx.iter().map(|&i| inds[i].formula.clone()).collect();
            let rob = robustness(&formulas, b)?;
            let np = self.pair_sizes[pair];
            for (q, &i) in idx.iter().enumerate() {
                let (margin, ok_orig, acc) = fitness::pair_terms((0..np).map(|k| rob.row(q, k)))?;
                let sel = fitness::good_rob((np..np + self.n_sel).map(|k| rob.row(q, k)));
                let es = fitness::good_rob((np + self.n_sel..np + self.n_sel + self.n_es).map(|k| rob.row(q, k)));
                inds[i].fitness = Some(FitnessRecord {
                    margin,
                    ok_orig,
                    acc,
                    far: None,
                    good_rob_sel: sel,
                    good_rob_es: es,
                    good_rob_full: None,
                });
            }
        }
        Ok(())
    }
}

/// Fitness of each individual against its pair and the two good-trace samples.
pub fn evaluate_fitness<T: Scalar>(
    inds: &[Individual<T>],
    pairs: &[AugmentedPair<T>],
    sel: &[&Trace<T>],
    es: &[&Trace<T>],
) -> Result<Vec<FitnessRecord>, LearnError> {
    let mut work = inds.to_vec();
    Evaluator::new(pairs, sel, es).evaluate(&mut work)?;
    Ok(work.into_iter().map(|i| i.fitness.expect("evaluated")).collect())
}

/// `(far, good_rob_full)` of each formula over the full good set.
pub fn good_set_metrics<T: Scalar>(
    formulas: &[Formula<T>],
    goods: &TraceBatch<T>,
) -> Result<Vec<(f64, f64)>, LearnError> {
    let rob = robustness(formulas, goods)?;
    let m = goods.num_traces();
    Ok((0..formulas.len())
        .map(|q| {
            (
                fitness::false_alarm_rate((0..m).map(|k| rob.row(q, k))),
                fitness::good_rob((0..m).map(|k| rob.row(q, k))),
            )
        })
        .collect())
}

/// Margin on the pair and worst good-trace robustness, the two quantities
/// the constant refinement trades off.
pub fn refinement_terms<T: Scalar>(
    formula: &Formula<T>,
    pair: &AugmentedPair<T>,
    goods: &[Trace<T>],
) -> Result<(f64, f64), LearnError> {
    let b = batch(pair.traces().chain(goods.iter())).expect("uniform arity");
    let rob = robustness(std::slice::from_ref(formula), &b)?;
    let np = pair.len();
    let (margin, _, _) = fitness::pair_terms((0..np).map(|k| rob.row(0, k)))?;
    let gr = fitness::good_rob((np..b.num_traces()).map(|k| rob.row(0, k)));
    Ok((margin, gr))
}

/// Objective and constraint seen by the optimizer: minimize `-margin`
/// subject to `-good_rob_full > 0`.
fn refinement_point(margin: f64, good_rob: f64) -> (f64, f64) {
    (-clamp_unit(margin), -clamp_unit(good_rob) - 1e-9)
}

fn refinement_better(a: (f64, f64), b: (f64, f64)) -> bool {
    let (va, vb) = ((-a.1).max(0.0), (-b.1).max(0.0));
    if va != vb {
        va < vb
    } else {
        a.0 < b.0
    }
}

/// Re-optimize atom thresholds (in `[0, 1]`) to maximize the pair margin
/// while keeping every good trace strictly below zero robustness. Interval
/// bounds are left alone. Returns the better of input and result.
pub fn refine_constants<T: Scalar>(
    ind: &Individual<T>,
    pair: &AugmentedPair<T>,
    goods: &[Trace<T>],
    max_eval: usize,
) -> Result<Individual<T>, LearnError> {
    let x0: Vec<f64> = ind.formula.thresholds().iter().map(|t| t.as_f64()).collect();
    if x0.is_empty() || max_eval == 0 {
        return Ok(ind.clone());
    }
    let (m0, g0) = refinement_terms(&ind.formula, pair, goods)?;
    let start = refinement_point(m0, g0);
    let mut failure = None;
    let with = |x: &[f64]| {
        let mut f = ind.formula.clone();
        let vals: Vec<T> = x.iter().map(|v| T::lit(v.clamp(0.0, 1.0))).collect();
        f.set_thresholds(&vals);
        f
    };
    let cfg = CobylaConfig { rho_begin: 0.05, rho_end: 1e-3, max_eval };
    let res = minimize(
        |x| match refinement_terms(&with(x), pair, goods) {
            Ok((m, g)) => {
                let (f, c) = refinement_point(m, g);
                (f, vec![c])
            }
            Err(e) => {
                failure = Some(e);
                (f64::INFINITY, vec![-1.0])
            }
        },
        &x0,
        &cfg,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if refinement_better((res.f, res.constraints[0]), start) {
        Ok(Individual::new(with(&res.x), ind.pair_id))
    } else {
        Ok(ind.clone())
    }
}

/// A detector returned by [`learn_formulas`].
#[derive(Clone, Debug, PartialEq)]
pub struct Learned<T> {
    pub formula: Formula<T>,
    pub pair_id: usize,
    pub fitness: FitnessRecord,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnOutcome<T> {
    pub formulas: Vec<Learned<T>>,
    /// Population hypervolume on `(margin, good_rob_es)` per generation,
    /// starting with the initial population.
    pub hypervolumes: Vec<f64>,
    pub best_generation: usize,
}

fn population_hv<T: Scalar>(pop: &[Individual<T>]) -> f64 {
    let pts: Vec<(f64, f64)> = pop.iter().map(|i| (i.fit().margin, i.fit().good_rob_es)).collect();
    hypervolume_2d(&pts, HV_REFERENCE)
}

fn sample_goods<'a, T, R: Rng + ?Sized>(goods: &'a [Trace<T>], size: usize, rng: &mut R) -> Vec<&'a Trace<T>> {
    let mut idx = sample(rng, goods.len(), size).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| &goods[i]).collect()
}

/// Evolve detectors for a batch of failure pairs against the good traces and
/// return at most one gate-passing formula per pair.
pub fn learn_formulas<T: Scalar, R: Rng + ?Sized>(
    pairs: &[AugmentedPair<T>],
    goods: &[Trace<T>],
    cfg: &EAConfig,
    rng: &mut R,
) -> Result<LearnOutcome<T>, LearnError> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Ok(LearnOutcome { formulas: Vec::new(), hypervolumes: Vec::new(), best_generation: 0 });
    }
    if goods.is_empty() {
        return Err(LearnError::EmptyGoodSample);
    }
    let longest = pairs.iter().map(|p| p.original.len()).chain(goods.iter().map(Trace::len)).max().unwrap_or(1);
    let gen = GenConfig {
        arity: pairs[0].original.arity(),
        const_range: (0.0, 1.0),
        interval_cap: cfg.interval_cap.unwrap_or(longest),
        height_range: cfg.init_height,
        multisignal: cfg.multisignal,
        p_unbounded: 0.5,
    };
    let n_sample = ((cfg.fract_good * goods.len() as f64).ceil() as usize).clamp(1, goods.len());
    let mut sel = sample_goods(goods, n_sample, rng);
    let es = sample_goods(goods, n_sample, rng);
    let mut evaluator = Evaluator::new(pairs, &sel, &es);

    let np = pairs.len();
    let mut pop: Vec<Individual<T>> = Vec::with_capacity(cfg.pop_size);
    for p in 0..np {
        let share = cfg.pop_size / np + usize::from(p < cfg.pop_size % np);
        for _ in 0..share {
            pop.push(variation::random_individual(p, &gen, rng));
        }
    }
    evaluator.evaluate(&mut pop)?;

    let mut best_hv = population_hv(&pop);
    let mut hypervolumes = vec![best_hv];
    let mut best_pop = pop.clone();
    let mut best_generation = 0;
    let mut stall = 0;
    for g in 1..=cfg.max_gen {
        if g > 1 && cfg.r_interval > 0 && (g - 1) % cfg.r_interval == 0 {
            sel = sample_goods(goods, n_sample, rng);
            evaluator = Evaluator::new(pairs, &sel, &es);
            evaluator.evaluate(&mut pop)?;
        }
        let mut offspring = Vec::with_capacity(cfg.pop_size + 1);
        while offspring.len() < cfg.pop_size {
            let a = &pop[rng.random_range(0..pop.len())];
            let b = &pop[rng.random_range(0..pop.len())];
            let (c, d) = if rng.random_bool(cfg.cross_prob) { crossover(a, b, rng) } else { (a.clone(), b.clone()) };
            offspring.push(mutate(&c, g, cfg.mut_prob, &gen, rng));
            offspring.push(mutate(&d, g, cfg.mut_prob, &gen, rng));
        }
        offspring.truncate(cfg.pop_size);
        for o in &mut offspring {
            o.fitness = None;
        }
        evaluator.evaluate(&mut offspring)?;

        let targets: Vec<usize> = (0..np).map(|p| pop.iter().filter(|i| i.pair_id == p).count()).collect();
        let combined: Vec<Individual<T>> = pop.drain(..).chain(offspring).collect();
        for (p, &target) in targets.iter().enumerate() {
            let members: Vec<usize> = (0..combined.len()).filter(|&i| combined[i].pair_id == p).collect();
            let objs: Vec<Objectives> = members
                .iter()
                .map(|&i| (-clamp_unit(combined[i].fit().margin), clamp_unit(combined[i].fit().good_rob_sel)))
                .collect();
            for k in nsga2_select(&objs, target)? {
                pop.push(combined[members[k]].clone());
            }
        }

        let hv = population_hv(&pop);
        hypervolumes.push(hv);
        if hv > best_hv + 1e-12 {
            best_hv = hv;
            best_pop = pop.clone();
            best_generation = g;
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        }
    }

    let formulas = finalize(best_pop, pairs, goods, cfg, &evaluator)?;
    Ok(LearnOutcome { formulas, hypervolumes, best_generation })
}

/// Fill in the full-good-set metrics of already evaluated individuals.
fn complete<T: Scalar>(inds: &mut [Individual<T>], goods: &TraceBatch<T>) -> Result<(), LearnError> {
    let formulas: Vec<Formula<T>> = inds.iter().map(|i| i.formula.clone()).collect();
    for (ind, (far, gr)) in inds.iter_mut().zip(good_set_metrics(&formulas, goods)?) {
        let f = ind.fitness.as_mut().expect("evaluated individual");
        f.far = Some(far);
        f.good_rob_full = Some(gr);
    }
    Ok(())
}

/// Ranking key: larger own hypervolume on `(margin, good_rob_full)` first,
/// then smaller formulas, then earlier position.
fn rank_key<T: Scalar>(ind: &Individual<T>) -> (f64, usize) {
    let f = ind.fit();
    (point_volume((f.margin, f.good_rob_full.unwrap_or(f64::INFINITY))), ind.formula.size())
}

fn rank<T: Scalar>(inds: &[Individual<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..inds.len()).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (rank_key(&inds[a]), rank_key(&inds[b]));
        kb.0.total_cmp(&ka.0).then(ka.1.cmp(&kb.1)).then(a.cmp(&b))
    });
    order
}

fn passes_gate(f: &FitnessRecord, cfg: &EAConfig) -> bool {
    f.acc >= cfg.min_acc && f.ok_orig && f.far.is_some_and(|far| far <= cfg.max_far)
}

fn finalize<T: Scalar>(
    mut pop: Vec<Individual<T>>,
    pairs: &[AugmentedPair<T>],
    goods: &[Trace<T>],
    cfg: &EAConfig,
    evaluator: &Evaluator<T>,
) -> Result<Vec<Learned<T>>, LearnError> {
    let goods_batch = batch(goods).expect("nonempty goods");
    complete(&mut pop, &goods_batch)?;
    let mut out = Vec::new();
    for (p, pair) in pairs.iter().enumerate() {
        let mut part: Vec<Individual<T>> = pop.iter().filter(|i| i.pair_id == p).cloned().collect();
        if part.is_empty() {
            continue;
        }
        let top: Vec<usize> = rank(&part).into_iter().take(cfg.k_opt).collect();
        let mut refined: Vec<Individual<T>> = Vec::with_capacity(top.len());
        for &i in &top {
            refined.push(refine_constants(&part[i], pair, goods, cfg.refine_max_iter)?);
        }
        evaluator.evaluate(&mut refined)?;
        complete(&mut refined, &goods_batch)?;
        for (&i, r) in top.iter().zip(refined) {
            part[i] = r;
        }
        if let Some(best) = rank(&part).into_iter().find(|&i| passes_gate(part[i].fit(), cfg)) {
            let ind = &part[best];
            out.push(Learned { formula: ind.formula.clone(), pair_id: p, fitness: ind.fit().clone() });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
