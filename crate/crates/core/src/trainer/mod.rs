//! The training loop: normalization, augmentation, epochs of cutting and
//! batched formula learning, and the growing pool of safety properties.

mod pool;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{earliest_violations, EngineError};
use crate::formula::Formula;
use crate::learner::{learn_formulas, EAConfig, LearnError, Learned};
use crate::scalar::Scalar;
use crate::trace::{augment, batch, AugmentedPair, Dataset, NormalizationParams, Trace, TraceError};

pub use pool::{load_pool, read_pool, save_pool, write_pool, PoolEntry, PoolError, Quality};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no failure traces")]
    NoFailures,
    #[error("no good traces")]
    NoGoods,
    #[error("pool formula uses variable {var} but the data has {arity} variables")]
    PoolArity { var: usize, arity: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Training hyperparameters; the evolutionary ones live under `ea`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub n_aug_fail: usize,
    pub n_aug_good: usize,
    /// Batch size: pairs per batch.
    #[serde(rename = "b")]
    pub batch_size: usize,
    /// Number of epochs.
    #[serde(rename = "e")]
    pub epochs: usize,
    pub noise_std: f64,
    /// Learn the batches of an epoch concurrently.
    pub parallel: bool,
    pub ea: EAConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            n_aug_fail: 5,
            n_aug_good: 0,
            batch_size: 5,
            epochs: 2,
            noise_std: 0.01,
            parallel: false,
            ea: EAConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::Config("e and b must be at least 1".into()));
        }
        if self.noise_std.is_nan() || self.noise_std < 0.0 {
            return Err(TrainError::Config("noise_std must be non-negative".into()));
        }
        self.ea.validate()?;
        Ok(())
    }
}

/// Independent random stream for a named stage of training.
pub fn stage_rng(seed: u64, epoch: usize, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | batch as u64);
    rng
}

/// Normalized training material shared by all epochs.
#[derive(Clone, Debug)]
pub struct Prepared<T: Scalar> {
    pub norm: NormalizationParams<T>,
    /// Good traces plus their augmentations.
    pub goods: Vec<Trace<T>>,
    /// Failure traces with their augmentations.
    pub pairs: Vec<AugmentedPair<T>>,
}

const STAGE_GOOD_AUG: usize = 1;
const STAGE_FAIL_AUG: usize = 2;

pub fn prepare<T: Scalar>(data: &Dataset<T>, cfg: &TrainConfig) -> Result<Prepared<T>, TrainError> {
    if data.failures().next().is_none() {
        return Err(TrainError::NoFailures);
    }
    if data.goods().next().is_none() {
        return Err(TrainError::NoGoods);
    }
    let norm = NormalizationParams::fit(data);
    let nd = norm.apply(data)?;
    let mut rng = stage_rng(cfg.seed, 0, STAGE_GOOD_AUG);
    let mut goods = Vec::new();
    for t in nd.goods() {
        goods.push(t.clone());
        goods.extend(augment(t, cfg.n_aug_good, cfg.noise_std, &mut rng)?);
    }
    let mut rng = stage_rng(cfg.seed, 0, STAGE_FAIL_AUG);
    let mut pairs = Vec::new();
    for t in nd.failures() {
        let augmentations = augment(t, cfg.n_aug_fail, cfg.noise_std, &mut rng)?;
        pairs.push(AugmentedPair { original: t.clone(), augmentations });
    }
    Ok(Prepared { norm, goods, pairs })
}

/// Cut every pair at the first position where a pool detector fires on its
/// original trace; pairs that would become empty are dropped.
pub fn cut_pairs<T: Scalar>(
    pairs: &[AugmentedPair<T>],
    pool_bodies: &[Formula<T>],
) -> Result<Vec<AugmentedPair<T>>, TrainError> {
    if pool_bodies.is_empty() || pairs.is_empty() {
        return Ok(pairs.to_vec());
    }
    let b = batch(pairs.iter().map(|p| &p.original))?;
    let cuts = earliest_violations(pool_bodies, &b)?;
    let mut out = Vec::with_capacity(pairs.len());
    for (p, v) in pairs.iter().zip(cuts) {
        match v {
            None => out.push(p.clone()),
            Some(0) => {}
            Some(v) => out.push(p.cut(v)?),
        }
    }
    Ok(out)
}

/// Random partition into batches of `b` pairs (the last may be smaller).
pub fn generate_batches<T: Clone, R: Rng + ?Sized>(items: &[T], b: usize, rng: &mut R) -> Vec<Vec<T>> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(rng);
    idx.chunks(b.max(1)).map(|c| c.iter().map(|&i| items[i].clone()).collect()).collect()
}

/// What happened in one batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchLog {
    pub epoch: usize,
    pub batch: usize,
    pub pairs: Vec<String>,
    pub pair_lengths: Vec<usize>,
    pub learned: Vec<String>,
    pub hypervolumes: Vec<f64>,
    pub best_generation: usize,
    pub pool_size: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T: Scalar> {
    pub pool: Vec<PoolEntry<T>>,
    pub norm: NormalizationParams<T>,
    pub log: Vec<BatchLog>,
}

/// Run all epochs, appending safety-wrapped detectors to `pool`.
/// Formulas are expressed over normalized values.
pub fn train<T: Scalar>(
    data: &Dataset<T>,
    pool: Vec<PoolEntry<T>>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>, TrainError> {
    cfg.validate()?;
    let arity = data.arity();
    for e in &pool {
        if let Some(var) = e.formula.max_var().filter(|&v| v >= arity) {
            return Err(TrainError::PoolArity { var, arity });
        }
    }
    let prep = prepare(data, cfg)?;
    let mut pool = pool;
    let mut log = Vec::new();
    for epoch in 1..=cfg.epochs {
        let bodies: Vec<Formula<T>> = pool.iter().map(|e| e.body.clone()).collect();
        let cut = cut_pairs(&prep.pairs, &bodies)?;
        let batches = generate_batches(&cut, cfg.batch_size, &mut stage_rng(cfg.seed, epoch, 0));
        let run = |(j, pairs): (usize, &Vec<AugmentedPair<T>>)| {
            let mut rng = stage_rng(cfg.seed, epoch, j + 1);
            learn_formulas(pairs, &prep.goods, &cfg.ea, &mut rng)
        };
        let outcomes = if cfg.parallel {
            batches.par_iter().enumerate().map(run).collect::<Result<Vec<_>, _>>()?
        } else {
            batches.iter().enumerate().map(run).collect::<Result<Vec<_>, _>>()?
        };
        for (j, (pairs, out)) in batches.iter().zip(outcomes).enumerate() {
            let mut learned = Vec::new();
            for l in out.formulas {
                let entry = entry_for(l, pairs, epoch, j);
                learned.push(entry.formula.display(&data.var_names).to_string());
                pool.push(entry);
            }
            log.push(BatchLog {
                epoch,
                batch: j,
                pairs: pairs.iter().map(|p| p.original.id.clone()).collect(),
                pair_lengths: pairs.iter().map(|p| p.original.len()).collect(),
                learned,
                hypervolumes: out.hypervolumes,
                best_generation: out.best_generation,
                pool_size: pool.len(),
            });
        }
    }
    Ok(TrainOutcome { pool, norm: prep.norm, log })
}

fn entry_for<T: Scalar>(l: Learned<T>, pairs: &[AugmentedPair<T>], epoch: usize, batch: usize) -> PoolEntry<T> {
    let f = &l.fitness;
    PoolEntry {
        formula: l.formula.clone().safety_wrap().expect("learned formulas are pure past"),
        body: l.formula,
        learned_at: Some((epoch, batch)),
        quality: Some(Quality { acc: f.acc, far: f.far.unwrap_or(0.0), margin: f.margin }),
        source_id: Some(pairs[l.pair_id].original.id.clone()),
        timestamp: None,
    }
}
