use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{batch, Dataset, Trace, TraceError};
use crate::engine::robustness;
use crate::formula::Formula;
use crate::scalar::Scalar;

/// Shape of a planted synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub arity: usize,
    pub n_good: usize,
    pub n_fail: usize,
    pub len: usize,
    /// Standard deviation of each random-walk step.
    pub step_std: f64,
    /// Pull toward the target per step in the failing suffix.
    pub drift: f64,
    /// Pull toward the nominal operating point per quiet step; with 0 the
    /// walk is free and starts uniformly in the unit cube.
    pub reversion: f64,
    /// Nominal operating point, shared by every variable.
    pub nominal: f64,
    /// Total resampling attempts allowed per trace.
    pub max_retries: usize,
    /// Return an empty dataset instead of an error when nothing is requested.
    pub allow_empty: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            arity: 3,
            n_good: 40,
            n_fail: 20,
            len: 60,
            step_std: 0.05,
            drift: 0.15,
            reversion: 0.1,
            nominal: 0.5,
            max_retries: 10_000,
            allow_empty: false,
        }
    }
}

/// Sidecar record written next to a synthetic CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthMeta {
    pub planted: String,
    pub seed: u64,
    pub config: SynthConfig,
}

/// Good traces are clamped random walks around a nominal operating point,
/// resampled until `planted` never fires;
/// failure traces keep it silent for a prefix and then drift toward a state
/// where it fires (a random one if none is found) until it does.
pub fn synth_generate<T: Scalar, R: Rng + ?Sized>(
    planted: &Formula<T>,
    cfg: &SynthConfig,
    rng: &mut R,
) -> Result<Dataset<T>, TraceError> {
    if !planted.is_pure_past() {
        return Err(TraceError::Planted("formula must be pure past".into()));
    }
    let n = cfg.arity;
    if let Some(v) = planted.max_var() {
        if v >= n {
            return Err(TraceError::Planted(format!("variable index {v} exceeds arity {n}")));
        }
    }
    if cfg.n_good + cfg.n_fail == 0 {
        return if cfg.allow_empty {
            Ok(Dataset { traces: Vec::new(), var_names: var_names(n) })
        } else {
            Err(TraceError::EmptyRequest)
        };
    }
    if cfg.len == 0 || n == 0 || (cfg.n_fail > 0 && cfg.len < 2) {
        return Err(TraceError::Planted("traces need length >= 2 and arity >= 1".into()));
    }
    let step = Normal::new(0.0, cfg.step_std.max(0.0)).map_err(|e| TraceError::Planted(e.to_string()))?;
    let mut gen = Walker {
        planted,
        n,
        step,
        reversion: cfg.reversion.clamp(0.0, 1.0),
        nominal: cfg.nominal,
        rng,
        budget: cfg.max_retries,
        no_firing_state: false,
    };

    let mut traces = Vec::with_capacity(cfg.n_good + cfg.n_fail);
    for k in 0..cfg.n_good {
        gen.budget = cfg.max_retries;
        let rows = gen.quiet_walk(cfg.len)?;
        traces.push(to_trace(format!("good{k}"), rows, n, false));
    }
    for k in 0..cfg.n_fail {
        gen.budget = cfg.max_retries;
        let split = gen.rng.random_range(cfg.len / 4..=(3 * cfg.len / 4).max(1)).clamp(1, cfg.len - 1);
        let prefix = gen.quiet_walk(split)?;
        let rows = gen.firing_suffix(prefix, cfg.len, cfg.drift)?;
        traces.push(to_trace(format!("fail{k}"), rows, n, true));
    }
    Dataset::new(traces, var_names(n))
}

fn var_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn to_trace<T: Scalar>(id: String, rows: Vec<f64>, n: usize, fail: bool) -> Trace<T> {
    Trace::from_flat(id, rows.into_iter().map(T::lit).collect(), n, fail).expect("nonempty walk")
}

const TARGET_DRAWS: usize = 1000;

struct Walker<'a, T, R: ?Sized> {
    planted: &'a Formula<T>,
    n: usize,
    step: Normal<f64>,
    reversion: f64,
    nominal: f64,
    rng: &'a mut R,
    budget: usize,
    /// Set once a search for a firing state has come up empty.
    no_firing_state: bool,
}

impl<T: Scalar, R: Rng + ?Sized> Walker<'_, T, R> {
    fn spend(&mut self) -> Result<(), TraceError> {
        if self.budget == 0 {
            return Err(TraceError::RetryBudgetExceeded(0));
        }
        self.budget -= 1;
        Ok(())
    }

    /// Robustness of the planted detector along a flat row-major walk.
    fn rob(&self, rows: &[f64]) -> Vec<T> {
        let t = to_trace::<T>("w".into(), rows.to_vec(), self.n, false);
        let b = batch([&t]).expect("single trace");
        robustness(std::slice::from_ref(self.planted), &b).expect("checked arity").row(0, 0).to_vec()
    }

    fn start_state(&mut self) -> Vec<f64> {
        if self.reversion == 0.0 {
            return (0..self.n).map(|_| self.rng.random_range(0.0..1.0)).collect();
        }
        // Stationary spread of the mean-reverting walk.
        let sd = self.step.std_dev() / (self.reversion * (2.0 - self.reversion)).sqrt();
        (0..self.n)
            .map(|_| (self.nominal + sd * self.rng.sample::<f64, _>(rand_distr::StandardNormal)).clamp(0.0, 1.0))
            .collect()
    }

    fn next_state(&mut self, prev: &[f64], target: Option<&[f64]>, drift: f64) -> Vec<f64> {
        (0..self.n)
            .map(|v| {
                let pull = match target {
                    Some(t) => drift * (t[v] - prev[v]),
                    None => self.reversion * (self.nominal - prev[v]),
                };
                (prev[v] + pull + self.step.sample(self.rng)).clamp(0.0, 1.0)
            })
            .collect()
    }

    fn quiet_walk(&mut self, len: usize) -> Result<Vec<f64>, TraceError> {
        loop {
            let mut rows: Vec<f64> = Vec::with_capacity(len * self.n);
            let start = self.start_state();
            rows.extend(start);
            while rows.len() < len * self.n {
                let prev = rows[rows.len() - self.n..].to_vec();
                rows.extend(self.next_state(&prev, None, 0.0));
            }
            if self.rob(&rows).iter().all(|&r| r < T::zero()) {
                return Ok(rows);
            }
            self.spend().map_err(|_| TraceError::RetryBudgetExceeded(len))?;
        }
    }

    /// A state whose constant trace of length `len` makes the planted
    /// detector fire, if one turns up within a bounded number of draws.
    fn firing_state(&mut self, len: usize) -> Option<Vec<f64>> {
        if self.no_firing_state {
            return None;
        }
        for _ in 0..TARGET_DRAWS {
            let s: Vec<f64> = (0..self.n).map(|_| self.rng.random_range(0.0..1.0)).collect();
            let rows: Vec<f64> = s.iter().copied().cycle().take(len * self.n).collect();
            if self.rob(&rows).iter().any(|&r| r >= T::zero()) {
                return Some(s);
            }
        }
        self.no_firing_state = true;
        None
    }

    fn firing_suffix(&mut self, prefix: Vec<f64>, len: usize, drift: f64) -> Result<Vec<f64>, TraceError> {
        let n = self.n;
        let split = prefix.len() / n;
        loop {
            let target = match self.firing_state(len) {
                Some(t) => t,
                None => (0..n).map(|_| self.rng.random_range(0.0..1.0)).collect(),
            };
            let mut rows = prefix.clone();
            while rows.len() < len * n {
                let prev = rows[rows.len() - n..].to_vec();
                let s = self.next_state(&prev, Some(&target), drift);
                rows.extend(s);
            }
            if self.rob(&rows)[split..].iter().any(|&r| r >= T::zero()) {
                return Ok(rows);
            }
            self.spend().map_err(|_| TraceError::RetryBudgetExceeded(len))?;
        }
    }
}
