//! Scoring a pool of safety properties on a labeled test set.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{earliest_violation, robustness, EngineError};
use crate::formula::Formula;
use crate::scalar::Scalar;
use crate::trace::{batch, Dataset, NormalizationParams, Trace, TraceError};
use crate::trainer::PoolEntry;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

/// Positive class is failure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn record(&mut self, failure: bool, predicted: bool) {
        match (failure, predicted) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub far: f64,
    pub mcc: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall, F1, false-alarm rate and Matthews correlation; any
/// ratio with a zero denominator is 0.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Metrics {
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    let far = ratio(fp, fp + tn);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let mcc = ratio(tp * tn - fp * fn_, den.sqrt());
    Metrics { precision, recall, f1, far, mcc }
}

/// Whether any pool monitor reaches Bot on `t`, and the earliest such position.
pub fn classify_trace<T: Scalar>(pool: &[PoolEntry<T>], t: &Trace<T>) -> Result<(bool, Option<usize>), EvalError> {
    let bodies: Vec<Formula<T>> = pool.iter().map(|e| e.body.clone()).collect();
    let first = earliest_violation(&bodies, t)?;
    Ok((first.is_some(), first))
}

/// Samples between detection and the end of a failure trace.
pub fn preemptiveness(len: usize, first_bot: usize) -> usize {
    len - 1 - first_bot
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceDetail {
    pub id: String,
    pub failure: bool,
    pub predicted: bool,
    pub first_bot: Option<usize>,
    /// Only for true positives.
    pub preemptiveness: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub confusion: ConfusionMatrix,
    #[serde(flatten)]
    pub metrics: Metrics,
    /// Mean over true positives; absent when there are none.
    pub mean_preemptiveness: Option<f64>,
    /// Each preemptiveness step is one sample of this unit.
    pub preemptiveness_unit: String,
    pub traces: Vec<TraceDetail>,
}

/// Per-entry first firing position for every test trace: `firsts[q][k]`.
struct Firings {
    firsts: Vec<Vec<Option<usize>>>,
}

impl Firings {
    fn compute<T: Scalar>(pool: &[PoolEntry<T>], test: &Dataset<T>) -> Result<Self, EvalError> {
        if test.traces.is_empty() || pool.is_empty() {
            return Ok(Firings { firsts: vec![vec![None; test.traces.len()]; pool.len()] });
        }
        let bodies: Vec<Formula<T>> = pool.iter().map(|e| e.body.clone()).collect();
        let b = batch(test.traces.iter())?;
        let rob = robustness(&bodies, &b)?;
        let firsts = (0..bodies.len())
            .map(|q| {
                (0..b.num_traces()).map(|k| rob.row(q, k).iter().position(|&v| v > T::zero())).collect()
            })
            .collect();
        Ok(Firings { firsts })
    }

    /// Earliest firing per trace for the first `n` entries.
    fn prefix(&self, n: usize, traces: usize) -> Vec<Option<usize>> {
        (0..traces).map(|k| self.firsts[..n].iter().filter_map(|f| f[k]).min()).collect()
    }
}

fn report<T: Scalar>(test: &Dataset<T>, firsts: &[Option<usize>]) -> Report {
    let mut cm = ConfusionMatrix::default();
    let mut details = Vec::with_capacity(test.traces.len());
    let mut pre_sum = 0usize;
    for (t, &first) in test.traces.iter().zip(firsts) {
        let predicted = first.is_some();
        cm.record(t.is_failure, predicted);
        let pre = first.filter(|_| t.is_failure).map(|p| preemptiveness(t.len(), p));
        pre_sum += pre.unwrap_or(0);
        details.push(TraceDetail { id: t.id.clone(), failure: t.is_failure, predicted, first_bot: first, preemptiveness: pre });
    }
    let mean_preemptiveness = (cm.tp > 0).then(|| pre_sum as f64 / cm.tp as f64);
    let unit = test.traces.first().map(|t| t.sampling_unit.clone()).unwrap_or_default();
    Report { confusion: cm, metrics: compute_metrics(&cm), mean_preemptiveness, preemptiveness_unit: unit, traces: details }
}

/// Classify every test trace with the pool, after normalizing with the
/// training parameters.
pub fn evaluate<T: Scalar>(
    pool: &[PoolEntry<T>],
    test: &Dataset<T>,
    norm: &NormalizationParams<T>,
) -> Result<Report, EvalError> {
    let test = norm.apply(test)?;
    let firings = Firings::compute(pool, &test)?;
    Ok(report(&test, &firings.prefix(pool.len(), test.traces.len())))
}

/// Metrics after each training batch, as the pool grows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Zero for entries not produced by training.
    pub epoch: usize,
    pub batch: usize,
    pub pool_size: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub mean_preemptiveness: Option<f64>,
}

/// One point per `(epoch, batch)` checkpoint in pool order, preceded by the
/// hand-written prefix of the pool when there is one.
pub fn evaluate_curve<T: Scalar>(
    pool: &[PoolEntry<T>],
    test: &Dataset<T>,
    norm: &NormalizationParams<T>,
) -> Result<Vec<CurvePoint>, EvalError> {
    let test = norm.apply(test)?;
    let firings = Firings::compute(pool, &test)?;
    let mut ends: Vec<(usize, (usize, usize))> = Vec::new();
    for (q, e) in pool.iter().enumerate() {
        let key = e.learned_at.unwrap_or((0, 0));
        match ends.last_mut() {
            Some((end, k)) if *k == key => *end = q + 1,
            _ => ends.push((q + 1, key)),
        }
    }
    Ok(ends
        .into_iter()
        .map(|(end, (epoch, batch))| {
            let r = report(&test, &firings.prefix(end, test.traces.len()));
            CurvePoint { epoch, batch, pool_size: end, metrics: r.metrics, mean_preemptiveness: r.mean_preemptiveness }
        })
        .collect())
}

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], w: W) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "batch", "pool_size", "precision", "recall", "f1", "far", "mcc", "mean_preemptiveness"])?;
    for p in curve {
        let m = &p.metrics;
        out.write_record([
            p.epoch.to_string(),
            p.batch.to_string(),
            p.pool_size.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            m.far.to_string(),
            m.mcc.to_string(),
            p.mean_preemptiveness.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Pool verdict at every position of every test trace: `?` until the first
/// firing, `F` from then on.
pub fn write_verdicts_csv<T: Scalar, W: Write>(report: &Report, test: &Dataset<T>, w: W) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["trace_id", "position", "verdict"])?;
    for (t, d) in test.traces.iter().zip(&report.traces) {
        for j in 0..t.len() {
            let v = if d.first_bot.is_some_and(|p| p <= j) { "F" } else { "?" };
            out.write_record([t.id.as_str(), &j.to_string(), v])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests;
