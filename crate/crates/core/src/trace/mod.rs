//! Labeled multivariate traces: ingestion, normalization, augmentation,
//! padded batching, prefix cutting and planted synthetic data.

mod augment;
mod batch;
mod csv;
mod normalize;
mod synth;

use std::collections::HashSet;

use thiserror::Error;

use crate::scalar::Scalar;

pub use self::csv::{load_csv, read_csv, write_csv};
pub use augment::augment;
pub use batch::{batch, TraceBatch};
pub use normalize::NormalizationParams;
pub use synth::{synth_generate, SynthConfig, SynthMeta};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace `{0}` is empty")]
    EmptyTrace(String),
    #[error("trace `{id}`: row {row} has {got} values, expected {expected}")]
    Ragged { id: String, row: usize, got: usize, expected: usize },
    #[error("arity mismatch: expected {expected} variables, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("duplicate trace id `{0}`")]
    DuplicateId(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-monotone time at row {row} of trace `{id}`")]
    NonMonotoneTime { id: String, row: usize },
    #[error("inconsistent failure flag for trace `{id}` at row {row}")]
    InconsistentFlag { id: String, row: usize },
    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },
    #[error("malformed value `{value}` at row {row}")]
    Malformed { row: usize, value: String },
    #[error("cut position {v} out of range 1..={len}")]
    CutOutOfRange { v: usize, len: usize },
    #[error("noise standard deviation must be non-negative, got {0}")]
    NegativeNoise(f64),
    #[error("cannot batch an empty set of traces")]
    EmptyBatch,
    #[error("planted formula: {0}")]
    Planted(String),
    #[error("rejection sampling exhausted {0} attempts")]
    RetryBudgetExceeded(usize),
    #[error("nothing to generate")]
    EmptyRequest,
    #[error(transparent)]
    Csv(#[from] ::csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Finite, nonempty sequence of states in `R^n`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<T> {
    pub id: String,
    values: Vec<T>,
    arity: usize,
    pub is_failure: bool,
    pub sampling_unit: String,
}

impl<T: Scalar> Trace<T> {
    pub fn new(id: impl Into<String>, rows: Vec<Vec<T>>, is_failure: bool) -> Result<Self, TraceError> {
        let id = id.into();
        let arity = rows.first().map(Vec::len).ok_or_else(|| TraceError::EmptyTrace(id.clone()))?;
        let mut values = Vec::with_capacity(rows.len() * arity);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != arity {
                return Err(TraceError::Ragged { id, row, got: r.len(), expected: arity });
            }
            values.extend(r);
        }
        Self::from_flat(id, values, arity, is_failure)
    }

    /// Build from a row-major buffer of `len * arity` values.
    pub fn from_flat(
        id: impl Into<String>,
        values: Vec<T>,
        arity: usize,
        is_failure: bool,
    ) -> Result<Self, TraceError> {
        let id = id.into();
        if arity == 0 || values.is_empty() {
            return Err(TraceError::EmptyTrace(id));
        }
        if values.len() % arity != 0 {
            return Err(TraceError::Ragged {
                id,
                row: values.len() / arity,
                got: values.len() % arity,
                expected: arity,
            });
        }
        Ok(Trace { id, values, arity, is_failure, sampling_unit: "step".to_string() })
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.sampling_unit = unit.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.arity
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn state(&self, i: usize) -> &[T] {
        &self.values[i * self.arity..(i + 1) * self.arity]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Column `var` as a vector.
    pub fn column(&self, var: usize) -> Vec<T> {
        (0..self.len()).map(|i| self.state(i)[var]).collect()
    }

    /// Prefix of length `v`, i.e. positions `0..v`.
    pub fn cut(&self, v: usize) -> Result<Self, TraceError> {
        if v == 0 || v > self.len() {
            return Err(TraceError::CutOutOfRange { v, len: self.len() });
        }
        Ok(Trace {
            id: self.id.clone(),
            values: self.values[..v * self.arity].to_vec(),
            arity: self.arity,
            is_failure: self.is_failure,
            sampling_unit: self.sampling_unit.clone(),
        })
    }
}

/// Labeled traces sharing one variable header.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub traces: Vec<Trace<T>>,
    pub var_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(traces: Vec<Trace<T>>, var_names: Vec<String>) -> Result<Self, TraceError> {
        let mut seen = HashSet::new();
        for t in &traces {
            if t.arity() != var_names.len() {
                return Err(TraceError::ArityMismatch { expected: var_names.len(), found: t.arity() });
            }
            if !seen.insert(t.id.as_str()) {
                return Err(TraceError::DuplicateId(t.id.clone()));
            }
        }
        Ok(Dataset { traces, var_names })
    }

    pub fn arity(&self) -> usize {
        self.var_names.len()
    }

    pub fn failures(&self) -> impl Iterator<Item = &Trace<T>> {
        self.traces.iter().filter(|t| t.is_failure)
    }

    pub fn goods(&self) -> impl Iterator<Item = &Trace<T>> {
        self.traces.iter().filter(|t| !t.is_failure)
    }

    pub fn max_len(&self) -> usize {
        self.traces.iter().map(Trace::len).max().unwrap_or(0)
    }
}

/// Failure trace paired with its noisy copies.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedPair<T> {
    pub original: Trace<T>,
    pub augmentations: Vec<Trace<T>>,
}

impl<T: Scalar> AugmentedPair<T> {
    /// The original followed by its augmentations.
    pub fn traces(&self) -> impl Iterator<Item = &Trace<T>> {
        std::iter::once(&self.original).chain(self.augmentations.iter())
    }

    pub fn len(&self) -> usize {
        1 + self.augmentations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Restrict the original and every augmentation to the first `v` positions.
    pub fn cut(&self, v: usize) -> Result<Self, TraceError> {
        Ok(AugmentedPair {
            original: self.original.cut(v)?,
            augmentations: self.augmentations.iter().map(|a| a.cut(v)).collect::<Result<_, _>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(id: &str, len: usize) -> Trace<f64> {
        Trace::new(id, (0..len).map(|i| vec![i as f64, -(i as f64)]).collect(), false).unwrap()
    }

    #[test]
    fn cut_prefixes() {
        let t = ramp("a", 10);
        let c = t.cut(4).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.state(3), &[3.0, -3.0]);
        assert_eq!(t.cut(10).unwrap(), t);
        assert_eq!(t.cut(6).unwrap().cut(4).unwrap(), t.cut(4).unwrap());
        assert!(matches!(t.cut(0), Err(TraceError::CutOutOfRange { v: 0, len: 10 })));
        assert!(t.cut(11).is_err());
    }

    #[test]
    fn construction_checks() {
        assert!(matches!(Trace::<f64>::new("e", vec![], false), Err(TraceError::EmptyTrace(_))));
        assert!(matches!(
            Trace::new("r", vec![vec![1.0, 2.0], vec![1.0]], false),
            Err(TraceError::Ragged { row: 1, .. })
        ));
        let names = vec!["x".to_string(), "y".to_string()];
        assert!(matches!(
            Dataset::new(vec![ramp("a", 2), ramp("a", 3)], names.clone()),
            Err(TraceError::DuplicateId(_))
        ));
        assert!(matches!(
            Dataset::new(vec![ramp("a", 2)], vec!["x".into()]),
            Err(TraceError::ArityMismatch { .. })
        ));
        let single = Trace::new("one", vec![vec![1.0f64]], true).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn pair_cut_applies_to_all() {
        let pair = AugmentedPair { original: ramp("o", 20), augmentations: vec![ramp("a1", 20), ramp("a2", 20)] };
        let c = pair.cut(5).unwrap();
        assert!(c.traces().all(|t| t.len() == 5));
        assert_eq!(c.len(), 3);
    }
}
