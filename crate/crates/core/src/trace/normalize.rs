use serde::{Deserialize, Serialize};

use super::{Dataset, TraceError};
use crate::scalar::Scalar;

/// Per-variable min-max scaling fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormalizationParams<T: Scalar> {
    pub var_names: Vec<String>,
    /// `(min, max)` per variable.
    pub ranges: Vec<(T, T)>,
}

impl<T: Scalar> NormalizationParams<T> {
    pub fn fit(train: &Dataset<T>) -> Self {
        let n = train.arity();
        let mut ranges = vec![(T::infinity(), T::neg_infinity()); n];
        for tr in &train.traces {
            for i in 0..tr.len() {
                for (v, r) in tr.state(i).iter().zip(ranges.iter_mut()) {
                    r.0 = r.0.min(*v);
                    r.1 = r.1.max(*v);
                }
            }
        }
        for r in &mut ranges {
            if r.0 > r.1 {
                *r = (T::zero(), T::zero());
            }
        }
        NormalizationParams { var_names: train.var_names.clone(), ranges }
    }

    /// `(v - min) / (max - min)`, unclipped; degenerate variables map to 0.5.
    pub fn scale(&self, var: usize, v: T) -> T {
        let (lo, hi) = self.ranges[var];
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            T::lit(0.5)
        }
    }

    pub fn apply(&self, data: &Dataset<T>) -> Result<Dataset<T>, TraceError> {
        if data.arity() != self.ranges.len() {
            return Err(TraceError::ArityMismatch { expected: self.ranges.len(), found: data.arity() });
        }
        let n = self.ranges.len();
        let mut out = data.clone();
        for tr in &mut out.traces {
            for (k, v) in tr.values_mut().iter_mut().enumerate() {
                *v = self.scale(k % n, *v);
            }
        }
        Ok(out)
    }
}
