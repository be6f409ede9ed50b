use super::{Trace, TraceError};
use crate::scalar::Scalar;

/// Padded `m x l_max x n` block of traces with per-trace lengths.
/// Positions at or beyond a trace's length hold zeros and carry no meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceBatch<T> {
    block: Vec<T>,
    m: usize,
    l_max: usize,
    n: usize,
    lengths: Vec<usize>,
    ids: Vec<String>,
    flags: Vec<bool>,
    units: Vec<String>,
}

pub fn batch<'a, T: Scalar, I>(traces: I) -> Result<TraceBatch<T>, TraceError>
where
    I: IntoIterator<Item = &'a Trace<T>>,
{
    let traces: Vec<&Trace<T>> = traces.into_iter().collect();
    let first = traces.first().ok_or(TraceError::EmptyBatch)?;
    let n = first.arity();
    if let Some(bad) = traces.iter().find(|t| t.arity() != n) {
        return Err(TraceError::ArityMismatch { expected: n, found: bad.arity() });
    }
    let m = traces.len();
    let l_max = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut block = vec![T::zero(); m * l_max * n];
    for (k, t) in traces.iter().enumerate() {
        let start = k * l_max * n;
        block[start..start + t.values().len()].copy_from_slice(t.values());
    }
    Ok(TraceBatch {
        block,
        m,
        l_max,
        n,
        lengths: traces.iter().map(|t| t.len()).collect(),
        ids: traces.iter().map(|t| t.id.clone()).collect(),
        flags: traces.iter().map(|t| t.is_failure).collect(),
        units: traces.iter().map(|t| t.sampling_unit.clone()).collect(),
    })
}

impl<T: Scalar> TraceBatch<T> {
    pub fn num_traces(&self) -> usize {
        self.m
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn block(&self) -> &[T] {
        &self.block
    }

    /// State of trace `k` at position `j`.
    pub fn state(&self, k: usize, j: usize) -> &[T] {
        let start = (k * self.l_max + j) * self.n;
        &self.block[start..start + self.n]
    }

    /// Unpadded row-major values of trace `k`.
    pub fn trace_values(&self, k: usize) -> &[T] {
        let start = k * self.l_max * self.n;
        &self.block[start..start + self.lengths[k] * self.n]
    }

    pub fn unbatch(&self) -> Vec<Trace<T>> {
        (0..self.m)
            .map(|k| {
                Trace::from_flat(self.ids[k].clone(), self.trace_values(k).to_vec(), self.n, self.flags[k])
                    .expect("batched traces are nonempty")
                    .with_unit(self.units[k].clone())
            })
            .collect()
    }
}
