use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::scalar::Scalar;

/// Offset applied to `rob[0]` in the empty-prefix split score.
pub const SCORE_EPS: f64 = 1e-6;

/// Fitness of one individual. Robustness-valued fields are extended reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub margin: f64,
    pub ok_orig: bool,
    pub acc: f64,
    pub far: Option<f64>,
    pub good_rob_sel: f64,
    pub good_rob_es: f64,
    pub good_rob_full: Option<f64>,
}

pub fn max_rob<T: Scalar>(rob: &[T]) -> f64 {
    rob.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max)
}

/// Goodness of every split point `0..=l` of a trace with robustness `rob`:
/// high when the prefix before the split stays negative and the detector
/// fires at the split.
pub fn score_vector<T: Scalar>(rob: &[T]) -> Result<Vec<f64>, LearnError> {
    let l = rob.len();
    if l == 0 {
        return Err(LearnError::EmptyRobustness);
    }
    let r: Vec<f64> = rob.iter().map(|v| v.as_f64()).collect();
    let mut out = Vec::with_capacity(l + 1);
    out.push((-(r[0] + SCORE_EPS).tanh()).min(r[0].tanh()));
    let mut prefix_max = r[0];
    for &v in &r[1..] {
        out.push((-prefix_max.tanh()).min(v.tanh()));
        prefix_max = prefix_max.max(v);
    }
    let suffix_max = r[1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out.push((-prefix_max.tanh()).min(suffix_max.tanh()));
    Ok(out)
}

/// Fires somewhere but not at the first position.
pub(crate) fn splits<T: Scalar>(rob: &[T]) -> bool {
    rob[0].as_f64() < 0.0 && max_rob(rob) >= 0.0
}

/// `(margin, ok_orig, acc)` over the traces of one pair; the original trace
/// comes first.
pub(crate) fn pair_terms<'a, T: Scalar + 'a>(
    rows: impl IntoIterator<Item = &'a [T]>,
) -> Result<(f64, bool, f64), LearnError> {
    let mut margin = f64::INFINITY;
    let mut ok_orig = false;
    let mut hits = 0usize;
    let mut count = 0usize;
    for (k, row) in rows.into_iter().enumerate() {
        let best = score_vector(row)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
        margin = margin.min(best);
        let ok = splits(row);
        if k == 0 {
            ok_orig = ok;
        }
        hits += ok as usize;
        count += 1;
    }
    Ok((margin, ok_orig, hits as f64 / count.max(1) as f64))
}

/// Worst-case (largest) maximum robustness over good traces.
pub(crate) fn good_rob<'a, T: Scalar + 'a>(rows: impl IntoIterator<Item = &'a [T]>) -> f64 {
    rows.into_iter().map(max_rob).fold(f64::NEG_INFINITY, f64::max)
}

/// Fraction of good traces on which the detector fires.
pub(crate) fn false_alarm_rate<'a, T: Scalar + 'a>(rows: impl IntoIterator<Item = &'a [T]>) -> f64 {
    let (mut hits, mut n) = (0usize, 0usize);
    for row in rows {
        hits += (max_rob(row) >= 0.0) as usize;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_scores() {
        let s = score_vector(&[-0.5, -0.2, 0.3]).unwrap();
        let expect = [-0.462, -0.197, 0.197, -0.291];
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).abs() < 1e-3, "{s:?}");
        }
        let best = s.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert_eq!(best, 2);
    }

    #[test]
    fn never_firing_has_no_good_split() {
        let s = score_vector(&[-1.0; 6]).unwrap();
        assert!(s.iter().all(|&v| v < 0.0));
    }

    #[test]
    fn immediate_firing_scores_negative_at_zero() {
        let s = score_vector(&[1.0, -1.0, 0.5]).unwrap();
        assert!(s[0] < 0.0);
    }

    #[test]
    fn length_one_and_empty() {
        assert_eq!(score_vector(&[0.4]).unwrap().len(), 2);
        assert!(score_vector::<f64>(&[]).is_err());
    }

    #[test]
    fn pair_terms_single_trace() {
        let row: &[f64] = &[-0.5, -0.2, 0.3];
        let (m, ok, acc) = pair_terms([row]).unwrap();
        assert!((m - 0.197).abs() < 1e-3);
        assert!(ok);
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn always_true_detector() {
        let row: &[f64] = &[f64::INFINITY; 4];
        let (_, ok, acc) = pair_terms([row]).unwrap();
        assert!(!ok);
        assert_eq!(acc, 0.0);
        assert_eq!(false_alarm_rate([row, row]), 1.0);
        let quiet: &[f64] = &[-0.2, -0.1];
        assert_eq!(false_alarm_rate([quiet]), 0.0);
        assert_eq!(good_rob([quiet, row]), f64::INFINITY);
    }
}
