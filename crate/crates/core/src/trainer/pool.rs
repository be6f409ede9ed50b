use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{parse, Formula, Fragment, ParseError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("pool line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("pool line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("pool line {line}: `{text}` is not of the form G(psi) with psi pure past")]
    NotSafety { line: usize, text: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Quality of a detector on the data it was learned from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub acc: f64,
    pub far: f64,
    pub margin: f64,
}

/// One learned or hand-written safety property `G(!body)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolEntry<T> {
    pub formula: Formula<T>,
    pub body: Formula<T>,
    /// `(epoch, batch)` that produced the entry; absent for hand-written ones.
    pub learned_at: Option<(usize, usize)>,
    pub quality: Option<Quality>,
    pub source_id: Option<String>,
    pub timestamp: Option<String>,
}

impl<T: Scalar> PoolEntry<T> {
    /// Entry for a safety property given in any `G(psi)` form.
    pub fn from_formula(formula: Formula<T>) -> Option<Self> {
        let body = formula.safety_body()?;
        Some(PoolEntry { formula, body, learned_at: None, quality: None, source_id: None, timestamp: None })
    }
}

/// Wire format: one JSON object per line.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    formula: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    batch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    far: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
}

pub fn write_pool<T: Scalar, W: Write, S: AsRef<str>>(
    pool: &[PoolEntry<T>],
    names: &[S],
    mut w: W,
) -> Result<(), PoolError> {
    for e in pool {
        let rec = Record {
            formula: e.formula.display(names).to_string(),
            epoch: e.learned_at.map(|p| p.0),
            batch: e.learned_at.map(|p| p.1),
            acc: e.quality.map(|q| q.acc),
            far: e.quality.map(|q| q.far),
            margin: e.quality.map(|q| q.margin),
            source_id: e.source_id.clone(),
            timestamp: e.timestamp.clone(),
        };
        let line = serde_json::to_string(&rec).map_err(|e| PoolError::Malformed { line: 0, msg: e.to_string() })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_pool<T: Scalar, R: BufRead, S: AsRef<str>>(r: R, names: &[S]) -> Result<Vec<PoolEntry<T>>, PoolError> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| PoolError::Malformed { line: lineno, msg: e.to_string() })?;
        let formula: Formula<T> =
            parse(&rec.formula, names).map_err(|source| PoolError::Parse { line: lineno, source })?;
        if formula.fragment() != Fragment::GppStl {
            return Err(PoolError::NotSafety { line: lineno, text: rec.formula });
        }
        let mut entry = PoolEntry::from_formula(formula).expect("checked fragment");
        entry.learned_at = rec.epoch.zip(rec.batch);
        entry.quality = match (rec.acc, rec.far, rec.margin) {
            (Some(acc), Some(far), Some(margin)) => Some(Quality { acc, far, margin }),
            _ => None,
        };
        entry.source_id = rec.source_id;
        entry.timestamp = rec.timestamp;
        out.push(entry);
    }
    Ok(out)
}

pub fn save_pool<T: Scalar, S: AsRef<str>>(
    pool: &[PoolEntry<T>],
    names: &[S],
    path: impl AsRef<Path>,
) -> Result<(), PoolError> {
    let mut buf = Vec::new();
    write_pool(pool, names, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_pool<T: Scalar, S: AsRef<str>>(path: impl AsRef<Path>, names: &[S]) -> Result<Vec<PoolEntry<T>>, PoolError> {
    let f = std::fs::File::open(path)?;
    read_pool(std::io::BufReader::new(f), names)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NAMES: [&str; 2] = ["x", "y"];

    fn entry(text: &str, k: usize) -> PoolEntry<f64> {
        let mut e = PoolEntry::from_formula(parse(text, &NAMES).unwrap()).unwrap();
        e.learned_at = Some((1, k));
        e.quality = Some(Quality { acc: 0.8, far: 0.0, margin: 0.1234567890123 });
        e.source_id = Some(format!("fail{k}"));
        e
    }

    #[test]
    fn round_trip() {
        let pool = vec![
            entry("G(!O(x >= 0.9))", 0),
            entry("G(!(x >= 0.25 S[1,4] y >= 0.5))", 1),
            entry("G(!H[2,inf](x + y >= 1.5))", 2),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.jsonl");
        save_pool(&pool, &NAMES, &path).unwrap();
        let back: Vec<PoolEntry<f64>> = load_pool(&path, &NAMES).unwrap();
        assert_eq!(back, pool);
    }

    #[test]
    fn hand_written_entries() {
        let text = "{\"formula\": \"G(!(O(x >= 0.9)))\"}\n\n";
        let pool: Vec<PoolEntry<f64>> = read_pool(text.as_bytes(), &NAMES).unwrap();
        assert_eq!(pool.len(), 1);
        assert_eq!(pool[0].formula.fragment(), Fragment::GppStl);
        assert_eq!(pool[0].body, parse("O(x >= 0.9)", &NAMES).unwrap());

        let bad = "{\"formula\": \"F(x >= 0)\"}\n";
        assert!(matches!(read_pool::<f64, _, _>(bad.as_bytes(), &NAMES), Err(PoolError::NotSafety { line: 1, .. })));
        let junk = "{\"formula\": \"G(!(x >= 0))\"}\nnot json\n";
        assert!(matches!(read_pool::<f64, _, _>(junk.as_bytes(), &NAMES), Err(PoolError::Malformed { line: 2, .. })));
        let unknown = "{\"formula\": \"G(!(z >= 0))\"}\n";
        assert!(matches!(read_pool::<f64, _, _>(unknown.as_bytes(), &NAMES), Err(PoolError::Parse { .. })));
    }
}
