use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, Trace, TraceError};
use crate::scalar::Scalar;

/// Load `trace_id,t,<vars...>,is_failure` rows. Rows of one trace must have
/// strictly increasing `t`; traces keep their order of first appearance.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, sampling_unit: &str) -> Result<Dataset<T>, TraceError> {
    let file = std::fs::File::open(path)?;
    read_csv(file, sampling_unit)
}

pub fn read_csv<T: Scalar, R: Read>(reader: R, sampling_unit: &str) -> Result<Dataset<T>, TraceError> {
    let mut rdr = ::csv::ReaderBuilder::new().trim(::csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TraceError::MissingColumn(name.to_string()))
    };
    let id_col = col("trace_id")?;
    let t_col = col("t")?;
    let flag_col = col("is_failure")?;
    let var_cols: Vec<usize> =
        (0..header.len()).filter(|c| ![id_col, t_col, flag_col].contains(c)).collect();
    let var_names: Vec<String> = var_cols.iter().map(|&c| header[c].clone()).collect();

    struct Building<T> {
        id: String,
        values: Vec<T>,
        last_t: f64,
        flag: bool,
    }
    let mut order: Vec<Building<T>> = Vec::new();
    let mut index = std::collections::HashMap::new();

    for rec in rdr.records() {
        let rec = rec?;
        // header is line 1
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = rec.get(id_col).unwrap_or("").to_string();
        let t: f64 = parse_field(rec.get(t_col), row)?;
        let flag = match rec.get(flag_col) {
            Some("1") | Some("true") => true,
            Some("0") | Some("false") => false,
            other => {
                return Err(TraceError::Malformed { row, value: other.unwrap_or("").to_string() })
            }
        };
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(Building { id: id.clone(), values: Vec::new(), last_t: f64::NEG_INFINITY, flag });
            order.len() - 1
        });
        let b = &mut order[slot];
        if t <= b.last_t {
            return Err(TraceError::NonMonotoneTime { id, row });
        }
        if flag != b.flag {
            return Err(TraceError::InconsistentFlag { id, row });
        }
        b.last_t = t;
        for &c in &var_cols {
            let v: T = parse_field(rec.get(c), row)?;
            b.values.push(v);
        }
    }

    let arity = var_names.len();
    let traces = order
        .into_iter()
        .map(|b| Trace::from_flat(b.id, b.values, arity, b.flag).map(|t| t.with_unit(sampling_unit)))
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(traces, var_names)
}

fn parse_field<T: Scalar>(field: Option<&str>, row: usize) -> Result<T, TraceError> {
    let s = field.unwrap_or("");
    let v: T = s.parse().map_err(|_| TraceError::Malformed { row, value: s.to_string() })?;
    if !v.is_finite() {
        return Err(TraceError::NonFinite { row });
    }
    Ok(v)
}

/// Write a dataset in the same layout `read_csv` accepts, with `t = 0..len`.
pub fn write_csv<T: Scalar, W: Write>(data: &Dataset<T>, writer: W) -> Result<(), TraceError> {
    let mut w = ::csv::Writer::from_writer(writer);
    let mut header = vec!["trace_id".to_string(), "t".to_string()];
    header.extend(data.var_names.iter().cloned());
    header.push("is_failure".to_string());
    w.write_record(&header)?;
    for tr in &data.traces {
        for i in 0..tr.len() {
            let mut rec = vec![tr.id.clone(), i.to_string()];
            rec.extend(tr.state(i).iter().map(|v| v.to_string()));
            rec.push(if tr.is_failure { "1" } else { "0" }.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const OK: &str = "trace_id,t,x,y,is_failure
a,0,1,0,0
a,1,4,3,0
a,2,2,1,0
b,0,5,5,1
b,1,6,5,1
b,2,7,5,1
";

    #[test]
    fn groups_rows_by_id() {
        let d: Dataset<f64> = read_csv(OK.as_bytes(), "day").unwrap();
        assert_eq!(d.var_names, vec!["x", "y"]);
        assert_eq!(d.traces.len(), 2);
        assert_eq!(d.traces[0].len(), 3);
        assert_eq!(d.traces[0].column(0), vec![1.0, 4.0, 2.0]);
        assert!(d.traces[1].is_failure);
        assert_eq!(d.traces[1].sampling_unit, "day");
    }

    #[test]
    fn single_row_trace_is_valid() {
        let d: Dataset<f64> = read_csv("trace_id,t,x,is_failure\nz,0,1.5,1\n".as_bytes(), "s").unwrap();
        assert_eq!(d.traces[0].len(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        let nan = "trace_id,t,x,is_failure\na,0,1,0\na,1,NaN,0\n";
        let e = read_csv::<f64, _>(nan.as_bytes(), "s").unwrap_err();
        assert!(matches!(e, TraceError::NonFinite { row: 3 }), "{e:?}");
        assert_eq!(e.to_string(), "non-finite value at row 3");

        let back = "trace_id,t,x,is_failure\na,1,1,0\na,0,1,0\n";
        assert!(matches!(read_csv::<f64, _>(back.as_bytes(), "s"), Err(TraceError::NonMonotoneTime { .. })));

        let flag = "trace_id,t,x,is_failure\na,0,1,0\na,1,1,1\n";
        assert!(matches!(read_csv::<f64, _>(flag.as_bytes(), "s"), Err(TraceError::InconsistentFlag { .. })));

        let missing = "trace_id,x,is_failure\na,1,0\n";
        assert!(matches!(read_csv::<f64, _>(missing.as_bytes(), "s"), Err(TraceError::MissingColumn(c)) if c == "t"));
    }

    #[test]
    fn write_then_read() {
        let d: Dataset<f64> = read_csv(OK.as_bytes(), "step").unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back: Dataset<f64> = read_csv(buf.as_slice(), "step").unwrap();
        assert_eq!(back, d);
    }
}
