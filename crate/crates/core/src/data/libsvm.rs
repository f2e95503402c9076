//! Sparse labeled text format: one sample per line,
//! `label index:value index:value ...` with 1-based, strictly ascending indices.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::CscMatrix;
use crate::model::ProblemInstance;

/// Samples as columns of a `d × n` matrix with one label per column.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledData {
    pub x: CscMatrix,
    pub labels: Vec<i64>,
}

impl LabeledData {
    pub fn into_instance(self, k: usize) -> Result<ProblemInstance> {
        ProblemInstance::new(self.x, k)?.with_labels(self.labels)
    }
}

fn parse_label(tok: &str, line: usize) -> Result<i64> {
    let err = || Error::Parse { line, message: format!("bad label '{tok}'") };
    if let Ok(v) = tok.parse::<i64>() {
        return Ok(v);
    }
    let v: f64 = tok.parse().map_err(|_| err())?;
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 {
        Ok(v as i64)
    } else {
        Err(err())
    }
}

/// Parses the text format. `d_override` fixes the feature count, which must
/// cover every index seen.
pub fn parse_sparse_labeled(reader: impl Read, d_override: Option<usize>) -> Result<LabeledData> {
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let mut toks = line.split_whitespace();
        let Some(label_tok) = toks.next() else {
            continue;
        };
        labels.push(parse_label(label_tok, lineno)?);
        let mut col = Vec::new();
        let mut last = 0usize;
        for tok in toks {
            let bad = |what: &str| Error::Parse { line: lineno, message: format!("{what} in '{tok}'") };
            let (idx, val) = tok.split_once(':').ok_or_else(|| bad("missing ':'"))?;
            let idx: usize = idx.parse().map_err(|_| bad("non-numeric index"))?;
            let val: f64 = val.parse().map_err(|_| bad("non-numeric value"))?;
            if idx == 0 {
                return Err(bad("index 0 (indices are 1-based)"));
            }
            if idx <= last {
                return Err(bad("non-ascending index"));
            }
            if !val.is_finite() {
                return Err(bad("non-finite value"));
            }
            last = idx;
            if val != 0.0 {
                col.push((idx - 1, val));
            }
        }
        max_index = max_index.max(last);
        columns.push(col);
    }
    if columns.is_empty() {
        return Err(Error::Parse { line: 0, message: "no samples".into() });
    }
    let d = match d_override {
        Some(d) if d < max_index => {
            return Err(Error::InvalidInput(format!(
                "feature count {d} is below the largest index {max_index}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    Ok(LabeledData { x: CscMatrix::from_columns(d, &columns)?, labels })
}

pub fn read_sparse_labeled(path: impl AsRef<Path>, d_override: Option<usize>) -> Result<LabeledData> {
    parse_sparse_labeled(fs::File::open(path)?, d_override)
}

/// Serializes in the text format with shortest round-trip float formatting.
pub fn format_sparse_labeled(x: &CscMatrix, labels: &[i64]) -> Result<String> {
    if labels.len() != x.cols() {
        return Err(Error::dims("labels", format!("{}", x.cols()), format!("{}", labels.len())));
    }
    let mut out = String::new();
    for (j, label) in labels.iter().enumerate() {
        write!(out, "{label}").expect("string write");
        let (idx, vals) = x.col(j);
        for (&i, &v) in idx.iter().zip(vals) {
            if v != 0.0 {
                write!(out, " {}:{v:?}", i + 1).expect("string write");
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_sparse_labeled(path: impl AsRef<Path>, x: &CscMatrix, labels: &[i64]) -> Result<()> {
    fs::write(path, format_sparse_labeled(x, labels)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    #[test]
    fn single_line_example() {
        let data = parse_sparse_labeled("+1 1:0.5 3:-2\n".as_bytes(), None).unwrap();
        assert_eq!(data.labels, vec![1]);
        assert_eq!(data.x.to_dense(), Mat::column_vector(&[0.5, 0.0, -2.0]));
    }

    #[test]
    fn disjoint_indices_and_empty_rows() {
        let data = parse_sparse_labeled("1 1:4\n2 2:5\n-1\n".as_bytes(), None).unwrap();
        assert_eq!(data.x.to_dense(), Mat::from_rows(&[&[4.0, 0.0, 0.0], &[0.0, 5.0, 0.0]]));
        assert_eq!(data.labels, vec![1, 2, -1]);
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse_sparse_labeled("1 1:1\n1 2:x\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_sparse_labeled("1 3:1 2:1\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_sparse_labeled("".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = parse_sparse_labeled("a 1:1\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn dimension_override() {
        let data = parse_sparse_labeled("1 2:1\n".as_bytes(), Some(5)).unwrap();
        assert_eq!(data.x.rows(), 5);
        assert!(parse_sparse_labeled("1 6:1\n".as_bytes(), Some(5)).is_err());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = Mat::from_rows(&[&[0.1, 0.0, 1e-300], &[0.0, -2.0 / 3.0, 0.0], &[std::f64::consts::PI, 0.0, 5.0]]);
        let x = CscMatrix::from_dense(&m);
        let text = format_sparse_labeled(&x, &[1, -1, 3]).unwrap();
        let back = parse_sparse_labeled(text.as_bytes(), Some(3)).unwrap();
        assert_eq!(back.x, x);
        assert_eq!(back.labels, vec![1, -1, 3]);
    }
}
