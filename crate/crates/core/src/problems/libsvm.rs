//! LIBSVM text format: `<label> <idx>:<val> ...` with 1-based indices.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::dataset::SparseDataset;
use crate::error::{Error, Result};

pub fn read_libsvm(path: impl AsRef<Path>) -> Result<SparseDataset> {
    parse_libsvm(BufReader::new(File::open(path)?), None)
}

/// Parses LIBSVM text. The feature count is the largest index seen unless
/// `n_features` is given.
pub fn parse_libsvm<R: BufRead>(reader: R, n_features: Option<usize>) -> Result<SparseDataset> {
    let mut indptr = vec![0];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: lineno, msg };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("bad label {label_tok:?}")))?;
        let mut prev = 0usize;
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected index:value, got {tok:?}")))?;
            let i: usize = i.parse().map_err(|_| err(format!("bad index in {tok:?}")))?;
            let v: f64 = v.parse().map_err(|_| err(format!("bad value in {tok:?}")))?;
            if i == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if i <= prev {
                return Err(err(format!("index {i} not increasing")));
            }
            if n_features.is_some_and(|n| i > n) {
                return Err(err(format!("index {i} exceeds feature count")));
            }
            prev = i;
            max_index = max_index.max(i);
            indices.push(i - 1);
            values.push(v);
        }
        indptr.push(indices.len());
        labels.push(if label > 0.0 { 1.0 } else { -1.0 });
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(SparseDataset::from_parts(
        n_features.unwrap_or(max_index),
        indptr,
        indices,
        values,
        labels,
    ))
}

pub fn write_libsvm<W: Write>(ds: &SparseDataset, mut w: W) -> Result<()> {
    for i in 0..ds.n_samples() {
        w.write_all(if ds.label(i) > 0.0 { b"+1" } else { b"-1" })?;
        let (idx, val) = ds.row(i);
        for (j, v) in idx.iter().zip(val) {
            write!(w, " {}:{}", j + 1, v)?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
