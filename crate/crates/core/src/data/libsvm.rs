//! LIBSVM / SVMlight sparse text format: `<label> <i>:<v> ...` with 1-based
//! strictly increasing feature indices.

use std::fmt::Write as _;

use super::{Dataset, FeatureVector, LabelTable};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parses LIBSVM text into a sparse dataset with 0-based feature indices.
///
/// `num_features` is the largest index seen. Text after `#` is ignored.
pub fn parse_libsvm<T: Real>(text: &str) -> Result<Dataset<T>> {
    let mut table = LabelTable::default();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = tokens_with_columns(content);
        let Some((_, label)) = tokens.next() else {
            continue;
        };
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (column, token) in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| Error::parse(line, column, format!("malformed pair {token:?}")))?;
            let idx: usize = idx
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| Error::parse(line, column, format!("bad feature index {idx:?}")))?;
            let val: T = val
                .parse()
                .ok()
                .filter(|v: &T| v.is_finite())
                .ok_or_else(|| Error::parse(line, column, format!("bad feature value {val:?}")))?;
            if indices.last().is_some_and(|&prev| prev >= idx - 1) {
                return Err(Error::parse(line, column, "indices not increasing"));
            }
            indices.push(idx - 1);
            values.push(val);
            max_index = max_index.max(idx);
        }
        labels.push(table.index_of(label));
        rows.push(FeatureVector::Sparse { indices, values });
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let names = table.into_names();
    Dataset::new(rows, labels, names.len(), max_index, names)
}

/// Serializes a dataset in LIBSVM format using its label-name table.
///
/// Dense rows are written with their non-zero entries only.
pub fn write_libsvm<T: Real>(d: &Dataset<T>) -> String {
    let mut out = String::new();
    for (row, &y) in d.rows().iter().zip(d.labels()) {
        out.push_str(&d.label_names()[y]);
        for (j, v) in row.entries() {
            if row.is_sparse() || v != T::zero() {
                let _ = write!(out, " {}:{}", j + 1, v);
            }
        }
        out.push('\n');
    }
    out
}

fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split_ascii_whitespace().map(move |tok| {
        let offset = tok.as_ptr() as usize - line.as_ptr() as usize;
        (line[..offset].chars().count() + 1, tok)
    })
}
