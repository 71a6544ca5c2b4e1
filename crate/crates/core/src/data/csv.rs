//! Comma-delimited text with one categorical label column.

use std::fmt;
use std::str::FromStr;

use super::{Dataset, FeatureVector, LabelTable};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which column holds the class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    /// 0-based column index.
    Index(usize),
}

impl LabelColumn {
    fn resolve(self, width: usize) -> Option<usize> {
        match self {
            LabelColumn::Last => width.checked_sub(1),
            LabelColumn::Index(i) if i < width => Some(i),
            LabelColumn::Index(_) => None,
        }
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Last => f.write_str("last"),
            LabelColumn::Index(i) => write!(f, "{i}"),
        }
    }
}

impl FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("last") {
            Ok(LabelColumn::Last)
        } else {
            s.parse()
                .map(LabelColumn::Index)
                .map_err(|_| Error::InvalidArgument(format!("label column {s:?}")))
        }
    }
}

/// Parses comma-separated rows into a dense dataset.
///
/// The first row is taken as a header when one of its feature cells is not
/// numeric, or when it has no feature cells and its label token never occurs
/// again further down.
pub fn parse_csv<T: Real>(text: &str, label_column: LabelColumn) -> Result<Dataset<T>> {
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
        .collect();
    let Some((first_line, first)) = lines.first() else {
        return Err(Error::EmptyDataset);
    };
    let width = first.len();
    let label_idx = label_column
        .resolve(width)
        .ok_or_else(|| Error::parse(*first_line, 1, format!("label column out of range for {width} columns")))?;

    let numeric = |cell: &str| cell.parse::<f64>().is_ok_and(f64::is_finite);
    let feature_fails = first.iter().enumerate().any(|(j, c)| j != label_idx && !numeric(c));
    let label_recurs = lines[1..]
        .iter()
        .any(|(_, cells)| cells.get(label_idx) == Some(&first[label_idx]));
    let header = feature_fails || (width == 1 && !label_recurs);
    let body = if header { &lines[1..] } else { &lines[..] };
    if body.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if width < 2 {
        return Err(Error::parse(body[0].0, 1, "no feature columns"));
    }

    let mut table = LabelTable::default();
    let mut rows = Vec::with_capacity(body.len());
    let mut labels = Vec::with_capacity(body.len());
    for (line, cells) in body {
        if cells.len() != width {
            return Err(Error::parse(
                *line,
                cells.len().min(width) + 1,
                format!("expected {width} columns, found {}", cells.len()),
            ));
        }
        let mut values = Vec::with_capacity(width - 1);
        for (j, cell) in cells.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: T = cell
                .parse()
                .map_err(|_| Error::parse(*line, j + 1, format!("non-numeric feature {cell:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(*line, j + 1, format!("non-finite feature {cell:?}")));
            }
            values.push(v);
        }
        if cells[label_idx].is_empty() {
            return Err(Error::parse(*line, label_idx + 1, "empty label"));
        }
        labels.push(table.index_of(cells[label_idx]));
        rows.push(FeatureVector::Dense(values));
    }
    let names = table.into_names();
    Dataset::new(rows, labels, names.len(), width - 1, names)
}
