//! Datasets, file formats and stratified resampling.
//!
//! A [`Dataset`] is immutable once built: rows, 0-based class labels and the
//! label-name table that maps class indices back to the tokens found in the
//! source file. Labels are numbered by first appearance.

mod csv;
mod libsvm;
mod split;

pub use self::csv::{parse_csv, LabelColumn};
pub use self::libsvm::{parse_libsvm, write_libsvm};
pub(crate) use self::split::stratified_fold_ids;
pub use self::split::{stratified_kfold, stratified_split, stratified_split_plan, SplitPlan};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One instance's features, either dense or as sorted `(index, value)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(rename_all = "snake_case")]
pub enum FeatureVector<T: Real = f64> {
    Dense(Vec<T>),
    Sparse { indices: Vec<usize>, values: Vec<T> },
}

impl<T: Real> FeatureVector<T> {
    /// Builds a sparse vector, checking that indices strictly increase.
    pub fn sparse(indices: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                got: values.len(),
            });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDataset("sparse indices not increasing".into()));
        }
        Ok(FeatureVector::Sparse { indices, values })
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, FeatureVector::Sparse { .. })
    }

    /// Number of stored entries.
    pub fn stored_len(&self) -> usize {
        match self {
            FeatureVector::Dense(v) => v.len(),
            FeatureVector::Sparse { indices, .. } => indices.len(),
        }
    }

    /// Value of feature `j`; absent sparse entries are zero.
    pub fn get(&self, j: usize) -> T {
        match self {
            FeatureVector::Dense(v) => v.get(j).copied().unwrap_or_else(T::zero),
            FeatureVector::Sparse { indices, values } => match indices.binary_search(&j) {
                Ok(pos) => values[pos],
                Err(_) => T::zero(),
            },
        }
    }

    /// Iterates over stored `(index, value)` pairs.
    pub fn entries(&self) -> Entries<'_, T> {
        match self {
            FeatureVector::Dense(v) => Entries::Dense(v.iter().enumerate()),
            FeatureVector::Sparse { indices, values } => Entries::Sparse(indices.iter().zip(values.iter())),
        }
    }

    /// Inner product with a dense weight vector of the model's dimensionality.
    pub fn dot(&self, weights: &[T]) -> T {
        match self {
            FeatureVector::Dense(v) => v.iter().zip(weights).map(|(&a, &b)| a * b).sum(),
            FeatureVector::Sparse { indices, values } => {
                indices.iter().zip(values).map(|(&j, &v)| v * weights[j]).sum()
            }
        }
    }

    pub fn to_dense(&self, num_features: usize) -> Vec<T> {
        let mut out = vec![T::zero(); num_features];
        for (j, v) in self.entries() {
            if j < num_features {
                out[j] = v;
            }
        }
        out
    }

    /// Fails unless the vector fits a model trained on `num_features` features.
    pub fn check_dim(&self, num_features: usize) -> Result<()> {
        match self {
            FeatureVector::Dense(v) if v.len() != num_features => Err(Error::DimensionMismatch {
                expected: num_features,
                got: v.len(),
            }),
            FeatureVector::Sparse { indices, .. } => match indices.last() {
                Some(&last) if last >= num_features => Err(Error::DimensionMismatch {
                    expected: num_features,
                    got: last + 1,
                }),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }

    fn all_finite(&self) -> bool {
        self.entries().all(|(_, v)| v.is_finite())
    }
}

pub enum Entries<'a, T> {
    Dense(std::iter::Enumerate<std::slice::Iter<'a, T>>),
    Sparse(std::iter::Zip<std::slice::Iter<'a, usize>, std::slice::Iter<'a, T>>),
}

impl<T: Copy> Iterator for Entries<'_, T> {
    type Item = (usize, T);

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            Entries::Dense(it) => it.next().map(|(j, &v)| (j, v)),
            Entries::Sparse(it) => it.next().map(|(&j, &v)| (j, v)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    Dense,
    Sparse,
}

/// Labelled feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Real = f64> {
    rows: Vec<FeatureVector<T>>,
    labels: Vec<usize>,
    num_classes: usize,
    num_features: usize,
    storage: Storage,
    label_names: Vec<String>,
}

impl<T: Real> Dataset<T> {
    /// Validates and assembles a dataset. An empty `label_names` gets the
    /// default table `"0", "1", ...`.
    pub fn new(
        rows: Vec<FeatureVector<T>>,
        labels: Vec<usize>,
        num_classes: usize,
        num_features: usize,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(Error::InvalidDataset("num_classes must be positive".into()));
        }
        if num_features == 0 {
            return Err(Error::InvalidDataset("num_features must be positive".into()));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {y} of row {i} out of range for {num_classes} classes"
            )));
        }
        let sparse = rows[0].is_sparse();
        for (i, row) in rows.iter().enumerate() {
            if row.is_sparse() != sparse {
                return Err(Error::InvalidDataset("mixed dense and sparse rows".into()));
            }
            if let FeatureVector::Sparse { indices, .. } = row {
                if indices.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidDataset(format!("row {i}: sparse indices not increasing")));
                }
            }
            row.check_dim(num_features)?;
            if !row.all_finite() {
                return Err(Error::NonFinite(format!("feature value in row {i}")));
            }
        }
        let label_names = if label_names.is_empty() {
            (0..num_classes).map(|c| c.to_string()).collect()
        } else {
            label_names
        };
        if label_names.len() != num_classes {
            return Err(Error::InvalidDataset(format!(
                "label table has {} names for {num_classes} classes",
                label_names.len()
            )));
        }
        Ok(Dataset {
            rows,
            labels,
            num_classes,
            num_features,
            storage: if sparse { Storage::Sparse } else { Storage::Dense },
            label_names,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[FeatureVector<T>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &FeatureVector<T> {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn storage(&self) -> Storage {
        self.storage
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Instance count per class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order, keeping the class universe and label table.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            num_features: self.num_features,
            storage: self.storage,
            label_names: self.label_names.clone(),
        })
    }

    /// Re-expresses labels against another label table (e.g. a trained model's).
    ///
    /// Fails if a label name is unknown to `names`.
    pub fn with_label_table(&self, names: &[String]) -> Result<Self> {
        let mapping = self
            .label_names
            .iter()
            .map(|name| {
                names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::InvalidDataset(format!("label {name:?} not in model label table")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            rows: self.rows.clone(),
            labels: self.labels.iter().map(|&y| mapping[y]).collect(),
            num_classes: names.len(),
            num_features: self.num_features,
            storage: self.storage,
            label_names: names.to_vec(),
        })
    }

    /// Widens the feature space; used when evaluation data has fewer columns
    /// than the training data (sparse formats drop trailing zeros).
    pub fn with_num_features(mut self, num_features: usize) -> Result<Self> {
        if num_features < self.num_features {
            return Err(Error::DimensionMismatch {
                expected: num_features,
                got: self.num_features,
            });
        }
        if self.storage == Storage::Dense && num_features != self.num_features {
            for row in &mut self.rows {
                if let FeatureVector::Dense(v) = row {
                    v.resize(num_features, T::zero());
                }
            }
        }
        self.num_features = num_features;
        Ok(self)
    }
}

/// Maps label tokens to indices in order of first appearance.
#[derive(Debug, Default)]
pub(crate) struct LabelTable {
    names: Vec<String>,
}

impl LabelTable {
    pub(crate) fn index_of(&mut self, token: &str) -> usize {
        match self.names.iter().position(|n| n == token) {
            Some(i) => i,
            None => {
                self.names.push(token.to_string());
                self.names.len() - 1
            }
        }
    }

    pub(crate) fn into_names(self) -> Vec<String> {
        self.names
    }
}
