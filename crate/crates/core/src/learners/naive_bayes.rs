use serde::{Deserialize, Serialize};

use super::LearnerConfig;
use crate::data::FeatureVector;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Two-class Gaussian naive Bayes. Index 0 is meta-class 0, index 1 meta-class 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GaussianNbModel<T: Real = f64> {
    pub means: [Vec<T>; 2],
    pub variances: [Vec<T>; 2],
    pub class_log_priors: [T; 2],
}

impl<T: Real> GaussianNbModel<T> {
    pub(crate) fn fit(
        config: &LearnerConfig,
        rows: &[&FeatureVector<T>],
        num_features: usize,
        labels: &[bool],
    ) -> Self {
        let mut counts = [0usize; 2];
        let mut sums = [vec![T::zero(); num_features], vec![T::zero(); num_features]];
        let mut total = vec![T::zero(); num_features];
        for (row, &y) in rows.iter().zip(labels) {
            counts[y as usize] += 1;
            for (j, v) in row.entries() {
                sums[y as usize][j] += v;
                total[j] += v;
            }
        }
        let n = T::of_usize(rows.len());
        let means = [0, 1].map(|c| {
            let nc = T::of_usize(counts[c]);
            sums[c].iter().map(|&s| s / nc).collect::<Vec<_>>()
        });
        let overall: Vec<T> = total.iter().map(|&s| s / n).collect();

        // Two-pass variances; absent sparse entries contribute (0 - mean)^2.
        let mut sq = [vec![T::zero(); num_features], vec![T::zero(); num_features]];
        let mut sq_all = vec![T::zero(); num_features];
        let mut dense = vec![T::zero(); num_features];
        for (row, &y) in rows.iter().zip(labels) {
            let c = y as usize;
            dense.iter_mut().for_each(|v| *v = T::zero());
            for (j, v) in row.entries() {
                dense[j] = v;
            }
            for j in 0..num_features {
                let d = dense[j] - means[c][j];
                sq[c][j] += d * d;
                let e = dense[j] - overall[j];
                sq_all[j] += e * e;
            }
        }
        let max_var = sq_all.iter().fold(T::zero(), |m, &s| m.max(s / n));
        let mut epsilon = T::of(config.var_smoothing) * max_var;
        if !(epsilon > T::zero()) {
            epsilon = T::of(config.var_smoothing).max(T::min_positive_value());
        }
        let variances = [0, 1].map(|c| {
            let nc = T::of_usize(counts[c]);
            sq[c].iter().map(|&s| s / nc + epsilon).collect::<Vec<_>>()
        });
        let class_log_priors = [0, 1].map(|c| (T::of_usize(counts[c]) / n).ln());
        GaussianNbModel {
            means,
            variances,
            class_log_priors,
        }
    }

    /// Joint log-likelihood difference plus prior log-odds.
    pub(crate) fn log_odds(&self, x: &FeatureVector<T>) -> T {
        let half = T::of(0.5);
        let mut out = self.class_log_priors[1] - self.class_log_priors[0];
        for j in 0..self.means[0].len() {
            let v = x.get(j);
            let (m0, m1) = (self.means[0][j], self.means[1][j]);
            let (s0, s1) = (self.variances[0][j], self.variances[1][j]);
            out += half * ((s0 / s1).ln() + (v - m0) * (v - m0) / s0 - (v - m1) * (v - m1) / s1);
        }
        out
    }
}

/// Two-class multinomial naive Bayes over non-negative count-like features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MultinomialNbModel<T: Real = f64> {
    pub feature_log_probs: [Vec<T>; 2],
    pub class_log_priors: [T; 2],
}

impl<T: Real> MultinomialNbModel<T> {
    pub(crate) fn fit(
        config: &LearnerConfig,
        rows: &[&FeatureVector<T>],
        num_features: usize,
        labels: &[bool],
    ) -> Result<Self> {
        let alpha = T::of(config.nb_alpha);
        let mut counts = [0usize; 2];
        let mut totals = [vec![alpha; num_features], vec![alpha; num_features]];
        for (i, (row, &y)) in rows.iter().zip(labels).enumerate() {
            counts[y as usize] += 1;
            for (j, v) in row.entries() {
                if v < T::zero() {
                    return Err(Error::InvalidArgument(format!(
                        "multinomial naive Bayes needs non-negative features (row {i}, feature {j})"
                    )));
                }
                totals[y as usize][j] += v;
            }
        }
        let n = T::of_usize(rows.len());
        let feature_log_probs = totals.map(|t| {
            let norm = t.iter().copied().sum::<T>().ln();
            t.into_iter().map(|c| c.ln() - norm).collect::<Vec<_>>()
        });
        let class_log_priors = [0, 1].map(|c| (T::of_usize(counts[c]) / n).ln());
        Ok(MultinomialNbModel {
            feature_log_probs,
            class_log_priors,
        })
    }

    pub(crate) fn log_odds(&self, x: &FeatureVector<T>) -> T {
        let [lp0, lp1] = &self.feature_log_probs;
        x.entries()
            .map(|(j, v)| v * (lp1[j] - lp0[j]))
            .fold(self.class_log_priors[1] - self.class_log_priors[0], |a, b| a + b)
    }
}
