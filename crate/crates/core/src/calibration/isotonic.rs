use serde::{Deserialize, Serialize};

use super::platt::check_inputs;
use crate::error::Result;
use crate::scalar::{clamp_prob, Real};

/// Non-decreasing step function of the score.
///
/// Segment `k` covers `[breakpoints[k], breakpoints[k + 1])`; scores below the
/// first breakpoint take the first value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IsotonicModel<T: Real = f64> {
    pub breakpoints: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> IsotonicModel<T> {
    /// Unclamped step-function value at `z`.
    pub fn value_at(&self, z: T) -> T {
        let idx = self.breakpoints.partition_point(|&b| b <= z);
        self.values[idx.saturating_sub(1)]
    }

    /// Calibrated probability, clamped to `[1e-12, 1 - 1e-12]`.
    pub fn apply(&self, z: T) -> T {
        clamp_prob(self.value_at(z))
    }
}

/// Weighted pool-adjacent-violators: the least-squares non-decreasing fit to
/// `targets` taken in the given order. Returns one fitted value per input.
pub fn pava<T: Real>(targets: &[T], weights: &[T]) -> Vec<T> {
    // (weighted sum, total weight, point count)
    let mut blocks: Vec<(T, T, usize)> = Vec::with_capacity(targets.len());
    for (&y, &w) in targets.iter().zip(weights) {
        blocks.push((y * w, w, 1));
        while blocks.len() > 1 {
            let (s1, w1, c1) = blocks[blocks.len() - 1];
            let (s0, w0, c0) = blocks[blocks.len() - 2];
            if s0 / w0 > s1 / w1 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s0 + s1, w0 + w1, c0 + c1);
            } else {
                break;
            }
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, w, c)| std::iter::repeat_n(s / w, c))
        .collect()
}

/// Fits isotonic regression of `labels` on `scores`. Equal scores are pooled
/// into one weighted point before PAVA runs.
pub fn fit_isotonic<T: Real>(scores: &[T], labels: &[bool]) -> Result<IsotonicModel<T>> {
    check_inputs(scores, labels)?;
    let mut pairs: Vec<(T, T)> = scores
        .iter()
        .zip(labels)
        .map(|(&z, &y)| (z, if y { T::one() } else { T::zero() }))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));

    let mut keys: Vec<T> = Vec::new();
    let mut sums: Vec<T> = Vec::new();
    let mut counts: Vec<T> = Vec::new();
    for (z, y) in pairs {
        if keys.last() == Some(&z) {
            *sums.last_mut().unwrap() += y;
            *counts.last_mut().unwrap() += T::one();
        } else {
            keys.push(z);
            sums.push(y);
            counts.push(T::one());
        }
    }
    let means: Vec<T> = sums.iter().zip(&counts).map(|(&s, &c)| s / c).collect();
    let fitted = pava(&means, &counts);

    let mut breakpoints = Vec::new();
    let mut values: Vec<T> = Vec::new();
    for (z, v) in keys.into_iter().zip(fitted) {
        if values.last() != Some(&v) {
            breakpoints.push(z);
            values.push(v);
        }
    }
    Ok(IsotonicModel { breakpoints, values })
}

/// [`IsotonicModel::apply`].
pub fn apply_isotonic<T: Real>(model: &IsotonicModel<T>, z: T) -> T {
    model.apply(z)
}
