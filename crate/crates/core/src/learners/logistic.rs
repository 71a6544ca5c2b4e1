use serde::{Deserialize, Serialize};

use super::LearnerConfig;
use crate::data::FeatureVector;
use crate::optim::{minimize, MinimizeOptions, Minimum};
use crate::scalar::{logit, sigmoid, softplus, Real};

/// L2-regularized logistic regression with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LogisticModel<T: Real = f64> {
    pub weights: Vec<T>,
    pub bias: T,
    pub reg_strength: T,
}

impl<T: Real> LogisticModel<T> {
    pub(crate) fn fit(
        config: &LearnerConfig,
        rows: &[&FeatureVector<T>],
        num_features: usize,
        labels: &[bool],
    ) -> Self {
        Self::fit_traced(config, rows, num_features, labels).0
    }

    /// Fits and also returns the optimizer record. The search starts at zero
    /// weights with the intercept at the base-rate log-odds.
    pub fn fit_traced(
        config: &LearnerConfig,
        rows: &[&FeatureVector<T>],
        num_features: usize,
        labels: &[bool],
    ) -> (Self, Minimum<T>) {
        let lambda = T::of(config.reg_strength);
        let n = labels.len();
        let positives = labels.iter().filter(|&&b| b).count();
        let base = T::of_usize(positives) / T::of_usize(n);

        let mut x0 = vec![T::zero(); num_features + 1];
        x0[num_features] = logit(base);
        let objective = |theta: &[T], grad: &mut [T]| regularized_nll(theta, rows, labels, lambda, grad);
        let opts = MinimizeOptions {
            max_iter: config.max_iter,
            grad_tol: config.grad_tol,
            ..Default::default()
        };
        let result = minimize(objective, x0, opts);
        let mut weights = result.x.clone();
        let bias = weights.pop().unwrap_or_else(T::zero);
        (
            LogisticModel {
                weights,
                bias,
                reg_strength: lambda,
            },
            result,
        )
    }

    pub(crate) fn decision(&self, x: &FeatureVector<T>) -> T {
        x.dot(&self.weights) + self.bias
    }

    /// Training objective: summed NLL plus `reg_strength / 2 * |w|^2`.
    pub fn objective(&self, rows: &[&FeatureVector<T>], labels: &[bool]) -> T {
        let mut theta = self.weights.clone();
        theta.push(self.bias);
        let mut grad = vec![T::zero(); theta.len()];
        regularized_nll(&theta, rows, labels, self.reg_strength, &mut grad)
    }
}

/// `theta` holds the weights followed by the intercept.
fn regularized_nll<T: Real>(theta: &[T], rows: &[&FeatureVector<T>], labels: &[bool], lambda: T, grad: &mut [T]) -> T {
    let d = theta.len() - 1;
    let (w, b) = (&theta[..d], theta[d]);
    grad.iter_mut().for_each(|g| *g = T::zero());
    let mut loss = T::zero();
    for (row, &y) in rows.iter().zip(labels) {
        let s = row.dot(w) + b;
        let target = if y { T::one() } else { T::zero() };
        loss += softplus(s) - target * s;
        let residual = sigmoid(s) - target;
        for (j, v) in row.entries() {
            grad[j] += residual * v;
        }
        grad[d] += residual;
    }
    let half = T::of(0.5);
    for (g, &wj) in grad[..d].iter_mut().zip(w) {
        *g += lambda * wj;
        loss += half * lambda * wj * wj;
    }
    loss
}
