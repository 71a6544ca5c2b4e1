//! Vector and matrix scaling of multiclass logit vectors, normalized with softmax.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{minimize, MinimizeOptions};
use crate::scalar::{log_softmax, softmax, Real};

/// `softmax(w ⊙ z + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VectorScaler<T: Real = f64> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// `softmax(W z + b)` with `weights[i][j] = W_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MatrixScaler<T: Real = f64> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum Scaler<T: Real = f64> {
    Vector(VectorScaler<T>),
    Matrix(MatrixScaler<T>),
}

impl<T: Real> VectorScaler<T> {
    pub fn identity(m: usize) -> Self {
        VectorScaler {
            weights: vec![T::one(); m],
            bias: vec![T::zero(); m],
        }
    }

    pub fn transform(&self, z: &[T]) -> Vec<T> {
        z.iter()
            .zip(&self.weights)
            .zip(&self.bias)
            .map(|((&z, &w), &b)| w * z + b)
            .collect()
    }
}

impl<T: Real> MatrixScaler<T> {
    pub fn identity(m: usize) -> Self {
        let weights = (0..m)
            .map(|i| (0..m).map(|j| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        MatrixScaler {
            weights,
            bias: vec![T::zero(); m],
        }
    }

    pub fn transform(&self, z: &[T]) -> Vec<T> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(z).map(|(&w, &v)| w * v).sum::<T>() + b)
            .collect()
    }
}

impl<T: Real> From<&VectorScaler<T>> for MatrixScaler<T> {
    fn from(v: &VectorScaler<T>) -> Self {
        let mut m = MatrixScaler::identity(v.weights.len());
        for (i, &w) in v.weights.iter().enumerate() {
            m.weights[i][i] = w;
        }
        m.bias = v.bias.clone();
        m
    }
}

impl<T: Real> Scaler<T> {
    pub fn num_classes(&self) -> usize {
        match self {
            Scaler::Vector(v) => v.bias.len(),
            Scaler::Matrix(m) => m.bias.len(),
        }
    }

    /// Calibrated probability vector for the logit vector `z`.
    pub fn apply(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_classes(),
                got: z.len(),
            });
        }
        Ok(softmax(&match self {
            Scaler::Vector(v) => v.transform(z),
            Scaler::Matrix(m) => m.transform(z),
        }))
    }
}

/// [`Scaler::apply`].
pub fn apply_scaler<T: Real>(scaler: &Scaler<T>, z: &[T]) -> Result<Vec<T>> {
    scaler.apply(z)
}

/// Mean multiclass NLL of `softmax(transform(z))`.
pub fn scaled_nll<T: Real>(scaler: &Scaler<T>, logits: &[Vec<T>], labels: &[usize]) -> T {
    let total: T = logits
        .iter()
        .zip(labels)
        .map(|(z, &y)| {
            let u = match scaler {
                Scaler::Vector(v) => v.transform(z),
                Scaler::Matrix(m) => m.transform(z),
            };
            -log_softmax(&u)[y]
        })
        .sum();
    total / T::of_usize(labels.len())
}

fn validate<T: Real>(logits: &[Vec<T>], labels: &[usize]) -> Result<usize> {
    if logits.is_empty() {
        return Err(Error::InvalidArgument("no calibration data".into()));
    }
    if logits.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: logits.len(),
            got: labels.len(),
        });
    }
    let m = logits[0].len();
    if m < 2 {
        return Err(Error::InvalidArgument("scaling needs at least two classes".into()));
    }
    for (i, z) in logits.iter().enumerate() {
        if z.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("logit vector {i}")));
        }
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= m) {
        return Err(Error::InvalidArgument(format!(
            "label {y} out of range for {m} classes"
        )));
    }
    let mut present = vec![false; m];
    labels.iter().for_each(|&y| present[y] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::InvalidArgument(
            "scaling needs labels from at least two classes".into(),
        ));
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy)]
pub struct VectorScalingOptions {
    /// Ridge `l2 / 2 * (|w - 1|^2 + |b|^2)` added to the summed NLL. It
    /// vanishes at the identity transform, so the fit never does worse than
    /// the identity on its own data.
    pub l2: f64,
}

impl Default for VectorScalingOptions {
    fn default() -> Self {
        VectorScalingOptions { l2: 1.0 }
    }
}

/// Vector scaling with the default ridge towards the identity.
pub fn fit_vector_scaling<T: Real>(logits: &[Vec<T>], labels: &[usize]) -> Result<VectorScaler<T>> {
    fit_vector_scaling_with(logits, labels, VectorScalingOptions::default())
}

/// Fits vector scaling by minimizing mean NLL plus the ridge, starting from
/// the identity.
pub fn fit_vector_scaling_with<T: Real>(
    logits: &[Vec<T>],
    labels: &[usize],
    opts: VectorScalingOptions,
) -> Result<VectorScaler<T>> {
    let m = validate(logits, labels)?;
    let n = T::of_usize(labels.len());
    let ridge = T::of(opts.l2) / n;
    let half = T::of(0.5);
    let objective = |theta: &[T], grad: &mut [T]| {
        let (w, b) = theta.split_at(m);
        grad.iter_mut().for_each(|g| *g = T::zero());
        let mut loss = T::zero();
        let mut u = vec![T::zero(); m];
        for (z, &y) in logits.iter().zip(labels) {
            for c in 0..m {
                u[c] = w[c] * z[c] + b[c];
            }
            let logp = log_softmax(&u);
            loss -= logp[y];
            for c in 0..m {
                let r = logp[c].exp() - if c == y { T::one() } else { T::zero() };
                grad[c] += r * z[c];
                grad[m + c] += r;
            }
        }
        grad.iter_mut().for_each(|g| *g /= n);
        loss /= n;
        for c in 0..m {
            let (dw, db) = (w[c] - T::one(), b[c]);
            loss += half * ridge * (dw * dw + db * db);
            grad[c] += ridge * dw;
            grad[m + c] += ridge * db;
        }
        loss
    };
    let mut x0 = vec![T::one(); m];
    x0.extend(std::iter::repeat_n(T::zero(), m));
    let result = minimize(objective, x0, MinimizeOptions::default());
    let (w, b) = result.x.split_at(m);
    Ok(VectorScaler {
        weights: w.to_vec(),
        bias: b.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixInit {
    Identity,
    /// Start from the fitted vector-scaling solution.
    VectorScaling,
}

#[derive(Debug, Clone, Copy)]
pub struct MatrixScalingOptions {
    /// Penalty `l2 * sum_{i != j} W_ij^2` added to the mean NLL.
    pub off_diagonal_l2: f64,
    /// Ridge on the diagonal and bias, as in [`VectorScalingOptions::l2`].
    pub identity_l2: f64,
    /// Freeze off-diagonal entries at zero.
    pub diagonal_only: bool,
    pub init: MatrixInit,
    /// Settings of the vector-scaling fit used as the starting point.
    pub vector: VectorScalingOptions,
}

impl Default for MatrixScalingOptions {
    fn default() -> Self {
        MatrixScalingOptions {
            off_diagonal_l2: 1e-4,
            identity_l2: 0.0,
            diagonal_only: false,
            init: MatrixInit::VectorScaling,
            vector: VectorScalingOptions::default(),
        }
    }
}

/// Matrix scaling with default options: off-diagonal L2 of `1e-4`, started
/// from the vector-scaling fit so the result is never worse on the fit set.
pub fn fit_matrix_scaling<T: Real>(logits: &[Vec<T>], labels: &[usize]) -> Result<MatrixScaler<T>> {
    fit_matrix_scaling_with(logits, labels, MatrixScalingOptions::default())
}

pub fn fit_matrix_scaling_with<T: Real>(
    logits: &[Vec<T>],
    labels: &[usize],
    opts: MatrixScalingOptions,
) -> Result<MatrixScaler<T>> {
    let m = validate(logits, labels)?;
    let n = T::of_usize(labels.len());
    let l2 = T::of(opts.off_diagonal_l2);
    let ridge = T::of(opts.identity_l2) / n;
    let half = T::of(0.5);
    let start = match opts.init {
        MatrixInit::Identity => MatrixScaler::identity(m),
        MatrixInit::VectorScaling => MatrixScaler::from(&fit_vector_scaling_with(logits, labels, opts.vector)?),
    };
    let mut x0: Vec<T> = start.weights.iter().flatten().copied().collect();
    x0.extend_from_slice(&start.bias);

    let diagonal_only = opts.diagonal_only;
    let objective = |theta: &[T], grad: &mut [T]| {
        let (w, b) = theta.split_at(m * m);
        grad.iter_mut().for_each(|g| *g = T::zero());
        let mut loss = T::zero();
        let mut u = vec![T::zero(); m];
        for (z, &y) in logits.iter().zip(labels) {
            for i in 0..m {
                let row = &w[i * m..(i + 1) * m];
                u[i] = row.iter().zip(z).map(|(&a, &v)| a * v).sum::<T>() + b[i];
            }
            let logp = log_softmax(&u);
            loss -= logp[y];
            for i in 0..m {
                let r = logp[i].exp() - if i == y { T::one() } else { T::zero() };
                for (g, &v) in grad[i * m..(i + 1) * m].iter_mut().zip(z) {
                    *g += r * v;
                }
                grad[m * m + i] += r;
            }
        }
        grad.iter_mut().for_each(|g| *g /= n);
        loss /= n;
        for i in 0..m {
            let (dw, db) = (w[i * m + i] - T::one(), b[i]);
            loss += half * ridge * (dw * dw + db * db);
            grad[i * m + i] += ridge * dw;
            grad[m * m + i] += ridge * db;
            for j in 0..m {
                if i == j {
                    continue;
                }
                let k = i * m + j;
                if diagonal_only {
                    grad[k] = T::zero();
                } else {
                    loss += l2 * w[k] * w[k];
                    grad[k] += (l2 + l2) * w[k];
                }
            }
        }
        loss
    };
    let result = minimize(objective, x0, MinimizeOptions::default());
    let (w, b) = result.x.split_at(m * m);
    Ok(MatrixScaler {
        weights: w.chunks(m).map(|r| r.to_vec()).collect(),
        bias: b.to_vec(),
    })
}
