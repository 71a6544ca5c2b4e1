use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{clamp_prob, logit, sigmoid, softplus, Real};

/// Two-parameter sigmoid `1 / (1 + exp(alpha * z + beta))` over log-odds `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PlattModel<T: Real = f64> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> PlattModel<T> {
    /// Constant model at the Laplace-smoothed base rate `(n1 + 1) / (n + 2)`.
    pub fn laplace(positives: usize, n: usize) -> Self {
        let p = T::of_usize(positives + 1) / T::of_usize(n + 2);
        PlattModel {
            alpha: T::zero(),
            beta: -logit(p),
        }
    }

    /// Calibrated probability, clamped to `[1e-12, 1 - 1e-12]`.
    pub fn apply(&self, z: T) -> T {
        clamp_prob(sigmoid(-(self.alpha * z + self.beta)))
    }

    /// Mean binary NLL of the (unclamped) sigmoid on `(scores, labels)`.
    pub fn mean_nll(&self, scores: &[T], labels: &[bool]) -> T {
        let total: T = scores
            .iter()
            .zip(labels)
            .map(|(&z, &y)| {
                let u = self.alpha * z + self.beta;
                if y {
                    softplus(u)
                } else {
                    softplus(-u)
                }
            })
            .sum();
        total / T::of_usize(scores.len())
    }
}

/// Fits Platt scaling by unregularized Newton iterations on the binary NLL.
///
/// Iteration starts from the better of the constant base-rate model and the
/// identity map `sigmoid(z)`, and only accepts improving steps, so the fit is
/// never worse than either. With fewer than two points or a single label value
/// the Laplace constant is returned instead.
pub fn fit_platt<T: Real>(scores: &[T], labels: &[bool]) -> Result<PlattModel<T>> {
    check_inputs(scores, labels)?;
    let n = scores.len();
    let positives = labels.iter().filter(|&&y| y).count();
    if n < 2 || positives == 0 || positives == n {
        return Ok(PlattModel::laplace(positives, n));
    }

    let nf = T::of_usize(n);
    let base_rate = PlattModel {
        alpha: T::zero(),
        beta: -logit(T::of_usize(positives) / nf),
    };
    let identity = PlattModel {
        alpha: -T::one(),
        beta: T::zero(),
    };
    let (mut model, mut value) = [base_rate, identity]
        .into_iter()
        .map(|m| (m, m.mean_nll(scores, labels)))
        .fold(None, |best: Option<(PlattModel<T>, T)>, (m, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((m, v)),
        })
        .expect("two candidates");
    let tol = T::of(1e-10);
    for _ in 0..100 {
        // d NLL / du = y - p, d2 NLL / du2 = p (1 - p), with p = sigmoid(-u).
        let (mut ga, mut gb) = (T::zero(), T::zero());
        let (mut haa, mut hab, mut hbb) = (T::zero(), T::zero(), T::zero());
        for (&z, &y) in scores.iter().zip(labels) {
            let p = sigmoid(-(model.alpha * z + model.beta));
            let r = if y { T::one() - p } else { -p };
            let w = p * (T::one() - p);
            ga += r * z;
            gb += r;
            haa += w * z * z;
            hab += w * z;
            hbb += w;
        }
        let (ga, gb, haa, hab, hbb) = (ga / nf, gb / nf, haa / nf, hab / nf, hbb / nf);
        if ga.abs().max(gb.abs()) < tol {
            break;
        }
        let det = haa * hbb - hab * hab;
        let (da, db) = if det > T::epsilon() * (haa * hbb).max(T::min_positive_value()) {
            (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det)
        } else {
            (-ga, -gb)
        };
        let mut step = T::one();
        let mut improved = false;
        for _ in 0..60 {
            let trial = PlattModel {
                alpha: model.alpha + step * da,
                beta: model.beta + step * db,
            };
            let v = trial.mean_nll(scores, labels);
            if v < value {
                model = trial;
                value = v;
                improved = true;
                break;
            }
            step *= T::of(0.5);
        }
        if !improved {
            break;
        }
    }
    Ok(model)
}

/// [`PlattModel::apply`].
pub fn apply_platt<T: Real>(model: &PlattModel<T>, z: T) -> T {
    model.apply(z)
}

pub(crate) fn check_inputs<T: Real>(scores: &[T], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no calibration data".into()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("calibration score at position {i}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn midpoint_and_constant() {
        let m = PlattModel {
            alpha: -1.0_f64,
            beta: 0.0,
        };
        assert_eq!(m.apply(0.0), 0.5);
        let c = PlattModel {
            alpha: 0.0_f64,
            beta: 0.7,
        };
        assert_eq!(c.apply(-3.0), c.apply(12.0));
        assert!((c.apply(1.0) - sigmoid(-0.7)).abs() < 1e-15);
    }

    #[test]
    fn clamps_at_saturation() {
        let m = PlattModel {
            alpha: -1.0_f64,
            beta: 0.0,
        };
        let hi = m.apply(35.0);
        assert!((1.0 - 1e-12 - 1e-16..1.0).contains(&hi));
        assert!(m.apply(-1e4) >= 1e-12);
    }

    #[test]
    fn laplace_fallback() {
        let m = fit_platt(&[0.3_f64, -1.0, 2.0], &[true, true, true]).unwrap();
        for z in [-10.0, 0.0, 10.0] {
            assert!((m.apply(z) - 0.8).abs() < 1e-12);
        }
        let m = fit_platt(&[0.3_f64], &[false]).unwrap();
        assert!((m.apply(0.0) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_true_log_odds() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..10_000 {
            let z: f64 = rng.gen_range(-4.0..4.0);
            scores.push(z);
            labels.push(rng.gen::<f64>() < sigmoid(z));
        }
        let m = fit_platt(&scores, &labels).unwrap();
        assert!((m.alpha + 1.0).abs() < 0.1, "{m:?}");
        assert!(m.beta.abs() < 0.1, "{m:?}");
    }

    #[test]
    fn monotone_direction_follows_alpha() {
        for (alpha, decreasing) in [(0.8, true), (-1.3, false)] {
            let m = PlattModel { alpha, beta: 0.2 };
            let grid: Vec<f64> = (-50..=50).map(|i| i as f64 * 0.7).collect();
            for w in grid.windows(2) {
                let (a, b) = (m.apply(w[0]), m.apply(w[1]));
                if decreasing {
                    assert!(b <= a);
                } else {
                    assert!(b >= a);
                }
            }
        }
    }

    #[test]
    fn separable_scores_stay_finite() {
        let scores = [-3.0_f64, -2.0, -1.0, 1.0, 2.0, 3.0];
        let labels = [false, false, false, true, true, true];
        let m = fit_platt(&scores, &labels).unwrap();
        assert!(m.alpha.is_finite() && m.beta.is_finite());
        assert!(m.alpha < 0.0);
        assert!(m.apply(3.0) > 0.99);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(fit_platt(&[f64::NAN, 1.0], &[true, false]).is_err());
        assert!(fit_platt::<f64>(&[], &[]).is_err());
    }
}
