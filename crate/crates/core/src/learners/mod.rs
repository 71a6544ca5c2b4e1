//! Probabilistic binary base learners used at the internal nodes of a
//! nested dichotomy.
//!
//! Every model exposes a log-odds score for meta-class 1, clamped to
//! `[-35, 35]`, and the matching probability `sigmoid(score)`.

mod boosting;
mod logistic;
mod naive_bayes;

pub use self::boosting::{BoostedTreesModel, BoostingStage, DecisionTree, TreeNode};
pub use self::logistic::LogisticModel;
pub use self::naive_bayes::{GaussianNbModel, MultinomialNbModel};

use serde::{Deserialize, Serialize};

use crate::data::FeatureVector;
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Real, SCORE_CLAMP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Logistic,
    #[serde(alias = "gnb")]
    GaussianNb,
    #[serde(alias = "mnb")]
    MultinomialNb,
    #[serde(alias = "adaboost")]
    Boosted,
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LearnerKind::Logistic),
            "gnb" | "gaussian_nb" => Ok(LearnerKind::GaussianNb),
            "mnb" | "multinomial_nb" => Ok(LearnerKind::MultinomialNb),
            "boosted" | "adaboost" => Ok(LearnerKind::Boosted),
            other => Err(Error::InvalidArgument(format!("unknown learner {other:?}"))),
        }
    }
}

/// Hyperparameters for all learner families; only the fields relevant to
/// `kind` are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// L2 penalty on logistic weights (intercept unpenalized).
    pub reg_strength: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Gaussian NB: fraction of the largest feature variance added to every variance.
    pub var_smoothing: f64,
    /// Multinomial NB additive smoothing count.
    pub nb_alpha: f64,
    pub boosting_rounds: usize,
    pub tree_depth: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            kind: LearnerKind::Logistic,
            reg_strength: 1.0,
            max_iter: 1000,
            grad_tol: 1e-6,
            var_smoothing: 1e-9,
            nb_alpha: 1.0,
            boosting_rounds: 50,
            tree_depth: 3,
        }
    }
}

impl LearnerConfig {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerConfig {
            kind,
            ..Default::default()
        }
    }
}

/// Binary targets for one node: `true` when the instance's class lies in the
/// left subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryLabelView(Vec<bool>);

impl BinaryLabelView {
    pub fn new(meta_labels: Vec<bool>) -> Self {
        BinaryLabelView(meta_labels)
    }

    /// Meta-labels for `labels`, positive when `in_left(class)` holds.
    pub fn from_classes(labels: &[usize], in_left: impl Fn(usize) -> bool) -> Self {
        BinaryLabelView(labels.iter().map(|&c| in_left(c)).collect())
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Only one meta-class present.
    pub fn is_degenerate(&self) -> bool {
        let p = self.positives();
        p == 0 || p == self.0.len()
    }
}

/// A fitted binary model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinaryModel<T: Real = f64> {
    /// Laplace-smoothed base rate, used when a node sees a single meta-class.
    Constant {
        log_odds: T,
        num_features: usize,
    },
    Logistic(LogisticModel<T>),
    GaussianNb(GaussianNbModel<T>),
    MultinomialNb(MultinomialNbModel<T>),
    Boosted(BoostedTreesModel<T>),
}

impl<T: Real> BinaryModel<T> {
    /// Constant model predicting `(positives + 1) / (n + 2)`.
    pub fn laplace_prior(positives: usize, n: usize, num_features: usize) -> Self {
        let pos = T::of_usize(positives + 1);
        let neg = T::of_usize(n - positives + 1);
        BinaryModel::Constant {
            log_odds: (pos / neg).ln(),
            num_features,
        }
    }

    pub fn num_features(&self) -> usize {
        match self {
            BinaryModel::Constant { num_features, .. } => *num_features,
            BinaryModel::Logistic(m) => m.weights.len(),
            BinaryModel::GaussianNb(m) => m.means[0].len(),
            BinaryModel::MultinomialNb(m) => m.feature_log_probs[0].len(),
            BinaryModel::Boosted(m) => m.num_features,
        }
    }

    /// Clamped log-odds of meta-class 1.
    pub fn score(&self, x: &FeatureVector<T>) -> Result<T> {
        x.check_dim(self.num_features())?;
        let raw = match self {
            BinaryModel::Constant { log_odds, .. } => *log_odds,
            BinaryModel::Logistic(m) => m.decision(x),
            BinaryModel::GaussianNb(m) => m.log_odds(x),
            BinaryModel::MultinomialNb(m) => m.log_odds(x),
            BinaryModel::Boosted(m) => m.decision(x),
        };
        if raw.is_nan() {
            return Err(Error::NonFinite("binary model score".into()));
        }
        let clamp = T::of(SCORE_CLAMP);
        Ok(raw.max(-clamp).min(clamp))
    }

    /// Probability of meta-class 1; strictly inside (0, 1).
    pub fn proba(&self, x: &FeatureVector<T>) -> Result<T> {
        self.score(x).map(sigmoid)
    }
}

/// Fits a binary model of the configured kind.
///
/// A node whose meta-labels are all equal gets [`BinaryModel::laplace_prior`].
pub fn fit_binary<T: Real>(
    config: &LearnerConfig,
    rows: &[&FeatureVector<T>],
    num_features: usize,
    labels: &BinaryLabelView,
) -> Result<BinaryModel<T>> {
    if num_features == 0 {
        return Err(Error::InvalidArgument("zero features".into()));
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no training instances".into()));
    }
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    for (i, row) in rows.iter().enumerate() {
        row.check_dim(num_features)?;
        if row.entries().any(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature value in training row {i}")));
        }
    }
    if labels.is_degenerate() {
        return Ok(BinaryModel::laplace_prior(
            labels.positives(),
            labels.len(),
            num_features,
        ));
    }
    let y = labels.as_slice();
    Ok(match config.kind {
        LearnerKind::Logistic => BinaryModel::Logistic(LogisticModel::fit(config, rows, num_features, y)),
        LearnerKind::GaussianNb => BinaryModel::GaussianNb(GaussianNbModel::fit(config, rows, num_features, y)),
        LearnerKind::MultinomialNb => {
            BinaryModel::MultinomialNb(MultinomialNbModel::fit(config, rows, num_features, y)?)
        }
        LearnerKind::Boosted => BinaryModel::Boosted(BoostedTreesModel::fit(config, rows, num_features, y)),
    })
}

/// Log-odds of meta-class 1 under `model`.
pub fn predict_binary_score<T: Real>(model: &BinaryModel<T>, x: &FeatureVector<T>) -> Result<T> {
    model.score(x)
}

/// `sigmoid(predict_binary_score(model, x))`.
pub fn predict_binary_proba<T: Real>(model: &BinaryModel<T>, x: &FeatureVector<T>) -> Result<T> {
    model.proba(x)
}
