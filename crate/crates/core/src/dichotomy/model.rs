use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::structure::{NodeId, TreeStructure};
use crate::calibration::{BinaryCalibrator, ExternalCalibration, InternalCalibration, Scaler};
use crate::data::{stratified_fold_ids, Dataset, FeatureVector};
use crate::error::{Error, Result};
use crate::learners::{fit_binary, BinaryLabelView, BinaryModel, LearnerConfig};
use crate::scalar::{derive_seed, Real, PROB_EPS};

/// Folds used to collect out-of-fold scores for internal calibrators.
pub const CALIBRATION_FOLDS: usize = 3;
/// Nodes with fewer local instances keep the identity calibrator.
pub const MIN_CALIBRATION_INSTANCES: usize = 6;

/// Base model and calibrator of one internal node. The calibrated output is
/// `p(class ∈ left subset | x, class ∈ node's classes)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NodeModel<T: Real = f64> {
    pub model: BinaryModel<T>,
    pub calibrator: BinaryCalibrator<T>,
    /// Calibration was requested but the node had too little data for it.
    #[serde(default)]
    pub calibration_skipped: bool,
}

impl<T: Real> NodeModel<T> {
    pub fn uncalibrated(model: BinaryModel<T>) -> Self {
        NodeModel {
            model,
            calibrator: BinaryCalibrator::Identity,
            calibration_skipped: false,
        }
    }

    pub fn left_probability(&self, x: &FeatureVector<T>) -> Result<T> {
        Ok(self.calibrator.apply(self.model.score(x)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub learner: LearnerConfig,
    pub internal_calibration: InternalCalibration,
    pub external_calibration: ExternalCalibration,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// A trained nested dichotomy.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedDichotomy<T: Real = f64> {
    pub(crate) structure: TreeStructure,
    /// Indexed by node id; `None` at leaves.
    pub(crate) nodes: Vec<Option<NodeModel<T>>>,
    pub(crate) label_names: Vec<String>,
    pub(crate) num_features: usize,
    pub(crate) external: Option<Scaler<T>>,
    pub(crate) metadata: Metadata,
}

/// Out-of-fold material behind one node's internal calibrator.
#[derive(Debug, Clone)]
pub struct NodeDiagnostics<T> {
    pub node: NodeId,
    pub local_instances: usize,
    pub oof_scores: Vec<T>,
    pub meta_labels: Vec<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingDiagnostics<T> {
    pub nodes: Vec<NodeDiagnostics<T>>,
}

/// Trains one binary model per internal node of `structure`.
pub fn train<T: Real>(
    structure: &TreeStructure,
    data: &Dataset<T>,
    learner: &LearnerConfig,
    internal: InternalCalibration,
    seed: u64,
) -> Result<NestedDichotomy<T>> {
    train_with_diagnostics(structure, data, learner, internal, seed).map(|(nd, _)| nd)
}

/// [`train`], also returning the out-of-fold scores each calibrator was fitted on.
pub fn train_with_diagnostics<T: Real>(
    structure: &TreeStructure,
    data: &Dataset<T>,
    learner: &LearnerConfig,
    internal: InternalCalibration,
    seed: u64,
) -> Result<(NestedDichotomy<T>, TrainingDiagnostics<T>)> {
    if structure.num_classes() != data.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "structure has {} classes, dataset has {}",
            structure.num_classes(),
            data.num_classes()
        )));
    }
    if let Some(c) = data.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::InvalidDataset(format!(
            "dataset has no instances of class {:?}",
            data.label_names()[c]
        )));
    }

    let internal_ids: Vec<NodeId> = structure.internal_nodes().collect();
    let trained: Vec<(NodeId, NodeModel<T>, Option<NodeDiagnostics<T>>)> = internal_ids
        .par_iter()
        .map(|&k| {
            let (model, diag) = train_node(structure, k, data, learner, internal, derive_seed(seed, k as u64))?;
            Ok((k, model, diag))
        })
        .collect::<Result<_>>()?;

    let mut nodes = vec![None; structure.len()];
    let mut diagnostics = TrainingDiagnostics::default();
    for (k, model, diag) in trained {
        nodes[k] = Some(model);
        diagnostics.nodes.extend(diag);
    }
    let nd = NestedDichotomy {
        structure: structure.clone(),
        nodes,
        label_names: data.label_names().to_vec(),
        num_features: data.num_features(),
        external: None,
        metadata: Metadata {
            seed,
            learner: learner.clone(),
            internal_calibration: internal,
            external_calibration: ExternalCalibration::None,
            warnings: Vec::new(),
        },
    };
    Ok((nd, diagnostics))
}

fn train_node<T: Real>(
    structure: &TreeStructure,
    k: NodeId,
    data: &Dataset<T>,
    learner: &LearnerConfig,
    internal: InternalCalibration,
    node_seed: u64,
) -> Result<(NodeModel<T>, Option<NodeDiagnostics<T>>)> {
    let m = data.num_classes();
    let mut in_node = vec![false; m];
    let mut in_left = vec![false; m];
    structure.classes(k).iter().for_each(|&c| in_node[c] = true);
    structure.left_classes(k).iter().for_each(|&c| in_left[c] = true);

    let local: Vec<usize> = (0..data.len()).filter(|&i| in_node[data.labels()[i]]).collect();
    let rows: Vec<&FeatureVector<T>> = local.iter().map(|&i| data.row(i)).collect();
    let meta = BinaryLabelView::from_classes(&local.iter().map(|&i| data.labels()[i]).collect::<Vec<_>>(), |c| {
        in_left[c]
    });
    let nf = data.num_features();
    let model = fit_binary(learner, &rows, nf, &meta)?;

    if internal == InternalCalibration::None {
        return Ok((NodeModel::uncalibrated(model), None));
    }
    let skipped = || {
        Ok((
            NodeModel {
                model: model.clone(),
                calibrator: BinaryCalibrator::Identity,
                calibration_skipped: true,
            },
            None,
        ))
    };
    if local.len() < MIN_CALIBRATION_INSTANCES || meta.is_degenerate() {
        return skipped();
    }

    let y = meta.as_slice();
    let meta_classes: Vec<usize> = y.iter().map(|&b| b as usize).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(node_seed);
    let fold_of = stratified_fold_ids(&meta_classes, 2, CALIBRATION_FOLDS, &mut rng);
    let mut oof = vec![T::zero(); local.len()];
    for fold in 0..CALIBRATION_FOLDS {
        let (held, kept): (Vec<usize>, Vec<usize>) = (0..local.len()).partition(|&i| fold_of[i] == fold);
        let fold_labels = BinaryLabelView::new(kept.iter().map(|&i| y[i]).collect());
        if held.is_empty() || fold_labels.is_degenerate() {
            return skipped();
        }
        let fold_rows: Vec<&FeatureVector<T>> = kept.iter().map(|&i| rows[i]).collect();
        let fold_model = fit_binary(learner, &fold_rows, nf, &fold_labels)?;
        for &i in &held {
            oof[i] = fold_model.score(rows[i])?;
        }
    }
    let calibrator = BinaryCalibrator::fit(internal, &oof, y)?;
    Ok((
        NodeModel {
            model,
            calibrator,
            calibration_skipped: false,
        },
        Some(NodeDiagnostics {
            node: k,
            local_instances: local.len(),
            oof_scores: oof,
            meta_labels: y.to_vec(),
        }),
    ))
}

impl<T: Real> NestedDichotomy<T> {
    /// Assembles a dichotomy from parts; every internal node needs a model.
    pub fn from_parts(
        structure: TreeStructure,
        nodes: Vec<Option<NodeModel<T>>>,
        label_names: Vec<String>,
        num_features: usize,
        metadata: Metadata,
    ) -> Result<Self> {
        if nodes.len() != structure.len() {
            return Err(Error::Format(format!(
                "{} node models for {} structure nodes",
                nodes.len(),
                structure.len()
            )));
        }
        for (id, node) in nodes.iter().enumerate() {
            let internal = structure.children(id).is_some();
            match node {
                Some(n) if !internal => {
                    return Err(Error::Format(format!("leaf {id} carries a model")));
                }
                Some(n) if n.model.num_features() != num_features => {
                    return Err(Error::Format(format!("node {id} model has wrong dimensionality")));
                }
                None if internal => {
                    return Err(Error::Format(format!("internal node {id} has no model")));
                }
                _ => {}
            }
        }
        if label_names.len() != structure.num_classes() {
            return Err(Error::Format("label table does not match class count".into()));
        }
        Ok(NestedDichotomy {
            structure,
            nodes,
            label_names,
            num_features,
            external: None,
            metadata,
        })
    }

    pub fn structure(&self) -> &TreeStructure {
        &self.structure
    }

    pub fn num_classes(&self) -> usize {
        self.structure.num_classes()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn node(&self, k: NodeId) -> Option<&NodeModel<T>> {
        self.nodes[k].as_ref()
    }

    /// Swaps the base model at internal node `k`, keeping its calibrator.
    pub fn replace_node_model(&mut self, k: NodeId, model: BinaryModel<T>) -> Result<()> {
        if model.num_features() != self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                got: model.num_features(),
            });
        }
        match self.nodes.get_mut(k).and_then(Option::as_mut) {
            Some(node) => {
                node.model = model;
                Ok(())
            }
            None => Err(Error::InvalidArgument(format!("node {k} is not internal"))),
        }
    }

    pub fn set_node_calibrator(&mut self, k: NodeId, calibrator: BinaryCalibrator<T>) -> Result<()> {
        match self.nodes.get_mut(k).and_then(Option::as_mut) {
            Some(node) => {
                node.calibrator = calibrator;
                Ok(())
            }
            None => Err(Error::InvalidArgument(format!("node {k} is not internal"))),
        }
    }

    pub fn external_calibrator(&self) -> Option<&Scaler<T>> {
        self.external.as_ref()
    }

    /// Attaches (or with `None`, removes) an external scaler over the tree's log-probabilities.
    pub fn set_external_calibrator(&mut self, scaler: Option<Scaler<T>>) -> Result<()> {
        if let Some(s) = &scaler {
            if s.num_classes() != self.num_classes() {
                return Err(Error::DimensionMismatch {
                    expected: self.num_classes(),
                    got: s.num_classes(),
                });
            }
        }
        self.metadata.external_calibration = match &scaler {
            None => ExternalCalibration::None,
            Some(Scaler::Vector(_)) => ExternalCalibration::Vector,
            Some(Scaler::Matrix(_)) => ExternalCalibration::Matrix,
        };
        self.external = scaler;
        Ok(())
    }

    pub(crate) fn push_warning(&mut self, warning: String) {
        self.metadata.warnings.push(warning);
    }

    /// `p(left | x)` at every internal node (internally calibrated); zero at leaves.
    pub fn node_probabilities(&self, x: &FeatureVector<T>) -> Result<Vec<T>> {
        x.check_dim(self.num_features)?;
        self.nodes
            .iter()
            .map(|node| match node {
                Some(n) => n.left_probability(x),
                None => Ok(T::zero()),
            })
            .collect()
    }

    /// Class distribution from the product of branch probabilities, before
    /// any external calibration.
    pub fn tree_distribution(&self, x: &FeatureVector<T>) -> Result<Vec<T>> {
        let probs = self.node_probabilities(x)?;
        Ok(leaf_distribution(&self.structure, &probs))
    }

    /// Class probability vector; externally calibrated when a scaler is attached.
    pub fn predict_distribution(&self, x: &FeatureVector<T>) -> Result<Vec<T>> {
        let p = self.tree_distribution(x)?;
        match &self.external {
            None => Ok(p),
            Some(scaler) => scaler.apply(&log_probabilities(&p)),
        }
    }

    /// Follows the more probable branch at each node (ties go left).
    pub fn predict_greedy(&self, x: &FeatureVector<T>) -> Result<usize> {
        x.check_dim(self.num_features)?;
        let half = T::of(0.5);
        let mut k = 0;
        while let Some((l, r)) = self.structure.children(k) {
            let node = self.nodes[k].as_ref().expect("internal node has a model");
            k = if node.left_probability(x)? >= half { l } else { r };
        }
        Ok(self.structure.classes(k)[0])
    }

    /// Probability mass of every node at the depth-`d` frontier.
    ///
    /// Without external calibration a node's mass is the product of branch
    /// probabilities from the root. With a scaler attached it is the summed
    /// calibrated probability of the classes under the node.
    pub fn frontier_masses(&self, x: &FeatureVector<T>, d: usize) -> Result<Vec<(NodeId, T)>> {
        let frontier = self.structure.frontier(d);
        if self.external.is_some() {
            let p = self.predict_distribution(x)?;
            return Ok(frontier
                .into_iter()
                .map(|k| (k, self.structure.classes(k).iter().map(|&c| p[c]).sum()))
                .collect());
        }
        let probs = self.node_probabilities(x)?;
        let log_mass = node_log_masses(&self.structure, &probs);
        Ok(frontier.into_iter().map(|k| (k, log_mass[k].exp())).collect())
    }

    /// Most probable node at the depth-`d` frontier: its class set and mass.
    pub fn predict_depth_cutoff(&self, x: &FeatureVector<T>, d: usize) -> Result<(Vec<usize>, T)> {
        if d == 0 {
            return Err(Error::InvalidArgument("depth limit must be at least 1".into()));
        }
        let masses = self.frontier_masses(x, d)?;
        // Ties go to the node holding the lowest class index, matching argmax
        // over class probabilities at the leaves.
        let first_class = |k: NodeId| self.structure.classes(k)[0];
        let (best, mass) = masses
            .into_iter()
            .fold(None, |acc: Option<(NodeId, T)>, (k, p)| match acc {
                Some((bk, bp)) if bp > p || (bp == p && first_class(bk) < first_class(k)) => acc,
                _ => Some((k, p)),
            })
            .expect("non-empty frontier");
        Ok((self.structure.classes(best).to_vec(), mass))
    }

    /// Multiclass NLL of class `y` and the binary NLLs of the nodes on its path.
    ///
    /// Uses internally calibrated, unclamped branch probabilities and ignores
    /// external calibration. A branch probability of exactly zero towards `y`
    /// yields `+inf` on both sides.
    pub fn nll_decomposition(&self, x: &FeatureVector<T>, y: usize) -> Result<(T, Vec<T>)> {
        if y >= self.num_classes() {
            return Err(Error::InvalidArgument(format!("class {y} out of range")));
        }
        let probs = self.node_probabilities(x)?;
        Ok(path_nll_decomposition(&self.structure, &probs, y))
    }
}

/// Log-probabilities clamped below at `1e-12`, the logit representation fed to
/// external scalers.
pub fn log_probabilities<T: Real>(p: &[T]) -> Vec<T> {
    let eps = T::of(PROB_EPS);
    p.iter().map(|&v| v.max(eps).ln()).collect()
}

/// Log-mass of every node given `p(left)` per internal node, with each branch
/// probability clamped to `[1e-12, 1 - 1e-12]`.
pub fn node_log_masses<T: Real>(structure: &TreeStructure, left_probs: &[T]) -> Vec<T> {
    let eps = T::of(PROB_EPS);
    let mut log_mass = vec![T::zero(); structure.len()];
    // Pre-order ids: a parent's mass is final before its children are visited.
    for k in 0..structure.len() {
        if let Some((l, r)) = structure.children(k) {
            let p = left_probs[k].max(eps).min(T::one() - eps);
            log_mass[l] = log_mass[k] + p.ln();
            log_mass[r] = log_mass[k] + (-p).ln_1p();
        }
    }
    log_mass
}

/// Leaf probabilities, multiplied in log space.
pub fn leaf_distribution<T: Real>(structure: &TreeStructure, left_probs: &[T]) -> Vec<T> {
    let log_mass = node_log_masses(structure, left_probs);
    (0..structure.num_classes())
        .map(|c| log_mass[structure.leaf_of(c)].exp())
        .collect()
}

/// Path decomposition on raw branch probabilities: returns
/// `-ln(product of branch probabilities towards y)` and the per-node binary NLLs.
pub fn path_nll_decomposition<T: Real>(structure: &TreeStructure, left_probs: &[T], y: usize) -> (T, Vec<T>) {
    let path = structure.path_to(y);
    let mut product = T::one();
    let mut parts = Vec::with_capacity(path.len());
    for &(k, goes_left) in &path {
        let p = left_probs[k];
        let toward = if goes_left { p } else { T::one() - p };
        product *= toward;
        parts.push(if goes_left { -p.ln() } else { -(T::one() - p).ln() });
    }
    (-product.ln(), parts)
}
