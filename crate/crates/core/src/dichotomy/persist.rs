//! Versioned JSON model documents.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "seed": 42,
//!   "learner": { "kind": "logistic", ... },
//!   "internal_calibration": "isotonic",
//!   "external_calibration": "vector",
//!   "label_names": ["a", "b", "c"],
//!   "num_features": 4,
//!   "nodes": [
//!     { "id": 0, "classes": [0, 1, 2], "class_sets": [[0], [1, 2]], "children": [1, 2],
//!       "model": { "kind": "logistic", ... }, "calibrator": { "kind": "isotonic", ... } },
//!     { "id": 1, "classes": [0], "class_sets": [], "children": null, "model": null, "calibrator": null },
//!     ...
//!   ],
//!   "external_calibrator": { "kind": "vector", "weights": [...], "bias": [...] },
//!   "warnings": []
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so a loaded model
//! reproduces the saved model's predictions bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Metadata, NestedDichotomy, NodeModel};
use super::structure::{NodeId, StructureNode, TreeStructure};
use crate::calibration::{BinaryCalibrator, ExternalCalibration, InternalCalibration, Scaler};
use crate::error::{Error, Result};
use crate::learners::{BinaryModel, LearnerConfig};
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct ModelDocument<T: Real> {
    format_version: u32,
    seed: u64,
    learner: LearnerConfig,
    internal_calibration: InternalCalibration,
    external_calibration: ExternalCalibration,
    label_names: Vec<String>,
    num_features: usize,
    nodes: Vec<NodeDocument<T>>,
    external_calibrator: Option<Scaler<T>>,
    #[serde(default)]
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct NodeDocument<T: Real> {
    id: NodeId,
    classes: Vec<usize>,
    class_sets: Vec<Vec<usize>>,
    children: Option<(NodeId, NodeId)>,
    model: Option<BinaryModel<T>>,
    calibrator: Option<BinaryCalibrator<T>>,
    #[serde(default)]
    calibration_skipped: bool,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<u32>,
}

impl<T: Real> NestedDichotomy<T> {
    pub fn to_json(&self) -> Result<String> {
        let s = &self.structure;
        let nodes = (0..s.len())
            .map(|id| NodeDocument {
                id,
                classes: s.classes(id).to_vec(),
                class_sets: match s.children(id) {
                    Some(_) => vec![s.left_classes(id).to_vec(), s.right_classes(id).to_vec()],
                    None => Vec::new(),
                },
                children: s.children(id),
                model: self.nodes[id].as_ref().map(|n| n.model.clone()),
                calibrator: self.nodes[id].as_ref().map(|n| n.calibrator.clone()),
                calibration_skipped: self.nodes[id].as_ref().is_some_and(|n| n.calibration_skipped),
            })
            .collect();
        let doc = ModelDocument {
            format_version: FORMAT_VERSION,
            seed: self.metadata.seed,
            learner: self.metadata.learner.clone(),
            internal_calibration: self.metadata.internal_calibration,
            external_calibration: self.metadata.external_calibration,
            label_names: self.label_names.clone(),
            num_features: self.num_features,
            nodes,
            external_calibrator: self.external.clone(),
            warnings: self.metadata.warnings.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("not a model document: {e}")))?;
        match probe.format_version {
            Some(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Format(format!(
                    "unsupported format_version {v} (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Format("missing format_version".into())),
        }
        let doc: ModelDocument<T> =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("format_version {FORMAT_VERSION}: {e}")))?;

        let mut structure_nodes = Vec::with_capacity(doc.nodes.len());
        let mut models = Vec::with_capacity(doc.nodes.len());
        for (pos, node) in doc.nodes.into_iter().enumerate() {
            if node.id != pos {
                return Err(Error::Format(format!("node at position {pos} has id {}", node.id)));
            }
            models.push(match (node.model, node.calibrator) {
                (Some(model), Some(calibrator)) => Some(NodeModel {
                    model,
                    calibrator,
                    calibration_skipped: node.calibration_skipped,
                }),
                (None, None) => None,
                _ => return Err(Error::Format(format!("node {pos} has a model without calibrator"))),
            });
            structure_nodes.push((
                StructureNode {
                    classes: node.classes,
                    children: node.children,
                },
                node.class_sets,
            ));
        }
        let class_sets: Vec<Vec<Vec<usize>>> = structure_nodes.iter().map(|(_, c)| c.clone()).collect();
        let structure = TreeStructure::from_nodes(structure_nodes.into_iter().map(|(n, _)| n).collect())?;
        for (id, sets) in class_sets.iter().enumerate() {
            let expected: Vec<Vec<usize>> = match structure.children(id) {
                Some(_) => vec![
                    structure.left_classes(id).to_vec(),
                    structure.right_classes(id).to_vec(),
                ],
                None => Vec::new(),
            };
            if *sets != expected {
                return Err(Error::Format(format!(
                    "class_sets of node {id} disagree with its children"
                )));
            }
        }
        let mut nd = NestedDichotomy::from_parts(
            structure,
            models,
            doc.label_names,
            doc.num_features,
            Metadata {
                seed: doc.seed,
                learner: doc.learner,
                internal_calibration: doc.internal_calibration,
                external_calibration: ExternalCalibration::None,
                warnings: doc.warnings,
            },
        )?;
        nd.set_external_calibrator(doc.external_calibrator)?;
        if nd.metadata.external_calibration != doc.external_calibration {
            return Err(Error::Format(
                "external_calibration disagrees with external_calibrator".into(),
            ));
        }
        Ok(nd)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
