//! Nested dichotomies: class-hierarchy sampling, per-node training and
//! probability inference.
//!
//! The probability of class `c` is the product, over the internal nodes on
//! the path to `c`'s leaf, of the probability assigned to the branch that
//! contains `c`. Every node model predicts membership in its *left* subset.

mod model;
mod persist;
mod structure;

pub use self::model::{
    leaf_distribution, log_probabilities, node_log_masses, path_nll_decomposition, train, train_with_diagnostics,
    Metadata, NestedDichotomy, NodeDiagnostics, NodeModel, TrainingDiagnostics, CALIBRATION_FOLDS,
    MIN_CALIBRATION_INSTANCES,
};
pub use self::persist::FORMAT_VERSION;
pub use self::structure::{sample_structure, NodeId, SplitStrategy, StructureNode, TreeStructure};
