//! Nested dichotomies for multiclass probability estimation, with
//! per-node (internal) and whole-model (external) calibration.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar type for the common cases.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod data;
pub mod dichotomy;
pub mod error;
pub mod learners;
pub mod metrics;
pub mod optim;
pub mod scalar;

pub use crate::calibration::{external_calibrate, BinaryCalibrator, ExternalCalibration, InternalCalibration, Scaler};
pub use crate::data::{parse_csv, parse_libsvm, Dataset, FeatureVector, LabelColumn};
pub use crate::dichotomy::{sample_structure, train, NestedDichotomy, SplitStrategy, TreeStructure};
pub use crate::error::{Error, Result};
pub use crate::learners::{fit_binary, BinaryModel, LearnerConfig, LearnerKind};
pub use crate::metrics::{depth_reliability, evaluate, BinScheme, EvalReport};
pub use crate::scalar::Real;

pub type DatasetF32 = Dataset<f32>;
pub type DatasetF64 = Dataset<f64>;
pub type FeatureVectorF32 = FeatureVector<f32>;
pub type FeatureVectorF64 = FeatureVector<f64>;
pub type NestedDichotomyF32 = NestedDichotomy<f32>;
pub type NestedDichotomyF64 = NestedDichotomy<f64>;
pub type EvalReportF32 = EvalReport<f32>;
pub type EvalReportF64 = EvalReport<f64>;
