//! Probability calibration maps.
//!
//! Binary calibrators ([`BinaryCalibrator`]) act on a node model's log-odds
//! score; multiclass scalers ([`Scaler`]) act on a vector of per-class logits
//! and are used for external calibration of a whole nested dichotomy.

mod external;
mod isotonic;
mod platt;
mod scaling;

pub use self::external::{external_calibrate, tree_logits};
pub use self::isotonic::{apply_isotonic, fit_isotonic, pava, IsotonicModel};
pub use self::platt::{apply_platt, fit_platt, PlattModel};
pub use self::scaling::{
    apply_scaler, fit_matrix_scaling, fit_matrix_scaling_with, fit_vector_scaling, fit_vector_scaling_with, scaled_nll,
    MatrixInit, MatrixScaler, MatrixScalingOptions, Scaler, VectorScaler, VectorScalingOptions,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Real};

/// Calibration method applied to each internal node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InternalCalibration {
    #[default]
    None,
    #[serde(alias = "ps")]
    Platt,
    #[serde(alias = "ir")]
    Isotonic,
}

/// Calibration method applied to the tree's multiclass output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalCalibration {
    #[default]
    None,
    #[serde(alias = "vs")]
    Vector,
    #[serde(alias = "ms")]
    Matrix,
}

impl std::str::FromStr for InternalCalibration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(InternalCalibration::None),
            "platt" | "ps" => Ok(InternalCalibration::Platt),
            "isotonic" | "ir" => Ok(InternalCalibration::Isotonic),
            other => Err(Error::InvalidArgument(format!(
                "unknown internal calibration {other:?}"
            ))),
        }
    }
}

impl std::str::FromStr for ExternalCalibration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ExternalCalibration::None),
            "vector" | "vs" => Ok(ExternalCalibration::Vector),
            "matrix" | "ms" => Ok(ExternalCalibration::Matrix),
            other => Err(Error::InvalidArgument(format!(
                "unknown external calibration {other:?}"
            ))),
        }
    }
}

/// Maps a binary log-odds score to a probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum BinaryCalibrator<T: Real = f64> {
    /// `sigmoid(score)`, i.e. the base model's own probability.
    Identity,
    Platt(PlattModel<T>),
    Isotonic(IsotonicModel<T>),
}

impl<T: Real> BinaryCalibrator<T> {
    pub fn apply(&self, score: T) -> T {
        match self {
            BinaryCalibrator::Identity => sigmoid(score),
            BinaryCalibrator::Platt(m) => m.apply(score),
            BinaryCalibrator::Isotonic(m) => m.apply(score),
        }
    }

    /// Fits the requested method; `None` yields the identity.
    pub fn fit(method: InternalCalibration, scores: &[T], labels: &[bool]) -> Result<Self> {
        Ok(match method {
            InternalCalibration::None => BinaryCalibrator::Identity,
            InternalCalibration::Platt => BinaryCalibrator::Platt(fit_platt(scores, labels)?),
            InternalCalibration::Isotonic => BinaryCalibrator::Isotonic(fit_isotonic(scores, labels)?),
        })
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, BinaryCalibrator::Identity)
    }
}
