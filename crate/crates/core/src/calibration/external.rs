use super::scaling::{fit_matrix_scaling, fit_vector_scaling, Scaler};
use super::ExternalCalibration;
use crate::data::Dataset;
use crate::dichotomy::{log_probabilities, NestedDichotomy};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-instance logit vectors for external calibration: the clamped
/// log-probabilities of the uncalibrated tree.
pub fn tree_logits<T: Real>(nd: &NestedDichotomy<T>, data: &Dataset<T>) -> Result<Vec<Vec<T>>> {
    data.rows()
        .iter()
        .map(|x| nd.tree_distribution(x).map(|p| log_probabilities(&p)))
        .collect()
}

/// Fits a vector or matrix scaler on `holdout` and attaches it to `nd`.
///
/// `holdout` must use `nd`'s label table and be disjoint from its training
/// data. Classes missing from the holdout are recorded as a warning.
pub fn external_calibrate<T: Real>(
    mut nd: NestedDichotomy<T>,
    holdout: &Dataset<T>,
    method: ExternalCalibration,
) -> Result<NestedDichotomy<T>> {
    if holdout.num_classes() != nd.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: nd.num_classes(),
            got: holdout.num_classes(),
        });
    }
    let missing: Vec<&str> = holdout
        .class_counts()
        .iter()
        .enumerate()
        .filter(|(_, &n)| n == 0)
        .map(|(c, _)| nd.label_names()[c].as_str())
        .collect();
    if !missing.is_empty() {
        let warning = format!("external calibration holdout lacks classes {missing:?}");
        nd.push_warning(warning);
    }
    let logits = tree_logits(&nd, holdout)?;
    let scaler = match method {
        ExternalCalibration::None => None,
        ExternalCalibration::Vector => Some(Scaler::Vector(fit_vector_scaling(&logits, holdout.labels())?)),
        ExternalCalibration::Matrix => Some(Scaler::Matrix(fit_matrix_scaling(&logits, holdout.labels())?)),
    };
    nd.set_external_calibrator(scaler)?;
    Ok(nd)
}
