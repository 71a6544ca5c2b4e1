use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndcal::metrics::DEFAULT_BINS;
use ndcal::{BinScheme, ExternalCalibration, InternalCalibration, LabelColumn, LearnerConfig, SplitStrategy};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Csv,
    Libsvm,
}

impl DataFormat {
    /// `.libsvm`, `.svm` and `.svmlight` files are LIBSVM; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("libsvm" | "svm" | "svmlight") => DataFormat::Libsvm,
            _ => DataFormat::Csv,
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "libsvm" => Ok(DataFormat::Libsvm),
            other => Err(format!("unknown format {other:?} (expected csv or libsvm)")),
        }
    }
}

/// Repeated cross-validation: `runs` repetitions of `folds`-fold CV. A single
/// fold means train on the full data and evaluate on a separate test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvSpec {
    pub runs: usize,
    pub folds: usize,
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec { runs: 10, folds: 10 }
    }
}

impl fmt::Display for CvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.runs, self.folds)
    }
}

impl FromStr for CvSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("cv value {s:?} is not RUNSxFOLDS (e.g. 10x10)");
        let (r, k) = s.split_once(['x', 'X', '×']).ok_or_else(bad)?;
        let runs: usize = r.trim().parse().map_err(|_| bad())?;
        let folds: usize = k.trim().parse().map_err(|_| bad())?;
        if runs == 0 || folds == 0 {
            return Err(bad());
        }
        Ok(CvSpec { runs, folds })
    }
}

fn as_string<S: Serializer, V: fmt::Display>(v: &V, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn from_string<'de, D: Deserializer<'de>, V>(d: D) -> Result<V, D::Error>
where
    V: FromStr,
    V::Err: fmt::Display,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Number(u64),
    }
    let text = match Raw::deserialize(d)? {
        Raw::Text(t) => t,
        Raw::Number(n) => n.to_string(),
    };
    text.parse().map_err(serde::de::Error::custom)
}

/// Everything needed to train, calibrate and evaluate. Loaded from TOML,
/// with command-line flags taking precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    /// Inferred from the file extension when absent.
    pub format: Option<DataFormat>,
    #[serde(serialize_with = "as_string", deserialize_with = "from_string")]
    pub label_column: LabelColumn,
    pub learner: LearnerConfig,
    pub split: SplitStrategy,
    pub internal_cal: InternalCalibration,
    pub external_cal: ExternalCalibration,
    /// Fraction of each training portion reserved for the external calibrator.
    pub holdout: f64,
    #[serde(serialize_with = "as_string", deserialize_with = "from_string")]
    pub cv: CvSpec,
    pub bins: usize,
    pub bin_scheme: BinScheme,
    pub seed: u64,
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: None,
            test_data: None,
            format: None,
            label_column: LabelColumn::Last,
            learner: LearnerConfig::default(),
            split: SplitStrategy::Random,
            internal_cal: InternalCalibration::None,
            external_cal: ExternalCalibration::None,
            holdout: 0.1,
            cv: CvSpec::default(),
            bins: DEFAULT_BINS,
            bin_scheme: BinScheme::EqualWidth,
            seed: 0,
            jobs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn data_format(&self, path: &Path) -> DataFormat {
        self.format.unwrap_or_else(|| DataFormat::from_path(path))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.data.is_none() {
            return Err(CliError::Usage("no training data given (use --data)".into()));
        }
        if !(self.holdout > 0.0 && self.holdout <= 0.5) {
            return Err(CliError::Usage(format!("holdout {} not in (0, 0.5]", self.holdout)));
        }
        if self.bins == 0 {
            return Err(CliError::Usage("bins must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Usage("jobs must be at least 1".into()));
        }
        Ok(())
    }
}
