use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndcal::metrics::{bins_csv, depth_csv, evaluate};
use ndcal::{
    depth_reliability, parse_csv, parse_libsvm, BinScheme, Dataset, ExternalCalibration, InternalCalibration,
    LabelColumn, LearnerKind, NestedDichotomy, SplitStrategy,
};
use serde_json::json;

use crate::config::{CvSpec, DataFormat, ExperimentConfig};
use crate::experiment::{
    aggregate_csv, carve_holdout, fit_pipeline, folds_csv, format_table, run_experiment, run_grid,
};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "ndcal", version, about = "Calibrated nested dichotomies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a nested dichotomy and save it as JSON.
    Train(TrainArgs),
    /// Score a saved model on a dataset: NLL, accuracy, ECE and reliability bins.
    Evaluate(EvaluateArgs),
    /// Reliability of a saved model cut off at each depth of its tree.
    Reliability(ReliabilityArgs),
    /// Repeated stratified cross-validation.
    Experiment(ExperimentArgs),
}

/// Settings shared by `train` and `experiment`; each overrides the TOML file.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with experiment settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training data (CSV or LIBSVM).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Separate evaluation set, used with single-fold cv (e.g. --cv 10x1).
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// csv or libsvm; inferred from the file extension when omitted.
    #[arg(long)]
    pub format: Option<DataFormat>,
    /// `last` or a 0-based column index (CSV only).
    #[arg(long)]
    pub label_column: Option<LabelColumn>,
    /// logistic, gnb, mnb or boosted.
    #[arg(long)]
    pub learner: Option<LearnerKind>,
    /// random or balanced.
    #[arg(long)]
    pub split: Option<SplitStrategy>,
    /// none, platt or isotonic.
    #[arg(long)]
    pub internal_cal: Option<InternalCalibration>,
    /// none, vector or matrix.
    #[arg(long)]
    pub external_cal: Option<ExternalCalibration>,
    /// Fraction of training data held out for the external calibrator.
    #[arg(long)]
    pub holdout: Option<f64>,
    /// RUNSxFOLDS.
    #[arg(long)]
    pub cv: Option<CvSpec>,
    /// Reliability bins for ECE.
    #[arg(long)]
    pub bins: Option<usize>,
    /// width or freq.
    #[arg(long)]
    pub bin_scheme: Option<BinScheme>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for cross-validation folds.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        set!(
            split,
            internal_cal,
            external_cal,
            holdout,
            cv,
            bins,
            bin_scheme,
            seed,
            label_column
        );
        if self.data.is_some() {
            cfg.data = self.data.clone();
        }
        if self.test_data.is_some() {
            cfg.test_data = self.test_data.clone();
        }
        if self.format.is_some() {
            cfg.format = self.format;
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        if let Some(kind) = self.learner {
            cfg.learner.kind = kind;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Where to write the model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Evaluation data (CSV or LIBSVM).
    #[arg(long)]
    pub data: PathBuf,
    /// csv or libsvm; inferred from the file extension when omitted.
    #[arg(long)]
    pub format: Option<DataFormat>,
    /// `last` or a 0-based column index (CSV only).
    #[arg(long, default_value = "last")]
    pub label_column: LabelColumn,
    /// Reliability bins for ECE.
    #[arg(long, default_value_t = ndcal::metrics::DEFAULT_BINS)]
    pub bins: usize,
    /// width or freq.
    #[arg(long, default_value = "width")]
    pub bin_scheme: BinScheme,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Directory for `summary.json` and `bins.csv`; the summary also goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReliabilityArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Deepest cutoff to report; defaults to the tree depth.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Run all six calibration pairings instead of the configured one.
    #[arg(long)]
    pub grid: bool,
    /// Directory for `aggregate.csv`, `folds.csv` and `summary.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Reliability(args) => cmd_reliability(&args),
        Command::Experiment(args) => cmd_experiment(&args),
    }
}

pub fn load_dataset(path: &Path, format: DataFormat, label_column: LabelColumn) -> Result<Dataset, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parsed = match format {
        DataFormat::Csv => parse_csv(&text, label_column),
        DataFormat::Libsvm => parse_libsvm(&text),
    };
    parsed.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn training_data(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let path = cfg.data.as_deref().expect("validated config has data");
    load_dataset(path, cfg.data_format(path), cfg.label_column)
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let cfg = args.config.resolve()?;
    let data = training_data(&cfg)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let (tree, holdout) = carve_holdout(&cfg, &data, &all, cfg.seed)?;
    let nd = fit_pipeline(&cfg, &data, &tree, &holdout, cfg.seed)?;
    nd.save(&args.out)?;
    for w in &nd.metadata().warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

/// Loads a model and a dataset expressed in the model's label table.
fn model_and_data(input: &DataArgs) -> Result<(NestedDichotomy, Dataset), CliError> {
    let nd = NestedDichotomy::load(&input.model)?;
    let format = input.format.unwrap_or_else(|| DataFormat::from_path(&input.data));
    let data = load_dataset(&input.data, format, input.label_column)?
        .with_label_table(nd.label_names())?
        .with_num_features(nd.num_features())?;
    Ok((nd, data))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let (nd, data) = model_and_data(&args.input)?;
    let report = evaluate(&nd, &data, args.input.bins, args.input.bin_scheme)?;
    let summary = json!({
        "nll": report.nll,
        "accuracy": report.accuracy,
        "ece": report.ece,
        "n": report.n,
        "config": {
            "model": args.input.model,
            "data": args.input.data,
            "bins": args.input.bins,
            "bin_scheme": args.input.bin_scheme,
        },
    });
    let summary = serde_json::to_string_pretty(&summary).expect("json values serialize");
    println!("{summary}");
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write(&dir.join("summary.json"), &summary)?;
        write(&dir.join("bins.csv"), &bins_csv(&report.bins))?;
    }
    Ok(())
}

pub fn cmd_reliability(args: &ReliabilityArgs) -> Result<(), CliError> {
    if args.max_depth == Some(0) {
        return Err(CliError::Usage("max-depth must be at least 1".into()));
    }
    let (nd, data) = model_and_data(&args.input)?;
    let reports = depth_reliability(&nd, &data, args.input.bins, args.input.bin_scheme, args.max_depth)?;
    let csv = depth_csv(&reports);
    match &args.out {
        Some(path) => write(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<(), CliError> {
    let cfg = args.config.resolve()?;
    let data = training_data(&cfg)?;
    let test = match &cfg.test_data {
        Some(path) => Some(load_dataset(path, cfg.data_format(path), cfg.label_column)?),
        None => None,
    };
    let tables = if args.grid {
        run_grid(&cfg, &data, test.as_ref())?
    } else {
        vec![run_experiment(&cfg, &data, test.as_ref())?]
    };
    print!("{}", format_table(&tables));
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write(&dir.join("aggregate.csv"), &aggregate_csv(&tables))?;
        write(&dir.join("folds.csv"), &folds_csv(&tables))?;
        let summary = json!({
            "config": cfg,
            "schemes": tables.iter().map(|t| json!({
                "scheme": t.scheme,
                "folds": t.folds.len(),
                "mean": t.mean,
                "std": t.std,
            })).collect::<Vec<_>>(),
        });
        write(
            &dir.join("summary.json"),
            &serde_json::to_string_pretty(&summary).expect("json values serialize"),
        )?;
    }
    Ok(())
}
