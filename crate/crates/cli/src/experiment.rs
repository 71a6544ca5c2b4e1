//! Repeated stratified cross-validation over the training, calibration and
//! evaluation pipeline.

use std::fmt::Write as _;

use ndcal::data::{stratified_kfold, stratified_split_plan};
use ndcal::metrics::{evaluate, EvalReport};
use ndcal::scalar::derive_seed;
use ndcal::{
    external_calibrate, sample_structure, train, Dataset, ExternalCalibration, InternalCalibration, NestedDichotomy,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Table label of an (internal, external) calibration pairing.
pub fn scheme_name(internal: InternalCalibration, external: ExternalCalibration) -> String {
    let inner = match internal {
        InternalCalibration::None => None,
        InternalCalibration::Platt => Some("PS"),
        InternalCalibration::Isotonic => Some("IR"),
    };
    let outer = match external {
        ExternalCalibration::None => None,
        ExternalCalibration::Vector => Some("VS"),
        ExternalCalibration::Matrix => Some("MS"),
    };
    match (inner, outer) {
        (None, None) => "Baseline".into(),
        (Some(i), None) => format!("Internal {i}"),
        (None, Some(e)) => format!("External {e}"),
        (Some(i), Some("VS")) => format!("Both {i}"),
        (Some(i), Some(e)) => format!("Both {i}+{e}"),
    }
}

/// The six pairings reported side by side in grid mode.
pub const GRID: [(InternalCalibration, ExternalCalibration); 6] = [
    (InternalCalibration::None, ExternalCalibration::None),
    (InternalCalibration::Platt, ExternalCalibration::None),
    (InternalCalibration::Isotonic, ExternalCalibration::None),
    (InternalCalibration::None, ExternalCalibration::Vector),
    (InternalCalibration::Platt, ExternalCalibration::Vector),
    (InternalCalibration::Isotonic, ExternalCalibration::Vector),
];

/// Seed of the fold partition drawn for one run.
pub fn partition_seed(master: u64, run: usize) -> u64 {
    derive_seed(master, run as u64)
}

/// Seed governing everything inside one (run, fold) cell.
pub fn fold_seed(master: u64, run: usize, fold: usize) -> u64 {
    derive_seed(derive_seed(master, run as u64), 1 + fold as u64)
}

/// Index sets used inside one fold, in terms of the full dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldIndices {
    pub tree: Vec<usize>,
    pub holdout: Vec<usize>,
    pub eval: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldResult {
    pub run: usize,
    pub fold: usize,
    pub report: EvalReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub nll: f64,
    pub accuracy: f64,
    pub ece: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultTable {
    pub scheme: String,
    pub folds: Vec<FoldResult>,
    pub mean: MetricSummary,
    /// Sample standard deviation; zero for a single fold.
    pub std: MetricSummary,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

impl ResultTable {
    pub fn new(scheme: String, mut folds: Vec<FoldResult>) -> Self {
        folds.sort_by_key(|f| (f.run, f.fold));
        let column = |f: fn(&EvalReport) -> f64| -> (f64, f64) {
            mean_std(&folds.iter().map(|r| f(&r.report)).collect::<Vec<_>>())
        };
        let (nll, nll_sd) = column(|r| r.nll);
        let (acc, acc_sd) = column(|r| r.accuracy);
        let (ece, ece_sd) = column(|r| r.ece);
        ResultTable {
            scheme,
            folds,
            mean: MetricSummary {
                nll,
                accuracy: acc,
                ece,
            },
            std: MetricSummary {
                nll: nll_sd,
                accuracy: acc_sd,
                ece: ece_sd,
            },
        }
    }
}

fn disjoint(a: &[usize], b: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    a.iter().for_each(|&i| seen[i] = true);
    b.iter().all(|&i| !seen[i])
}

/// Splits `train` into tree-training and external-holdout indices (the
/// holdout is empty without external calibration).
pub fn carve_holdout(
    config: &ExperimentConfig,
    data: &Dataset,
    train: &[usize],
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    if config.external_cal == ExternalCalibration::None {
        return Ok((train.to_vec(), Vec::new()));
    }
    let local = data.subset(train)?;
    let plan = stratified_split_plan(&local, config.holdout, derive_seed(seed, 1))?;
    let tree = plan.train_indices.iter().map(|&i| train[i]).collect();
    let holdout = plan.eval_indices.iter().map(|&i| train[i]).collect();
    Ok((tree, holdout))
}

/// Samples a structure, trains on `tree`, and fits the external calibrator on
/// `holdout` when one is configured.
pub fn fit_pipeline(
    config: &ExperimentConfig,
    data: &Dataset,
    tree: &[usize],
    holdout: &[usize],
    seed: u64,
) -> Result<NestedDichotomy, CliError> {
    let structure = sample_structure(data.num_classes(), config.split, derive_seed(seed, 0))?;
    let nd = train(
        &structure,
        &data.subset(tree)?,
        &config.learner,
        config.internal_cal,
        derive_seed(seed, 2),
    )?;
    if config.external_cal == ExternalCalibration::None {
        return Ok(nd);
    }
    Ok(external_calibrate(nd, &data.subset(holdout)?, config.external_cal)?)
}

fn run_fold(
    config: &ExperimentConfig,
    data: &Dataset,
    eval_data: &Dataset,
    run: usize,
    fold: usize,
    train: &[usize],
    eval: Option<&[usize]>,
) -> Result<FoldResult, CliError> {
    let seed = fold_seed(config.seed, run, fold);
    let (tree, holdout) = carve_holdout(config, data, train, seed)?;
    assert!(
        disjoint(&tree, &holdout, data.len()),
        "holdout overlaps tree training data"
    );
    if let Some(eval) = eval {
        assert!(disjoint(&tree, eval, data.len()), "eval overlaps tree training data");
        assert!(
            disjoint(&holdout, eval, data.len()),
            "eval overlaps calibration holdout"
        );
    }
    let nd = fit_pipeline(config, data, &tree, &holdout, seed)?;
    let eval_set = match eval {
        Some(idx) => eval_data.subset(idx)?,
        None => eval_data.clone(),
    };
    let report = evaluate(&nd, &eval_set, config.bins, config.bin_scheme)?;
    Ok(FoldResult {
        run,
        fold,
        report,
        warnings: nd.metadata().warnings.clone(),
    })
}

/// Run index, fold index, training rows, evaluation rows (`None` means the test set).
type Cell = (usize, usize, Vec<usize>, Option<Vec<usize>>);

/// Runs the configured cross-validation. With one fold per run, every run
/// trains on all of `data` and evaluates on `test`.
pub fn run_experiment(
    config: &ExperimentConfig,
    data: &Dataset,
    test: Option<&Dataset>,
) -> Result<ResultTable, CliError> {
    let (runs, folds) = (config.cv.runs, config.cv.folds);
    let cells: Vec<Cell> = if folds == 1 {
        if test.is_none() {
            return Err(CliError::Usage(
                "single-fold cv needs a separate test set (--test-data)".into(),
            ));
        }
        (0..runs).map(|r| (r, 0, (0..data.len()).collect(), None)).collect()
    } else {
        let mut cells = Vec::with_capacity(runs * folds);
        for r in 0..runs {
            for (f, plan) in stratified_kfold(data, folds, partition_seed(config.seed, r))?
                .into_iter()
                .enumerate()
            {
                cells.push((r, f, plan.train_indices, Some(plan.eval_indices)));
            }
        }
        cells
    };
    let test = match test {
        Some(t) => Some(
            t.with_label_table(data.label_names())?
                .with_num_features(data.num_features())?,
        ),
        None => None,
    };
    let eval_data = test.as_ref().unwrap_or(data);
    let work = || {
        cells
            .par_iter()
            .map(|(r, f, train, eval)| run_fold(config, data, eval_data, *r, *f, train, eval.as_deref()))
            .collect::<Result<Vec<_>, _>>()
    };
    let results = match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    Ok(ResultTable::new(
        scheme_name(config.internal_cal, config.external_cal),
        results,
    ))
}

/// Runs every pairing in [`GRID`] on the same partitions and seeds.
pub fn run_grid(
    config: &ExperimentConfig,
    data: &Dataset,
    test: Option<&Dataset>,
) -> Result<Vec<ResultTable>, CliError> {
    GRID.iter()
        .map(|&(internal_cal, external_cal)| {
            let cfg = ExperimentConfig {
                internal_cal,
                external_cal,
                ..config.clone()
            };
            run_experiment(&cfg, data, test)
        })
        .collect()
}

/// One row per scheme: means and standard deviations of each metric.
pub fn aggregate_csv(tables: &[ResultTable]) -> String {
    let mut out = String::from("scheme,folds,nll_mean,nll_std,accuracy_mean,accuracy_std,ece_mean,ece_std\n");
    for t in tables {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.scheme,
            t.folds.len(),
            t.mean.nll,
            t.std.nll,
            t.mean.accuracy,
            t.std.accuracy,
            t.mean.ece,
            t.std.ece
        );
    }
    out
}

/// One row per (scheme, run, fold).
pub fn folds_csv(tables: &[ResultTable]) -> String {
    let mut out = String::from("scheme,run,fold,n,nll,accuracy,ece\n");
    for t in tables {
        for f in &t.folds {
            let r = &f.report;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                t.scheme, f.run, f.fold, r.n, r.nll, r.accuracy, r.ece
            );
        }
    }
    out
}

/// Text table: `mean (std)` per metric.
pub fn format_table(tables: &[ResultTable]) -> String {
    let mut out = format!("{:<14} {:>18} {:>18} {:>18}\n", "scheme", "NLL", "accuracy", "ECE");
    for t in tables {
        let cell = |m: f64, s: f64| format!("{m:.3} ({s:.3})");
        let _ = writeln!(
            out,
            "{:<14} {:>18} {:>18} {:>18}",
            t.scheme,
            cell(t.mean.nll, t.std.nll),
            cell(t.mean.accuracy, t.std.accuracy),
            cell(t.mean.ece, t.std.ece)
        );
    }
    out
}
