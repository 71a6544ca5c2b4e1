mod common;

use approx::assert_abs_diff_eq;
use ndcal::calibration::{external_calibrate, BinaryCalibrator, VectorScaler};
use ndcal::dichotomy::{train_with_diagnostics, Metadata, NodeModel};
use ndcal::learners::LogisticModel;
use ndcal::metrics::{evaluate, BinScheme};
use ndcal::{
    sample_structure, train, BinaryModel, Dataset, ExternalCalibration, FeatureVector, InternalCalibration,
    LearnerConfig, LearnerKind, NestedDichotomy, Scaler, SplitStrategy, TreeStructure,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn metadata() -> Metadata {
    Metadata {
        seed: 0,
        learner: LearnerConfig::default(),
        internal_calibration: InternalCalibration::None,
        external_calibration: ExternalCalibration::None,
        warnings: vec![],
    }
}

/// Node `k` scores `scale * x[k]`, so `x` directly encodes per-node log-odds.
fn coordinate_dichotomy(structure: &TreeStructure, scale: f64) -> NestedDichotomy {
    let dim = structure.len();
    let nodes = (0..dim)
        .map(|k| {
            structure.children(k).map(|_| {
                let mut weights = vec![0.0; dim];
                weights[k] = scale;
                NodeModel::uncalibrated(BinaryModel::Logistic(LogisticModel {
                    weights,
                    bias: 0.0,
                    reg_strength: 1.0,
                }))
            })
        })
        .collect();
    let names = (0..structure.num_classes()).map(|c| c.to_string()).collect();
    NestedDichotomy::from_parts(structure.clone(), nodes, names, dim, metadata()).unwrap()
}

/// Instances whose class is drawn by walking `structure` with branch log-odds
/// `sharpness * x[k]`.
fn tree_generated(structure: &TreeStructure, n: usize, sharpness: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = Normal::new(0.0, 2.0).unwrap();
    let dim = structure.len();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..dim).map(|_| spread.sample(&mut rng)).collect();
        let mut k = 0;
        while let Some((l, r)) = structure.children(k) {
            let p = 1.0 / (1.0 + (-sharpness * x[k]).exp());
            k = if rng.gen::<f64>() < p { l } else { r };
        }
        labels.push(structure.classes(k)[0]);
        rows.push(FeatureVector::Dense(x));
    }
    Dataset::new(rows, labels, structure.num_classes(), dim, vec![]).unwrap()
}

#[test]
fn root_split_sizes_follow_conditioned_binomial() {
    let m = 10;
    let samples = 10_000;
    let mut observed = [0usize; 10];
    for seed in 0..samples {
        let t = sample_structure(m, SplitStrategy::Random, seed).unwrap();
        let mut leaves: Vec<usize> = (0..m).map(|c| t.leaf_of(c)).collect();
        leaves.sort_unstable();
        leaves.dedup();
        assert_eq!(leaves.len(), m);
        observed[t.left_classes(0).len()] += 1;
    }
    assert_eq!(observed[0], 0);
    let binom = |k: usize| (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64);
    let total = 2f64.powi(m as i32) - 2.0;
    let chi2: f64 = (1..m)
        .map(|k| {
            let expected = samples as f64 * binom(k) / total;
            (observed[k] as f64 - expected).powi(2) / expected
        })
        .sum();
    // 8 degrees of freedom; 26.12 is the 0.999 quantile.
    assert!(chi2 < 26.12, "chi2 = {chi2}, counts {observed:?}");
}

#[test]
fn distributions_normalize_and_frontiers_marginalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Normal::new(0.0, 3.0).unwrap();
    for m in [2, 3, 8, 33] {
        for strategy in [SplitStrategy::Random, SplitStrategy::Balanced] {
            let t = sample_structure(m, strategy, rng.gen()).unwrap();
            let nd = coordinate_dichotomy(&t, 1.0);
            for _ in 0..20 {
                let x = FeatureVector::Dense((0..t.len()).map(|_| normal.sample(&mut rng)).collect());
                let p = nd.predict_distribution(&x).unwrap();
                assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
                for d in 1..=t.max_depth() {
                    let here = nd.frontier_masses(&x, d).unwrap();
                    assert_abs_diff_eq!(here.iter().map(|(_, v)| v).sum::<f64>(), 1.0, epsilon = 1e-9);
                    let deeper = nd.frontier_masses(&x, d + 1).unwrap();
                    for &(k, mass) in &here {
                        let children: f64 = deeper
                            .iter()
                            .filter(|(j, _)| t.classes(*j).iter().all(|c| t.classes(k).contains(c)))
                            .map(|(_, v)| v)
                            .sum();
                        assert_abs_diff_eq!(mass, children, epsilon = 1e-12);
                    }
                }
            }
        }
    }
}

fn greedy_example() -> (NestedDichotomy, FeatureVector) {
    // Root {0,1 | 2,3}; left node {0 | 1}; right node {2 | 3}.
    let t = TreeStructure::from_nodes(vec![
        ndcal::dichotomy::StructureNode {
            classes: vec![0, 1, 2, 3],
            children: Some((1, 4)),
        },
        ndcal::dichotomy::StructureNode {
            classes: vec![0, 1],
            children: Some((2, 3)),
        },
        ndcal::dichotomy::StructureNode {
            classes: vec![0],
            children: None,
        },
        ndcal::dichotomy::StructureNode {
            classes: vec![1],
            children: None,
        },
        ndcal::dichotomy::StructureNode {
            classes: vec![2, 3],
            children: Some((5, 6)),
        },
        ndcal::dichotomy::StructureNode {
            classes: vec![2],
            children: None,
        },
        ndcal::dichotomy::StructureNode {
            classes: vec![3],
            children: None,
        },
    ])
    .unwrap();
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let mut x = vec![0.0; 7];
    x[0] = logit(0.6);
    x[1] = 0.0;
    x[4] = logit(0.05);
    (coordinate_dichotomy(&t, 1.0), FeatureVector::Dense(x))
}

#[test]
fn greedy_differs_from_argmax() {
    let (nd, x) = greedy_example();
    let p = nd.predict_distribution(&x).unwrap();
    let expected = [0.3, 0.3, 0.02, 0.38];
    for (a, b) in p.iter().zip(expected) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
    }
    assert_eq!(nd.predict_greedy(&x).unwrap(), 0);
    assert_eq!(ndcal::metrics::argmax(&p), 3);
    let (set, conf) = nd.predict_depth_cutoff(&x, 1).unwrap();
    assert_eq!(set, vec![0, 1]);
    assert_abs_diff_eq!(conf, 0.6, epsilon = 1e-12);
    let (nll, parts) = nd.nll_decomposition(&x, 0).unwrap();
    assert_abs_diff_eq!(nll, 1.203_972_804_3, epsilon = 1e-9);
    assert_abs_diff_eq!(parts[0], 0.510_825_623_8, epsilon = 1e-9);
    assert_abs_diff_eq!(parts[1], std::f64::consts::LN_2, epsilon = 1e-9);
}

#[test]
fn deterministic_nodes_make_greedy_exact() {
    let (nd, _) = greedy_example();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let x = FeatureVector::Dense((0..7).map(|_| if rng.gen() { 40.0 } else { -40.0 }).collect());
        let p = nd.predict_distribution(&x).unwrap();
        assert_eq!(nd.predict_greedy(&x).unwrap(), ndcal::metrics::argmax(&p));
    }
}

#[test]
fn separable_two_class_training() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<FeatureVector> = (0..80)
        .map(|i| {
            let side = if i % 2 == 0 { -6.0 } else { 6.0 };
            FeatureVector::Dense(vec![side + rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0)])
        })
        .collect();
    let d = Dataset::new(rows, (0..80).map(|i| i % 2).collect(), 2, 2, vec![]).unwrap();
    let t = sample_structure(2, SplitStrategy::Random, 0).unwrap();
    let nd = train(&t, &d, &LearnerConfig::default(), InternalCalibration::None, 5).unwrap();
    for (x, &y) in d.rows().iter().zip(d.labels()) {
        let p = nd.predict_distribution(x).unwrap()[y];
        assert!(p >= 0.99, "{p} {x:?}");
    }
}

#[test]
fn training_is_deterministic() {
    let d = common::blobs(5, 30, 4, 2.0, 9);
    let t = sample_structure(5, SplitStrategy::Random, 1).unwrap();
    let learner = LearnerConfig::new(LearnerKind::Boosted);
    let a = train(&t, &d, &learner, InternalCalibration::Platt, 17).unwrap();
    let b = train(&t, &d, &learner, InternalCalibration::Platt, 17).unwrap();
    assert_eq!(a, b);
}

#[test]
fn internal_isotonic_never_worsens_out_of_fold_nll() {
    let d = common::blobs(3, 60, 3, 1.5, 12);
    let t = sample_structure(3, SplitStrategy::Random, 2).unwrap();
    let (nd, diagnostics) = train_with_diagnostics(
        &t,
        &d,
        &LearnerConfig::new(LearnerKind::GaussianNb),
        InternalCalibration::Isotonic,
        3,
    )
    .unwrap();
    assert_eq!(diagnostics.nodes.len(), 2);
    let clamp = |p: f64| p.clamp(1e-12, 1.0 - 1e-12);
    let binary_nll = |p: f64, y: bool| if y { -clamp(p).ln() } else { -(1.0 - clamp(p)).ln() };
    for diag in &diagnostics.nodes {
        let node = nd.node(diag.node).unwrap();
        assert!(matches!(node.calibrator, BinaryCalibrator::Isotonic(_)));
        let n = diag.oof_scores.len() as f64;
        let raw: f64 = diag
            .oof_scores
            .iter()
            .zip(&diag.meta_labels)
            .map(|(&z, &y)| binary_nll(1.0 / (1.0 + (-z).exp()), y))
            .sum::<f64>()
            / n;
        let calibrated: f64 = diag
            .oof_scores
            .iter()
            .zip(&diag.meta_labels)
            .map(|(&z, &y)| binary_nll(node.calibrator.apply(z), y))
            .sum::<f64>()
            / n;
        assert!(calibrated <= raw + 1e-9, "node {}: {calibrated} > {raw}", diag.node);
    }
}

#[test]
fn identity_scaler_leaves_predictions_unchanged() {
    let t = sample_structure(6, SplitStrategy::Random, 4).unwrap();
    let mut nd = coordinate_dichotomy(&t, 1.0);
    let before: Vec<Vec<f64>> = (0..10)
        .map(|i| {
            nd.predict_distribution(&FeatureVector::Dense(vec![i as f64 * 0.3 - 1.5; t.len()]))
                .unwrap()
        })
        .collect();
    nd.set_external_calibrator(Some(Scaler::Vector(VectorScaler::identity(6))))
        .unwrap();
    for (i, p) in before.iter().enumerate() {
        let q = nd
            .predict_distribution(&FeatureVector::Dense(vec![i as f64 * 0.3 - 1.5; t.len()]))
            .unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}

#[test]
fn external_scaling_repairs_under_confidence() {
    let t = sample_structure(16, SplitStrategy::Balanced, 7).unwrap();
    let holdout = tree_generated(&t, 4000, 1.5, 1);
    let fresh = tree_generated(&t, 4000, 1.5, 2);
    let nd = coordinate_dichotomy(&t, 1.0);
    let before = evaluate(&nd, &fresh, 20, BinScheme::EqualWidth).unwrap();
    let holdout_nll_identity = evaluate(&nd, &holdout, 20, BinScheme::EqualWidth).unwrap().nll;
    for method in [ExternalCalibration::Vector, ExternalCalibration::Matrix] {
        let calibrated = external_calibrate(nd.clone(), &holdout, method).unwrap();
        let after = evaluate(&calibrated, &fresh, 20, BinScheme::EqualWidth).unwrap();
        assert!(after.ece < before.ece, "{method:?}: {} !< {}", after.ece, before.ece);
        let holdout_nll = evaluate(&calibrated, &holdout, 20, BinScheme::EqualWidth).unwrap().nll;
        assert!(holdout_nll <= holdout_nll_identity + 1e-9);
    }
}

#[test]
fn holdout_missing_a_class_warns() {
    let t = sample_structure(4, SplitStrategy::Balanced, 0).unwrap();
    let nd = coordinate_dichotomy(&t, 1.0);
    let data = tree_generated(&t, 400, 1.0, 3);
    let keep: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] != 2).collect();
    let holdout = data.subset(&keep).unwrap();
    let calibrated = external_calibrate(nd, &holdout, ExternalCalibration::Vector).unwrap();
    assert_eq!(calibrated.metadata().warnings.len(), 1);
    assert_eq!(calibrated.metadata().external_calibration, ExternalCalibration::Vector);
}

#[test]
fn depth_reliability_matches_standard_report_at_full_depth() {
    let t = sample_structure(7, SplitStrategy::Random, 5).unwrap();
    let nd = coordinate_dichotomy(&t, 1.0);
    let data = tree_generated(&t, 500, 1.0, 8);
    let reports = ndcal::depth_reliability(&nd, &data, 10, BinScheme::EqualWidth, None).unwrap();
    assert_eq!(reports.len(), t.max_depth());
    let full = evaluate(&nd, &data, 10, BinScheme::EqualWidth).unwrap();
    let last = &reports.last().unwrap().report;
    assert_eq!(
        last.bins.iter().map(|b| b.count).collect::<Vec<_>>(),
        full.bins.iter().map(|b| b.count).collect::<Vec<_>>()
    );
    assert_abs_diff_eq!(last.accuracy, full.accuracy, epsilon = 1e-15);
    assert_abs_diff_eq!(last.ece, full.ece, epsilon = 1e-12);
    assert_abs_diff_eq!(last.nll, full.nll, epsilon = 1e-12);

    let two = sample_structure(2, SplitStrategy::Random, 0).unwrap();
    let small = coordinate_dichotomy(&two, 1.0);
    let small_data = tree_generated(&two, 50, 1.0, 0);
    assert_eq!(
        ndcal::depth_reliability(&small, &small_data, 5, BinScheme::EqualWidth, None)
            .unwrap()
            .len(),
        1
    );
}

#[test]
fn persisted_model_round_trips_in_f32() {
    let rows: Vec<FeatureVector<f32>> = (0..90)
        .map(|i| FeatureVector::Dense(vec![(i % 3) as f32 * 2.0 + (i as f32 * 0.37).sin(), (i as f32).cos()]))
        .collect();
    let labels: Vec<usize> = (0..90).map(|i| i % 3).collect();
    let d = ndcal::DatasetF32::new(rows, labels, 3, 2, vec![]).unwrap();
    let t = sample_structure(3, SplitStrategy::Random, 0).unwrap();
    let nd = train(&t, &d, &LearnerConfig::default(), InternalCalibration::Isotonic, 1).unwrap();
    let restored = ndcal::NestedDichotomyF32::from_json(&nd.to_json().unwrap()).unwrap();
    for x in d.rows() {
        assert_eq!(
            nd.predict_distribution(x).unwrap(),
            restored.predict_distribution(x).unwrap()
        );
    }
}
