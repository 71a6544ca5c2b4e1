use ndcal::data::{stratified_kfold, stratified_split_plan, write_libsvm};
use ndcal::{parse_csv, parse_libsvm, Dataset, FeatureVector, LabelColumn};
use proptest::prelude::*;

fn sparse_row() -> impl Strategy<Value = Vec<(usize, f64)>> {
    proptest::collection::btree_map(0usize..40, -1e6f64..1e6, 0..8).prop_map(|m| m.into_iter().collect())
}

proptest! {
    #[test]
    fn libsvm_round_trip(rows in proptest::collection::vec((0usize..5, sparse_row()), 1..30)) {
        prop_assume!(rows.iter().any(|(_, r)| !r.is_empty()));
        let labels: Vec<usize> = rows.iter().map(|(y, _)| *y).collect();
        let features: Vec<FeatureVector> = rows
            .iter()
            .map(|(_, r)| FeatureVector::Sparse {
                indices: r.iter().map(|(j, _)| *j).collect(),
                values: r.iter().map(|(_, v)| *v).collect(),
            })
            .collect();
        let names = (0..5).map(|c| format!("c{c}")).collect();
        let original = Dataset::new(features, labels, 5, 40, names).unwrap();
        let text = write_libsvm(&original);
        let parsed: Dataset = parse_libsvm(&text).unwrap();
        prop_assert_eq!(parsed.rows(), original.rows());
        prop_assert!(parsed.num_features() <= original.num_features());
        for (a, b) in parsed.labels().iter().zip(original.labels()) {
            prop_assert_eq!(&parsed.label_names()[*a], &original.label_names()[*b]);
        }
    }

    #[test]
    fn kfold_is_a_stratified_partition(
        counts in proptest::collection::vec(1usize..25, 2..6),
        k in 2usize..7,
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect();
        prop_assume!(k <= labels.len());
        let rows = labels.iter().map(|&y| FeatureVector::Dense(vec![y as f64])).collect();
        let d = Dataset::new(rows, labels, counts.len(), 1, vec![]).unwrap();
        let folds = stratified_kfold(&d, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);

        let mut seen = vec![0usize; d.len()];
        for fold in &folds {
            prop_assert_eq!(fold.train_indices.len() + fold.eval_indices.len(), d.len());
            for &i in &fold.eval_indices {
                seen[i] += 1;
                prop_assert!(!fold.train_indices.contains(&i));
            }
            for (c, &total) in counts.iter().enumerate() {
                let here = fold.eval_indices.iter().filter(|&&i| d.labels()[i] == c).count();
                let share = total as f64 / k as f64;
                prop_assert!((here as f64 - share).abs() < 1.0 + 1e-12);
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        prop_assert_eq!(stratified_kfold(&d, k, seed).unwrap(), folds);
    }

    #[test]
    fn split_keeps_every_class_on_both_sides(
        counts in proptest::collection::vec(2usize..40, 2..6),
        frac in 0.05f64..0.5,
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect();
        let rows = labels.iter().map(|_| FeatureVector::Dense(vec![0.0])).collect();
        let d = Dataset::new(rows, labels, counts.len(), 1, vec![]).unwrap();
        let plan = stratified_split_plan(&d, frac, seed).unwrap();
        prop_assert_eq!(plan.train_indices.len() + plan.eval_indices.len(), d.len());
        for c in 0..counts.len() {
            prop_assert!(plan.train_indices.iter().any(|&i| d.labels()[i] == c));
            prop_assert!(plan.eval_indices.iter().any(|&i| d.labels()[i] == c));
        }
    }
}

#[test]
fn csv_and_libsvm_agree_on_dense_content() {
    let csv = "a,b,label\n1,0,x\n0,2.5,y\n3,4,x\n";
    let from_csv: Dataset = parse_csv(csv, LabelColumn::Last).unwrap();
    let libsvm = "x 1:1\ny 2:2.5\nx 1:3 2:4\n";
    let from_libsvm: Dataset = parse_libsvm(libsvm).unwrap();
    assert_eq!(from_csv.labels(), from_libsvm.labels());
    assert_eq!(from_csv.label_names(), from_libsvm.label_names());
    for (a, b) in from_csv.rows().iter().zip(from_libsvm.rows()) {
        assert_eq!(a.to_dense(2), b.to_dense(2));
    }
}

#[test]
fn f32_datasets_parse() {
    let d: ndcal::DatasetF32 = parse_csv("1.5,2,0\n3,4,1\n", LabelColumn::Last).unwrap();
    assert_eq!(d.row(0).to_dense(2), vec![1.5f32, 2.0]);
}
