//! Stratified hold-out splits and k-fold partitions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Disjoint train/eval index sets drawn from one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub eval_indices: Vec<usize>,
    pub seed: u64,
}

/// Draws a stratified hold-out: each class contributes
/// `round(count * eval_fraction)` instances (at least one, at most `count - 1`).
pub fn stratified_split_plan<T: Real>(d: &Dataset<T>, eval_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eval fraction {eval_fraction} not in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (class, mut members) in class_members(d.labels(), d.num_classes()).into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::CannotStratify {
                class: d.label_names()[class].clone(),
                count: members.len(),
                needed: 2,
            });
        }
        members.shuffle(&mut rng);
        let take = ((members.len() as f64 * eval_fraction).round() as usize).clamp(1, members.len() - 1);
        eval.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    eval.sort_unstable();
    Ok(SplitPlan {
        train_indices: train,
        eval_indices: eval,
        seed,
    })
}

/// [`stratified_split_plan`] materialized as `(train, eval)` datasets.
pub fn stratified_split<T: Real>(d: &Dataset<T>, eval_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    let plan = stratified_split_plan(d, eval_fraction, seed)?;
    Ok((d.subset(&plan.train_indices)?, d.subset(&plan.eval_indices)?))
}

/// Partitions the dataset into `k` stratified folds.
///
/// Classes are shuffled internally and dealt round-robin across folds, so each
/// fold's count for a class is within one of `count / k`; classes smaller than
/// `k` end up spread over distinct folds.
pub fn stratified_kfold<T: Real>(d: &Dataset<T>, k: usize, seed: u64) -> Result<Vec<SplitPlan>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}, need k >= 2")));
    }
    if k > d.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds dataset size {}",
            d.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fold_of = stratified_fold_ids(d.labels(), d.num_classes(), k, &mut rng);
    Ok((0..k)
        .map(|fold| {
            let (eval, train): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|&i| fold_of[i] == fold);
            SplitPlan {
                train_indices: train,
                eval_indices: eval,
                seed,
            }
        })
        .collect())
}

/// Fold id per instance for a stratified `k`-way partition of `labels`.
pub(crate) fn stratified_fold_ids<R: rand::Rng>(
    labels: &[usize],
    num_classes: usize,
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut fold_of = vec![0; labels.len()];
    let mut position = 0usize;
    for mut members in class_members(labels, num_classes) {
        members.shuffle(rng);
        for i in members {
            fold_of[i] = position % k;
            position += 1;
        }
    }
    fold_of
}

fn class_members(labels: &[usize], num_classes: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }
    members
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureVector;

    fn dataset(counts: &[usize]) -> Dataset {
        let labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect();
        let rows = labels.iter().map(|&y| FeatureVector::Dense(vec![y as f64])).collect();
        Dataset::new(rows, labels, counts.len(), 1, vec![]).unwrap()
    }

    fn per_class(d: &Dataset, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; d.num_classes()];
        for &i in idx {
            c[d.labels()[i]] += 1;
        }
        c
    }

    #[test]
    fn exact_proportions() {
        let d = dataset(&[50, 50]);
        let plan = stratified_split_plan(&d, 0.1, 3).unwrap();
        assert_eq!(per_class(&d, &plan.eval_indices), vec![5, 5]);
        assert_eq!(plan.train_indices.len(), 90);
        let (train, eval) = stratified_split(&d, 0.1, 3).unwrap();
        assert_eq!((train.len(), eval.len()), (90, 10));
    }

    #[test]
    fn deterministic_given_seed() {
        let d = dataset(&[50, 50]);
        assert_eq!(
            stratified_split_plan(&d, 0.1, 11).unwrap(),
            stratified_split_plan(&d, 0.1, 11).unwrap()
        );
        assert_ne!(
            stratified_split_plan(&d, 0.1, 11).unwrap().eval_indices,
            stratified_split_plan(&d, 0.1, 12).unwrap().eval_indices
        );
    }

    #[test]
    fn per_class_rounded_share() {
        let counts = [95, 105, 100, 87, 113, 99, 101, 104, 96, 100];
        let d = dataset(&counts);
        let plan = stratified_split_plan(&d, 0.1, 5).unwrap();
        let tally = per_class(&d, &plan.eval_indices);
        for (c, &n) in counts.iter().enumerate() {
            let expected = ((n as f64) * 0.1).round() as usize;
            assert_eq!(tally[c], expected.max(1), "class {c}");
        }
    }

    #[test]
    fn singleton_class_cannot_stratify() {
        let d = dataset(&[5, 1]);
        let err = stratified_split_plan(&d, 0.1, 0).unwrap_err();
        assert!(err.to_string().contains("cannot stratify"), "{err}");
        let d = dataset(&[3, 3]);
        assert!(stratified_split_plan(&d, 0.0, 0).is_err());
        assert!(stratified_split_plan(&d, 1.0, 0).is_err());
    }

    #[test]
    fn kfold_exact_divisibility() {
        let d = dataset(&[3, 3, 3]);
        let folds = stratified_kfold(&d, 3, 1).unwrap();
        for f in &folds {
            assert_eq!(per_class(&d, &f.eval_indices), vec![1, 1, 1]);
        }
    }

    #[test]
    fn kfold_partitions_and_rejects_bad_k() {
        let d = dataset(&[7, 2, 11]);
        let folds = stratified_kfold(&d, 4, 9).unwrap();
        let mut seen: Vec<usize> = folds.iter().flat_map(|f| f.eval_indices.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..20).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.train_indices.len() + f.eval_indices.len(), 20);
            assert!(f.train_indices.iter().all(|i| !f.eval_indices.contains(i)));
        }
        assert!(stratified_kfold(&d, 1, 0).is_err());
        assert!(stratified_kfold(&d, 21, 0).is_err());
    }
}
