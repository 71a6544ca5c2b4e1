//! Discrete AdaBoost over shallow CART trees grown on weighted Gini impurity.

use serde::{Deserialize, Serialize};

use super::LearnerConfig;
use crate::data::FeatureVector;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(rename_all = "snake_case")]
pub enum TreeNode<T: Real = f64> {
    /// Instances with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    /// Vote in {-1, +1}.
    Leaf { vote: T },
}

/// Axis-aligned decision tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionTree<T: Real = f64> {
    pub nodes: Vec<TreeNode<T>>,
}

impl<T: Real> DecisionTree<T> {
    pub fn predict(&self, x: &FeatureVector<T>) -> T {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Leaf { vote } => return *vote,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x.get(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T: Real>(t: &DecisionTree<T>, id: usize) -> usize {
            match &t.nodes[id] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoostingStage<T: Real = f64> {
    pub tree: DecisionTree<T>,
    pub alpha: T,
    /// Weighted training error of `tree` when it was selected.
    pub weighted_error: T,
}

/// Additive model `F(x) = sum_t alpha_t h_t(x)`; the score is `2 F(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoostedTreesModel<T: Real = f64> {
    pub stages: Vec<BoostingStage<T>>,
    pub num_features: usize,
    pub max_depth: usize,
}

impl<T: Real> BoostedTreesModel<T> {
    pub(crate) fn fit(
        config: &LearnerConfig,
        rows: &[&FeatureVector<T>],
        num_features: usize,
        labels: &[bool],
    ) -> Self {
        let n = rows.len();
        let columns = Columns::build(rows, num_features);
        let targets: Vec<T> = labels.iter().map(|&y| if y { T::one() } else { -T::one() }).collect();
        let mut weights = vec![T::one() / T::of_usize(n); n];
        let mut stages = Vec::with_capacity(config.boosting_rounds);
        let floor = T::of(1e-10);
        let half = T::of(0.5);

        for _ in 0..config.boosting_rounds {
            let tree = grow_tree(&columns, &targets, &weights, config.tree_depth);
            let votes: Vec<T> = rows.iter().map(|x| tree.predict(x)).collect();
            let total: T = weights.iter().copied().sum();
            let wrong: T = weights
                .iter()
                .zip(&votes)
                .zip(&targets)
                .filter(|((_, h), y)| h != y)
                .map(|((&w, _), _)| w)
                .sum();
            let error = wrong / total;
            if error >= half {
                break;
            }
            let clipped = error.max(floor);
            let alpha = half * ((T::one() - clipped) / clipped).ln();
            stages.push(BoostingStage {
                tree,
                alpha,
                weighted_error: error,
            });
            if error <= T::zero() {
                break;
            }
            for ((w, &h), &y) in weights.iter_mut().zip(&votes).zip(&targets) {
                *w *= (-alpha * y * h).exp();
            }
            let total: T = weights.iter().copied().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
        BoostedTreesModel {
            stages,
            num_features,
            max_depth: config.tree_depth,
        }
    }

    pub(crate) fn decision(&self, x: &FeatureVector<T>) -> T {
        let additive: T = self.stages.iter().map(|s| s.alpha * s.tree.predict(x)).sum();
        additive + additive
    }
}

/// Dense copies of the columns that hold at least one non-zero value, each
/// with its instance order sorted by value.
struct Columns<T> {
    features: Vec<usize>,
    values: Vec<Vec<T>>,
    order: Vec<Vec<usize>>,
    n: usize,
}

impl<T: Real> Columns<T> {
    fn build(rows: &[&FeatureVector<T>], num_features: usize) -> Self {
        let n = rows.len();
        let mut touched = vec![false; num_features];
        for row in rows {
            for (j, v) in row.entries() {
                if v != T::zero() {
                    touched[j] = true;
                }
            }
        }
        let features: Vec<usize> = (0..num_features).filter(|&j| touched[j]).collect();
        let mut slot = vec![usize::MAX; num_features];
        for (k, &j) in features.iter().enumerate() {
            slot[j] = k;
        }
        let mut values = vec![vec![T::zero(); n]; features.len()];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.entries() {
                if slot[j] != usize::MAX {
                    values[slot[j]][i] = v;
                }
            }
        }
        let order = values
            .iter()
            .map(|col| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).expect("finite features"));
                idx
            })
            .collect();
        Columns {
            features,
            values,
            order,
            n,
        }
    }
}

#[derive(Clone, Copy)]
struct SplitCandidate<T> {
    gain: T,
    column: usize,
    threshold: T,
}

/// Per-node running sums while scanning one sorted column.
#[derive(Clone, Copy)]
struct Scan<T> {
    pos: T,
    neg: T,
    last: Option<T>,
}

/// Grows a tree level by level; every active node at a level is split in a
/// single pass over each sorted column.
fn grow_tree<T: Real>(cols: &Columns<T>, targets: &[T], weights: &[T], max_depth: usize) -> DecisionTree<T> {
    let mut nodes: Vec<TreeNode<T>> = vec![TreeNode::Leaf { vote: T::one() }];
    let mut assignment = vec![0usize; cols.n];
    let mut frontier = vec![0usize];

    for depth in 0..=max_depth {
        // Weighted class totals per frontier node.
        let mut totals = vec![(T::zero(), T::zero()); nodes.len()];
        for i in 0..cols.n {
            let t = &mut totals[assignment[i]];
            if targets[i] > T::zero() {
                t.0 += weights[i];
            } else {
                t.1 += weights[i];
            }
        }
        for &id in &frontier {
            let (pos, neg) = totals[id];
            nodes[id] = TreeNode::Leaf {
                vote: if pos >= neg { T::one() } else { -T::one() },
            };
        }
        if depth == max_depth {
            break;
        }

        let mut best: Vec<Option<SplitCandidate<T>>> = vec![None; nodes.len()];
        let parent_impurity: Vec<T> = totals.iter().map(|&(p, q)| gini(p, q)).collect();
        for (c, order) in cols.order.iter().enumerate() {
            let column = &cols.values[c];
            let mut scans = vec![
                Scan {
                    pos: T::zero(),
                    neg: T::zero(),
                    last: None
                };
                nodes.len()
            ];
            for &i in order {
                let id = assignment[i];
                if !frontier.contains(&id) {
                    continue;
                }
                let v = column[i];
                let scan = &mut scans[id];
                if let Some(prev) = scan.last {
                    if v > prev {
                        let (tp, tn) = totals[id];
                        let gain = parent_impurity[id] - gini(scan.pos, scan.neg) - gini(tp - scan.pos, tn - scan.neg);
                        let better = match &best[id] {
                            Some(b) => gain > b.gain,
                            None => gain > T::zero(),
                        };
                        if better {
                            best[id] = Some(SplitCandidate {
                                gain,
                                column: c,
                                threshold: (prev + v) * T::of(0.5),
                            });
                        }
                    }
                }
                if targets[i] > T::zero() {
                    scan.pos += weights[i];
                } else {
                    scan.neg += weights[i];
                }
                scan.last = Some(v);
            }
        }

        let mut next = Vec::new();
        let mut child_of = vec![None; nodes.len()];
        for &id in &frontier {
            let Some(split) = best[id] else { continue };
            if split.gain <= T::epsilon() * (totals[id].0 + totals[id].1) {
                continue;
            }
            let left = nodes.len();
            nodes.push(TreeNode::Leaf { vote: T::one() });
            nodes.push(TreeNode::Leaf { vote: T::one() });
            nodes[id] = TreeNode::Split {
                feature: cols.features[split.column],
                threshold: split.threshold,
                left,
                right: left + 1,
            };
            child_of[id] = Some((split.column, split.threshold, left));
            next.push(left);
            next.push(left + 1);
        }
        if next.is_empty() {
            break;
        }
        for i in 0..cols.n {
            if let Some((c, threshold, left)) = child_of[assignment[i]] {
                assignment[i] = if cols.values[c][i] <= threshold { left } else { left + 1 };
            }
        }
        frontier = next;
    }
    DecisionTree { nodes }
}

/// Weighted Gini impurity scaled by node weight.
fn gini<T: Real>(pos: T, neg: T) -> T {
    let total = pos + neg;
    if total <= T::zero() {
        return T::zero();
    }
    let two = T::of(2.0);
    two * pos * neg / total
}
