//! Negative log-likelihood, accuracy, expected calibration error and
//! reliability-diagram binning.
//!
//! For multiclass predictions a bin collects `(confidence, correct)` pairs,
//! where confidence is the largest class probability and correctness is
//! whether the arg-max class (lowest index on ties) is the true class.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dichotomy::NestedDichotomy;
use crate::error::{Error, Result};
use crate::scalar::{Real, PROB_EPS};

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinScheme {
    /// `K` bins of width `1/K` over `[0, 1]`, the last one right-closed.
    #[default]
    #[serde(alias = "width")]
    EqualWidth,
    /// `K` contiguous runs of the sorted confidences, sizes differing by at most one.
    #[serde(alias = "freq")]
    EqualFrequency,
}

impl std::str::FromStr for BinScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "width" | "equal_width" => Ok(BinScheme::EqualWidth),
            "freq" | "equal_frequency" => Ok(BinScheme::EqualFrequency),
            other => Err(Error::InvalidArgument(format!("unknown bin scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ReliabilityBin<T: Real = f64> {
    pub lower: T,
    pub upper: T,
    pub count: usize,
    /// Mean confidence; zero for an empty bin.
    pub confidence: T,
    /// Fraction correct; zero for an empty bin.
    pub accuracy: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EvalReport<T: Real = f64> {
    pub nll: T,
    pub accuracy: T,
    pub ece: T,
    pub n: usize,
    pub bins: Vec<ReliabilityBin<T>>,
}

/// Reliability report for the nested dichotomy cut off at `depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DepthReport<T: Real = f64> {
    pub depth: usize,
    pub report: EvalReport<T>,
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax<T: Real>(p: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn check_predictions<T: Real>(probs: &[Vec<T>], labels: &[usize]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            got: labels.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::InvalidArgument("no predictions".into()));
    }
    let m = probs[0].len();
    let tol = T::of(1e-6) + T::of_usize(16 * m) * T::epsilon();
    for (i, (p, &y)) in probs.iter().zip(labels).enumerate() {
        if p.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: p.len(),
            });
        }
        if y >= m {
            return Err(Error::InvalidArgument(format!(
                "label {y} out of range for {m} classes"
            )));
        }
        let total: T = p.iter().copied().sum();
        if (total - T::one()).abs() > tol || p.iter().any(|&v| !(v >= T::zero())) {
            return Err(Error::InvalidArgument(format!(
                "prediction {i} is not a probability vector"
            )));
        }
    }
    Ok(())
}

/// Mean `-ln p(true class)`, probabilities clamped below at `1e-12`.
pub fn nll<T: Real>(probs: &[Vec<T>], labels: &[usize]) -> Result<T> {
    check_predictions(probs, labels)?;
    let eps = T::of(PROB_EPS);
    let total: T = probs.iter().zip(labels).map(|(p, &y)| -p[y].max(eps).ln()).sum();
    Ok(total / T::of_usize(labels.len()))
}

/// Fraction of instances whose arg-max class is the true class.
pub fn accuracy<T: Real>(probs: &[Vec<T>], labels: &[usize]) -> Result<T> {
    check_predictions(probs, labels)?;
    let correct = probs.iter().zip(labels).filter(|(p, &y)| argmax(p) == y).count();
    Ok(T::of_usize(correct) / T::of_usize(labels.len()))
}

/// Bins multiclass predictions by max-probability confidence.
pub fn reliability_bins<T: Real>(
    probs: &[Vec<T>],
    labels: &[usize],
    k: usize,
    scheme: BinScheme,
) -> Result<Vec<ReliabilityBin<T>>> {
    check_predictions(probs, labels)?;
    let (conf, correct): (Vec<T>, Vec<bool>) = probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| {
            let top = argmax(p);
            (p[top], top == y)
        })
        .unzip();
    reliability_bins_from_pairs(&conf, &correct, k, scheme)
}

/// Bins arbitrary `(confidence, correct)` pairs.
pub fn reliability_bins_from_pairs<T: Real>(
    confidences: &[T],
    correct: &[bool],
    k: usize,
    scheme: BinScheme,
) -> Result<Vec<ReliabilityBin<T>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("bin count must be at least 1".into()));
    }
    if confidences.len() != correct.len() {
        return Err(Error::DimensionMismatch {
            expected: confidences.len(),
            got: correct.len(),
        });
    }
    if let Some(i) = confidences.iter().position(|c| !(*c >= T::zero() && *c <= T::one())) {
        return Err(Error::InvalidArgument(format!("confidence {i} outside [0, 1]")));
    }
    let n = confidences.len();
    let kf = T::of_usize(k);
    let members: Vec<Vec<usize>> = match scheme {
        BinScheme::EqualWidth => {
            let mut members = vec![Vec::new(); k];
            for (i, &c) in confidences.iter().enumerate() {
                let b = (c * kf).floor().to_usize().unwrap_or(0).min(k - 1);
                members[b].push(i);
            }
            members
        }
        BinScheme::EqualFrequency => {
            if k > n {
                return Err(Error::InvalidArgument(format!(
                    "{k} equal-frequency bins for {n} instances"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| confidences[a].partial_cmp(&confidences[b]).expect("finite"));
            let (base, extra) = (n / k, n % k);
            let mut start = 0;
            (0..k)
                .map(|b| {
                    let size = base + usize::from(b < extra);
                    let run = order[start..start + size].to_vec();
                    start += size;
                    run
                })
                .collect()
        }
    };
    Ok(members
        .into_iter()
        .enumerate()
        .map(|(b, idx)| {
            let count = idx.len();
            let (confidence, accuracy) = if count == 0 {
                (T::zero(), T::zero())
            } else {
                let c: T = idx.iter().map(|&i| confidences[i]).sum();
                let a = idx.iter().filter(|&&i| correct[i]).count();
                (c / T::of_usize(count), T::of_usize(a) / T::of_usize(count))
            };
            let (lower, upper) = match scheme {
                BinScheme::EqualWidth => (T::of_usize(b) / kf, T::of_usize(b + 1) / kf),
                BinScheme::EqualFrequency => (
                    idx.first().map_or(T::zero(), |&i| confidences[i]),
                    idx.last().map_or(T::zero(), |&i| confidences[i]),
                ),
            };
            ReliabilityBin {
                lower,
                upper,
                count,
                confidence,
                accuracy,
            }
        })
        .collect())
}

/// `sum_k (|B_k| / n) |acc(B_k) - conf(B_k)|`; empty bins contribute nothing.
pub fn ece<T: Real>(bins: &[ReliabilityBin<T>]) -> T {
    let n: usize = bins.iter().map(|b| b.count).sum();
    if n == 0 {
        return T::zero();
    }
    let nf = T::of_usize(n);
    bins.iter()
        .filter(|b| b.count > 0)
        .map(|b| T::of_usize(b.count) / nf * (b.accuracy - b.confidence).abs())
        .sum()
}

impl<T: Real> EvalReport<T> {
    pub fn from_predictions(probs: &[Vec<T>], labels: &[usize], k: usize, scheme: BinScheme) -> Result<Self> {
        let bins = reliability_bins(probs, labels, k, scheme)?;
        Ok(EvalReport {
            nll: nll(probs, labels)?,
            accuracy: accuracy(probs, labels)?,
            ece: ece(&bins),
            n: labels.len(),
            bins,
        })
    }
}

/// Evaluates `nd` on `data` (labels must follow the model's label table).
pub fn evaluate<T: Real>(
    nd: &NestedDichotomy<T>,
    data: &Dataset<T>,
    k: usize,
    scheme: BinScheme,
) -> Result<EvalReport<T>> {
    let probs = data
        .rows()
        .iter()
        .map(|x| nd.predict_distribution(x))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_predictions(&probs, data.labels(), k, scheme)
}

/// Reliability of the dichotomy cut off at depths `1..=max_depth` (default
/// and cap: the tree's depth). An instance is correct at depth `d` when its
/// class lies in the most probable frontier node; the depth-`d` NLL uses the
/// mass of the frontier node holding the true class.
pub fn depth_reliability<T: Real>(
    nd: &NestedDichotomy<T>,
    data: &Dataset<T>,
    k: usize,
    scheme: BinScheme,
    max_depth: Option<usize>,
) -> Result<Vec<DepthReport<T>>> {
    let tree_depth = nd.structure().max_depth();
    let last = max_depth.unwrap_or(tree_depth).min(tree_depth);
    let eps = T::of(PROB_EPS);
    (1..=last)
        .map(|d| {
            let mut conf = Vec::with_capacity(data.len());
            let mut correct = Vec::with_capacity(data.len());
            let mut nll_sum = T::zero();
            for (x, &y) in data.rows().iter().zip(data.labels()) {
                let (classes, mass) = nd.predict_depth_cutoff(x, d)?;
                conf.push(mass);
                correct.push(classes.contains(&y));
                let truth = nd
                    .frontier_masses(x, d)?
                    .into_iter()
                    .find(|&(node, _)| nd.structure().classes(node).contains(&y))
                    .map(|(_, p)| p)
                    .expect("frontier covers every class");
                nll_sum -= truth.max(eps).ln();
            }
            let bins = reliability_bins_from_pairs(&conf, &correct, k, scheme)?;
            let hits = correct.iter().filter(|&&c| c).count();
            Ok(DepthReport {
                depth: d,
                report: EvalReport {
                    nll: nll_sum / T::of_usize(data.len()),
                    accuracy: T::of_usize(hits) / T::of_usize(data.len()),
                    ece: ece(&bins),
                    n: data.len(),
                    bins,
                },
            })
        })
        .collect()
}

/// One row per bin: `bin,lower,upper,count,confidence,accuracy`.
pub fn bins_csv<T: Real>(bins: &[ReliabilityBin<T>]) -> String {
    let mut out = String::from("bin,lower,upper,count,confidence,accuracy\n");
    for (i, b) in bins.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{}",
            b.lower, b.upper, b.count, b.confidence, b.accuracy
        );
    }
    out
}

/// One row per (depth, bin): `depth,bin_conf,bin_acc,bin_count,ece`.
pub fn depth_csv<T: Real>(reports: &[DepthReport<T>]) -> String {
    let mut out = String::from("depth,bin_conf,bin_acc,bin_count,ece\n");
    for r in reports {
        for b in &r.report.bins {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.depth, b.confidence, b.accuracy, b.count, r.report.ece
            );
        }
    }
    out
}
