#![allow(dead_code)]

use ndcal::{Dataset, FeatureVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Isotropic Gaussian blobs: `m` classes, centers drawn with standard
/// deviation `separation`, unit noise.
pub fn blobs(m: usize, per_class: usize, dim: usize, separation: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let centers: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..dim).map(|_| separation * unit.sample(&mut rng)).collect())
        .collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..per_class {
        for (c, center) in centers.iter().enumerate() {
            rows.push(FeatureVector::Dense(
                center.iter().map(|&mu| mu + unit.sample(&mut rng)).collect(),
            ));
            labels.push(c);
        }
    }
    Dataset::new(rows, labels, m, dim, vec![]).unwrap()
}

/// Random point on the probability simplex with every entry at least `floor`.
pub fn simplex_point(rng: &mut impl Rng, m: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| -rng.gen_range(1e-9..1.0f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    let scale = 1.0 - floor * m as f64;
    raw.iter().map(|r| floor + scale * r / total).collect()
}
