#![allow(dead_code)]

use std::path::PathBuf;

use ndcal::{Dataset, FeatureVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Parameters of a Gaussian-blob generator; class centers depend only on
/// `centers_seed`, so several draws can share one population.
#[derive(Debug, Clone, Copy)]
pub struct Blobs {
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
    /// Multiplies every coordinate after sampling.
    pub scale: f64,
    /// Reflect coordinates into the non-negative orthant (for multinomial NB).
    pub non_negative: bool,
    pub centers_seed: u64,
}

impl Blobs {
    pub fn new(classes: usize, dim: usize, separation: f64, centers_seed: u64) -> Self {
        Blobs {
            classes,
            dim,
            separation,
            scale: 1.0,
            non_negative: false,
            centers_seed,
        }
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.centers_seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        (0..self.classes)
            .map(|_| (0..self.dim).map(|_| self.separation * unit.sample(&mut rng)).collect())
            .collect()
    }

    /// `per_class` instances of every class, interleaved by class.
    pub fn draw(&self, per_class: usize, seed: u64) -> Dataset {
        let centers = self.centers();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::with_capacity(per_class * self.classes);
        let mut labels = Vec::with_capacity(per_class * self.classes);
        for _ in 0..per_class {
            for (c, center) in centers.iter().enumerate() {
                let x = center
                    .iter()
                    .map(|&mu| {
                        let v = self.scale * (mu + unit.sample(&mut rng));
                        if self.non_negative {
                            v.abs()
                        } else {
                            v
                        }
                    })
                    .collect();
                rows.push(FeatureVector::Dense(x));
                labels.push(c);
            }
        }
        Dataset::new(rows, labels, self.classes, self.dim, vec![]).unwrap()
    }
}

pub fn optdigits_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/optdigits_sklearn.csv")
}
