use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng;

/// Distance of every cluster mean from the origin along its own axis.
pub const MEAN_OFFSET: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DataItem {
    pub features: Vec<f64>,
    pub true_semantic: usize,
}

/// Mean of cluster `k` in `d` dimensions: `+MEAN_OFFSET` on axis `k` for
/// `k < d`, `-MEAN_OFFSET` on axis `k - d` for `d <= k < 2d`.
pub fn cluster_mean(k: usize, d: usize) -> Vec<f64> {
    assert!(k < 2 * d, "at most 2d clusters fit on the axes");
    let mut m = vec![0.0; d];
    if k < d {
        m[k] = MEAN_OFFSET;
    } else {
        m[k - d] = -MEAN_OFFSET;
    }
    m
}

/// Isotropic Gaussian clusters for the listed `classes`, `n_per_class` each,
/// interleaved by class.
pub fn gen_classes(
    classes: &[usize],
    d: usize,
    n_per_class: usize,
    spread: f64,
    seed: u64,
) -> Vec<DataItem> {
    let mut r = rng::stream(seed, rng::DATASET, 0);
    let noise = Normal::new(0.0, spread.max(0.0)).expect("finite spread");
    let means: Vec<Vec<f64>> = classes.iter().map(|&k| cluster_mean(k, d)).collect();
    let mut out = Vec::with_capacity(classes.len() * n_per_class);
    for _ in 0..n_per_class {
        for (mean, &k) in means.iter().zip(classes) {
            let features = mean
                .iter()
                .map(|m| {
                    if spread > 0.0 {
                        m + noise.sample(&mut r)
                    } else {
                        *m
                    }
                })
                .collect();
            out.push(DataItem {
                features,
                true_semantic: k,
            });
        }
    }
    out
}

/// `n_per_class` samples from each of `k` clusters.
pub fn gen_dataset(k: usize, d: usize, n_per_class: usize, spread: f64, seed: u64) -> Vec<DataItem> {
    assert!(k >= 2 && d >= 2, "need k >= 2 and d >= 2");
    let classes: Vec<usize> = (0..k).collect();
    gen_classes(&classes, d, n_per_class, spread, seed)
}

pub(crate) fn pick<'a, R: Rng + ?Sized>(data: &'a [DataItem], rng: &mut R) -> &'a DataItem {
    &data[rng.gen_range(0..data.len())]
}
