use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ViewSet;
use crate::autodiff::Matrix;

/// Recipe for a Gaussian multi-view dataset.
///
/// Samples are split as evenly as possible across clusters, earlier clusters
/// taking the remainder.
/// Cluster `k` is centred at `mean_distance / sqrt(2) * e_k` so every pair of
/// means is `mean_distance` apart. Each view applies its own random rotation
/// and offset, and view `v` has per-coordinate noise
/// `noise * (1 + noise_growth * v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub clusters: usize,
    pub views: usize,
    pub dim: usize,
    pub mean_distance: f64,
    pub noise: f64,
    pub noise_growth: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            samples: 600,
            clusters: 3,
            views: 3,
            dim: 3,
            mean_distance: 7.5,
            noise: 1.0,
            noise_growth: 0.25,
        }
    }
}

impl SyntheticSpec {
    /// Smallest ratio of mean separation to within-cluster standard deviation over views.
    pub fn worst_separation(&self) -> f64 {
        let worst_noise =
            self.noise * (1.0 + self.noise_growth * (self.views.saturating_sub(1)) as f64);
        self.mean_distance / worst_noise
    }
}

/// 600 samples in 3 balanced clusters, 3 views of 3 dimensions.
pub fn generate_synthetic3d(seed: u64) -> ViewSet {
    generate_synthetic(&SyntheticSpec::default(), seed).with_name("synthetic3d")
}

fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> Matrix {
    // Gram-Schmidt on a Gaussian matrix
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    Matrix::from_rows(&basis)
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> ViewSet {
    assert!(
        spec.clusters >= 1 && spec.clusters <= spec.dim,
        "one axis per cluster mean"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.samples;
    let mut labels: Vec<usize> = (0..spec.clusters)
        .flat_map(|k| {
            let size = n / spec.clusters + usize::from(k < n % spec.clusters);
            std::iter::repeat_n(k, size)
        })
        .collect();
    labels.shuffle(&mut rng);

    let scale = spec.mean_distance / std::f64::consts::SQRT_2;
    let views = (0..spec.views)
        .map(|v| {
            let rot = random_rotation(spec.dim, &mut rng);
            let offset: Vec<f64> = (0..spec.dim)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    2.0 * e
                })
                .collect();
            let sigma = spec.noise * (1.0 + spec.noise_growth * v as f64);
            let mut raw = Matrix::zeros(n, spec.dim);
            for (i, &k) in labels.iter().enumerate() {
                for d in 0..spec.dim {
                    let mean = if d == k { scale } else { 0.0 };
                    let e: f64 = StandardNormal.sample(&mut rng);
                    raw.set(i, d, mean + sigma * e);
                }
            }
            let mut out = raw.matmul(&rot).expect("square rotation");
            for i in 0..n {
                out.row_mut(i)
                    .iter_mut()
                    .zip(&offset)
                    .for_each(|(x, o)| *x += o);
            }
            out
        })
        .collect();
    ViewSet::new("synthetic", views, Some(labels), None).expect("generator upholds invariants")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_balance() {
        let d = generate_synthetic3d(42);
        assert_eq!(
            (d.n_samples(), d.n_views(), d.view_dims()),
            (600, 3, vec![3, 3, 3])
        );
        assert_eq!(d.num_clusters(), Some(3));
        for k in 0..3 {
            assert_eq!(d.labels().unwrap().iter().filter(|l| **l == k).count(), 200);
        }
        assert!(SyntheticSpec::default().worst_separation() >= 4.0);
    }

    #[test]
    fn uneven_split() {
        let spec = SyntheticSpec {
            samples: 2000,
            ..SyntheticSpec::default()
        };
        let d = generate_synthetic(&spec, 0);
        let count = |k| d.labels().unwrap().iter().filter(|l| **l == k).count();
        assert_eq!((count(0), count(1), count(2)), (667, 667, 666));
    }

    #[test]
    fn seeded() {
        assert_eq!(generate_synthetic3d(1), generate_synthetic3d(1));
        assert_ne!(generate_synthetic3d(1), generate_synthetic3d(2));
    }
}
