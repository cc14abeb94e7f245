use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricsError;
use crate::autodiff::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOutput {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    /// Inertia of the seeding and after each Lloyd iteration of the returned restart.
    pub history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centroids.row(c)));
        }
    }
    centroids
}

/// Distances of every point to its nearest centroid, lowest index on ties.
fn assign(points: &Matrix, centroids: &Matrix, out: &mut [usize]) -> (f64, Vec<f64>) {
    let mut inertia = 0.0;
    let mut dists = vec![0.0; points.rows()];
    for i in 0..points.rows() {
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for c in 0..centroids.rows() {
            let d = sq_dist(points.row(i), centroids.row(c));
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        out[i] = best;
        dists[i] = best_d;
        inertia += best_d;
    }
    (inertia, dists)
}

fn update(points: &Matrix, assignments: &[usize], dists: &[f64], k: usize) -> Matrix {
    let d = points.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        sums.row_mut(a).iter_mut().zip(points.row(i)).for_each(|(s, x)| *s += x);
    }
    let mut taken = vec![false; points.rows()];
    for c in 0..k {
        if counts[c] == 0 {
            // reseed an empty cluster at the point farthest from its centroid
            let far = (0..points.rows())
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("k <= n");
            taken[far] = true;
            sums.row_mut(c).copy_from_slice(points.row(far));
        } else {
            let inv = 1.0 / counts[c] as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
        }
    }
    sums
}

fn lloyd(points: &Matrix, mut centroids: Matrix, max_iters: usize) -> KMeansOutput {
    let n = points.rows();
    let k = centroids.rows();
    let mut assignments = vec![usize::MAX; n];
    let mut next = vec![0usize; n];
    let mut history = Vec::new();
    let (mut inertia, mut dists) = assign(points, &centroids, &mut next);
    history.push(inertia);
    for _ in 0..max_iters.max(1) {
        let changed = next != assignments;
        assignments.copy_from_slice(&next);
        if !changed {
            break;
        }
        centroids = update(points, &assignments, &dists, k);
        (inertia, dists) = assign(points, &centroids, &mut next);
        history.push(inertia);
    }
    // match the returned centroids when max_iters cut the loop short
    assignments.copy_from_slice(&next);
    KMeansOutput {
        assignments,
        centroids,
        inertia,
        history,
    }
}

/// k-means++ seeding and Lloyd iterations, keeping the lowest-inertia restart.
///
/// Restart `r` draws from its own stream of a generator seeded with `seed`.
pub fn kmeans(
    points: &Matrix,
    k: usize,
    seed: u64,
    max_iters: usize,
    restarts: usize,
) -> Result<KMeansOutput, MetricsError> {
    if k == 0 {
        return Err(MetricsError::NoClusters);
    }
    if k > points.rows() {
        return Err(MetricsError::TooManyClusters { k, n: points.rows() });
    }
    let mut best: Option<KMeansOutput> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let init = plus_plus_init(points, k, &mut rng);
        let out = lloyd(points, init, max_iters);
        if best.as_ref().is_none_or(|b| out.inertia < b.inertia) {
            best = Some(out);
        }
    }
    Ok(best.expect("at least one restart"))
}

