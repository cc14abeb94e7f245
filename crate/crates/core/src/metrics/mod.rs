//! k-means and the ACC / NMI / PUR scores, all reported as percentages.

use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;

mod hungarian;
mod kmeans;

pub use hungarian::min_cost_assignment;
pub use kmeans::{kmeans, KMeansOutput};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("{k} clusters requested for {n} points")]
    TooManyClusters { k: usize, n: usize },
    #[error("k must be at least 1")]
    NoClusters,
    #[error("label lists differ in length: {pred} predicted, {truth} true")]
    Length { pred: usize, truth: usize },
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<(), MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::Length {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    Ok(())
}

/// `counts[p][t]` over dense relabelings of both label lists.
fn contingency(pred: &[usize], truth: &[usize]) -> Vec<Vec<usize>> {
    let kp = pred.iter().max().map_or(0, |m| m + 1);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; kt]; kp];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[p][t] += 1;
    }
    counts
}

/// Best matched fraction over one-to-one label mappings, times 100.
pub fn hungarian_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Ok(100.0);
    }
    let counts = contingency(pred, truth);
    let size = counts.len().max(counts[0].len());
    let max = pred.len() as f64;
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|p| {
            (0..size)
                .map(|t| max - counts.get(p).and_then(|r| r.get(t)).copied().unwrap_or(0) as f64)
                .collect()
        })
        .collect();
    let assignment = min_cost_assignment(&cost);
    let matched: usize = assignment
        .iter()
        .enumerate()
        .map(|(p, &t)| counts.get(p).and_then(|r| r.get(t)).copied().unwrap_or(0))
        .sum();
    Ok(100.0 * matched as f64 / pred.len() as f64)
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information over the geometric mean of the two entropies, times 100.
///
/// When either side is a single cluster the ratio is undefined; identical
/// partitions then score 100 and anything else 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Ok(100.0);
    }
    let n = pred.len() as f64;
    let counts = contingency(pred, truth);
    let rows: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..counts[0].len()).map(|t| counts.iter().map(|r| r[t]).sum()).collect();
    let hp = entropy(rows.iter().copied(), n);
    let ht = entropy(cols.iter().copied(), n);
    if hp == 0.0 || ht == 0.0 {
        let same = hp == 0.0 && ht == 0.0;
        return Ok(if same { 100.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (p, row) in counts.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (rows[p] as f64 * cols[t] as f64)).ln();
            }
        }
    }
    Ok((100.0 * mi / (hp * ht).sqrt()).clamp(0.0, 100.0))
}

/// Fraction of samples carrying their cluster's majority class, times 100.
pub fn purity(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Ok(100.0);
    }
    let counts = contingency(pred, truth);
    let majority: usize = counts.iter().map(|r| r.iter().copied().max().unwrap_or(0)).sum();
    Ok(100.0 * majority as f64 / pred.len() as f64)
}

/// Clustering of a representation together with its scores against the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    #[serde(skip)]
    pub centroids: Option<Matrix>,
    pub inertia: f64,
    pub acc: f64,
    pub nmi: f64,
    pub pur: f64,
}

/// Runs k-means on `points` and scores the assignments against `truth`.
pub fn cluster_and_score(
    points: &Matrix,
    truth: &[usize],
    k: usize,
    seed: u64,
    max_iters: usize,
    restarts: usize,
) -> Result<ClusterResult, MetricsError> {
    check_lengths(&vec![0; points.rows()], truth)?;
    let km = kmeans(points, k, seed, max_iters, restarts)?;
    Ok(ClusterResult {
        acc: hungarian_accuracy(&km.assignments, truth)?,
        nmi: nmi(&km.assignments, truth)?,
        pur: purity(&km.assignments, truth)?,
        inertia: km.inertia,
        centroids: Some(km.centroids),
        assignments: km.assignments,
    })
}

#[cfg(test)]
mod tests;
