//! End-to-end runs: preparation, training, clustering and sweep grids.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::config::{ConfigError, TrainConfig};
use crate::data::{apply_missing, normalize, DataError, MissingSpec, ViewSet};
use crate::metrics::{cluster_and_score, ClusterResult, MetricsError};
use crate::trainer::{fit_with_progress, EpochRecord, FitOutput, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Applies the configured missing-view ratio, then normalization.
pub fn prepare(data: &ViewSet, config: &TrainConfig) -> Result<ViewSet, ExperimentError> {
    let masked = if config.missing_ratio > 0.0 {
        apply_missing(
            data,
            MissingSpec {
                ratio: config.missing_ratio,
                seed: config.seed,
            },
        )?
    } else {
        data.clone()
    };
    Ok(normalize(&masked, config.normalization))
}

/// Cluster count from the config, else from the labels.
pub fn resolve_k(data: &ViewSet, config: &TrainConfig) -> Result<usize, ExperimentError> {
    config.k.or(data.num_clusters()).ok_or_else(|| {
        ConfigError::Invalid {
            key: "k",
            reason: "not set and the dataset has no labels".into(),
        }
        .into()
    })
}

pub fn score(q: &Matrix, labels: &[usize], k: usize, config: &TrainConfig) -> Result<ClusterResult, ExperimentError> {
    Ok(cluster_and_score(
        q,
        labels,
        k,
        config.seed,
        config.kmeans_max_iters,
        config.kmeans_restarts,
    )?)
}

/// Scores of one run, as written to `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub seed: u64,
    pub k: usize,
    pub acc: f64,
    pub nmi: f64,
    pub pur: f64,
    pub inertia: f64,
    pub epochs: usize,
}

impl ResultRecord {
    pub fn new(dataset: &str, config: &TrainConfig, k: usize, r: &ClusterResult) -> Self {
        Self {
            dataset: dataset.to_string(),
            seed: config.seed,
            k,
            acc: r.acc,
            nmi: r.nmi,
            pur: r.pur,
            inertia: r.inertia,
            epochs: config.epochs,
        }
    }
}

pub fn code_version() -> String {
    match option_env!("MVDIS_BUILD_REV") {
        Some(rev) => format!("mvdis {} ({rev})", env!("CARGO_PKG_VERSION")),
        None => format!("mvdis {}", env!("CARGO_PKG_VERSION")),
    }
}

/// Everything needed to reproduce a run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: TrainConfig,
    pub dataset: String,
    /// SHA-256 of the raw dataset before preparation.
    pub dataset_hash: String,
    pub code_version: String,
    /// Output name to path, relative to the run directory.
    pub outputs: std::collections::BTreeMap<String, String>,
    pub duration_secs: f64,
    pub metrics: ResultRecord,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub prepared: ViewSet,
    pub fit: FitOutput,
    pub k: usize,
    pub clusters: ClusterResult,
    pub record: ResultRecord,
}

/// Prepares `data`, trains and clusters the final representation.
pub fn run(
    data: &ViewSet,
    config: &TrainConfig,
    progress: impl FnMut(&EpochRecord),
) -> Result<RunOutput, ExperimentError> {
    config.validate()?;
    let labels = data.labels().ok_or_else(|| DataError::Validation("scoring needs labels".into()))?;
    let k = resolve_k(data, config)?;
    config.validate_for_samples(data.n_samples())?;
    let prepared = prepare(data, config)?;
    let fit = fit_with_progress(&prepared, config, progress)?;
    let clusters = score(&fit.embeddings.q, labels, k, config)?;
    let record = ResultRecord::new(&data.name, config, k, &clusters);
    Ok(RunOutput {
        prepared,
        fit,
        k,
        clusters,
        record,
    })
}

/// Sweep grid over the loss weights or over the representation width.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepGrid {
    Weights { alphas: Vec<f64>, betas: Vec<f64> },
    /// Each entry sets both `dz` and `dc`.
    Dims(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    /// Directory-safe cell name.
    pub name: String,
    pub config: TrainConfig,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        match self {
            SweepGrid::Weights { alphas, betas } => alphas.is_empty() || betas.is_empty(),
            SweepGrid::Dims(d) => d.is_empty(),
        }
    }

    pub fn cells(&self, base: &TrainConfig) -> Vec<SweepCell> {
        match self {
            SweepGrid::Weights { alphas, betas } => alphas
                .iter()
                .flat_map(|&alpha| {
                    betas.iter().map(move |&beta| SweepCell {
                        name: format!("alpha{alpha}_beta{beta}"),
                        config: TrainConfig {
                            alpha,
                            beta,
                            ..base.clone()
                        },
                    })
                })
                .collect(),
            SweepGrid::Dims(dims) => dims
                .iter()
                .map(|&d| SweepCell {
                    name: format!("dim{d}"),
                    config: TrainConfig {
                        dz: d,
                        dc: d,
                        ..base.clone()
                    },
                })
                .collect(),
        }
    }
}

/// `start, start + step, ...` up to `end` inclusive, rounded to 10 decimals so
/// that `0.01..=0.07` by `0.01` yields seven clean values.
pub fn inclusive_range(start: f64, end: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || end < start {
        return Vec::new();
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| ((start + step * i as f64) * 1e10).round() / 1e10)
        .collect()
}

/// Runs `work` on every cell with at most `jobs` worker threads, returning
/// results in cell order.
pub fn run_cells<T: Send>(
    cells: &[SweepCell],
    jobs: usize,
    work: impl Fn(&SweepCell) -> T + Sync,
) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, cells.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let out = work(&cells[i]);
                slots.lock().expect("no worker panicked")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|o| o.expect("every cell ran"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid_shapes() {
        let alphas = inclusive_range(0.01, 0.07, 0.01);
        assert_eq!(alphas, vec![0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07]);
        let grid = SweepGrid::Weights {
            alphas: alphas.clone(),
            betas: alphas,
        };
        let cells = grid.cells(&TrainConfig::default());
        assert_eq!(cells.len(), 49);
        assert_eq!((cells[8].config.alpha, cells[8].config.beta), (0.02, 0.02));
        let dims = SweepGrid::Dims(vec![8, 16, 32, 64, 128, 256]).cells(&TrainConfig::default());
        assert_eq!(dims.len(), 6);
        assert_eq!((dims[2].config.dz, dims[2].config.dc), (32, 32));
        assert!(SweepGrid::Dims(vec![]).is_empty());
    }

    #[test]
    fn cells_keep_order_under_parallelism() {
        let cells = SweepGrid::Dims((1..=9).collect()).cells(&TrainConfig::default());
        let out = run_cells(&cells, 4, |c| c.config.dz * 10);
        assert_eq!(out, (1..=9).map(|d| d * 10).collect::<Vec<_>>());
    }
}
