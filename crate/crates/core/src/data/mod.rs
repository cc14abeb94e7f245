//! Multi-view datasets: the in-memory [`ViewSet`], its CSV directory format,
//! normalization, a synthetic generator, and the missing-view protocol.

mod io;
mod missing;
mod normalize;
mod synthetic;

use std::path::PathBuf;

use sha2::{Digest, Sha256};

pub use io::{
    load_viewset, read_labels_csv, read_matrix_csv, save_viewset, write_labels_csv, write_matrix_csv,
};
pub use missing::{apply_missing, MissingSpec};
pub use normalize::{normalize, NormalizeMode};
pub use synthetic::{generate_synthetic, generate_synthetic3d, SyntheticSpec};

use crate::autodiff::Matrix;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ingestion: {0}")]
    Ingestion(String),
    #[error("{file}: line {line}, column {column}: cannot parse {value:?} as a number")]
    Parse {
        file: String,
        line: u64,
        column: usize,
        value: String,
    },
    #[error("invalid dataset: {0}")]
    Validation(String),
    #[error("missing-view protocol: {0}")]
    Protocol(String),
}

/// A dataset with `V` views over the same `N` samples.
///
/// Hidden views are stored zero-filled and flagged absent in the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    pub name: String,
    views: Vec<Matrix>,
    labels: Option<Vec<usize>>,
    /// `present[v][i]`.
    present: Vec<Vec<bool>>,
}

impl ViewSet {
    /// Validates and assembles a dataset. `present` is indexed `[view][sample]`
    /// and defaults to all-present.
    pub fn new(
        name: impl Into<String>,
        views: Vec<Matrix>,
        labels: Option<Vec<usize>>,
        present: Option<Vec<Vec<bool>>>,
    ) -> Result<Self, DataError> {
        let first = views
            .first()
            .ok_or_else(|| DataError::Validation("a dataset needs at least one view".into()))?;
        let n = first.rows();
        if let Some((v, m)) = views.iter().enumerate().find(|(_, m)| m.rows() != n) {
            return Err(DataError::Validation(format!(
                "view {} has {} rows, view 1 has {n}",
                v + 1,
                m.rows()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(DataError::Validation(format!(
                    "{} labels for {n} samples",
                    l.len()
                )));
            }
            let mut seen: Vec<usize> = l.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.iter().enumerate().any(|(i, x)| i != *x) {
                return Err(DataError::Validation(
                    "labels must be dense in [0, K)".into(),
                ));
            }
        }
        let present = present.unwrap_or_else(|| vec![vec![true; n]; views.len()]);
        if present.len() != views.len() || present.iter().any(|p| p.len() != n) {
            return Err(DataError::Validation(
                "mask shape does not match the views".into(),
            ));
        }
        if let Some(i) = (0..n).find(|&i| present.iter().all(|p| !p[i])) {
            return Err(DataError::Validation(format!(
                "sample {i} has no present view"
            )));
        }
        Ok(Self {
            name: name.into(),
            views,
            labels,
            present,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].rows()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }

    pub fn view(&self, v: usize) -> &Matrix {
        &self.views[v]
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct labels, if labelled.
    pub fn num_clusters(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    /// Presence flags of view `v` over samples.
    pub fn present(&self, v: usize) -> &[bool] {
        &self.present[v]
    }

    pub fn is_present(&self, sample: usize, v: usize) -> bool {
        self.present[v][sample]
    }

    pub fn is_complete(&self) -> bool {
        self.present.iter().all(|p| p.iter().all(|x| *x))
    }

    /// Samples with at least one hidden view.
    pub fn incomplete_count(&self) -> usize {
        (0..self.n_samples())
            .filter(|&i| self.present.iter().any(|p| !p[i]))
            .count()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Sub-dataset over `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            views: self.views.iter().map(|m| m.select_rows(indices)).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            present: self
                .present
                .iter()
                .map(|p| indices.iter().map(|&i| p[i]).collect())
                .collect(),
        }
    }

    /// SHA-256 over shapes, values, labels and mask; hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_samples() as u64).to_le_bytes());
        for (v, m) in self.views.iter().enumerate() {
            h.update((m.cols() as u64).to_le_bytes());
            for x in m.as_slice() {
                h.update(x.to_le_bytes());
            }
            for p in &self.present[v] {
                h.update([*p as u8]);
            }
        }
        if let Some(l) = &self.labels {
            for x in l {
                h.update((*x as u64).to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub(crate) fn from_parts_unchecked(
        name: String,
        views: Vec<Matrix>,
        labels: Option<Vec<usize>>,
        present: Vec<Vec<bool>>,
    ) -> Self {
        Self {
            name,
            views,
            labels,
            present,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mask_is_all_present() {
        let vs = ViewSet::new(
            "t",
            vec![Matrix::zeros(4, 2), Matrix::zeros(4, 3)],
            None,
            None,
        )
        .unwrap();
        assert_eq!(vs.n_samples(), 4);
        assert!(vs.is_complete());
        assert_eq!(vs.view_dims(), vec![2, 3]);
    }

    #[test]
    fn invariants() {
        assert!(ViewSet::new(
            "t",
            vec![Matrix::zeros(5, 2), Matrix::zeros(6, 2)],
            None,
            None
        )
        .is_err());
        assert!(ViewSet::new("t", vec![Matrix::zeros(2, 1)], Some(vec![0, 2]), None).is_err());
        let mask = vec![vec![true, false], vec![true, false]];
        assert!(ViewSet::new(
            "t",
            vec![Matrix::zeros(2, 1), Matrix::zeros(2, 1)],
            None,
            Some(mask)
        )
        .is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ViewSet::new("t", vec![Matrix::zeros(2, 2)], None, None).unwrap();
        let b = ViewSet::new("t", vec![Matrix::filled(2, 2, 1.0)], None, None).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), a.clone().content_hash());
    }
}
