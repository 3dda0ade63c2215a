//! Datasets, synthetic generators, file IO and preprocessing.

pub mod generators;
mod io;
mod pca;
mod standardize;

use serde::{Deserialize, Serialize};

pub use generators::{generate, GeneratorSpec};
pub use io::{load_csv, load_csv_with, read_labels_csv, save_assignments, LabelColumn};
pub use pca::{pca_fit_transform, PcaModel};
pub use standardize::{standardize, Scaling, DEFAULT_KAPPA};

use crate::error::{CacError, Result};
use crate::points::PointSet;

/// Class labels are positive integers `1..=K`.
pub type Label = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub points: PointSet,
    pub labels: Option<Vec<Label>>,
    pub seed: Option<u64>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(name: impl Into<String>, points: PointSet, labels: Option<Vec<Label>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(CacError::InvalidInput(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.len()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            points,
            labels,
            seed: None,
            provenance: String::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Number of distinct classes, if labelled.
    pub fn class_count(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut v = l.clone();
            v.sort_unstable();
            v.dedup();
            v.len()
        })
    }

    /// Relabels classes to `1..=K` in ascending order of the original ids.
    pub fn normalize_labels(&mut self) {
        if let Some(labels) = &mut self.labels {
            *labels = normalize_labels(labels);
        }
    }

    pub fn with_points(&self, points: PointSet) -> Result<Self> {
        let mut out = Self::new(self.name.clone(), points, self.labels.clone())?;
        out.seed = self.seed;
        out.provenance = self.provenance.clone();
        Ok(out)
    }
}

/// Maps arbitrary label ids onto `1..=K`, preserving order.
pub fn normalize_labels(labels: &[Label]) -> Vec<Label> {
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    labels
        .iter()
        .map(|l| distinct.binary_search(l).map(|p| p as Label + 1).unwrap_or(0))
        .collect()
}
