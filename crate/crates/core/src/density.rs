//! Empirical `Phi_n^2` density, thresholded support sets, and the Gaussian
//! KDE baseline used for comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CacError, Result};
use crate::kernel::{kernel_matrix, HermiteKernel, KernelConfig, KernelMatrix};
use crate::points::{squared_distance, PointSet};

/// Which estimator produced a [`DensityField`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSource {
    Hermite(KernelConfig),
    GaussianKde { bandwidth: f64 },
}

/// Per-sample density values and their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub values: Vec<f64>,
    pub sample_max: f64,
    pub source: FieldSource,
}

impl DensityField {
    fn from_values(values: Vec<f64>, source: FieldSource) -> Self {
        let sample_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            values,
            sample_max,
            source,
        }
    }

    pub fn point_count(&self) -> usize {
        self.values.len()
    }

    /// Index of the largest value, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// `(1/M) sum_j K[i][j]^2` for every row of a precomputed kernel matrix.
    pub fn from_kernel_matrix(matrix: &KernelMatrix, config: KernelConfig) -> Self {
        let m = matrix.size();
        let values = (0..m)
            .into_par_iter()
            .map(|i| mean_square(matrix.row(i)))
            .collect();
        Self::from_values(values, FieldSource::Hermite(config))
    }
}

#[inline]
fn mean_square(row: &[f64]) -> f64 {
    let mut acc = 0.0;
    for v in row {
        acc += v * v;
    }
    acc / row.len() as f64
}

/// `(1/M) sum_j Phi_n(x, x_j)^2`, summed in sample order.
pub fn density_at(x: &[f64], samples: &PointSet, kernel: &HermiteKernel) -> Result<f64> {
    kernel.check_point(x)?;
    kernel.check_points(samples)?;
    if samples.is_empty() {
        return Err(CacError::InvalidInput("density needs at least one sample".into()));
    }
    let mut ws = kernel.workspace();
    let row: Vec<f64> = samples.rows().map(|y| kernel.eval_with(&mut ws, x, y)).collect();
    Ok(mean_square(&row))
}

/// Density at each of `grid`'s points relative to `samples`.
pub fn density_on_grid(grid: &PointSet, samples: &PointSet, kernel: &HermiteKernel) -> Result<Vec<f64>> {
    kernel.check_points(grid)?;
    kernel.check_points(samples)?;
    if samples.is_empty() {
        return Err(CacError::InvalidInput("density needs at least one sample".into()));
    }
    Ok((0..grid.len())
        .into_par_iter()
        .map_init(
            || kernel.workspace(),
            |ws, i| {
                let x = grid.row(i);
                let row: Vec<f64> = samples.rows().map(|y| kernel.eval_with(ws, x, y)).collect();
                mean_square(&row)
            },
        )
        .collect())
}

/// Density at every sample point, via the kernel matrix.
pub fn density_field(samples: &PointSet, kernel: &HermiteKernel) -> Result<DensityField> {
    let matrix = kernel_matrix(samples, kernel)?;
    Ok(DensityField::from_kernel_matrix(&matrix, *kernel.config()))
}

/// Members and non-members of `{i : values[i] >= theta * sample_max}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSet {
    pub threshold: OrderedTheta,
    pub members: Vec<usize>,
    pub complement: Vec<usize>,
}

/// Threshold stored as raw bits so the set stays `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedTheta(u64);

impl OrderedTheta {
    pub fn get(self) -> f64 {
        f64::from_bits(self.0)
    }
}

impl SupportSet {
    pub fn theta(&self) -> f64 {
        self.threshold.get()
    }

    pub fn is_member(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    /// Membership mask over all points.
    pub fn mask(&self, len: usize) -> Vec<bool> {
        let mut mask = vec![false; len];
        for &i in &self.members {
            mask[i] = true;
        }
        mask
    }
}

pub fn support_set(field: &DensityField, theta: f64) -> Result<SupportSet> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(CacError::InvalidParameter(format!(
            "threshold must be in (0, 1], got {theta}"
        )));
    }
    let cut = theta * field.sample_max;
    let (members, complement): (Vec<usize>, Vec<usize>) =
        (0..field.values.len()).partition(|&i| field.values[i] >= cut);
    Ok(SupportSet {
        threshold: OrderedTheta(theta.to_bits()),
        members,
        complement,
    })
}

/// Normalized Gaussian KDE `(1/M) sum_j exp(-|x_i - x_j|^2 / 2 s^2) / (2 pi s^2)^{q/2}`
/// evaluated at every sample.
pub fn gaussian_kde_baseline(samples: &PointSet, bandwidth: f64) -> Result<DensityField> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(CacError::InvalidParameter(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if samples.is_empty() {
        return Err(CacError::InvalidInput("KDE needs at least one sample".into()));
    }
    let values = (0..samples.len())
        .into_par_iter()
        .map(|i| gaussian_kde_at(samples.row(i), samples, bandwidth))
        .collect();
    Ok(DensityField::from_values(
        values,
        FieldSource::GaussianKde { bandwidth },
    ))
}

pub fn gaussian_kde_at(x: &[f64], samples: &PointSet, bandwidth: f64) -> f64 {
    let q = samples.dim() as f64;
    let two_s2 = 2.0 * bandwidth * bandwidth;
    let norm = (std::f64::consts::PI * two_s2).powf(-0.5 * q);
    let mut acc = 0.0;
    for y in samples.rows() {
        acc += (-squared_distance(x, y) / two_s2).exp();
    }
    norm * acc / samples.len() as f64
}
