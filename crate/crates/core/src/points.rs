use serde::{Deserialize, Serialize};

use crate::error::{CacError, Result};

/// Row-major storage for `len` points in `dim` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(CacError::InvalidParameter("point dimension must be >= 1".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(CacError::InvalidInput(format!(
                "{} coordinates do not divide into rows of {dim}",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(CacError::NonFinite(format!(
                "coordinate {} of point {}",
                pos % dim,
                pos / dim
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| CacError::InvalidInput("no points".into()))?;
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(CacError::InvalidInput(format!(
                    "row {i} has {} coordinates, expected {dim}",
                    r.len()
                )));
            }
            coords.extend_from_slice(r);
        }
        Self::new(dim, coords)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    /// Points selected by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointSet {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.row(i));
        }
        PointSet {
            dim: self.dim,
            coords,
        }
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Median over points of the distance to the nearest other point.
/// Returns 0 for fewer than two points.
pub fn median_nearest_neighbor(points: &PointSet) -> f64 {
    median_kth_neighbor(points, 1)
}

/// Median over points of the distance to the `k`-th nearest other point,
/// with `k` clamped to `1..=M-1`. Returns 0 for fewer than two points.
pub fn median_kth_neighbor(points: &PointSet, k: usize) -> f64 {
    use rayon::prelude::*;

    let m = points.len();
    if m < 2 {
        return 0.0;
    }
    let k = k.clamp(1, m - 1);
    let mut kth: Vec<f64> = (0..m)
        .into_par_iter()
        .map_init(Vec::new, |buf: &mut Vec<f64>, i| {
            let xi = points.row(i);
            buf.clear();
            buf.extend((0..m).filter(|&j| j != i).map(|j| squared_distance(xi, points.row(j))));
            let (_, v, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
            v.sqrt()
        })
        .collect();
    kth.sort_by(f64::total_cmp);
    if m % 2 == 1 {
        kth[m / 2]
    } else {
        0.5 * (kth[m / 2 - 1] + kth[m / 2])
    }
}
