use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{CacError, Result};
use crate::points::PointSet;

/// Eigenvalues below this fraction of the largest count as zero variance.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `dim` principal axes, each of length `q`, by descending variance.
    pub axes: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    pub dim: usize,
}

impl PcaModel {
    pub fn transform(&self, points: &PointSet) -> Result<PointSet> {
        if points.dim() != self.mean.len() {
            return Err(CacError::DimensionMismatch {
                expected: self.mean.len(),
                got: points.dim(),
            });
        }
        let mut out = Vec::with_capacity(points.len() * self.dim);
        for p in points.rows() {
            for axis in &self.axes {
                out.push(
                    p.iter()
                        .zip(&self.mean)
                        .zip(axis)
                        .map(|((x, m), a)| (x - m) * a)
                        .sum(),
                );
            }
        }
        PointSet::new(self.dim, out)
    }

    pub fn inverse_transform(&self, projected: &PointSet) -> Result<PointSet> {
        if projected.dim() != self.dim {
            return Err(CacError::DimensionMismatch {
                expected: self.dim,
                got: projected.dim(),
            });
        }
        let q = self.mean.len();
        let mut out = Vec::with_capacity(projected.len() * q);
        for z in projected.rows() {
            for d in 0..q {
                out.push(self.mean[d] + z.iter().zip(&self.axes).map(|(c, a)| c * a[d]).sum::<f64>());
            }
        }
        PointSet::new(q, out)
    }
}

/// Centers the data and projects it onto the `dim` leading eigenvectors of
/// the sample covariance. Each axis is signed so that its largest-magnitude
/// entry is positive.
pub fn pca_fit_transform(data: &PointSet, dim: usize) -> Result<(PcaModel, PointSet)> {
    let q = data.dim();
    let m = data.len();
    if dim == 0 || dim > q {
        return Err(CacError::InvalidParameter(format!(
            "PCA dimension must be in 1..={q}, got {dim}"
        )));
    }
    if m < 2 {
        return Err(CacError::RankDeficient {
            requested: dim,
            rank: 0,
        });
    }
    let mut mean = vec![0.0; q];
    for p in data.rows() {
        for (acc, v) in mean.iter_mut().zip(p) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= m as f64;
    }
    let centered = DMatrix::from_fn(m, q, |i, j| data.row(i)[j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (m as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let largest = values[0];
    let rank = values
        .iter()
        .filter(|&&v| largest > 0.0 && v > RANK_TOLERANCE * largest)
        .count();
    if dim > rank {
        return Err(CacError::RankDeficient { requested: dim, rank });
    }
    let total: f64 = values.iter().sum();

    let axes: Vec<Vec<f64>> = order[..dim]
        .iter()
        .map(|&k| {
            let col = eig.eigenvectors.column(k);
            let mut axis: Vec<f64> = col.iter().copied().collect();
            let pivot = axis
                .iter()
                .copied()
                .fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
            if pivot < 0.0 {
                axis.iter_mut().for_each(|v| *v = -*v);
            }
            axis
        })
        .collect();
    let model = PcaModel {
        mean,
        axes,
        explained_variance_ratio: values[..dim].iter().map(|v| v / total).collect(),
        dim,
    };
    let projected = model.transform(data)?;
    Ok((model, projected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::distance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, q: usize, seed: u64) -> PointSet {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<f64> = (0..m * q).map(|_| StandardNormal.sample(&mut r)).collect();
        PointSet::new(q, coords).unwrap()
    }

    #[test]
    fn axes_orthonormal_and_ratios_sorted() {
        let data = gaussian(500, 5, 1);
        let (model, _) = pca_fit_transform(&data, 5).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let dot: f64 = model.axes[a].iter().zip(&model.axes[b]).map(|(x, y)| x * y).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
        let r = &model.explained_variance_ratio;
        assert!(r.windows(2).all(|w| w[0] >= w[1]));
        assert!(r.iter().sum::<f64>() <= 1.0 + 1e-12);
        for v in r {
            assert!((v - 0.2).abs() < 0.1, "ratio {v}");
        }
        for axis in &model.axes {
            let pivot = axis.iter().copied().fold(0.0_f64, |b, v| if v.abs() > b.abs() { v } else { b });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn full_dimension_preserves_distances() {
        let data = gaussian(60, 4, 2);
        let (_, proj) = pca_fit_transform(&data, 4).unwrap();
        for i in 0..60 {
            for j in 0..60 {
                let a = distance(data.row(i), data.row(j));
                let b = distance(proj.row(i), proj.row(j));
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn subspace_data_reconstructs_exactly() {
        // points in the plane spanned by (1,1,0) and (0,1,1)
        let base = gaussian(40, 2, 3);
        let rows: Vec<[f64; 3]> = base
            .rows()
            .map(|p| [p[0] + 2.0, p[0] + p[1] - 1.0, p[1]])
            .collect();
        let data = PointSet::from_rows(&rows).unwrap();
        let (model, proj) = pca_fit_transform(&data, 2).unwrap();
        let back = model.inverse_transform(&proj).unwrap();
        for (a, b) in data.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
        match pca_fit_transform(&data, 3) {
            Err(CacError::RankDeficient { rank, .. }) => assert_eq!(rank, 2),
            other => panic!("{other:?}"),
        }
    }
}
