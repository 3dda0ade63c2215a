use serde::{Deserialize, Serialize};

use crate::error::{CacError, Result};
use crate::points::PointSet;

/// Default fraction of the degree parameter used as the coordinate bound.
pub const DEFAULT_KAPPA: f64 = 0.5;

/// Invertible affine map `x -> (x - center) * scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl Scaling {
    pub fn apply(&self, points: &PointSet) -> Result<PointSet> {
        self.check(points)?;
        let q = self.center.len();
        let coords = points
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, v)| (v - self.center[k % q]) * self.scale)
            .collect();
        PointSet::new(q, coords)
    }

    pub fn invert(&self, points: &PointSet) -> Result<PointSet> {
        self.check(points)?;
        let q = self.center.len();
        let coords = points
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, v)| v / self.scale + self.center[k % q])
            .collect();
        PointSet::new(q, coords)
    }

    fn check(&self, points: &PointSet) -> Result<()> {
        if points.dim() != self.center.len() {
            return Err(CacError::DimensionMismatch {
                expected: self.center.len(),
                got: points.dim(),
            });
        }
        Ok(())
    }
}

/// Centers each coordinate on its midrange and scales uniformly so the
/// largest absolute coordinate equals `kappa * n`. Constant data is only
/// centered (scale 1).
pub fn standardize(data: &PointSet, n: f64, kappa: f64) -> Result<(PointSet, Scaling)> {
    if !(n > 0.0 && kappa > 0.0 && n.is_finite() && kappa.is_finite()) {
        return Err(CacError::InvalidParameter(format!(
            "standardize needs positive n and kappa, got n = {n}, kappa = {kappa}"
        )));
    }
    let q = data.dim();
    let mut lo = vec![f64::INFINITY; q];
    let mut hi = vec![f64::NEG_INFINITY; q];
    for p in data.rows() {
        for d in 0..q {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let reach = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| 0.5 * (b - a))
        .fold(0.0_f64, f64::max);
    let scale = if reach > 0.0 { kappa * n / reach } else { 1.0 };
    let scaling = Scaling { center, scale };
    let scaled = scaling.apply(data)?;
    Ok((scaled, scaling))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_at_n6() {
        let data = PointSet::from_rows(&[[-1.0, 0.5], [1.0, -1.0], [0.0, 1.0]]).unwrap();
        let (scaled, s) = standardize(&data, 6.0, 0.5).unwrap();
        assert_eq!(s.scale, 3.0);
        let max = scaled.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert_eq!(max, 3.0);
    }

    #[test]
    fn single_point_goes_to_origin() {
        let data = PointSet::from_rows(&[[4.0, -2.0, 7.5]]).unwrap();
        let (scaled, s) = standardize(&data, 5.0, 0.5).unwrap();
        assert_eq!(s.scale, 1.0);
        assert_eq!(scaled.row(0), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn invert_round_trip() {
        let data = PointSet::from_rows(&[[3.0, 10.0], [-2.5, 11.0], [0.1, 9.5]]).unwrap();
        let (scaled, s) = standardize(&data, 7.0, 0.5).unwrap();
        let back = s.invert(&scaled).unwrap();
        for (a, b) in data.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
