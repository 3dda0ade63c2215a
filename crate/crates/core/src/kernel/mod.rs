//! Localized Hermite kernel
//!
//! `Phi_n(x, y) = sum_m H(sqrt(m) / n) Proj_m(x / sigma, y / sigma)`, where
//! `Proj_m` is the reproducing kernel of the degree-`m` Hermite functions in
//! `q` variables and `H` is a smooth cutoff ([`FilterH`]). Only orders with
//! `m < n^2` contribute.
//!
//! Evaluation uses the Mehler reduction for `q >= 2` and the single-index
//! identity `Proj_m(x, y) = psi_m(x) psi_m(y)` for `q = 1`. Summation order is
//! fixed (ascending `m`, then `j`, then `l`) and the arguments are put in a
//! canonical order before evaluation, so `Phi_n(x, y)` and `Phi_n(y, x)` are
//! bit-identical and kernel matrices do not depend on the thread schedule.

mod filter;
pub mod hermite;
pub mod projection;

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use filter::FilterH;
pub use hermite::{d_coefficient, eval_psi_sequence, psi_at_zero, PsiTable};
pub use projection::{
    multi_index_count, plane_coordinates, proj_m_direct, proj_m_direct_capped, proj_m_mehler,
    MehlerWorkspace,
};

use crate::error::{CacError, Result};
use crate::points::PointSet;

/// Largest supported degree parameter (per-coordinate degree `n^2 <= 1024`).
pub const MAX_DEGREE_PARAM: f64 = 32.0;

/// Default cap on the number of stored kernel matrix entries (8 GiB of f64).
pub const DEFAULT_MAX_MATRIX_ENTRIES: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Degree parameter `n`; orders `m < n^2` enter the expansion.
    pub n: f64,
    /// Ambient dimension `q`.
    pub q: usize,
    /// Bandwidth; arguments are divided by it before evaluation.
    pub sigma: f64,
    #[serde(skip)]
    pub filter: FilterH,
    /// Localization exponent `S`, used only by localization diagnostics.
    pub loc_exponent: f64,
}

impl KernelConfig {
    pub fn new(n: f64, q: usize, sigma: f64) -> Result<Self> {
        let cfg = Self {
            n,
            q,
            sigma,
            filter: FilterH,
            loc_exponent: 4.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_degree(&self, n: f64) -> Result<Self> {
        let cfg = Self { n, ..*self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n.is_finite() && self.n >= 1.0) {
            return Err(CacError::InvalidParameter(format!("n must be >= 1, got {}", self.n)));
        }
        if self.n > MAX_DEGREE_PARAM {
            return Err(CacError::InvalidParameter(format!(
                "n = {} exceeds the supported maximum {MAX_DEGREE_PARAM}",
                self.n
            )));
        }
        if self.q == 0 {
            return Err(CacError::InvalidParameter("q must be >= 1".into()));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(CacError::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.loc_exponent.is_finite() && self.loc_exponent > 0.0) {
            return Err(CacError::InvalidParameter(format!(
                "localization exponent must be positive, got {}",
                self.loc_exponent
            )));
        }
        Ok(())
    }

    /// Number of orders `m = 0 .. ceil(n^2) - 1` considered by the expansion.
    pub fn order_count(&self) -> usize {
        (self.n * self.n).ceil() as usize
    }
}

/// A kernel with its filter weights precomputed.
#[derive(Debug, Clone)]
pub struct HermiteKernel {
    config: KernelConfig,
    weights: Vec<f64>,
}

impl HermiteKernel {
    pub fn new(config: KernelConfig) -> Result<Self> {
        config.validate()?;
        let mut weights: Vec<f64> = (0..config.order_count())
            .map(|m| config.filter.eval((m as f64).sqrt() / config.n))
            .collect();
        while weights.last() == Some(&0.0) {
            weights.pop();
        }
        Ok(Self { config, weights })
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    /// Filter weights `H(sqrt(m)/n)` indexed by order, trailing zeros dropped.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn workspace(&self) -> MehlerWorkspace {
        MehlerWorkspace::new(self.config.q, self.weights.len().saturating_sub(1))
    }

    /// Evaluates `Phi_n(x, y)` using caller-owned scratch space.
    ///
    /// Panics if the argument lengths differ from `q` (checked entry points
    /// are [`phi_n`] and [`HermiteKernel::eval`]).
    pub fn eval_with(&self, ws: &mut MehlerWorkspace, x: &[f64], y: &[f64]) -> f64 {
        let (a, b) = if canonical_order(x, y) == Ordering::Greater {
            (y, x)
        } else {
            (x, y)
        };
        let sigma = self.config.sigma;
        let mut sx = std::mem::take(&mut ws.scaled_x);
        let mut sy = std::mem::take(&mut ws.scaled_y);
        sx.clear();
        sy.clear();
        sx.extend(a.iter().map(|v| v / sigma));
        sy.extend(b.iter().map(|v| v / sigma));
        let value = if self.config.q == 1 {
            self.univariate(sx[0], sy[0])
        } else {
            ws.filtered_sum(&sx, &sy, &self.weights)
        };
        ws.scaled_x = sx;
        ws.scaled_y = sy;
        value
    }

    fn univariate(&self, x: f64, y: f64) -> f64 {
        let len = self.weights.len();
        let mut px = vec![0.0; len];
        let mut py = vec![0.0; len];
        hermite::fill_psi(x, &mut px);
        hermite::fill_psi(y, &mut py);
        let mut total = 0.0;
        for (m, &w) in self.weights.iter().enumerate() {
            if w != 0.0 {
                total += w * (px[m] * py[m]);
            }
        }
        total
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        let mut ws = self.workspace();
        Ok(self.eval_with(&mut ws, x, y))
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.q {
            return Err(CacError::DimensionMismatch {
                expected: self.config.q,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CacError::NonFinite(format!("point {x:?}")));
        }
        Ok(())
    }

    pub(crate) fn check_points(&self, points: &PointSet) -> Result<()> {
        if points.dim() != self.config.q {
            return Err(CacError::DimensionMismatch {
                expected: self.config.q,
                got: points.dim(),
            });
        }
        Ok(())
    }
}

/// Lexicographic order with `total_cmp`, used to fix argument order.
fn canonical_order(x: &[f64], y: &[f64]) -> Ordering {
    for (a, b) in x.iter().zip(y) {
        match a.total_cmp(b) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// One-shot `Phi_n(x, y)`.
pub fn phi_n(x: &[f64], y: &[f64], config: &KernelConfig) -> Result<f64> {
    HermiteKernel::new(*config)?.eval(x, y)
}

/// Dense symmetric kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    size: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub fn kernel_matrix(points: &PointSet, kernel: &HermiteKernel) -> Result<KernelMatrix> {
    kernel_matrix_capped(points, kernel, DEFAULT_MAX_MATRIX_ENTRIES)
}

/// Computes the upper triangle in parallel over rows and mirrors it.
pub fn kernel_matrix_capped(
    points: &PointSet,
    kernel: &HermiteKernel,
    max_entries: usize,
) -> Result<KernelMatrix> {
    kernel.check_points(points)?;
    let m = points.len();
    if m == 0 {
        return Err(CacError::InvalidInput("kernel matrix needs at least one point".into()));
    }
    let entries = m.saturating_mul(m);
    if entries > max_entries {
        return Err(CacError::MatrixTooLarge {
            points: m,
            entries,
            cap: max_entries,
            suggested_block: (max_entries / m).max(1),
        });
    }
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map_init(
            || kernel.workspace(),
            |ws, i| {
                let xi = points.row(i);
                (i..m).map(|j| kernel.eval_with(ws, xi, points.row(j))).collect()
            },
        )
        .collect();
    let mut data = vec![0.0; entries];
    for (i, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + offset;
            data[i * m + j] = v;
            data[j * m + i] = v;
        }
    }
    Ok(KernelMatrix { size: m, data })
}

/// Rectangular block `K[i][j] = Phi_n(rows_i, cols_j)`, for off-sample evaluation.
pub fn cross_kernel(rows: &PointSet, cols: &PointSet, kernel: &HermiteKernel) -> Result<Vec<Vec<f64>>> {
    kernel.check_points(rows)?;
    kernel.check_points(cols)?;
    Ok((0..rows.len())
        .into_par_iter()
        .map_init(
            || kernel.workspace(),
            |ws, i| {
                let x = rows.row(i);
                cols.rows().map(|y| kernel.eval_with(ws, x, y)).collect()
            },
        )
        .collect())
}
