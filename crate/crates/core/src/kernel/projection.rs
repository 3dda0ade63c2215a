//! Projection kernels `Proj_m(x, y) = sum_{|k|_1 = m} psi_k(x) psi_k(y)`.
//!
//! Two routes are provided. [`proj_m_direct`] enumerates every multi-index
//! and is exponential in `q`; it is the oracle and the `q = 1` path.
//! [`proj_m_mehler`] uses the rotation-invariant reduction
//!
//! ```text
//! Proj_m(x, y) = sum_j psi_j(|x|) psi_j(|y| cos t)
//!                  * sum_l psi_l(0) psi_l(|y| sin t) D_{q-2; m-j-l}
//! ```
//!
//! with `t` the angle between `x` and `y`, which costs `O(m^2)` regardless of `q`.

use super::hermite::{d_coefficient, fill_psi, psi_at_zero};
use crate::error::{CacError, Result};

/// Default cap on the number of multi-indices the direct oracle will enumerate.
pub const DEFAULT_DIRECT_CAP: u128 = 1_000_000;

/// Scratch buffers and coefficient tables for the Mehler route.
///
/// One workspace per worker; never shared.
#[derive(Debug, Clone)]
pub struct MehlerWorkspace {
    q: usize,
    psi_zero: Vec<f64>,
    d: Vec<f64>,
    psi_norm: Vec<f64>,
    psi_par: Vec<f64>,
    psi_perp: Vec<f64>,
    along: Vec<f64>,
    across: Vec<f64>,
    pub(crate) scaled_x: Vec<f64>,
    pub(crate) scaled_y: Vec<f64>,
}

impl MehlerWorkspace {
    pub fn new(q: usize, max_order: usize) -> Self {
        let mut ws = Self {
            q,
            psi_zero: Vec::new(),
            d: Vec::new(),
            psi_norm: Vec::new(),
            psi_par: Vec::new(),
            psi_perp: Vec::new(),
            along: Vec::new(),
            across: Vec::new(),
            scaled_x: vec![0.0; q],
            scaled_y: vec![0.0; q],
        };
        ws.ensure(max_order + 1);
        ws
    }

    pub fn dim(&self) -> usize {
        self.q
    }

    fn ensure(&mut self, len: usize) {
        if self.psi_zero.len() >= len {
            return;
        }
        self.psi_zero = (0..len).map(psi_at_zero).collect();
        self.d = (0..len).map(|r| d_coefficient(self.q, r)).collect();
        self.psi_norm.resize(len, 0.0);
        self.psi_par.resize(len, 0.0);
        self.psi_perp.resize(len, 0.0);
        self.along.resize(len, 0.0);
        self.across.resize(len, 0.0);
    }

    /// Fills `along[j] = psi_j(|x|) psi_j(|y| cos t)` and
    /// `across[s] = sum_l psi_l(0) psi_l(|y| sin t) D_{q-2; s-l}` for `j, s < len`.
    fn prepare(&mut self, x: &[f64], y: &[f64], len: usize) {
        self.ensure(len);
        let (norm_x, par, perp) = plane_coordinates(x, y);
        fill_psi(norm_x, &mut self.psi_norm[..len]);
        fill_psi(par, &mut self.psi_par[..len]);
        fill_psi(perp, &mut self.psi_perp[..len]);
        for j in 0..len {
            self.along[j] = self.psi_norm[j] * self.psi_par[j];
        }
        if self.q == 2 {
            for s in 0..len {
                self.across[s] = self.psi_zero[s] * self.psi_perp[s];
            }
        } else {
            for s in 0..len {
                let mut acc = 0.0;
                // psi_l(0) vanishes for odd l, D for odd s - l
                for l in (0..=s).step_by(2) {
                    let dc = self.d[s - l];
                    if dc != 0.0 {
                        acc += self.psi_zero[l] * self.psi_perp[l] * dc;
                    }
                }
                self.across[s] = acc;
            }
        }
    }

    #[inline]
    fn projection(&self, m: usize) -> f64 {
        let mut acc = 0.0;
        for j in 0..=m {
            acc += self.along[j] * self.across[m - j];
        }
        acc
    }

    /// `sum_m weights[m] * Proj_m(x, y)`, ascending `m`, skipping zero weights.
    pub(crate) fn filtered_sum(&mut self, x: &[f64], y: &[f64], weights: &[f64]) -> f64 {
        let len = weights.len();
        if len == 0 {
            return 0.0;
        }
        self.prepare(x, y, len);
        let mut total = 0.0;
        for (m, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                total += w * self.projection(m);
            }
        }
        total
    }
}

/// `(|x|, |y| cos t, |y| sin t)` for the angle `t` between `x` and `y`.
///
/// The component across `x` is computed from the residual vector rather than
/// from `sqrt(1 - cos^2)` so nearly parallel pairs keep full precision.
/// When `x = 0` the angle is taken as 0.
pub fn plane_coordinates(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let norm_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_x == 0.0 {
        let norm_y = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        return (0.0, norm_y, 0.0);
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let par = dot / norm_x;
    let scale = par / norm_x;
    let perp = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - scale * a;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    (norm_x, par, perp)
}

/// Mehler-reduced `Proj_m(x, y)` for `q >= 2`. Points are expected already
/// divided by the bandwidth.
pub fn proj_m_mehler(x: &[f64], y: &[f64], m: usize, ws: &mut MehlerWorkspace) -> Result<f64> {
    let q = x.len();
    if y.len() != q {
        return Err(CacError::DimensionMismatch {
            expected: q,
            got: y.len(),
        });
    }
    if q < 2 {
        return Err(CacError::MehlerNeedsPlane(q));
    }
    if ws.q != q {
        return Err(CacError::DimensionMismatch {
            expected: ws.q,
            got: q,
        });
    }
    check_finite(x)?;
    check_finite(y)?;
    ws.prepare(x, y, m + 1);
    Ok(ws.projection(m))
}

/// Number of multi-indices in `Z_+^q` with `|k|_1 = m`, i.e. `C(m + q - 1, q - 1)`.
/// Saturates at `u128::MAX`.
pub fn multi_index_count(q: usize, m: usize) -> u128 {
    if q == 0 {
        return u128::from(m == 0);
    }
    let k = (q - 1).min(m) as u128;
    let n = (m + q - 1) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at each step
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Exact tensor sum over all multi-indices `|k|_1 = m`, with the default cap.
pub fn proj_m_direct(x: &[f64], y: &[f64], m: usize) -> Result<f64> {
    proj_m_direct_capped(x, y, m, DEFAULT_DIRECT_CAP)
}

pub fn proj_m_direct_capped(x: &[f64], y: &[f64], m: usize, cap: u128) -> Result<f64> {
    let q = x.len();
    if y.len() != q {
        return Err(CacError::DimensionMismatch {
            expected: q,
            got: y.len(),
        });
    }
    if q == 0 {
        return Err(CacError::InvalidParameter("dimension must be >= 1".into()));
    }
    check_finite(x)?;
    check_finite(y)?;
    let count = multi_index_count(q, m);
    if count > cap {
        return Err(CacError::OracleTooLarge { count, cap });
    }
    // products[i][k] = psi_k(x_i) psi_k(y_i)
    let mut px = vec![0.0; m + 1];
    let mut py = vec![0.0; m + 1];
    let products: Vec<Vec<f64>> = (0..q)
        .map(|i| {
            fill_psi(x[i], &mut px);
            fill_psi(y[i], &mut py);
            px.iter().zip(&py).map(|(a, b)| a * b).collect()
        })
        .collect();
    let mut total = 0.0;
    accumulate(&products, 0, m, 1.0, &mut total);
    Ok(total)
}

fn accumulate(products: &[Vec<f64>], coord: usize, remaining: usize, partial: f64, total: &mut f64) {
    if coord + 1 == products.len() {
        *total += partial * products[coord][remaining];
        return;
    }
    for k in 0..=remaining {
        accumulate(
            products,
            coord + 1,
            remaining - k,
            partial * products[coord][k],
            total,
        );
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(CacError::NonFinite(format!("point {v:?}")))
    }
}
