//! Univariate Hermite functions and the scalar coefficients used by the
//! Mehler reduction of the multivariate projection kernels.

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{CacError, Result};

/// `pi^{-1/4}`
pub const PI_POW_M14: f64 = 0.751_125_544_464_942_5;

/// Recurrence coefficients `(sqrt(2/j), sqrt((j-1)/j))` are tabulated up to this degree.
const TABLE_DEGREE: usize = 4096;

/// Above this value of `x^2 / 2` the seed `psi_0` would approach the
/// subnormal range, so the recurrence switches to a log-scaled form.
const PLAIN_EXPONENT_LIMIT: f64 = 600.0;
const RESCALE_AT: f64 = 1e250;
const LN_RESCALE: f64 = 575.646_273_248_511_4; // 250 ln 10

/// Values `psi_0(x), ..., psi_L(x)` of the weighted Hermite functions at one abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiTable {
    pub x: f64,
    pub values: Vec<f64>,
}

impl PsiTable {
    pub fn max_degree(&self) -> usize {
        self.values.len() - 1
    }
}

fn recurrence_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=TABLE_DEGREE)
            .map(|j| {
                if j < 2 {
                    (0.0, 0.0)
                } else {
                    let jf = j as f64;
                    ((2.0 / jf).sqrt(), ((jf - 1.0) / jf).sqrt())
                }
            })
            .collect()
    })
}

#[inline]
fn coefficients(j: usize) -> (f64, f64) {
    if j <= TABLE_DEGREE {
        recurrence_table()[j]
    } else {
        let jf = j as f64;
        ((2.0 / jf).sqrt(), ((jf - 1.0) / jf).sqrt())
    }
}

/// Evaluates `psi_0(x) .. psi_{max_degree}(x)`.
pub fn eval_psi_sequence(x: f64, max_degree: usize) -> Result<PsiTable> {
    if !x.is_finite() {
        return Err(CacError::NonFinite(format!("Hermite abscissa {x}")));
    }
    let mut values = vec![0.0; max_degree + 1];
    fill_psi(x, &mut values);
    Ok(PsiTable { x, values })
}

/// Fills `out[j] = psi_j(x)` for `j < out.len()` using the three-term
/// recurrence on the weighted functions
/// `psi_j = sqrt(2/j) x psi_{j-1} - sqrt((j-1)/j) psi_{j-2}`.
///
/// `x` must be finite.
pub fn fill_psi(x: f64, out: &mut [f64]) {
    let len = out.len();
    if len == 0 {
        return;
    }
    let half_sq = 0.5 * x * x;
    if half_sq < PLAIN_EXPONENT_LIMIT {
        out[0] = PI_POW_M14 * (-half_sq).exp();
        if len > 1 {
            out[1] = std::f64::consts::SQRT_2 * x * out[0];
        }
        for j in 2..len {
            let (a, b) = coefficients(j);
            out[j] = a * x * out[j - 1] - b * out[j - 2];
        }
    } else {
        fill_psi_scaled(x, out);
    }
}

/// Same recurrence carried with a separate log scale, for abscissae where
/// `exp(-x^2/2)` underflows while higher-degree values are still representable.
fn fill_psi_scaled(x: f64, out: &mut [f64]) {
    let len = out.len();
    let mut log_scale = -0.5 * x * x;
    let mut prev2 = PI_POW_M14;
    let mut prev1 = std::f64::consts::SQRT_2 * PI_POW_M14 * x;
    let unscale = |v: f64, ls: f64| -> f64 {
        if v == 0.0 {
            0.0
        } else {
            v.signum() * (ls + v.abs().ln()).exp()
        }
    };
    out[0] = unscale(prev2, log_scale);
    if len > 1 {
        out[1] = unscale(prev1, log_scale);
    }
    for j in 2..len {
        let (a, b) = coefficients(j);
        let mut cur = a * x * prev1 - b * prev2;
        if cur.abs() > RESCALE_AT {
            cur /= RESCALE_AT;
            prev1 /= RESCALE_AT;
            log_scale += LN_RESCALE;
        }
        out[j] = unscale(cur, log_scale);
        prev2 = prev1;
        prev1 = cur;
    }
}

/// `psi_l(0)`: zero for odd `l`, otherwise
/// `pi^{-1/4} (-1)^{l/2} sqrt(l!) / (2^{l/2} (l/2)!)`, evaluated in log space.
pub fn psi_at_zero(l: usize) -> f64 {
    if l % 2 == 1 {
        return 0.0;
    }
    let half = (l / 2) as f64;
    let log_mag = -0.25 * PI.ln() + 0.5 * ln_gamma(l as f64 + 1.0)
        - half * LN_2
        - ln_gamma(half + 1.0);
    let sign = if (l / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * log_mag.exp()
}

/// Coefficient `D_{q-2; r}` of the Mehler reduction: the sum of
/// `psi_k(0)^2` over multi-indices `|k|_1 = r` in the `q - 2` directions
/// orthogonal to the plane spanned by the two arguments.
///
/// For `q >= 3` and even `r` this is
/// `pi^{1-q/2} Gamma(q/2 + r/2 - 1) / (Gamma(q/2 - 1) (r/2)!)`, zero for odd `r`.
/// For `q = 2` the orthogonal complement is trivial and the coefficient is
/// the Kronecker delta in `r`. `q = 1` has no plane and returns 1; that case
/// is evaluated by the direct tensor sum instead.
pub fn d_coefficient(q: usize, r: usize) -> f64 {
    match q {
        0 | 1 => 1.0,
        2 => {
            if r == 0 {
                1.0
            } else {
                0.0
            }
        }
        _ => {
            if r % 2 == 1 {
                return 0.0;
            }
            let qh = q as f64 / 2.0;
            let rh = (r / 2) as f64;
            let log_val = (1.0 - qh) * PI.ln() + ln_gamma(qh + rh - 1.0)
                - ln_gamma(qh - 1.0)
                - ln_gamma(rh + 1.0);
            log_val.exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn seed_values() {
        let t = eval_psi_sequence(0.0, 0).unwrap();
        assert_relative_eq!(t.values[0], PI.powf(-0.25), max_relative = 1e-15);
        assert_relative_eq!(t.values[0], 0.751_125_5, epsilon = 1e-7);

        let t = eval_psi_sequence(0.0, 2).unwrap();
        assert_eq!(t.values[1], 0.0);
        // psi_2(0) = (sqrt(2/2)*0*psi_1 - sqrt(1/2) psi_0) = -pi^{-1/4}/sqrt(2)
        assert_relative_eq!(t.values[2], -PI_POW_M14 / 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(t.values[2], -0.531_126, epsilon = 1e-6);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(eval_psi_sequence(f64::NAN, 3).is_err());
        assert!(eval_psi_sequence(f64::INFINITY, 3).is_err());
    }

    #[test]
    fn psi_zero_closed_form_matches_recurrence() {
        assert_eq!(psi_at_zero(1), 0.0);
        assert_relative_eq!(psi_at_zero(0), 0.751_126, epsilon = 1e-6);
        assert_relative_eq!(psi_at_zero(2), -0.531_126, epsilon = 1e-6);
        let t = eval_psi_sequence(0.0, 200).unwrap();
        for (l, v) in t.values.iter().enumerate() {
            assert!((psi_at_zero(l) - v).abs() <= 1e-13, "l = {l}");
        }
    }

    #[test]
    fn d_coefficient_cases() {
        assert_eq!(d_coefficient(3, 1), 0.0);
        assert_relative_eq!(d_coefficient(3, 0), PI.powf(-0.5), max_relative = 1e-14);
        assert_relative_eq!(d_coefficient(3, 0), 0.564_190, epsilon = 1e-6);
        assert_eq!(d_coefficient(2, 0), 1.0);
        assert_eq!(d_coefficient(2, 5), 0.0);
        assert_eq!(d_coefficient(2, 4), 0.0);
        // q = 3: single orthogonal direction, so D = psi_r(0)^2
        for r in 0..40 {
            assert_relative_eq!(
                d_coefficient(3, r),
                psi_at_zero(r).powi(2),
                max_relative = 1e-12,
                epsilon = 1e-300
            );
        }
        // q = 4: D_{2; r} = 1/pi for every even r
        for r in (0..40).step_by(2) {
            assert_relative_eq!(d_coefficient(4, r), 1.0 / PI, max_relative = 1e-12);
        }
    }

    #[test]
    fn table_finite_on_wide_range() {
        let l = 64;
        for i in -1280..=1280 {
            let x = i as f64 * 0.1;
            let t = eval_psi_sequence(x, l).unwrap();
            assert!(t.values.iter().all(|v| v.is_finite()), "x = {x}");
        }
    }

    #[test]
    fn scaled_path_agrees_with_plain_path_near_switch() {
        // just below the switch, run both paths and compare
        let x = (2.0 * PLAIN_EXPONENT_LIMIT).sqrt() - 1e-3;
        let mut plain = vec![0.0; 300];
        let mut scaled = vec![0.0; 300];
        fill_psi(x, &mut plain);
        fill_psi_scaled(x, &mut scaled);
        for (j, (a, b)) in plain.iter().zip(&scaled).enumerate() {
            let tol = 1e-12 * a.abs().max(1e-300);
            assert!((a - b).abs() <= tol, "j = {j}: {a} vs {b}");
        }
    }

    #[test]
    fn scaled_path_recovers_large_degree_values() {
        // at x = 40, psi_0 underflows to ~1e-348 but psi_1000 is O(0.1)
        let t = eval_psi_sequence(40.0, 1000).unwrap();
        assert!(t.values[0] < 1e-300);
        assert!(t.values[1000].abs() > 1e-4);
        assert!(t.values.iter().all(|v| v.is_finite() && v.abs() <= 1.0));
    }
}
