use serde::{Deserialize, Serialize};

/// Smooth low-pass cutoff applied to projection orders of the Hermite expansion.
///
/// Equals 1 on `[0, 1/2]`, 0 on `[1, inf)`, and in between follows the
/// infinitely differentiable smooth step
/// `g(1 - u) / (g(1 - u) + g(u))`, `g(s) = exp(-a/s)`, with `u = 2t - 1`.
///
/// The softened exponent `a = 0.3` (instead of the textbook 1) flattens the
/// spatial sidelobe of the kernel near `n|x - y| = 5` by roughly a factor 3.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterH;

impl FilterH {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.5 {
            return 1.0;
        }
        if t >= 1.0 {
            return 0.0;
        }
        let u = 2.0 * t - 1.0;
        let a = bump(1.0 - u);
        let b = bump(u);
        a / (a + b)
    }
}

const STEEPNESS: f64 = 0.3;

#[inline]
fn bump(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-STEEPNESS / s).exp()
    }
}
