//! Seeded synthetic datasets.
//!
//! All generators draw from `ChaCha8Rng::seed_from_u64(seed)` and the
//! `rand_distr` normal sampler, so a seed reproduces the same points on any
//! platform. Shapes for the figure analogs (`bottleneck`, `y_clusters`,
//! `close_gaussians`) are fixtures built to have the stated separation
//! properties, not reconstructions of published data.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Label};
use crate::error::{CacError, Result};
use crate::points::PointSet;

pub const GENERATOR_NAMES: &[&str] = &[
    "ball_line",
    "two_moons",
    "bottleneck",
    "y_clusters",
    "close_gaussians",
    "disjoint_circles",
    "two_gaussians",
    "uniform_square",
    "three_blobs_1d",
];

/// Generator name plus parameters, as named in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    pub points: usize,
    pub seed: u64,
    /// Gap for `ball_line`, jitter for `two_moons`; ignored elsewhere.
    #[serde(default)]
    pub param: Option<f64>,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    let m = spec.points;
    let seed = spec.seed;
    match spec.name.as_str() {
        "ball_line" => gen_ball_line(m, spec.param.unwrap_or(0.2), seed),
        "two_moons" => gen_two_moons(m, spec.param.unwrap_or(0.07), seed),
        "bottleneck" | "y_clusters" | "close_gaussians" => gen_figure_suite(&spec.name, m, seed),
        "disjoint_circles" => gen_disjoint_circles(m, seed),
        "two_gaussians" => gen_two_gaussians(m, spec.param.unwrap_or(4.0), seed),
        "uniform_square" => gen_uniform_square(m, seed),
        "three_blobs_1d" => gen_three_blobs_1d(m, seed),
        other => Err(CacError::UnknownGenerator(other.to_string())),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn standard_normal() -> Normal<f64> {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn finish(name: &str, coords: Vec<f64>, dim: usize, labels: Vec<Label>, seed: u64, provenance: &str) -> Result<Dataset> {
    let points = PointSet::new(dim, coords)?;
    let mut ds = Dataset::new(name, points, Some(labels))?;
    ds.seed = Some(seed);
    ds.provenance = provenance.to_string();
    Ok(ds)
}

/// Uniform disk of radius 1 at the origin (`ceil(2M/3)` points, class 1) and a
/// uniform horizontal unit segment starting at distance `delta` to its right
/// (class 2).
pub fn gen_ball_line(m: usize, delta: f64, seed: u64) -> Result<Dataset> {
    if m < 3 {
        return Err(CacError::InvalidParameter("ball_line needs M >= 3".into()));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(CacError::InvalidParameter(format!("gap must be >= 0, got {delta}")));
    }
    let mut r = rng(seed);
    let n_ball = (2 * m).div_ceil(3);
    let mut coords = Vec::with_capacity(2 * m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..n_ball {
        let rad = r.random::<f64>().sqrt();
        let ang = 2.0 * PI * r.random::<f64>();
        coords.extend_from_slice(&[rad * ang.cos(), rad * ang.sin()]);
        labels.push(1);
    }
    for _ in n_ball..m {
        let t: f64 = r.random();
        coords.extend_from_slice(&[1.0 + delta + t, 0.0]);
        labels.push(2);
    }
    finish("ball_line", coords, 2, labels, seed, &format!("disk + segment, gap {delta}"))
}

/// Two interleaved half circles of radius 1; the second is offset by `(1, -0.5)`
/// and flipped. Isotropic Gaussian jitter with standard deviation `noise`.
pub fn gen_two_moons(m: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if m < 2 {
        return Err(CacError::InvalidParameter("two_moons needs M >= 2".into()));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(CacError::InvalidParameter(format!("noise must be >= 0, got {noise}")));
    }
    let mut r = rng(seed);
    let normal = standard_normal();
    let n_upper = m.div_ceil(2);
    let mut coords = Vec::with_capacity(2 * m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let t = PI * r.random::<f64>();
        let (x, y, label) = if i < n_upper {
            (t.cos(), t.sin(), 1)
        } else {
            (1.0 - t.cos(), 0.5 - t.sin(), 2)
        };
        let (jx, jy) = if noise > 0.0 {
            (noise * normal.sample(&mut r), noise * normal.sample(&mut r))
        } else {
            (0.0, 0.0)
        };
        coords.extend_from_slice(&[x + jx, y + jy]);
        labels.push(label);
    }
    finish("two_moons", coords, 2, labels, seed, &format!("two moons, noise {noise}"))
}

pub fn gen_figure_suite(name: &str, m: usize, seed: u64) -> Result<Dataset> {
    match name {
        "bottleneck" => gen_bottleneck(m, seed),
        "y_clusters" => gen_y_clusters(m, seed),
        "close_gaussians" => gen_close_gaussians(m, seed),
        other => Err(CacError::UnknownGenerator(other.to_string())),
    }
}

/// Two Gaussian cores at `(+-2, 0)` (70% of each class) whose tails run along
/// the x-axis past the origin, so the classes interpenetrate there: no
/// minimal separation. Tail density falls off linearly toward the far end.
fn gen_bottleneck(m: usize, seed: u64) -> Result<Dataset> {
    if m < 2 {
        return Err(CacError::InvalidParameter("bottleneck needs M >= 2".into()));
    }
    let mut r = rng(seed);
    let normal = standard_normal();
    let n_first = m.div_ceil(2);
    let mut coords = Vec::with_capacity(2 * m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let (side, label) = if i < n_first { (-1.0, 1) } else { (1.0, 2) };
        let in_core = r.random::<f64>() < 0.7;
        let (x, y) = if in_core {
            (
                side * 2.0 + 0.45 * normal.sample(&mut r),
                0.45 * normal.sample(&mut r),
            )
        } else {
            // tail from the core edge to the origin
            let t = -0.1 + 1.1 * r.random::<f64>().sqrt();
            (side * 2.0 * t, 0.1 * normal.sample(&mut r))
        };
        coords.extend_from_slice(&[x, y]);
        labels.push(label);
    }
    finish("bottleneck", coords, 2, labels, seed, "bottleneck analog: tails meet at origin")
}

/// Three straight arms at 90, 210 and 330 degrees, uniform along radius
/// 0.35..2.0 with small Gaussian width; nearly constant density and small
/// separation near the origin.
fn gen_y_clusters(m: usize, seed: u64) -> Result<Dataset> {
    if m < 3 {
        return Err(CacError::InvalidParameter("y_clusters needs M >= 3".into()));
    }
    let mut r = rng(seed);
    let normal = standard_normal();
    let mut coords = Vec::with_capacity(2 * m);
    let mut labels = Vec::with_capacity(m);
    let per = m.div_ceil(3);
    for i in 0..m {
        let arm = (i / per).min(2);
        let angle = (90.0 + 120.0 * arm as f64).to_radians();
        let (dx, dy) = (angle.cos(), angle.sin());
        let t = 0.35 + 1.65 * r.random::<f64>();
        let w = 0.06 * normal.sample(&mut r);
        coords.extend_from_slice(&[t * dx - w * dy, t * dy + w * dx]);
        labels.push(arm as Label + 1);
    }
    finish("y_clusters", coords, 2, labels, seed, "Y analog: three arms near the origin")
}

/// Two wide horizontal Gaussians (sd 1.5 along x, 0.15 along y) centred at
/// `y = +-0.6`, with the across-axis offset truncated at 3 sd so a gap of 0.3
/// remains between them.
fn gen_close_gaussians(m: usize, seed: u64) -> Result<Dataset> {
    if m < 2 {
        return Err(CacError::InvalidParameter("close_gaussians needs M >= 2".into()));
    }
    let mut r = rng(seed);
    let normal = standard_normal();
    let n_first = m.div_ceil(2);
    let mut coords = Vec::with_capacity(2 * m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let (cy, label) = if i < n_first { (0.6, 1) } else { (-0.6, 2) };
        let x = loop {
            let v = normal.sample(&mut r);
            if v.abs() <= 2.5 {
                break 1.5 * v;
            }
        };
        let y = loop {
            let v = normal.sample(&mut r);
            if v.abs() <= 3.0 {
                break cy + 0.15 * v;
            }
        };
        coords.extend_from_slice(&[x, y]);
        labels.push(label);
    }
    finish("close_gaussians", coords, 2, labels, seed, "two wide Gaussians, gap 0.3")
}

/// Two disjoint circles: radius 1 centred at `(-1.6, 0)` and radius 0.5
/// centred at `(1.2, 0.3)`, points uniform in arc length.
pub fn gen_disjoint_circles(m: usize, seed: u64) -> Result<Dataset> {
    if m < 2 {
        return Err(CacError::InvalidParameter("disjoint_circles needs M >= 2".into()));
    }
    let mut r = rng(seed);
    let circles = [((-1.6, 0.0), 1.0), ((1.2, 0.3), 0.5)];
    let total: f64 = circles.iter().map(|c| c.1).sum();
    let n_first = ((m as f64) * circles[0].1 / total).round() as usize;
    let mut coords = Vec::with_capacity(2 * m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let k = usize::from(i >= n_first);
        let ((cx, cy), rad) = circles[k];
        let a = 2.0 * PI * r.random::<f64>();
        coords.extend_from_slice(&[cx + rad * a.cos(), cy + rad * a.sin()]);
        labels.push(k as Label + 1);
    }
    finish("disjoint_circles", coords, 2, labels, seed, "two disjoint circles")
}

/// Two isotropic unit-variance-scaled Gaussians (sd 0.3) whose centres are
/// `separation` standard deviations apart along x.
pub fn gen_two_gaussians(m: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if m < 2 {
        return Err(CacError::InvalidParameter("two_gaussians needs M >= 2".into()));
    }
    let sd = 0.3;
    let half = 0.5 * separation * sd;
    let mut r = rng(seed);
    let normal = standard_normal();
    let n_first = m.div_ceil(2);
    let mut coords = Vec::with_capacity(2 * m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let (cx, label) = if i < n_first { (-half, 1) } else { (half, 2) };
        coords.extend_from_slice(&[cx + sd * normal.sample(&mut r), sd * normal.sample(&mut r)]);
        labels.push(label);
    }
    finish("two_gaussians", coords, 2, labels, seed, &format!("two Gaussians, {separation} sd apart"))
}

/// Uniform sample of the unit square `[0, 1]^2`, single class.
pub fn gen_uniform_square(m: usize, seed: u64) -> Result<Dataset> {
    if m < 1 {
        return Err(CacError::InvalidParameter("uniform_square needs M >= 1".into()));
    }
    let mut r = rng(seed);
    let coords: Vec<f64> = (0..2 * m).map(|_| r.random::<f64>()).collect();
    finish("uniform_square", coords, 2, vec![1; m], seed, "uniform on [0,1]^2")
}

/// One-dimensional fixture: blobs 1 and 2 are uniform intervals joined by a
/// sparse bridge of evenly spaced points (spacing `0.4 / (M / 100)`, wider
/// than the typical gap inside a blob), blob 3 is far away.
pub fn gen_three_blobs_1d(m: usize, seed: u64) -> Result<Dataset> {
    if m < 3 {
        return Err(CacError::InvalidParameter("three_blobs_1d needs M >= 3".into()));
    }
    let mut r = rng(seed);
    let n_bridge = (m / 100).max(1);
    let n_blob = (m - n_bridge) / 3;
    let mut coords = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    let blobs = [(-1.5, -0.9, 1), (-0.5, 0.1, 2), (1.2, 1.8, 3)];
    for (k, &(lo, hi, label)) in blobs.iter().enumerate() {
        let count = if k == 2 { m - n_bridge - 2 * n_blob } else { n_blob };
        for _ in 0..count {
            coords.push(lo + (hi - lo) * r.random::<f64>());
            labels.push(label);
        }
    }
    // bridge between blobs 1 and 2, labeled by side of the midpoint
    for k in 0..n_bridge {
        let x = -0.9 + 0.4 * (k as f64 + 0.5) / n_bridge as f64;
        coords.push(x);
        labels.push(if x < -0.7 { 1 } else { 2 });
    }
    finish("three_blobs_1d", coords, 1, labels, seed, "three 1D blobs, first two bridged")
}
