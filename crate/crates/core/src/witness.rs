//! Witness-function classification of points outside the confident set.
//!
//! Each class `k` gets `F_k(x) = mean over S_k of Phi_n(x, x_j)` (first power,
//! so values are signed); a point takes the class with the largest value.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{CacError, Result};
use crate::kernel::{HermiteKernel, MehlerWorkspace};
use crate::points::PointSet;

/// Per-class confident sets, classes in ascending label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessModel {
    classes: Vec<Label>,
    sets: Vec<Vec<usize>>,
}

impl WitnessModel {
    pub fn new(classes: Vec<Label>, sets: Vec<Vec<usize>>) -> Result<Self> {
        if classes.is_empty() || classes.len() != sets.len() {
            return Err(CacError::InvalidModel(format!(
                "{} classes for {} sets",
                classes.len(),
                sets.len()
            )));
        }
        if classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CacError::InvalidModel("class labels must be strictly ascending".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (c, s) in classes.iter().zip(&sets) {
            if s.is_empty() {
                return Err(CacError::InvalidModel(format!("class {c} has no confident points")));
            }
            if !s.iter().all(|i| seen.insert(*i)) {
                return Err(CacError::InvalidModel("class sets overlap".into()));
            }
        }
        Ok(Self { classes, sets })
    }

    /// Groups the points with `eligible[i]` by their assigned label.
    pub fn from_assignments(assignments: &[Option<Label>], eligible: &[bool]) -> Result<Self> {
        let mut by_label = std::collections::BTreeMap::<Label, Vec<usize>>::new();
        for (i, (a, &ok)) in assignments.iter().zip(eligible).enumerate() {
            if let (Some(l), true) = (a, ok) {
                by_label.entry(*l).or_default().push(i);
            }
        }
        let (classes, sets) = by_label.into_iter().unzip();
        Self::new(classes, sets)
    }

    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    fn check(&self, samples: &PointSet) -> Result<()> {
        let len = samples.len();
        if self.sets.iter().flatten().any(|&i| i >= len) {
            return Err(CacError::InvalidModel(format!(
                "confident index outside the {len} samples"
            )));
        }
        Ok(())
    }

    /// Pooled confident points and the class slot of each.
    fn pooled(&self) -> (Vec<usize>, Vec<usize>) {
        let mut points = Vec::new();
        let mut owner = Vec::new();
        for (k, s) in self.sets.iter().enumerate() {
            points.extend_from_slice(s);
            owner.extend(std::iter::repeat_n(k, s.len()));
        }
        (points, owner)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    /// Top witness value minus the runner-up (0 with a single class).
    pub margin: f64,
    pub tie: bool,
}

/// Output record for one classified point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub index: usize,
    pub predicted: Label,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub tie: bool,
}

fn kernel_row(x: &[f64], pooled: &[usize], samples: &PointSet, kernel: &HermiteKernel, ws: &mut MehlerWorkspace) -> Vec<f64> {
    pooled.iter().map(|&j| kernel.eval_with(ws, x, samples.row(j))).collect()
}

fn class_means(row: &[f64], owner: &[usize], sizes: &[usize]) -> Vec<f64> {
    let mut sums = vec![0.0; sizes.len()];
    for (v, &k) in row.iter().zip(owner) {
        sums[k] += v;
    }
    sums.iter().zip(sizes).map(|(s, &n)| s / n as f64).collect()
}

/// Relative gap below which two witness values count as tied. Mirror-image
/// configurations evaluate the kernel in different argument orders, so exact
/// equality is too strict.
const TIE_TOLERANCE: f64 = 1e-12;

/// Argmax slot (lowest among ties), margin, tie flag.
fn decide(values: &[f64]) -> (usize, f64, bool) {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOLERANCE * top.abs().max(f64::MIN_POSITIVE);
    let best = values
        .iter()
        .position(|&v| v >= top - tol)
        .expect("at least one class");
    let runner_up = values
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != best)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if runner_up == f64::NEG_INFINITY {
        return (best, 0.0, false);
    }
    let margin = (values[best] - runner_up).max(0.0);
    (best, margin, runner_up >= top - tol)
}

pub fn witness_values(x: &[f64], model: &WitnessModel, samples: &PointSet, kernel: &HermiteKernel) -> Result<Vec<f64>> {
    kernel.check_point(x)?;
    kernel.check_points(samples)?;
    model.check(samples)?;
    let (pooled, owner) = model.pooled();
    let sizes: Vec<usize> = model.sets.iter().map(Vec::len).collect();
    let row = kernel_row(x, &pooled, samples, kernel, &mut kernel.workspace());
    Ok(class_means(&row, &owner, &sizes))
}

pub fn classify(x: &[f64], model: &WitnessModel, samples: &PointSet, kernel: &HermiteKernel) -> Result<Classification> {
    let values = witness_values(x, model, samples, kernel)?;
    let (k, margin, tie) = decide(&values);
    Ok(Classification {
        label: model.classes[k],
        margin,
        tie,
    })
}

fn permutation_p(row: &[f64], owner: &[usize], sizes: &[usize], observed: f64, permutations: usize, seed: u64, stream: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut shuffled = owner.to_vec();
    let mut at_least = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        let (_, margin, _) = decide(&class_means(row, &shuffled, sizes));
        if margin >= observed {
            at_least += 1;
        }
    }
    (1 + at_least) as f64 / (permutations + 1) as f64
}

/// Permutation p-value of the witness margin at `x`: class memberships of
/// the pooled confident points are reshuffled (sizes kept) `permutations`
/// times using the RNG stream `stream` of `seed`. A single class gives 1.
pub fn certainty(
    x: &[f64],
    model: &WitnessModel,
    samples: &PointSet,
    kernel: &HermiteKernel,
    permutations: usize,
    seed: u64,
    stream: u64,
) -> Result<f64> {
    if permutations == 0 {
        return Err(CacError::InvalidParameter("certainty needs at least one permutation".into()));
    }
    kernel.check_point(x)?;
    kernel.check_points(samples)?;
    model.check(samples)?;
    if model.class_count() == 1 {
        return Ok(1.0);
    }
    let (pooled, owner) = model.pooled();
    let sizes: Vec<usize> = model.sets.iter().map(Vec::len).collect();
    let row = kernel_row(x, &pooled, samples, kernel, &mut kernel.workspace());
    let (_, observed, _) = decide(&class_means(&row, &owner, &sizes));
    Ok(permutation_p(&row, &owner, &sizes, observed, permutations, seed, stream))
}

/// Classifies `indices` (rows of `samples`) in parallel. With
/// `certainty = Some((B, seed))` each point also gets a p-value drawn from
/// the RNG stream equal to its index.
pub fn classify_points(
    indices: &[usize],
    model: &WitnessModel,
    samples: &PointSet,
    kernel: &HermiteKernel,
    certainty: Option<(usize, u64)>,
) -> Result<Vec<WitnessRecord>> {
    kernel.check_points(samples)?;
    model.check(samples)?;
    if let Some(&bad) = indices.iter().find(|&&i| i >= samples.len()) {
        return Err(CacError::InvalidInput(format!("point {bad} out of range")));
    }
    if certainty.is_some_and(|(b, _)| b == 0) {
        return Err(CacError::InvalidParameter("certainty needs at least one permutation".into()));
    }
    let (pooled, owner) = model.pooled();
    let sizes: Vec<usize> = model.sets.iter().map(Vec::len).collect();
    Ok(indices
        .par_iter()
        .map_init(
            || kernel.workspace(),
            |ws, &i| {
                let row = kernel_row(samples.row(i), &pooled, samples, kernel, ws);
                let (k, margin, tie) = decide(&class_means(&row, &owner, &sizes));
                let p_value = certainty.map(|(b, seed)| {
                    if sizes.len() == 1 {
                        1.0
                    } else {
                        permutation_p(&row, &owner, &sizes, margin, b, seed, i as u64)
                    }
                });
                WitnessRecord {
                    index: i,
                    predicted: model.classes[k],
                    margin,
                    p_value,
                    tie,
                }
            },
        )
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generators::gen_two_gaussians;
    use crate::kernel::KernelConfig;

    fn kernel(n: f64) -> HermiteKernel {
        HermiteKernel::new(KernelConfig::new(n, 2, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(WitnessModel::new(vec![1, 2], vec![vec![0], vec![]]).is_err());
        assert!(WitnessModel::new(vec![1, 2], vec![vec![0], vec![0]]).is_err());
        assert!(WitnessModel::new(vec![2, 1], vec![vec![0], vec![1]]).is_err());
        assert!(WitnessModel::new(vec![], vec![]).is_err());
        let m = WitnessModel::from_assignments(&[Some(2), None, Some(1), Some(2)], &[true, true, true, false]).unwrap();
        assert_eq!(m.classes(), &[1, 2]);
        assert_eq!(m.sets(), &[vec![2], vec![0]]);
    }

    #[test]
    fn sole_member_gives_diagonal_and_duplicates_do_not_matter() {
        let k = kernel(4.0);
        let p = PointSet::from_rows(&[[0.2, 0.1], [0.2, 0.1], [1.5, -0.5]]).unwrap();
        let single = WitnessModel::new(vec![1], vec![vec![0]]).unwrap();
        let v = witness_values(p.row(0), &single, &p, &k).unwrap();
        let diag = k.eval(p.row(0), p.row(0)).unwrap();
        assert_eq!(v, vec![diag]);
        assert!(diag > 0.0);
        let doubled = WitnessModel::new(vec![1], vec![vec![0, 1]]).unwrap();
        assert_eq!(witness_values(p.row(2), &doubled, &p, &k).unwrap(), witness_values(p.row(2), &single, &p, &k).unwrap());
    }

    #[test]
    fn single_class_always_wins_with_p_one() {
        let k = kernel(3.0);
        let p = PointSet::from_rows(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        let m = WitnessModel::new(vec![1], vec![vec![0]]).unwrap();
        let c = classify(p.row(1), &m, &p, &k).unwrap();
        assert_eq!(c.label, 1);
        assert!(!c.tie);
        assert_eq!(certainty(p.row(1), &m, &p, &k, 50, 1, 0).unwrap(), 1.0);
    }

    #[test]
    fn mirrored_classes_tie_on_the_axis() {
        let k = kernel(4.0);
        let p = PointSet::from_rows(&[[-1.0, 0.3], [1.0, 0.3], [-1.2, -0.4], [1.2, -0.4], [0.0, 0.7]]).unwrap();
        let m = WitnessModel::new(vec![3, 5], vec![vec![0, 2], vec![1, 3]]).unwrap();
        let c = classify(p.row(4), &m, &p, &k).unwrap();
        assert!(c.tie, "margin {}", c.margin);
        assert_eq!(c.label, 3);
    }

    #[test]
    fn classification_ignores_order_within_sets() {
        let ds = gen_two_gaussians(60, 6.0, 3).unwrap();
        let k = kernel(4.0);
        let labels = ds.labels.as_ref().unwrap();
        let a: Vec<usize> = (0..60).filter(|&i| labels[i] == 1).collect();
        let b: Vec<usize> = (0..60).filter(|&i| labels[i] == 2).collect();
        let m1 = WitnessModel::new(vec![1, 2], vec![a.clone(), b.clone()]).unwrap();
        let m2 = WitnessModel::new(vec![1, 2], vec![a.iter().rev().copied().collect(), b.iter().rev().copied().collect()]).unwrap();
        for i in 0..60 {
            let c1 = classify(ds.points.row(i), &m1, &ds.points, &k).unwrap();
            let c2 = classify(ds.points.row(i), &m2, &ds.points, &k).unwrap();
            assert_eq!(c1.label, c2.label);
        }
    }

    #[test]
    fn batch_matches_scalar_path() {
        let ds = gen_two_gaussians(40, 4.0, 8).unwrap();
        let k = kernel(4.0);
        let labels = ds.labels.as_ref().unwrap();
        let assigned: Vec<Option<Label>> = labels.iter().map(|&l| Some(l)).collect();
        let eligible: Vec<bool> = (0..40).map(|i| i % 3 != 0).collect();
        let m = WitnessModel::from_assignments(&assigned, &eligible).unwrap();
        let idx: Vec<usize> = (0..40).step_by(3).collect();
        let recs = classify_points(&idx, &m, &ds.points, &k, Some((30, 11))).unwrap();
        for r in &recs {
            let c = classify(ds.points.row(r.index), &m, &ds.points, &k).unwrap();
            assert_eq!((r.predicted, r.tie), (c.label, c.tie));
            assert_eq!(r.margin, c.margin);
            let p = certainty(ds.points.row(r.index), &m, &ds.points, &k, 30, 11, r.index as u64).unwrap();
            assert_eq!(r.p_value, Some(p));
        }
    }

    fn two_gaussian_model(sep: f64, seed: u64) -> (PointSet, Vec<Label>, WitnessModel) {
        let ds = gen_two_gaussians(200, sep, seed).unwrap();
        let (p, _) = crate::data::standardize(&ds.points, 4.0, 0.5).unwrap();
        let labels = ds.labels.unwrap();
        let assigned: Vec<Option<Label>> = labels.iter().map(|&l| Some(l)).collect();
        let m = WitnessModel::from_assignments(&assigned, &vec![true; labels.len()]).unwrap();
        (p, labels, m)
    }

    #[test]
    fn clear_class_point_is_certain() {
        let (p, labels, m) = two_gaussian_model(6.0, 21);
        let k = kernel(4.0);
        // the point closest to the class-1 centroid
        let ones: Vec<usize> = (0..p.len()).filter(|&i| labels[i] == 1).collect();
        let mut centre = [0.0; 2];
        for &i in &ones {
            centre[0] += p.row(i)[0] / ones.len() as f64;
            centre[1] += p.row(i)[1] / ones.len() as f64;
        }
        let c = classify(&centre, &m, &p, &k).unwrap();
        assert_eq!(c.label, 1);
        let pv = certainty(&centre, &m, &p, &k, 200, 42, 0).unwrap();
        assert!(pv <= 0.05, "p = {pv}");
    }

    #[test]
    fn equidistant_point_is_uncertain() {
        let rows: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.37;
                let side = if i % 2 == 0 { -1.0 } else { 1.0 };
                [side * (0.8 + 0.2 * t.sin()), 0.4 * t.cos()]
            })
            .collect();
        let p = PointSet::from_rows(&rows).unwrap();
        let left: Vec<usize> = (0..40).step_by(2).collect();
        let right: Vec<usize> = (1..40).step_by(2).collect();
        let m = WitnessModel::new(vec![1, 2], vec![left, right]).unwrap();
        let k = kernel(4.0);
        let pv = certainty(&[0.0, 0.0], &m, &p, &k, 200, 42, 0).unwrap();
        assert!(pv >= 0.2, "p = {pv}");
    }

    #[test]
    fn witness_agrees_with_labels_on_confident_set() {
        let (p, labels, _) = two_gaussian_model(6.0, 5);
        let k = kernel(4.0);
        let field = crate::density::density_field(&p, &k).unwrap();
        let support = crate::density::support_set(&field, 0.1).unwrap();
        let assigned: Vec<Option<Label>> = labels.iter().map(|&l| Some(l)).collect();
        let m = WitnessModel::from_assignments(&assigned, &support.mask(p.len())).unwrap();
        assert!(support.members.len() > 150);
        let recs = classify_points(&support.members, &m, &p, &k, None).unwrap();
        for r in recs {
            assert_eq!(r.predicted, labels[r.index], "point {}", r.index);
        }
    }
}
