//! Empirical F-scores and accuracy summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{CacError, Result};

/// Best-match score `2 max_k |C ∩ L_k| / (|C| + |L_k|)` of one cluster.
pub fn cluster_f(cluster: &[usize], label_sets: &[Vec<usize>]) -> Result<f64> {
    if cluster.is_empty() {
        return Err(CacError::InvalidInput("cluster_f of an empty cluster".into()));
    }
    let mut sorted = cluster.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best = 0.0_f64;
    for set in label_sets {
        let overlap = set.iter().filter(|i| sorted.binary_search(i).is_ok()).count();
        if overlap > 0 {
            best = best.max(2.0 * overlap as f64 / (sorted.len() + set.len()) as f64);
        }
    }
    Ok(best)
}

/// Size-weighted mean of [`cluster_f`] over disjoint clusters.
pub fn micro_f(clusters: &[Vec<usize>], label_sets: &[Vec<usize>]) -> Result<f64> {
    let mut seen = std::collections::HashSet::new();
    let mut weighted = 0.0;
    let mut total = 0usize;
    for c in clusters {
        if !c.iter().all(|i| seen.insert(*i)) {
            return Err(CacError::InvalidInput("clusters overlap".into()));
        }
        weighted += c.len() as f64 * cluster_f(c, label_sets)?;
        total += c.len();
    }
    if total == 0 {
        return Err(CacError::InvalidInput("micro_f needs at least one point".into()));
    }
    Ok(weighted / total as f64)
}

/// Index sets per distinct label, in ascending label order.
pub fn label_sets(labels: &[Label]) -> Vec<Vec<usize>> {
    group(labels.iter().enumerate().map(|(i, &l)| (i, l)))
}

/// Index sets per assigned label; unassigned points are left out.
pub fn assignment_clusters(assignments: &[Option<Label>]) -> Vec<Vec<usize>> {
    group(assignments.iter().enumerate().filter_map(|(i, l)| l.map(|l| (i, l))))
}

fn group(items: impl Iterator<Item = (usize, Label)>) -> Vec<Vec<usize>> {
    let mut by_label: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, l) in items {
        by_label.entry(l).or_default().push(i);
    }
    by_label.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    pub label: Label,
    pub size: usize,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub micro_f: f64,
    pub accuracy: f64,
    pub worst_class_accuracy: f64,
    pub per_cluster_f: Vec<ClusterScore>,
    /// Accuracy on the confident set only (0 when it is empty).
    pub confident_accuracy: f64,
    pub confident_fraction: f64,
    /// Points left without a prediction; counted as errors above.
    pub unassigned: usize,
}

/// Scores predictions against ground truth. Labels are compared as-is, so
/// predictions must use the truth's label ids (as an oracle supplies them).
pub fn accuracy_suite(assignments: &[Option<Label>], truth: &[Label], confident: &[bool]) -> Result<Scorecard> {
    let m = truth.len();
    if assignments.len() != m || confident.len() != m {
        return Err(CacError::InvalidInput(format!(
            "lengths differ: {} assignments, {} truth, {} confident flags",
            assignments.len(),
            m,
            confident.len()
        )));
    }
    if m == 0 {
        return Err(CacError::InvalidInput("nothing to score".into()));
    }
    let correct = |i: usize| assignments[i] == Some(truth[i]);
    let hits = (0..m).filter(|&i| correct(i)).count();

    let mut per_class: BTreeMap<Label, (usize, usize)> = BTreeMap::new();
    for i in 0..m {
        let e = per_class.entry(truth[i]).or_default();
        e.0 += usize::from(correct(i));
        e.1 += 1;
    }
    let worst_class_accuracy = per_class
        .values()
        .map(|&(h, n)| h as f64 / n as f64)
        .fold(1.0_f64, f64::min);

    let conf: Vec<usize> = (0..m).filter(|&i| confident[i]).collect();
    let confident_accuracy = if conf.is_empty() {
        0.0
    } else {
        conf.iter().filter(|&&i| correct(i)).count() as f64 / conf.len() as f64
    };

    let truth_sets = label_sets(truth);
    let mut by_label: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, l) in assignments.iter().enumerate() {
        if let Some(l) = l {
            by_label.entry(*l).or_default().push(i);
        }
    }
    let mut per_cluster_f = Vec::with_capacity(by_label.len());
    let mut weighted = 0.0;
    let mut assigned = 0;
    for (label, members) in &by_label {
        let f = cluster_f(members, &truth_sets)?;
        weighted += f * members.len() as f64;
        assigned += members.len();
        per_cluster_f.push(ClusterScore {
            label: *label,
            size: members.len(),
            f,
        });
    }
    Ok(Scorecard {
        micro_f: if assigned == 0 { 0.0 } else { weighted / assigned as f64 },
        accuracy: hits as f64 / m as f64,
        worst_class_accuracy,
        per_cluster_f,
        confident_accuracy,
        confident_fraction: conf.len() as f64 / m as f64,
        unassigned: assignments.iter().filter(|a| a.is_none()).count(),
    })
}
