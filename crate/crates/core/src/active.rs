//! The multiscale cautious active clustering loop.
//!
//! At each degree `n` the support set `{i : density_i >= theta * max}` is
//! split into connected components of the graph with edges `|x_i - x_j| < eta/2`,
//! `eta = c / (n theta)`. A component without a labeled point gets one query
//! (at its density mode) and the answer is copied to all its members. A
//! component whose labeled points disagree raises `theta` by `tau` and the
//! level is redone, which shrinks both the support set and `eta`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::density::{density_field, support_set, DensityField};
use crate::error::{CacError, Result};
use crate::graph::{build_eta_graph, component_mode, connected_components, Component};
use crate::kernel::{HermiteKernel, KernelConfig};
use crate::points::{median_kth_neighbor, squared_distance, PointSet};
use crate::witness::{classify_points, WitnessModel, WitnessRecord};

/// Snapshot handed to the oracle with each query.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    pub n: f64,
    pub theta: f64,
    pub eta: f64,
    /// Support-set members at the current level, ascending.
    pub confident: &'a [usize],
    pub predicted: &'a [Option<Label>],
    /// Component id of each point at the current level.
    pub component_of: &'a [Option<usize>],
    pub queried: usize,
}

/// Source of ground-truth labels.
pub trait LabelOracle {
    /// Label of point `index`. Errors stop the run; `OracleUnavailable` is
    /// treated like an exhausted budget.
    fn label(&mut self, index: usize, ctx: &QueryContext<'_>) -> Result<Label>;
}

/// Answers from a label table (usually the dataset's ground truth).
#[derive(Debug, Clone)]
pub struct TruthOracle {
    labels: Vec<Label>,
}

impl TruthOracle {
    pub fn new(labels: Vec<Label>) -> Self {
        Self { labels }
    }
}

impl LabelOracle for TruthOracle {
    fn label(&mut self, index: usize, _: &QueryContext<'_>) -> Result<Label> {
        self.labels
            .get(index)
            .copied()
            .ok_or(CacError::OracleUnavailable { index })
    }
}

/// Answers from a fixed `index -> label` table, e.g. a replay file.
#[derive(Debug, Clone, Default)]
pub struct ReplayOracle {
    table: BTreeMap<usize, Label>,
}

impl ReplayOracle {
    pub fn new(entries: impl IntoIterator<Item = (usize, Label)>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (i, l) in entries {
            if let Some(prev) = table.insert(i, l) {
                if prev != l {
                    return Err(CacError::InvalidInput(format!(
                        "replay lists point {i} as both {prev} and {l}"
                    )));
                }
            }
        }
        Ok(Self { table })
    }
}

impl LabelOracle for ReplayOracle {
    fn label(&mut self, index: usize, _: &QueryContext<'_>) -> Result<Label> {
        self.table
            .get(&index)
            .copied()
            .ok_or(CacError::OracleUnavailable { index })
    }
}

/// How the eta constant `c` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EtaRule {
    /// Use this `c` as is.
    Fixed { c: f64 },
    /// Pick `c` so that at the first level `eta / 2 = scale * d_k`, where
    /// `d_k` is the median distance from a support-set member to its `k`-th
    /// nearest fellow member.
    Calibrated { neighbors: usize, scale: f64 },
}

impl Default for EtaRule {
    fn default() -> Self {
        EtaRule::Calibrated {
            neighbors: 20,
            scale: 1.75,
        }
    }
}

/// Whether a conflict raises the threshold everywhere or only inside the
/// conflicting component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscalationScope {
    #[default]
    Global,
    PerComponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub n_start: f64,
    pub n_max: f64,
    pub step: f64,
    pub theta_init: f64,
    pub tau: f64,
    pub eta: EtaRule,
    pub max_escalations: usize,
    pub query_budget: Option<usize>,
    pub escalation: EscalationScope,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            n_start: 4.0,
            n_max: 4.0,
            step: 1.0,
            theta_init: 0.1,
            tau: 1.3,
            eta: EtaRule::default(),
            max_escalations: 20,
            query_budget: None,
            escalation: EscalationScope::Global,
        }
    }
}

impl Schedule {
    /// A single level at degree `n`.
    pub fn single(n: f64) -> Self {
        Self {
            n_start: n,
            n_max: n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CacError::InvalidParameter(msg));
        if !(self.n_start >= 1.0 && self.n_start <= self.n_max && self.n_max.is_finite()) {
            return bad(format!("need 1 <= n_start <= n_max, got {} and {}", self.n_start, self.n_max));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !(self.theta_init > 0.0 && self.theta_init < 1.0) {
            return bad(format!("theta_init must be in (0, 1), got {}", self.theta_init));
        }
        if !(self.tau > 1.0 && self.tau.is_finite()) {
            return bad(format!("tau must exceed 1, got {}", self.tau));
        }
        match self.eta {
            EtaRule::Fixed { c } if !(c > 0.0 && c.is_finite()) => bad(format!("eta constant must be positive, got {c}")),
            EtaRule::Calibrated { neighbors, scale } if neighbors == 0 || !(scale > 0.0 && scale.is_finite()) => {
                bad(format!("eta calibration needs neighbors >= 1 and scale > 0, got {neighbors} and {scale}"))
            }
            _ => Ok(()),
        }
    }

    /// Degrees visited: `n_start, n_start + step, ...`, ending exactly at `n_max`.
    pub fn levels(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0.0;
        loop {
            let n = self.n_start + k * self.step;
            if n >= self.n_max - 1e-12 {
                out.push(self.n_max);
                return out;
            }
            out.push(n);
            k += 1.0;
        }
    }
}

/// `c / (n theta)`.
pub fn eta_for(n: f64, theta: f64, c: f64) -> Result<f64> {
    if !(n > 0.0 && theta > 0.0 && c > 0.0) {
        return Err(CacError::InvalidParameter(format!(
            "eta_for needs positive arguments, got n = {n}, theta = {theta}, c = {c}"
        )));
    }
    Ok(c / (n * theta))
}

/// `c` such that `eta_for(n, theta, c) / 2 = scale * d_k(members)`.
/// Falls back to `eta / 2 = scale` when the members have no spread.
pub fn calibrate_eta_constant(points: &PointSet, members: &[usize], n: f64, theta: f64, neighbors: usize, scale: f64) -> f64 {
    let d = median_kth_neighbor(&points.select(members), neighbors);
    let half_eta = if d > 0.0 { scale * d } else { scale };
    2.0 * half_eta * n * theta
}

/// A component as recorded in the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub id: usize,
    pub members: Vec<usize>,
    pub mode: usize,
    pub label: Option<Label>,
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub index: usize,
    pub label: Label,
}

/// Terminal conflict split after the escalation limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradedEvent {
    pub n: f64,
    pub theta: f64,
    pub component_size: usize,
    pub labels: Vec<Label>,
    /// Previously predicted points whose label changed.
    pub reassigned: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: f64,
    pub theta_final: f64,
    pub eta: f64,
    pub components: usize,
    pub queries: Vec<Query>,
    pub escalations: usize,
    pub confident_count: usize,
    pub degraded: Vec<DegradedEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveState {
    /// Labeled set: every queried point with its oracle answer.
    pub labeled: BTreeMap<usize, Label>,
    pub predicted: Vec<Option<Label>>,
    pub n: f64,
    pub theta: f64,
    pub eta: f64,
    pub eta_constant: Option<f64>,
    pub components: Vec<ComponentRecord>,
    /// Support-set members at the current level (after escalation).
    pub confident: Vec<usize>,
    pub history: Vec<LevelRecord>,
    pub budget_exhausted: bool,
}

impl ActiveState {
    pub fn new(point_count: usize, schedule: &Schedule) -> Self {
        Self {
            labeled: BTreeMap::new(),
            predicted: vec![None; point_count],
            n: schedule.n_start,
            theta: schedule.theta_init,
            eta: 0.0,
            eta_constant: match schedule.eta {
                EtaRule::Fixed { c } => Some(c),
                EtaRule::Calibrated { .. } => None,
            },
            components: Vec::new(),
            confident: Vec::new(),
            history: Vec::new(),
            budget_exhausted: false,
        }
    }

    pub fn query_count(&self) -> usize {
        self.labeled.len()
    }

    /// Records an oracle answer; the label is final for that point.
    pub fn add_label(&mut self, index: usize, label: Label) {
        self.labeled.insert(index, label);
        self.predicted[index] = Some(label);
    }

    pub fn component_of(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.predicted.len()];
        for c in &self.components {
            for &i in &c.members {
                out[i] = Some(c.id);
            }
        }
        out
    }

    pub fn confident_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.predicted.len()];
        for &i in &self.confident {
            mask[i] = true;
        }
        mask
    }
}

fn distinct_labels(members: &[usize], labeled: &BTreeMap<usize, Label>) -> Vec<Label> {
    let mut labels: Vec<Label> = members.iter().filter_map(|i| labeled.get(i).copied()).collect();
    labels.sort_unstable();
    labels.dedup();
    labels
}

/// Components of the support set at `theta`, with `eta = c / (n theta)`.
fn partition(points: &PointSet, field: &DensityField, n: f64, theta: f64, c: f64) -> Result<(Vec<usize>, Vec<Component>, f64)> {
    let support = support_set(field, theta)?;
    let eta = eta_for(n, theta, c)?;
    let comps = connected_components(&build_eta_graph(points, &support.members, eta)?);
    Ok((support.members, comps, eta))
}

/// Splits one conflicting component by raising its own threshold until the
/// pieces are conflict-free or the limit is hit.
fn refine_component(
    points: &PointSet,
    field: &DensityField,
    comp: &Component,
    labeled: &BTreeMap<usize, Label>,
    n: f64,
    theta: f64,
    c: f64,
    schedule: &Schedule,
) -> Result<(Vec<Vec<usize>>, usize)> {
    let mut pieces = vec![comp.members.clone()];
    let mut local = theta;
    let mut escalations = 0;
    while escalations < schedule.max_escalations && pieces.iter().any(|p| distinct_labels(p, labeled).len() > 1) {
        local *= schedule.tau;
        escalations += 1;
        let cut = local * field.sample_max;
        let kept: Vec<usize> = comp.members.iter().copied().filter(|&i| field.values[i] >= cut).collect();
        if kept.is_empty() {
            break;
        }
        let g = build_eta_graph(points, &kept, eta_for(n, local, c)?)?;
        pieces = connected_components(&g).into_iter().map(|c| c.members).collect();
    }
    Ok((pieces, escalations))
}

/// Label of the nearest labeled point (ties to the lower index) for each member.
fn nearest_label_split(points: &PointSet, members: &[usize], labeled: &BTreeMap<usize, Label>) -> Vec<(usize, Label)> {
    let anchors: Vec<(usize, Label)> = members
        .iter()
        .filter_map(|&i| labeled.get(&i).map(|&l| (i, l)))
        .collect();
    members
        .iter()
        .map(|&i| {
            let mut best = anchors[0];
            let mut best_d = squared_distance(points.row(i), points.row(best.0));
            for &(a, l) in &anchors[1..] {
                let d = squared_distance(points.row(i), points.row(a));
                if d < best_d {
                    best = (a, l);
                    best_d = d;
                }
            }
            (i, best.1)
        })
        .collect()
}

/// One level of the loop at degree `state.n`, using the precomputed density
/// field for that degree. Returns the level record; on an exhausted budget
/// the state keeps whatever was assigned so far and `budget_exhausted` is set.
pub fn run_level(
    state: &mut ActiveState,
    points: &PointSet,
    field: &DensityField,
    oracle: &mut dyn LabelOracle,
    schedule: &Schedule,
) -> Result<LevelRecord> {
    if state.n > schedule.n_max + 1e-12 {
        return Err(CacError::InvalidParameter(format!(
            "level n = {} beyond n_max = {}",
            state.n, schedule.n_max
        )));
    }
    if field.point_count() != points.len() || state.predicted.len() != points.len() {
        return Err(CacError::InvalidInput("state, field and points disagree in size".into()));
    }
    let n = state.n;
    let c = match state.eta_constant {
        Some(c) => c,
        None => {
            let EtaRule::Calibrated { neighbors, scale } = schedule.eta else {
                unreachable!("fixed rule sets the constant up front")
            };
            let members = support_set(field, state.theta)?.members;
            let c = calibrate_eta_constant(points, &members, n, state.theta, neighbors, scale);
            state.eta_constant = Some(c);
            c
        }
    };

    // escalate until no component carries two different labels
    let mut escalations = 0;
    let (mut members, mut comps, mut eta) = partition(points, field, n, state.theta, c)?;
    let conflicted = |comps: &[Component], labeled: &BTreeMap<usize, Label>| {
        comps.iter().any(|k| distinct_labels(&k.members, labeled).len() > 1)
    };
    let mut groups: Vec<Vec<usize>> = match schedule.escalation {
        EscalationScope::Global => {
            while escalations < schedule.max_escalations && conflicted(&comps, &state.labeled) {
                state.theta *= schedule.tau;
                escalations += 1;
                (members, comps, eta) = partition(points, field, n, state.theta, c)?;
            }
            comps.into_iter().map(|k| k.members).collect()
        }
        EscalationScope::PerComponent => {
            let mut out = Vec::new();
            for k in &comps {
                if distinct_labels(&k.members, &state.labeled).len() > 1 {
                    let (pieces, e) =
                        refine_component(points, field, k, &state.labeled, n, state.theta, c, schedule)?;
                    escalations = escalations.max(e);
                    out.extend(pieces);
                } else {
                    out.push(k.members.clone());
                }
            }
            out
        }
    };
    if schedule.escalation == EscalationScope::PerComponent {
        // pieces may have shed points; keep the ordering rule by smallest member
        for g in &mut groups {
            g.sort_unstable();
        }
        groups.sort_by_key(|g| g[0]);
        members = groups.iter().flatten().copied().collect();
        members.sort_unstable();
    }
    state.eta = eta;
    state.confident = members;
    state.components = groups
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let mode = component_mode(&Component { id, members: members.clone() }, field)?;
            Ok(ComponentRecord {
                id,
                members,
                mode,
                label: None,
                flag: false,
            })
        })
        .collect::<Result<_>>()?;

    let mut record = LevelRecord {
        n,
        theta_final: state.theta,
        eta,
        components: state.components.len(),
        queries: Vec::new(),
        escalations,
        confident_count: state.confident.len(),
        degraded: Vec::new(),
    };

    for k in 0..state.components.len() {
        let labels = distinct_labels(&state.components[k].members, &state.labeled);
        match labels.len() {
            0 => {
                if schedule.query_budget.is_some_and(|b| state.query_count() >= b) {
                    state.budget_exhausted = true;
                    return Ok(record);
                }
                let mode = state.components[k].mode;
                let component_of = state.component_of();
                let ctx = QueryContext {
                    n,
                    theta: state.theta,
                    eta,
                    confident: &state.confident,
                    predicted: &state.predicted,
                    component_of: &component_of,
                    queried: state.query_count(),
                };
                let label = match oracle.label(mode, &ctx) {
                    Ok(l) => l,
                    Err(CacError::OracleUnavailable { .. }) => {
                        state.budget_exhausted = true;
                        return Ok(record);
                    }
                    Err(e) => return Err(e),
                };
                state.add_label(mode, label);
                record.queries.push(Query { index: mode, label });
                propagate(state, k, label);
            }
            1 => propagate(state, k, labels[0]),
            _ => {
                let members = state.components[k].members.clone();
                let mut reassigned = 0;
                for (i, l) in nearest_label_split(points, &members, &state.labeled) {
                    if state.predicted[i].is_some_and(|p| p != l) {
                        reassigned += 1;
                    }
                    state.predicted[i] = Some(l);
                }
                state.components[k].flag = true;
                record.degraded.push(DegradedEvent {
                    n,
                    theta: state.theta,
                    component_size: members.len(),
                    labels,
                    reassigned,
                });
            }
        }
    }
    Ok(record)
}

fn propagate(state: &mut ActiveState, k: usize, label: Label) {
    let comp = &mut state.components[k];
    for &i in &comp.members {
        state.predicted[i] = Some(label);
    }
    comp.label = Some(label);
    comp.flag = true;
}

/// Witness and output options for [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunOptions {
    /// Permutations for per-point p-values; `None` skips them.
    pub certainty_permutations: Option<usize>,
    pub seed: u64,
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BudgetExhausted,
}

/// Per-point outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub predicted: Option<Label>,
    pub confident: bool,
    pub queried: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub kernel: KernelConfig,
    pub schedule: Schedule,
    pub eta_constant: Option<f64>,
    pub levels: Vec<LevelRecord>,
    pub queries: Vec<Query>,
    pub points: Vec<PointRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<crate::evaluation::Scorecard>,
}

impl RunReport {
    pub fn query_count(&self) -> usize {
        self.queries.len()
    }

    pub fn assignments(&self) -> Vec<Option<Label>> {
        self.points.iter().map(|p| p.predicted).collect()
    }

    pub fn confident_mask(&self) -> Vec<bool> {
        self.points.iter().map(|p| p.confident).collect()
    }

    /// Fills in `scores` against ground truth.
    pub fn score(&mut self, truth: &[Label]) -> Result<()> {
        self.scores = Some(crate::evaluation::accuracy_suite(
            &self.assignments(),
            truth,
            &self.confident_mask(),
        )?);
        Ok(())
    }
}

/// Called between levels with the state so far (used by interactive front ends).
pub trait Progress {
    fn level_started(&mut self, _n: f64, _state: &ActiveState) {}
    fn level_finished(&mut self, _record: &LevelRecord, _state: &ActiveState) {}
}

impl Progress for () {}

/// Runs every level of `schedule` on `points` (already in kernel
/// coordinates), then classifies the points outside the final support set
/// with the witness functions of the final confident classes.
pub fn run(
    points: &PointSet,
    kernel: KernelConfig,
    oracle: &mut dyn LabelOracle,
    schedule: &Schedule,
    options: &RunOptions,
) -> Result<(RunReport, ActiveState)> {
    run_with_progress(points, kernel, oracle, schedule, options, &mut ())
}

pub fn run_with_progress(
    points: &PointSet,
    kernel: KernelConfig,
    oracle: &mut dyn LabelOracle,
    schedule: &Schedule,
    options: &RunOptions,
    progress: &mut dyn Progress,
) -> Result<(RunReport, ActiveState)> {
    schedule.validate()?;
    if points.is_empty() {
        return Err(CacError::InvalidInput("no points to cluster".into()));
    }
    if points.dim() != kernel.q {
        return Err(CacError::DimensionMismatch {
            expected: kernel.q,
            got: points.dim(),
        });
    }
    let mut state = ActiveState::new(points.len(), schedule);
    let mut last_kernel = None;
    for n in schedule.levels() {
        state.n = n;
        progress.level_started(n, &state);
        let k = HermiteKernel::new(kernel.with_degree(n)?)?;
        let field = density_field(points, &k)?;
        let record = run_level(&mut state, points, &field, oracle, schedule)?;
        state.history.push(record);
        progress.level_finished(state.history.last().expect("just pushed"), &state);
        last_kernel = Some(k);
        if state.budget_exhausted {
            break;
        }
    }
    let final_kernel = last_kernel.expect("at least one level");

    let confident = state.confident_mask();
    let mut witness: BTreeMap<usize, WitnessRecord> = BTreeMap::new();
    if !state.budget_exhausted {
        // confident classes plus every labeled point, which keeps its oracle label
        let mut eligible = confident.clone();
        for &i in state.labeled.keys() {
            eligible[i] = true;
        }
        let uncertain: Vec<usize> = (0..points.len()).filter(|&i| !eligible[i]).collect();
        if !uncertain.is_empty() {
            let model = WitnessModel::from_assignments(&state.predicted, &eligible)?;
            let certainty = options.certainty_permutations.map(|b| (b, options.seed));
            for rec in classify_points(&uncertain, &model, points, &final_kernel, certainty)? {
                state.predicted[rec.index] = Some(rec.predicted);
                witness.insert(rec.index, rec);
            }
        }
    }

    let queries: Vec<Query> = state.history.iter().flat_map(|l| l.queries.iter().cloned()).collect();
    let report = RunReport {
        status: if state.budget_exhausted {
            RunStatus::BudgetExhausted
        } else {
            RunStatus::Completed
        },
        kernel: *final_kernel.config(),
        schedule: schedule.clone(),
        eta_constant: state.eta_constant,
        levels: state.history.clone(),
        queries,
        points: (0..points.len())
            .map(|i| PointRecord {
                index: i,
                predicted: state.predicted[i],
                confident: confident[i],
                queried: state.labeled.contains_key(&i),
                witness: witness.remove(&i),
            })
            .collect(),
        scores: None,
    };
    Ok((report, state))
}
