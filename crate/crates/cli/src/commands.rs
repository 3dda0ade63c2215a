//! Batch subcommands: `cluster`, `kernel` and `baseline`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cac_core::active::{
    run_with_progress, ActiveState, LabelOracle, LevelRecord, Progress, ReplayOracle, RunOptions, RunReport, RunStatus,
    TruthOracle,
};
use cac_core::data::{read_labels_csv, save_assignments, Label};
use cac_core::density::{density_field, density_on_grid, gaussian_kde_baseline, support_set};
use cac_core::evaluation::micro_f;
use cac_core::kernel::{kernel_matrix, HermiteKernel};
use cac_core::PointSet;
use serde::{Deserialize, Serialize};

use crate::config::{OracleMode, Prepared, RunConfig};
use crate::error::{CliError, Result};

pub const REPORT_FILE: &str = "report.json";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const CURVE_FILE: &str = "score_curve.csv";

/// Largest grid `cmd_kernel` will evaluate.
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// One row of the per-level score curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub n: f64,
    pub theta: f64,
    pub eta: f64,
    pub components: usize,
    pub escalations: usize,
    /// Labels queried so far, over all levels.
    pub queries: usize,
    pub confident_fraction: f64,
    /// Accuracy and micro F on the confident set; absent without ground truth.
    pub confident_accuracy: Option<f64>,
    pub confident_micro_f: Option<f64>,
}

/// Collects a [`ScoreRow`] at the end of each level.
#[derive(Debug, Default)]
pub struct CurveRecorder {
    truth: Option<Vec<Label>>,
    pub rows: Vec<ScoreRow>,
}

impl CurveRecorder {
    pub fn new(truth: Option<Vec<Label>>) -> Self {
        Self { truth, rows: Vec::new() }
    }

    pub fn record(&mut self, level: &LevelRecord, state: &ActiveState) {
        let m = state.predicted.len();
        let queries = state.history.iter().map(|l| l.queries.len()).sum();
        let (acc, f) = match &self.truth {
            Some(truth) if !state.confident.is_empty() => {
                let conf = &state.confident;
                let hits = conf.iter().filter(|&&i| state.predicted[i] == Some(truth[i])).count();
                let group = |key: &dyn Fn(usize) -> Option<Label>| {
                    let mut by: std::collections::BTreeMap<Label, Vec<usize>> = Default::default();
                    for &i in conf {
                        if let Some(l) = key(i) {
                            by.entry(l).or_default().push(i);
                        }
                    }
                    by.into_values().collect::<Vec<_>>()
                };
                let clusters = group(&|i| state.predicted[i]);
                let sets = group(&|i| Some(truth[i]));
                let f = if clusters.is_empty() { None } else { micro_f(&clusters, &sets).ok() };
                (Some(hits as f64 / conf.len() as f64), f)
            }
            _ => (None, None),
        };
        self.rows.push(ScoreRow {
            n: level.n,
            theta: level.theta_final,
            eta: level.eta,
            components: level.components,
            escalations: level.escalations,
            queries,
            confident_fraction: level.confident_count as f64 / m as f64,
            confident_accuracy: acc,
            confident_micro_f: f,
        });
    }
}

impl Progress for CurveRecorder {
    fn level_finished(&mut self, record: &LevelRecord, state: &ActiveState) {
        self.record(record, state);
    }
}

/// Builds the oracle named by the configuration (batch modes only).
pub fn batch_oracle(config: &RunConfig, prepared: &Prepared) -> Result<Box<dyn LabelOracle + Send>> {
    match &config.oracle {
        OracleMode::Truth => match &prepared.dataset.labels {
            Some(l) => Ok(Box::new(TruthOracle::new(l.clone()))),
            None => Err(CliError::Config("truth oracle needs a labeled dataset".into())),
        },
        OracleMode::Replay { path } => {
            let entries = read_labels_csv(path).map_err(|e| CliError::Data(e.to_string()))?;
            if let Some((i, _)) = entries.iter().find(|(i, _)| *i >= prepared.points.len()) {
                return Err(CliError::Data(format!("replay names point {i}, dataset has {}", prepared.points.len())));
            }
            Ok(Box::new(ReplayOracle::new(entries).map_err(|e| CliError::Data(e.to_string()))?))
        }
        OracleMode::Interactive { .. } => Err(CliError::Config("interactive oracle needs `cac serve`".into())),
    }
}

/// Runs the loop and scores the result against the dataset labels, if any.
pub fn execute(
    config: &RunConfig,
    prepared: &Prepared,
    oracle: &mut dyn LabelOracle,
    progress: &mut dyn Progress,
    curve: &mut CurveRecorder,
) -> Result<RunReport> {
    struct Both<'a>(&'a mut dyn Progress, &'a mut CurveRecorder);
    impl Progress for Both<'_> {
        fn level_started(&mut self, n: f64, state: &ActiveState) {
            self.0.level_started(n, state);
        }
        fn level_finished(&mut self, record: &LevelRecord, state: &ActiveState) {
            self.1.record(record, state);
            self.0.level_finished(record, state);
        }
    }
    let options = RunOptions {
        certainty_permutations: config.witness.permutations,
        seed: config.seed,
    };
    let (mut report, _) = run_with_progress(
        &prepared.points,
        prepared.kernel,
        oracle,
        &config.schedule,
        &options,
        &mut Both(progress, curve),
    )?;
    if let Some(truth) = &prepared.dataset.labels {
        report.score(truth)?;
    }
    Ok(report)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Writes the report, the assignments and the score curve into `dir`.
pub fn write_outputs(dir: &Path, prepared: &Prepared, report: &RunReport, curve: &[ScoreRow]) -> Result<()> {
    ensure_dir(dir)?;
    write_file(&dir.join(REPORT_FILE), &report_json(report))?;
    let path = dir.join(ASSIGNMENTS_FILE);
    save_assignments(
        &path,
        &prepared.dataset.points,
        prepared.dataset.labels.as_deref(),
        &report.assignments(),
        &report.confident_mask(),
    )
    .map_err(|e| match e {
        cac_core::CacError::Io(source) => CliError::Output { path: path.clone(), source },
        other => other.into(),
    })?;
    let mut csv = String::from("n,theta,eta,components,escalations,queries,confident_fraction,confident_accuracy,confident_micro_f\n");
    for r in curve {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            r.theta,
            r.eta,
            r.components,
            r.escalations,
            r.queries,
            r.confident_fraction,
            opt(r.confident_accuracy),
            opt(r.confident_micro_f)
        );
    }
    write_file(&dir.join(CURVE_FILE), &csv)
}

/// Full batch run. A run that stops on its label budget still writes its
/// partial outputs and then reports [`CliError::Budget`].
pub fn cmd_cluster(config: &RunConfig) -> Result<RunReport> {
    let prepared = config.prepare()?;
    let mut oracle = batch_oracle(config, &prepared)?;
    let mut curve = CurveRecorder::new(prepared.dataset.labels.clone());
    let report = execute(config, &prepared, oracle.as_mut(), &mut (), &mut curve)?;
    write_outputs(&config.output, &prepared, &report, &curve.rows)?;
    if report.status == RunStatus::BudgetExhausted {
        return Err(CliError::Budget {
            queries: report.query_count(),
            output: config.output.clone(),
        });
    }
    Ok(report)
}

/// Rectangular grid: one `lo:hi:count` range per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<(f64, f64, usize)>,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let axes = s
            .split(',')
            .map(|axis| {
                let parts: Vec<&str> = axis.trim().split(':').collect();
                let [lo, hi, count] = parts[..] else {
                    return Err(format!("axis `{axis}` is not lo:hi:count"));
                };
                let lo: f64 = lo.parse().map_err(|_| format!("bad bound `{lo}`"))?;
                let hi: f64 = hi.parse().map_err(|_| format!("bad bound `{hi}`"))?;
                let count: usize = count.parse().map_err(|_| format!("bad count `{count}`"))?;
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) || count == 0 {
                    return Err(format!("axis `{axis}` needs lo <= hi and count >= 1"));
                }
                Ok((lo, hi, count))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { axes })
    }
}

impl GridSpec {
    pub fn point_count(&self) -> usize {
        self.axes.iter().fold(1usize, |acc, a| acc.saturating_mul(a.2))
    }

    /// Grid points with the last coordinate varying fastest.
    pub fn points(&self) -> Result<PointSet> {
        let total = self.point_count();
        if total > MAX_GRID_POINTS {
            return Err(CliError::Config(format!("grid of {total} points exceeds the cap of {MAX_GRID_POINTS}")));
        }
        let q = self.axes.len();
        let mut coords = Vec::with_capacity(total * q);
        let mut idx = vec![0usize; q];
        for _ in 0..total {
            for (d, &(lo, hi, count)) in self.axes.iter().enumerate() {
                let t = if count == 1 { 0.0 } else { idx[d] as f64 / (count - 1) as f64 };
                coords.push(lo + t * (hi - lo));
            }
            for d in (0..q).rev() {
                idx[d] += 1;
                if idx[d] < self.axes[d].2 {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(PointSet::new(q, coords)?)
    }
}

pub const GRID_FILE: &str = "density_grid.csv";
pub const MATRIX_FILE: &str = "kernel_matrix.csv";

/// Density on `grid` (given in dataset coordinates) at the largest degree,
/// with membership at `schedule.theta_init` relative to the sample maximum.
/// Optionally also dumps the sample kernel matrix.
pub fn cmd_kernel(config: &RunConfig, grid: &GridSpec, matrix: bool) -> Result<PathBuf> {
    let prepared = config.prepare()?;
    if grid.axes.len() != prepared.dataset.dim() {
        return Err(CliError::Config(format!(
            "grid has {} axes, data have {} coordinates",
            grid.axes.len(),
            prepared.dataset.dim()
        )));
    }
    let raw = grid.points()?;
    let g = prepared.to_kernel_coords(&raw)?;
    let kernel = HermiteKernel::new(prepared.kernel)?;
    let values = density_on_grid(&g, &prepared.points, &kernel)?;
    let field = density_field(&prepared.points, &kernel)?;
    let cut = config.schedule.theta_init * field.sample_max;

    ensure_dir(&config.output)?;
    let mut csv = String::new();
    let header: Vec<String> = (0..raw.dim()).map(|d| format!("x{d}")).collect();
    let _ = writeln!(csv, "{},density,member", header.join(","));
    for (i, v) in values.iter().enumerate() {
        for c in raw.row(i) {
            let _ = write!(csv, "{c},");
        }
        let _ = writeln!(csv, "{v},{}", u8::from(*v >= cut));
    }
    let path = config.output.join(GRID_FILE);
    write_file(&path, &csv)?;

    if matrix {
        let km = kernel_matrix(&prepared.points, &kernel)?;
        let mut csv = String::new();
        for i in 0..km.size() {
            let row: Vec<String> = km.row(i).iter().map(f64::to_string).collect();
            let _ = writeln!(csv, "{}", row.join(","));
        }
        write_file(&config.output.join(MATRIX_FILE), &csv)?;
    }
    Ok(path)
}

pub const BASELINE_FILE: &str = "baseline.csv";
pub const BASELINE_SUMMARY_FILE: &str = "baseline.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub theta: f64,
    pub bandwidth: f64,
    pub points: usize,
    pub hermite_members: usize,
    pub kde_members: usize,
}

/// Hermite and Gaussian-KDE indicator memberships at the same threshold.
/// The KDE bandwidth defaults to the kernel's `sigma`.
pub fn cmd_baseline(config: &RunConfig, bandwidth: Option<f64>) -> Result<BaselineSummary> {
    let prepared = config.prepare()?;
    let bandwidth = bandwidth.unwrap_or(config.kernel.sigma);
    let theta = config.schedule.theta_init;
    let kernel = HermiteKernel::new(prepared.kernel)?;
    let phi = density_field(&prepared.points, &kernel)?;
    let kde = gaussian_kde_baseline(&prepared.points, bandwidth).map_err(|e| CliError::Config(e.to_string()))?;
    let phi_set = support_set(&phi, theta)?;
    let kde_set = support_set(&kde, theta)?;
    let phi_mask = phi_set.mask(phi.values.len());
    let kde_mask = kde_set.mask(kde.values.len());

    ensure_dir(&config.output)?;
    let pts = &prepared.dataset.points;
    let mut csv = String::from("index,");
    for d in 0..pts.dim() {
        let _ = write!(csv, "x{d},");
    }
    csv.push_str("hermite_density,hermite_member,kde_density,kde_member\n");
    for i in 0..pts.len() {
        let _ = write!(csv, "{i},");
        for c in pts.row(i) {
            let _ = write!(csv, "{c},");
        }
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            phi.values[i],
            u8::from(phi_mask[i]),
            kde.values[i],
            u8::from(kde_mask[i])
        );
    }
    write_file(&config.output.join(BASELINE_FILE), &csv)?;
    let summary = BaselineSummary {
        theta,
        bandwidth,
        points: pts.len(),
        hermite_members: phi_set.members.len(),
        kde_members: kde_set.members.len(),
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_file(&config.output.join(BASELINE_SUMMARY_FILE), &json)?;
    Ok(summary)
}
