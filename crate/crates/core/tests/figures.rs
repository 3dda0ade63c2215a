use cac_core::active::{run, RunOptions, RunReport, Schedule, TruthOracle};
use cac_core::data::generators::gen_figure_suite;
use cac_core::data::{standardize, Dataset};
use cac_core::kernel::KernelConfig;

fn cluster(ds: &Dataset, schedule: &Schedule) -> RunReport {
    let (p, _) = standardize(&ds.points, schedule.n_max, 0.5).unwrap();
    let truth = ds.labels.clone().unwrap();
    let mut oracle = TruthOracle::new(truth.clone());
    let kernel = KernelConfig::new(schedule.n_max, ds.dim(), 1.0).unwrap();
    let (mut report, _) = run(&p, kernel, &mut oracle, schedule, &RunOptions::default()).unwrap();
    report.score(&truth).unwrap();
    report
}

#[test]
fn bottleneck_tails_are_resolved_by_the_witness() {
    let ds = gen_figure_suite("bottleneck", 1000, 42).unwrap();
    // the tails carry too much mass for the default threshold; see README
    let schedule = Schedule {
        theta_init: 0.3,
        ..Schedule::single(4.0)
    };
    let report = cluster(&ds, &schedule);
    let s = report.scores.as_ref().unwrap();
    assert!(report.query_count() <= 4, "{} queries", report.query_count());
    assert!(s.accuracy >= 0.95, "accuracy {}", s.accuracy);
    assert!(report.points.iter().any(|p| p.witness.is_some()));
}

#[test]
fn close_gaussians_need_two_queries() {
    let ds = gen_figure_suite("close_gaussians", 1000, 42).unwrap();
    let report = cluster(&ds, &Schedule::single(4.0));
    let s = report.scores.as_ref().unwrap();
    assert_eq!(report.query_count(), 2);
    assert_eq!(s.confident_accuracy, 1.0);
    assert!(s.accuracy >= 0.99, "accuracy {}", s.accuracy);
}

#[test]
fn y_arms_stay_separate_across_levels() {
    let ds = gen_figure_suite("y_clusters", 1000, 42).unwrap();
    let schedule = Schedule {
        n_start: 3.0,
        n_max: 5.0,
        ..Schedule::default()
    };
    let report = cluster(&ds, &schedule);
    let s = report.scores.as_ref().unwrap();
    assert_eq!(s.confident_accuracy, 1.0);
    assert!(report.query_count() >= 3);
}
