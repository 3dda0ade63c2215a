use cac_core::active::{run, RunOptions, RunStatus, Schedule, TruthOracle};
use cac_core::kernel::KernelConfig;
use cac_core::PointSet;
use proptest::prelude::*;

fn arb_labeled() -> impl Strategy<Value = (Vec<[f64; 2]>, Vec<u32>)> {
    (3usize..40).prop_flat_map(|m| {
        (
            prop::collection::vec(prop::array::uniform2(-1.4f64..1.4), m),
            prop::collection::vec(1u32..4, m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn loop_invariants(
        (rows, truth) in arb_labeled(),
        tau in 1.1f64..2.0,
        theta in 0.05f64..0.5,
    ) {
        let p = PointSet::from_rows(&rows).unwrap();
        let schedule = Schedule {
            n_start: 3.0,
            n_max: 5.0,
            theta_init: theta,
            tau,
            ..Schedule::default()
        };
        let mut oracle = TruthOracle::new(truth.clone());
        let (report, state) = run(&p, KernelConfig::new(5.0, 2, 1.0).unwrap(), &mut oracle, &schedule, &RunOptions::default()).unwrap();
        prop_assert_eq!(report.status, RunStatus::Completed);

        // answers are stored verbatim and never asked twice
        let mut asked = std::collections::BTreeSet::new();
        for q in &report.queries {
            prop_assert_eq!(q.label, truth[q.index]);
            prop_assert!(asked.insert(q.index));
            prop_assert_eq!(state.predicted[q.index], Some(q.label));
        }
        prop_assert!(report.query_count() <= p.len());

        // the threshold only rises, and every point ends with a label
        let mut last = theta;
        for level in &report.levels {
            prop_assert!(level.theta_final >= last);
            prop_assert!(level.confident_count >= 1);
            last = level.theta_final;
        }
        prop_assert!(report.points.iter().all(|r| r.predicted.is_some()));
    }
}
