use cac_core::data::generators::{gen_two_moons, gen_uniform_square};
use cac_core::density::{density_at, density_field, support_set};
use cac_core::kernel::{HermiteKernel, KernelConfig};
use cac_core::PointSet;
use proptest::prelude::*;

fn kernel(n: f64) -> HermiteKernel {
    HermiteKernel::new(KernelConfig::new(n, 2, 1.0).unwrap()).unwrap()
}

fn boundary_distance(p: &[f64]) -> f64 {
    p.iter().map(|&v| v.min(1.0 - v)).fold(f64::INFINITY, f64::min)
}

#[test]
fn uniform_square_interior_is_supported() {
    let ds = gen_uniform_square(2000, 17).unwrap();
    let k = kernel(6.0);
    let field = density_field(&ds.points, &k).unwrap();
    let support = support_set(&field, 0.1).unwrap();
    let interior: Vec<usize> = (0..ds.len())
        .filter(|&i| boundary_distance(ds.points.row(i)) >= 2.0 / 6.0)
        .collect();
    assert!(!interior.is_empty());
    for i in interior {
        assert!(support.is_member(i), "interior point {i} dropped");
    }
}

#[test]
fn far_grid_points_are_never_supported() {
    let ds = gen_uniform_square(2000, 17).unwrap();
    let k = kernel(6.0);
    let field = density_field(&ds.points, &k).unwrap();
    let cut = 0.1 * field.sample_max;
    let mut checked = 0;
    for a in 0..=24 {
        for b in 0..=24 {
            let x = [-2.5 + 0.25 * a as f64, -2.5 + 0.25 * b as f64];
            let gap = x.iter().map(|&v| (-v).max(v - 1.0).max(0.0)).fold(0.0_f64, |s, d| s.hypot(d));
            if gap < 1.0 {
                continue;
            }
            checked += 1;
            let d = density_at(&x, &ds.points, &k).unwrap();
            assert!(d < cut, "grid point {x:?} has density {d} >= {cut}");
        }
    }
    assert!(checked > 100);
}

#[test]
fn moon_interior_dominates_off_manifold() {
    let ds = gen_two_moons(1000, 0.07, 42).unwrap();
    let k = kernel(6.0);
    // top of the upper moon, and half a unit above it
    let on = density_at(&[0.0, 1.0], &ds.points, &k).unwrap();
    let off = density_at(&[0.0, 1.5], &ds.points, &k).unwrap();
    assert!(on >= 10.0 * off, "on {on}, off {off}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn support_shrinks_as_threshold_rises(
        rows in prop::collection::vec(prop::array::uniform2(-1.5f64..1.5), 2..40),
        t1 in 0.01f64..1.0,
        t2 in 0.01f64..1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let p = PointSet::from_rows(&rows).unwrap();
        let field = density_field(&p, &kernel(4.0)).unwrap();
        let wide = support_set(&field, lo).unwrap();
        let narrow = support_set(&field, hi).unwrap();
        prop_assert!(narrow.members.iter().all(|&i| wide.is_member(i)));
        prop_assert!(narrow.is_member(field.argmax()));
    }
}
