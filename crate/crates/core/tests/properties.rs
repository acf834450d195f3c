//! Property tests over arbitrary inputs (not just the seeded grids the other
//! suites use).

use bellgyro::bell::{outcome_distribution, outcome_distribution_dense, MeasurementAxis};
use bellgyro::linalg::{rotation_axis_angle, AxisAngle, BellKind, RotationVector};
use proptest::prelude::*;

fn arb_kind() -> impl Strategy<Value = BellKind> {
    prop_oneof![
        Just(BellKind::PhiPlus),
        Just(BellKind::PhiMinus),
        Just(BellKind::PsiPlus),
        Just(BellKind::PsiMinus),
    ]
}

fn arb_rotation() -> impl Strategy<Value = RotationVector> {
    (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(x, y, z)| RotationVector::new(x, y, z))
}

fn arb_axis() -> impl Strategy<Value = MeasurementAxis> {
    (0.0f64..std::f64::consts::PI, 0.0f64..6.2831853)
        .prop_map(|(t, l)| MeasurementAxis::new(t, l).unwrap())
}

proptest! {
    #[test]
    fn distributions_are_valid_probabilities(
        kind in arb_kind(),
        rot in arb_rotation(),
        axis in arb_axis(),
        alpha in 0.0f64..=1.0,
    ) {
        let d = outcome_distribution(kind, &rot, &axis, alpha).unwrap();
        let p = d.as_array();
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn singlet_outcome_is_exactly_quarter_alpha(
        kind in prop_oneof![
            Just(BellKind::PhiPlus),
            Just(BellKind::PhiMinus),
            Just(BellKind::PsiPlus),
        ],
        rot in arb_rotation(),
        axis in arb_axis(),
        alpha in 0.0f64..=1.0,
    ) {
        let d = outcome_distribution(kind, &rot, &axis, alpha).unwrap();
        prop_assert_eq!(d.p_psi_minus(), alpha / 4.0);
    }

    #[test]
    fn fast_and_dense_routes_agree(
        kind in arb_kind(),
        rot in arb_rotation(),
        axis in arb_axis(),
        alpha in 0.0f64..=1.0,
    ) {
        let fast = outcome_distribution(kind, &rot, &axis, alpha).unwrap();
        let dense = outcome_distribution_dense(kind, &rot, &axis, alpha).unwrap();
        for (a, b) in fast.as_array().iter().zip(dense.as_array()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rotations_are_unitary_and_compose(
        raw in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        t1 in -3.0f64..3.0,
        t2 in -3.0f64..3.0,
    ) {
        let n = (raw.0 * raw.0 + raw.1 * raw.1 + raw.2 * raw.2).sqrt();
        prop_assume!(n > 0.1);
        let axis = [raw.0 / n, raw.1 / n, raw.2 / n];
        let r1 = rotation_axis_angle(&AxisAngle::new(axis, t1).unwrap());
        let r2 = rotation_axis_angle(&AxisAngle::new(axis, t2).unwrap());
        let sum = rotation_axis_angle(&AxisAngle::new(axis, t1 + t2).unwrap());
        prop_assert!(r1.unitarity_defect() < 1e-12);
        prop_assert!(r1.mul(&r2).max_abs_diff(&sum) < 1e-12);
    }
}
