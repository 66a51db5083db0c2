use std::f64::consts::PI;

use proptest::prelude::*;
use specmeas::decompositions::{gadget_decision, IntervalTree};
use specmeas::density::{rn_derivative, KnotSchedule};
use specmeas::gallery::{make_jacobi, JacobiFamily};
use specmeas::poisson::MeasureOptions;
use specmeas::{DecayVector, OpenRealSet};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trees_are_sound_and_cover_their_targets(
        centres in prop::collection::vec(-3.9f64..3.9, 0..4),
        depth in 0usize..6,
    ) {
        // Positive exactly on intervals that contain a target point.
        let c2 = centres.clone();
        let tree = IntervalTree::build(4, depth, move |a, b| Ok((c2.iter().any(|&c| a <= c && c <= b), 0.0))).unwrap();
        prop_assert!(tree.is_sound());
        let union = tree.union();
        for &c in &centres {
            prop_assert!(union.iter().any(|&(a, b)| a <= c && c <= b));
        }
        let width = 2f64.powi(-(depth as i32));
        for &i in &tree.retained_leaves() {
            let (a, b) = tree.nodes[i].interval;
            prop_assert!((b - a - width).abs() < 1e-12);
        }
    }

    #[test]
    fn gadget_answers_at_the_first_decisive_stage(vals in prop::collection::vec(0.0f64..1.0, 1..10), m in 2.0f64..20.0) {
        let n1 = vals.len();
        let (yes, v) = gadget_decision(n1, m, n1, |k| Ok(vals[k - 1])).unwrap();
        let decisive = (1..=n1).rev().map(|k| vals[k - 1]).find(|&v| v >= 2.0 / m || v <= 1.0 / m);
        match decisive {
            Some(d) => {
                prop_assert_eq!(v, d);
                prop_assert_eq!(yes, d >= 2.0 / m);
            }
            None => prop_assert!(!yes),
        }
    }

    #[test]
    fn set_strings_round_trip(raw in prop::collection::vec((-50i32..50, 1i32..10), 1..5)) {
        let mut iv: Vec<(f64, f64)> = Vec::new();
        let mut left = -1000.0;
        for (gap, len) in raw {
            let a = left + 1.0 + (gap + 50) as f64 * 0.5;
            let b = a + len as f64 * 0.25;
            iv.push((a, b));
            left = b;
        }
        let s = OpenRealSet::new(iv.clone(), false).unwrap();
        let back = OpenRealSet::parse(&s.to_string()).unwrap();
        prop_assert_eq!(back.intervals(), &iv[..]);
        for &(a, b) in &iv {
            let mid = 0.5 * (a + b);
            prop_assert!(s.contains(mid) && !s.contains(a) && !s.contains(b));
        }
    }
}

#[test]
fn malformed_sets_are_rejected() {
    for s in ["", "(1,0)", "(0,1", "(0,1,2)", "(a,b)", "(0,2);(1,3)"] {
        assert!(OpenRealSet::parse(s).is_err(), "{s}");
    }
    assert!(OpenRealSet::parse("(-inf,0);(1,inf)").is_ok());
}

#[test]
fn smoothed_semicircle_density_converges() {
    let g = make_jacobi(JacobiFamily::Free).unwrap();
    let u = OpenRealSet::interval(-0.5, 0.5).unwrap();
    let mo = MeasureOptions::default().with_tol(1e-10);
    let mut prev = f64::INFINITY;
    for n in [8, 32] {
        let d = rn_derivative(&g.op, &DecayVector::basis(1), &DecayVector::basis(1), &u, n, KnotSchedule::default(), &mo)
            .unwrap();
        let worst = [-0.3, 0.0, 0.2, 0.4]
            .iter()
            .map(|&x: &f64| (d.eval(x).re - 2.0 / PI * (1.0 - x * x).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(worst < prev, "stage {n}: {worst}");
        prev = worst;
    }
    assert!(prev < 0.03, "{prev}");
}

#[test]
fn knot_schedules_space_as_documented() {
    assert_eq!(KnotSchedule::PerEps(8.0).max_spacing(2.0, 10, 3), 1.0 / 80.0);
    assert_eq!(KnotSchedule::Strict.max_spacing(2.0, 10, 3), 1.0 / (2.0 * 1000.0 * 9.0));
}
