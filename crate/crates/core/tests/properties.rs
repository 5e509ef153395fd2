use proptest::prelude::*;

use mmtrace::dyadic::{build_cubes, build_order, verify_cubes, verify_order};
use mmtrace::extension::partition_of_unity;
use mmtrace::functionals::{cn, sharp_maximal, TraceContext};
use mmtrace::measures::{average, best_l1_constant, l1_deviation};
use mmtrace::mms_core::{build_nets, verify_nets};
use mmtrace::regular_seq::adr_sequence;
use mmtrace::{FiniteMetricSpace, Measure, Metric, SetOfPoints};

fn cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..1.0f64, 2), 2..40)
}

fn space(pts: &[Vec<f64>]) -> Option<FiniteMetricSpace> {
    FiniteMetricSpace::from_points(pts, Metric::Euclidean).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn best_constant_beats_every_sample(
        vals in prop::collection::vec((-10.0..10.0f64, 0.0..3.0f64), 1..30),
    ) {
        let (f, mut w): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
        w[0] += 0.1;
        let m = Measure::new(w).unwrap();
        let set: Vec<usize> = (0..f.len()).collect();
        let (e, c) = best_l1_constant(&f, &set, &m).unwrap();
        prop_assert_eq!(l1_deviation(&f, &set, &m, c), e);
        for &v in &f {
            prop_assert!(e <= l1_deviation(&f, &set, &m, v));
        }
        let mean_dev = l1_deviation(&f, &set, &m, average(&f, &set, &m));
        prop_assert!(e <= mean_dev + 1e-9 && mean_dev <= 2.0 * e + 1e-9);
    }

    #[test]
    fn nets_order_and_cubes_are_consistent(pts in cloud()) {
        let Some(s) = space(&pts) else { return Ok(()) };
        let nets = build_nets(&s, 0.1, 0, 3, None).unwrap();
        prop_assert!(verify_nets(&s, &nets).is_empty());
        let order = build_order(&s, &nets).unwrap();
        prop_assert!(verify_order(&s, &nets, &order).is_empty());
        let cubes = build_cubes(&s, &nets, &order, 0.125).unwrap();
        let v = verify_cubes(&s, &nets, &cubes);
        prop_assert!(v.is_empty(), "{:?}", v.first());
    }

    #[test]
    fn partition_of_unity_sums_to_one(pts in cloud(), pick in 0usize..40) {
        let Some(s) = space(&pts) else { return Ok(()) };
        let nets = build_nets(&s, 0.1, 0, 3, None).unwrap();
        let sub = SetOfPoints::new(vec![pick % s.len()], s.len()).unwrap();
        for k in 1..=3 {
            let pou = partition_of_unity(&s, &nets, &sub, k).unwrap();
            for x in 0..s.len() {
                prop_assert!((pou.sum_at(x) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sharp_maximal_and_cn_are_homogeneous(
        pts in cloud(),
        f0 in prop::collection::vec(-5.0..5.0f64, 40),
        lambda in prop::sample::select(vec![0.5, 3.0, -2.0]),
    ) {
        let Some(s) = space(&pts) else { return Ok(()) };
        let n = s.len();
        let mu = Measure::new(vec![1.0 / n as f64; n]).unwrap();
        let sub = SetOfPoints::new((0..n).step_by(2).collect(), n).unwrap();
        let seq = adr_sequence(&mu.restrict(&sub), 0.0, 0.0, 0.1, 8).unwrap();
        let ctx = TraceContext::new(&s, &mu, &sub, &seq).unwrap();
        let f = &f0[..n];
        let g: Vec<f64> = f.iter().map(|v| lambda * v).collect();
        let (a, b) = (sharp_maximal(&ctx, f).unwrap(), sharp_maximal(&ctx, &g).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((y - lambda.abs() * x).abs() <= 1e-9 * x.abs().max(1.0));
        }
        let (a, b) = (cn(&ctx, f, 2.0).unwrap().value, cn(&ctx, &g, 2.0).unwrap().value);
        prop_assert!((b - lambda.abs() * a).abs() <= 1e-9 * a.max(1.0));
    }
}
