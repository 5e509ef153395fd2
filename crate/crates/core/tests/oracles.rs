//! Values checked against independently computed references.

use mmtrace::dyadic::{build_order, verify_order, PartialOrder};
use mmtrace::measures::{best_l1_constant, hausdorff_content, ContentMode, ContentOptions};
use mmtrace::mms_core::{build_nets, build_space, verify_nets};
use mmtrace::potentials::duality_gap;
use mmtrace::regular_seq::{adr_sequence, cantor_c1, cantor_c2, cantor_sequence, gap_weight, GapConvention};
use mmtrace::{FiniteMetricSpace, Measure, MeasureSequence, Metric, SetOfPoints, SpaceInput};

fn line(n: usize) -> FiniteMetricSpace {
    let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
    FiniteMetricSpace::from_points(&pts, Metric::Euclidean).unwrap()
}

#[test]
fn cantor_normalisation_matches_zeta() {
    // 2·ζ(3/2), ζ(3/2) = 2.612375348685488343… (mpmath)
    assert!((cantor_c1(1.5) - 5.224_750_697_370_977).abs() < 1e-9);
    // ζ(2) = π²/6
    assert!((cantor_c1(2.0 - 1e-12) - std::f64::consts::PI.powi(2) / 3.0).abs() < 1e-6);
    assert_eq!(cantor_c2(1.5), 1.0);
}

#[test]
fn cantor_gaps_remove_the_expected_length() {
    let theta = 1.5;
    let c = cantor_sequence(theta, 5, 1e-3, GapConvention::PerGap).unwrap();
    assert_eq!(c.survivors.len(), 32);
    let mut removed = 0.0;
    for (i, gen) in c.gaps.iter().enumerate() {
        let i = i + 1;
        assert_eq!(gen.len(), 1 << (i - 1));
        let expect = 1.0 / (c.c1 * 2f64.powi(i as i32) * (i as f64).powf(theta));
        for &(a, b) in gen {
            assert!((b - a - expect).abs() < 1e-15);
        }
        removed += expect * gen.len() as f64;
    }
    let kept: f64 = c.survivors.iter().map(|(a, b)| b - a).sum();
    assert!((kept + removed - 1.0).abs() < 1e-12);
    // every gap of the infinite construction together removes a quarter
    assert!(removed < 0.25);
}

#[test]
fn gap_weights_freeze_past_the_depth() {
    assert_eq!(gap_weight(1.5, 3, 2), 2f64.powf(0.5 * 2.0) * 2f64.powf(0.5));
    assert_eq!(gap_weight(1.5, 3, 7), gap_weight(1.5, 3, 9));
}

#[test]
fn adr_sequence_scales_geometrically() {
    let base = Measure::new(vec![1.0, 2.0, 0.0, 4.0]).unwrap();
    let seq = adr_sequence(&base, 0.0, 1.0, 0.1, 4).unwrap();
    for k in 0..=4 {
        for (a, b) in seq.measures[k].weights().iter().zip(base.weights()) {
            assert!((a - b * 10f64.powi(k as i32)).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
    assert!(adr_sequence(&base, 2.0, 1.0, 0.1, 2).is_err());
}

#[test]
fn weighted_median_against_hand_values() {
    // weights 1,1,3 on values 0,1,2: median 2, E = (2 + 1)/5
    let m = Measure::new(vec![1.0, 1.0, 3.0]).unwrap();
    let (e, c) = best_l1_constant(&[0.0, 1.0, 2.0], &[0, 1, 2], &m).unwrap();
    assert_eq!(c, 2.0);
    assert!((e - 0.6).abs() < 1e-15);
}

#[test]
fn content_of_two_far_points() {
    // two atoms of mass 1 at distance 1, δ = 0.4: each needs its own ball of radius 0.2
    let s = line(2);
    let mu = Measure::new(vec![1.0, 1.0]).unwrap();
    let both = SetOfPoints::all(2);
    let opts = ContentOptions { mode: ContentMode::Exact, ..Default::default() };
    let h = hausdorff_content(&s, &mu, &both, 1.0, 0.4, opts).unwrap();
    assert!((h.value - 2.0 / 0.2).abs() < 1e-12, "{}", h.value);
    assert_eq!(h.cover.len(), 2);
}

#[test]
fn order_check_catches_a_wrong_parent() {
    let s = line(41);
    let nets = build_nets(&s, 0.1, 0, 2, None).unwrap();
    assert!(verify_nets(&s, &nets).is_empty());
    let order = build_order(&s, &nets).unwrap();
    assert!(verify_order(&s, &nets, &order).is_empty());
    let mut raw = serde_json::to_value(&order).unwrap();
    // relink the first level-2 point to a different level-1 point
    let coarse = nets.level(1).len();
    assert!(coarse > 1);
    let fine = raw["parents"][2].as_array_mut().unwrap();
    let wrong = (fine[0].as_u64().unwrap() + 1) % coarse as u64;
    fine[0] = wrong.into();
    let bad: PartialOrder = serde_json::from_value(raw).unwrap();
    let v = verify_order(&s, &nets, &bad);
    assert!(v.iter().any(|v| v.condition == "PO4" || v.condition == "PO3"), "{v:?}");
}

#[test]
fn duality_on_a_two_point_space() {
    // R = 1 so the unit ball holds both points; smaller balls are singletons and carry nothing
    let s = line(2);
    let w = Measure::new(vec![1.0, 0.5]).unwrap();
    let (primal, dual) = duality_gap(&s, &w, &w, &w, 2.0, 0.1, 1.0).unwrap();
    assert!(dual > 0.0);
    assert!((primal - dual).abs() <= 1e-12 * dual);
}

#[test]
fn space_and_sequence_round_trip_through_json() {
    let input: SpaceInput = serde_json::from_str(r#"{"points": [[0.0, 0.0], [3.0, 4.0]]}"#).unwrap();
    let space = build_space(&input).unwrap();
    assert_eq!(space.d(0, 1), 5.0);
    let table: SpaceInput = serde_json::from_str(r#"{"dist": [[0.0, 2.0], [2.0, 0.0]]}"#).unwrap();
    assert_eq!(build_space(&table).unwrap().d(1, 0), 2.0);
    let seq = adr_sequence(&Measure::new(vec![1.0, 1.0]).unwrap(), 0.0, 0.5, 0.1, 3).unwrap();
    let back: MeasureSequence = serde_json::from_str(&serde_json::to_string(&seq).unwrap()).unwrap();
    assert_eq!(back.measures.len(), 4);
    assert_eq!(back.measures[3].weights(), seq.measures[3].weights());
}
