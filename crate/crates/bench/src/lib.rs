//! Fixtures shared by the benchmarks.

use mmtrace::regular_seq::adr_sequence;
use mmtrace::{FiniteMetricSpace, Measure, MeasureSequence, Metric, SetOfPoints};

pub struct Fixture {
    pub space: FiniteMetricSpace,
    pub mu: Measure,
    pub s: SetOfPoints,
    pub seq: MeasureSequence,
    pub f: Vec<f64>,
}

/// Cell-centred `side × side` grid with `S` the left half and a tent function.
pub fn grid(side: usize, depth: usize) -> Fixture {
    let h = 1.0 / side as f64;
    let pts: Vec<Vec<f64>> = (0..side * side)
        .map(|i| vec![(i % side) as f64 * h + 0.5 * h, (i / side) as f64 * h + 0.5 * h])
        .collect();
    let space = FiniteMetricSpace::from_points(&pts, Metric::Euclidean).expect("distinct points");
    let n = pts.len();
    let mu = Measure::new(vec![1.0 / n as f64; n]).expect("weights");
    let s = SetOfPoints::from_mask(&pts.iter().map(|p| p[0] < 0.5).collect::<Vec<_>>());
    let seq = adr_sequence(&mu.restrict(&s), 0.0, 0.0, 0.1, depth).expect("sequence");
    let f = pts.iter().map(|p| (p[0] - 0.3).abs().min(p[1])).collect();
    Fixture { space, mu, s, seq, f }
}
