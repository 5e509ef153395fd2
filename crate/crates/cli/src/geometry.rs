//! Example geometries: point clouds in the line or the unit square with a
//! distinguished subset, an ambient measure and base measures on the subset.

use serde::{Deserialize, Serialize};

use mmtrace::regular_seq::{cantor_sequence, composite_adr_sequence, CantorConstruction, GapConvention};
use mmtrace::{FiniteMetricSpace, Measure, MeasureSequence, Metric, SetOfPoints};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum GeometrySpec {
    /// `n` equispaced points of `[0,1]`; the subset is `[0, 1/2]`.
    Line { n: usize },
    /// Cell-centred `side × side` grid of the unit square; the subset is the left half.
    Grid2d { side: usize },
    /// A horizontal segment sampled with `n` points inside a `side × side` grid.
    Segment { n: usize, side: usize },
    /// Grid points of a disc of the given radius around the centre of the square.
    Ball { side: usize, radius: f64 },
    /// A disc of grid points and a curve leaving it, glued at one junction point.
    Composite { side: usize, curve: usize },
    /// Cantor-type set of positive codimension `theta` after `depth` removals.
    Cantor { theta: f64, depth: usize },
}

impl GeometrySpec {
    pub fn label(&self) -> &'static str {
        match self {
            GeometrySpec::Line { .. } => "line",
            GeometrySpec::Grid2d { .. } => "grid2d",
            GeometrySpec::Segment { .. } => "segment",
            GeometrySpec::Ball { .. } => "ball",
            GeometrySpec::Composite { .. } => "composite",
            GeometrySpec::Cantor { .. } => "cantor",
        }
    }

    /// The five geometries of the net and cube suites, at desk-scale sizes.
    pub fn standard() -> Vec<GeometrySpec> {
        vec![
            GeometrySpec::Line { n: 257 },
            GeometrySpec::Grid2d { side: 32 },
            GeometrySpec::Segment { n: 101, side: 32 },
            GeometrySpec::Ball { side: 32, radius: 0.3 },
            GeometrySpec::Composite { side: 32, curve: 61 },
        ]
    }
}

pub struct Geometry {
    pub spec: GeometrySpec,
    pub points: Vec<Vec<f64>>,
    pub space: FiniteMetricSpace,
    /// Ambient measure.
    pub mu: Measure,
    pub s: SetOfPoints,
    /// Base measures on pieces of `S`, each with the codimension it is regular in.
    pub parts: Vec<(Measure, f64)>,
    /// Codimension of `S` as a whole (largest of the parts).
    pub theta: f64,
    /// Subsets of `S` for the density condition.
    pub test_sets: Vec<SetOfPoints>,
    /// Topological dimension of the ambient cloud.
    pub dim: u32,
    pub cantor: Option<CantorConstruction>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn grid(side: usize) -> Vec<Vec<f64>> {
    let h = 1.0 / side as f64;
    let mut pts = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            pts.push(vec![(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
        }
    }
    pts
}

fn check_side(side: usize) -> Result<(), CliError> {
    if side < 4 || side % 2 == 1 {
        return Err(bad(format!("grid side {side} must be even and at least 4")));
    }
    if side * side > 2000 {
        return Err(bad(format!("grid side {side} exceeds 2000 points")));
    }
    Ok(())
}

fn subset(n: usize, pred: impl Fn(usize) -> bool) -> SetOfPoints {
    SetOfPoints::from_mask(&(0..n).map(pred).collect::<Vec<_>>())
}

fn restricted(weights: &[f64], set: &SetOfPoints) -> Result<Measure, CliError> {
    Ok(Measure::new(weights.iter().enumerate().map(|(i, &w)| if set.contains(i) { w } else { 0.0 }).collect())?)
}

impl Geometry {
    pub fn build(spec: &GeometrySpec) -> Result<Self, CliError> {
        match *spec {
            GeometrySpec::Line { n } => {
                if !(3..=2000).contains(&n) {
                    return Err(bad(format!("line needs 3..=2000 points, got {n}")));
                }
                let h = 1.0 / (n - 1) as f64;
                let points: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 * h]).collect();
                let w = vec![h; n];
                let s = subset(n, |i| points[i][0] <= 0.5 + 1e-12);
                let left = subset(n, |i| points[i][0] <= 0.25 + 1e-12);
                let nu = restricted(&w, &s)?;
                Self::assemble(spec, points, w, s, vec![(nu, 0.0)], 0.0, vec![left], 1)
            }
            GeometrySpec::Grid2d { side } => {
                check_side(side)?;
                let points = grid(side);
                let n = points.len();
                let w = vec![1.0 / (n as f64); n];
                let s = subset(n, |i| points[i][0] < 0.5);
                let corner = subset(n, |i| points[i][0] < 0.25 && points[i][1] < 0.5);
                let nu = restricted(&w, &s)?;
                Self::assemble(spec, points, w, s, vec![(nu, 0.0)], 0.0, vec![corner], 2)
            }
            GeometrySpec::Segment { n, side } => {
                check_side(side)?;
                if n < 3 || n + side * side > 2000 {
                    return Err(bad(format!("segment with {n} points on a {side}-grid is out of range")));
                }
                let mut points = grid(side);
                let h = 1.0 / side as f64;
                let hs = 0.5 / (n - 1) as f64;
                let mut w = vec![h * h; points.len()];
                let first = points.len();
                for i in 0..n {
                    points.push(vec![0.25 + i as f64 * hs, 0.5]);
                    w.push(hs * hs);
                }
                let total = points.len();
                let s = subset(total, |i| i >= first);
                let left = subset(total, |i| i >= first && points[i][0] <= 0.5);
                let middle = subset(total, |i| i >= first && (points[i][0] - 0.5).abs() <= 0.5 / 6.0 + 1e-12);
                let nu = Measure::new((0..total).map(|i| if i >= first { hs } else { 0.0 }).collect())?;
                Self::assemble(spec, points, w, s, vec![(nu, 1.0)], 1.0, vec![left, middle], 2)
            }
            GeometrySpec::Ball { side, radius } => {
                check_side(side)?;
                if !(radius > 0.0 && radius <= 0.5) {
                    return Err(bad(format!("disc radius {radius} outside (0, 1/2]")));
                }
                let points = grid(side);
                let n = points.len();
                let w = vec![1.0 / (n as f64); n];
                let dist = |p: &[f64]| ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
                let s = subset(n, |i| dist(&points[i]) <= radius);
                if s.len() < 2 {
                    return Err(bad("disc contains fewer than two grid points"));
                }
                let half = subset(n, |i| s.contains(i) && points[i][0] < 0.5);
                let nu = restricted(&w, &s)?;
                Self::assemble(spec, points, w, s, vec![(nu, 0.0)], 0.0, vec![half], 2)
            }
            GeometrySpec::Composite { side, curve } => {
                check_side(side)?;
                if curve < 3 || curve + side * side > 2000 {
                    return Err(bad(format!("curve with {curve} points on a {side}-grid is out of range")));
                }
                let (cx, cy, rad) = (0.3, 0.5, 0.2);
                let mut points = grid(side);
                let h = 1.0 / side as f64;
                let hc = 0.4 / (curve - 1) as f64;
                let mut w = vec![h * h; points.len()];
                let first = points.len();
                // the curve starts at the junction on the rim of the disc
                for i in 0..curve {
                    let x = cx + rad + i as f64 * hc;
                    points.push(vec![x, cy + 0.05 * (8.0 * (x - cx - rad)).sin()]);
                    w.push(hc * hc);
                }
                let total = points.len();
                let in_disc = |i: usize| ((points[i][0] - cx).powi(2) + (points[i][1] - cy).powi(2)).sqrt() <= rad + 1e-12;
                let disc = subset(total, |i| (i < first && in_disc(i)) || i == first);
                let arc = subset(total, |i| i >= first);
                let s = disc.union(&arc);
                let ball_part = restricted(&w, &disc)?;
                let curve_part = Measure::new((0..total).map(|i| if i >= first { hc } else { 0.0 }).collect())?;
                Self::assemble(spec, points, w, s, vec![(ball_part, 0.0), (curve_part, 1.0)], 1.0, vec![disc, arc], 2)
            }
            GeometrySpec::Cantor { theta, depth } => {
                // coarsest grid that still gives every surviving interval two cells
                let survivor = cantor_survivor_length(theta, depth);
                let c = cantor_sequence(theta, depth, 0.5 * survivor, GapConvention::PerGap)?;
                let points: Vec<Vec<f64>> = c.cells.iter().map(|cell| vec![cell.position, 0.0]).collect();
                let w: Vec<f64> = c.cells.iter().map(|cell| cell.length * cell.length).collect();
                let n = points.len();
                let s = SetOfPoints::all(n);
                let parts = vec![(c.sequence.measures[0].clone(), theta)];
                let tests = vec![c.limit_set.clone()];
                let mut g = Self::assemble(spec, points, w, s, parts, theta, tests, 2)?;
                g.cantor = Some(c);
                Ok(g)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        spec: &GeometrySpec,
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
        s: SetOfPoints,
        parts: Vec<(Measure, f64)>,
        theta: f64,
        test_sets: Vec<SetOfPoints>,
        dim: u32,
    ) -> Result<Self, CliError> {
        let space = FiniteMetricSpace::from_points(&points, Metric::Euclidean)?;
        Ok(Self {
            spec: spec.clone(),
            points,
            space,
            mu: Measure::new(weights)?,
            s,
            parts,
            theta,
            test_sets,
            dim,
            cantor: None,
        })
    }

    /// Sum of the base measures.
    pub fn nu(&self) -> Measure {
        let mut acc = Measure::zero(self.space.len());
        for (m, _) in &self.parts {
            acc = acc.add(m).expect("parts live on one space");
        }
        acc
    }

    /// The canonical regular sequence: ADR scaling of the parts, or the
    /// explicit weights for the Cantor set (which fix `ε = 1/2`).
    pub fn sequence(&self, eps: f64, depth: usize) -> Result<MeasureSequence, CliError> {
        match &self.cantor {
            Some(c) => {
                if depth > c.sequence.depth() {
                    return Err(bad(format!("Cantor sequence has depth {}", c.sequence.depth())));
                }
                let mut seq = c.sequence.clone();
                seq.measures.truncate(depth + 1);
                Ok(seq)
            }
            None => Ok(composite_adr_sequence(&self.parts, self.theta, eps, depth)?),
        }
    }
}

/// Length of each surviving interval after `depth` removals.
pub fn cantor_survivor_length(theta: f64, depth: usize) -> f64 {
    let c1 = mmtrace::regular_seq::cantor_c1(theta);
    let mut len = 1.0;
    for i in 1..=depth {
        len = 0.5 * (len - 1.0 / (c1 * (i as f64).powf(theta) * 2f64.powi(i as i32)));
    }
    len
}
