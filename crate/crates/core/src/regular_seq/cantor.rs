//! Cantor-type subset of `[0,1]` with weighted length measures that satisfy
//! the upper/lower/density-ratio conditions but not the density condition.

use serde::{Deserialize, Serialize};

use super::MeasureSequence;
use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::mms_core::{FiniteMetricSpace, Metric, SetOfPoints};

const ZETA_TERMS: usize = 20_000;
const MAX_POINTS: usize = 20_000;

/// `Σ_{k≥1} k^{-θ}` by partial sums plus an Euler–Maclaurin tail.
fn zeta(theta: f64) -> f64 {
    let n = ZETA_TERMS as f64;
    let head: f64 = (1..ZETA_TERMS).rev().map(|k| (k as f64).powf(-theta)).sum();
    let tail = n.powf(1.0 - theta) / (theta - 1.0) + 0.5 * n.powf(-theta) + theta / 12.0 * n.powf(-theta - 1.0)
        - theta * (theta + 1.0) * (theta + 2.0) / 720.0 * n.powf(-theta - 3.0);
    head + tail
}

/// `2 Σ_{k≥1} k^{-θ}`.
pub fn cantor_c1(theta: f64) -> f64 {
    2.0 * zeta(theta)
}

/// `min_{j≥0} 2^j / (1+j)^{θ-1}`.
pub fn cantor_c2(theta: f64) -> f64 {
    (0..64).map(|j| 2f64.powi(j) / (1.0 + j as f64).powf(theta - 1.0)).fold(f64::INFINITY, f64::min)
}

/// How long the individual gaps of the `i`-th removal are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GapConvention {
    /// Each of the `2^{i-1}` gaps of generation `i` has length `1/(c1 2^i i^θ)`.
    #[default]
    PerGap,
    /// Generation `i` removes total length `1/(c1 i^θ)`, split evenly.
    PerGeneration,
}

impl GapConvention {
    fn gap(self, c1: f64, theta: f64, i: usize) -> f64 {
        let base = 1.0 / (c1 * (i as f64).powf(theta));
        match self {
            GapConvention::PerGap => base / 2f64.powi(i as i32),
            GapConvention::PerGeneration => base / 2f64.powi(i as i32 - 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CellKind {
    /// Grid cell inside a gap of the given generation.
    Gap(usize),
    /// Part of a surviving interval lying in the limit set.
    Survivor,
    /// Part of a surviving interval removed at generations beyond the depth.
    Tail,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CantorCell {
    pub position: f64,
    pub length: f64,
    pub kind: CellKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CantorConstruction {
    pub theta: f64,
    pub depth: usize,
    pub c1: f64,
    pub c2: f64,
    pub convention: GapConvention,
    /// Gaps per generation, `gaps[i-1]` for generation `i`.
    pub gaps: Vec<Vec<(f64, f64)>>,
    /// Surviving intervals after `depth` generations.
    pub survivors: Vec<(f64, f64)>,
    pub cells: Vec<CantorCell>,
    /// Atoms lying in the limit set.
    pub limit_set: SetOfPoints,
    pub sequence: MeasureSequence,
    /// Grid spacing actually used.
    pub cell: f64,
}

impl CantorConstruction {
    /// Points on the segment `[0,1] × {0}` in the plane.
    pub fn space(&self) -> Result<FiniteMetricSpace> {
        let pts: Vec<Vec<f64>> = self.cells.iter().map(|c| vec![c.position, 0.0]).collect();
        FiniteMetricSpace::from_points(&pts, Metric::Euclidean)
    }

    pub fn support(&self) -> SetOfPoints {
        SetOfPoints::all(self.cells.len())
    }

    pub fn smallest_gap(&self) -> f64 {
        self.convention.gap(self.c1, self.theta, self.depth)
    }
}

/// Weight of the `k`-th density on a gap of generation `i` (or on
/// anything removed beyond generation `k` when `i > k`).
pub fn gap_weight(theta: f64, k: usize, i: usize) -> f64 {
    let (a, b) = if i <= k { (i, i) } else { (k, k + 1) };
    2f64.powf((theta - 1.0) * a as f64) * (b as f64).powf(theta - 1.0)
}

pub fn cantor_sequence(theta: f64, depth: usize, max_cell: f64, convention: GapConvention) -> Result<CantorConstruction> {
    if !(theta > 1.0 && theta < 2.0) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    if depth == 0 {
        return Err(Error::BadParameter("depth must be at least 1".into()));
    }
    if !(max_cell > 0.0) {
        return Err(Error::BadParameter("grid spacing must be positive".into()));
    }
    let c1 = cantor_c1(theta);
    let c2 = cantor_c2(theta);
    let mut intervals = vec![(0.0f64, 1.0f64)];
    let mut gaps = Vec::with_capacity(depth);
    for i in 1..=depth {
        let g = convention.gap(c1, theta, i);
        let mut next = Vec::with_capacity(2 * intervals.len());
        let mut gen = Vec::with_capacity(intervals.len());
        for &(a, b) in &intervals {
            let mid = 0.5 * (a + b);
            gen.push((mid - 0.5 * g, mid + 0.5 * g));
            next.push((a, mid - 0.5 * g));
            next.push((mid + 0.5 * g, b));
        }
        gaps.push(gen);
        intervals = next;
    }
    let survivor_len = intervals[0].1 - intervals[0].0;
    if max_cell > 0.5 * survivor_len {
        return Err(Error::GridTooCoarse);
    }
    // length of the later removals inside each surviving interval
    let partial: f64 = (1..=depth).map(|i| (i as f64).powf(-theta)).sum();
    let rest = 0.5 * c1 - partial;
    let tail = match convention {
        GapConvention::PerGap => 0.5f64.powi(depth as i32 + 1) / c1 * rest,
        GapConvention::PerGeneration => 0.5f64.powi(depth as i32) / c1 * rest,
    };
    let tail_frac = tail / survivor_len;

    let mut cells = Vec::new();
    for (gi, gen) in gaps.iter().enumerate() {
        for &(a, b) in gen {
            let q = ((b - a) / max_cell).ceil().max(1.0) as usize;
            let l = (b - a) / q as f64;
            for t in 0..q {
                cells.push(CantorCell { position: a + (t as f64 + 0.5) * l, length: l, kind: CellKind::Gap(gi + 1) });
            }
        }
    }
    for &(a, b) in &intervals {
        let q = ((b - a) / max_cell).ceil() as usize;
        let l = (b - a) / q as f64;
        for t in 0..q {
            let left = a + t as f64 * l;
            cells.push(CantorCell { position: left + 0.25 * l, length: (1.0 - tail_frac) * l, kind: CellKind::Survivor });
            cells.push(CantorCell { position: left + 0.75 * l, length: tail_frac * l, kind: CellKind::Tail });
        }
    }
    if cells.len() > MAX_POINTS {
        return Err(Error::BadParameter(format!("{} grid points exceed the limit", cells.len())));
    }
    cells.sort_by(|a, b| a.position.total_cmp(&b.position));
    let measures = (0..=depth)
        .map(|k| {
            Measure::new(
                cells
                    .iter()
                    .map(|c| {
                        c.length
                            * match c.kind {
                                CellKind::Survivor => 1.0,
                                CellKind::Gap(i) => gap_weight(theta, k, i),
                                CellKind::Tail => gap_weight(theta, k, depth + 1),
                            }
                    })
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let limit_set = SetOfPoints::from_mask(&cells.iter().map(|c| c.kind == CellKind::Survivor).collect::<Vec<_>>());
    let sequence = MeasureSequence::new(0.5, theta, measures, "cantor")?;
    Ok(CantorConstruction {
        theta,
        depth,
        c1,
        c2,
        convention,
        gaps,
        survivors: intervals,
        cells,
        limit_set,
        sequence,
        cell: max_cell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_density_is_length() {
        let c = cantor_sequence(1.5, 4, 1.0 / 256.0, GapConvention::PerGap).unwrap();
        for (cell, w) in c.cells.iter().zip(c.sequence.measures[0].weights()) {
            assert!((cell.length - w).abs() < 1e-15);
        }
        let total: f64 = c.cells.iter().map(|c| c.length).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_theta_and_coarse_grid() {
        assert_eq!(cantor_sequence(2.0, 3, 0.01, GapConvention::PerGap).unwrap_err(), Error::ThetaOutOfRange(2.0));
        assert_eq!(cantor_sequence(1.5, 6, 0.05, GapConvention::PerGap).unwrap_err(), Error::GridTooCoarse);
    }

    #[test]
    fn c2_is_one_below_two() {
        assert_eq!(cantor_c2(1.5), 1.0);
    }
}
