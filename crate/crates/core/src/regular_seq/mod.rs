//! Sequences of measures on a subset: verification of the regularity
//! conditions and three constructions (ADR scaling, Cantor-type
//! counterexample, mass redistribution on quasicubes).

mod cantor;
mod redistribute;

pub use cantor::{cantor_c1, cantor_c2, cantor_sequence, gap_weight, CantorCell, CantorConstruction, CellKind, GapConvention};
pub use redistribute::{redistribute, redistributed_sequence, Redistribution};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::mms_core::{FiniteMetricSpace, SetOfPoints, TOL};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureSequence {
    pub eps: f64,
    pub theta: f64,
    pub measures: Vec<Measure>,
    pub provenance: String,
}

impl MeasureSequence {
    pub fn new(eps: f64, theta: f64, measures: Vec<Measure>, provenance: &str) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::EpsOutOfRange(eps));
        }
        if measures.is_empty() {
            return Err(Error::BadParameter("empty measure sequence".into()));
        }
        let n = measures[0].len();
        if measures.iter().any(|m| m.len() != n) {
            return Err(Error::BadParameter("measures of different lengths".into()));
        }
        Ok(Self { eps, theta, measures, provenance: provenance.to_string() })
    }

    /// Largest available index `K`.
    pub fn depth(&self) -> usize {
        self.measures.len() - 1
    }

    pub fn get(&self, k: usize) -> Result<&Measure> {
        self.measures
            .get(k)
            .ok_or(Error::SequenceDepthExceeded { needed: k as i64, depth: self.depth() })
    }

    /// `m_k(x) / m_0(x)` on the support.
    pub fn density(&self, k: usize, x: usize) -> f64 {
        self.measures[k].weight(x) / self.measures[0].weight(x)
    }

    pub fn check_support(&self, s: &SetOfPoints) -> Result<()> {
        for (index, m) in self.measures.iter().enumerate() {
            if m.support() != s.members() {
                return Err(Error::SupportMismatch { index });
            }
        }
        Ok(())
    }
}

/// `m_k = ε^{-k(θ - θ_base)} · base`, `k = 0..=depth`.
pub fn adr_sequence(base: &Measure, theta_base: f64, theta: f64, eps: f64, depth: usize) -> Result<MeasureSequence> {
    composite_adr_sequence(&[(base.clone(), theta_base)], theta, eps, depth)
}

/// Sum over parts of `ε^{-k(θ - θ_i)} · base_i`.
pub fn composite_adr_sequence(
    parts: &[(Measure, f64)],
    theta: f64,
    eps: f64,
    depth: usize,
) -> Result<MeasureSequence> {
    if parts.is_empty() {
        return Err(Error::BadParameter("no base measures".into()));
    }
    for (_, tb) in parts {
        if *tb > theta {
            return Err(Error::ThetaOrder { base: *tb, target: theta });
        }
    }
    let n = parts[0].0.len();
    let mut measures = Vec::with_capacity(depth + 1);
    for k in 0..=depth {
        let mut w = vec![0.0; n];
        for (base, tb) in parts {
            if base.len() != n {
                return Err(Error::BadParameter("base measures of different lengths".into()));
            }
            let factor = eps.powf(-(k as f64) * (theta - tb));
            for (wi, bi) in w.iter_mut().zip(base.weights()) {
                *wi += factor * bi;
            }
        }
        measures.push(Measure::new(w)?);
    }
    MeasureSequence::new(eps, theta, measures, "adr")
}

/// Reference volume of balls.
#[derive(Debug, Clone, Copy)]
pub enum Ambient<'a> {
    Atomic(&'a Measure),
    /// `ω_d r^d`: Lebesgue measure of Euclidean balls in dimension `d`.
    Lebesgue { dim: u32 },
}

pub fn unit_ball_volume(dim: u32) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0,
        d => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct VerifyOptions {
    /// Inclusive range of sequence indices to test; defaults to `0..=K`.
    pub k_range: Option<(usize, usize)>,
    /// Radii below this are not swept (resolution floor of a discretisation).
    pub min_radius: f64,
    pub c1_max: Option<f64>,
    pub c2_min: Option<f64>,
    pub c3_max: Option<f64>,
    pub m5_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Extremum {
    pub value: f64,
    pub point: usize,
    pub k: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthStats {
    pub k: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityProfile {
    pub set_index: usize,
    pub per_depth: Vec<DepthStats>,
    /// Min over points of the max over depths.
    pub min_over_points: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassFlags {
    pub m1: bool,
    pub m2: bool,
    pub m3: bool,
    pub m4: bool,
    pub m5: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceReport {
    pub c1: Extremum,
    pub c2: Extremum,
    pub c3: f64,
    /// `(point, k, j)` realising `c3`.
    pub c3_at: (usize, usize, usize),
    pub densities: Vec<DensityProfile>,
    pub m5_min_density: f64,
    pub pass: PassFlags,
}

struct Profile {
    radii: Vec<f64>,
    ends: Vec<usize>,
}

fn profile(space: &FiniteMetricSpace, x: usize) -> Profile {
    let sd = space.sorted_distances(x);
    let mut radii = Vec::new();
    let mut ends = Vec::new();
    for &d in sd {
        if radii.last().is_none_or(|&l: &f64| d > l + TOL) {
            radii.push(d);
            ends.push(space.ball_count(x, d));
        }
    }
    Profile { radii, ends }
}

fn prefix(space: &FiniteMetricSpace, x: usize, m: &Measure) -> Vec<f64> {
    let mut out = Vec::with_capacity(space.len() + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for &j in space.sorted(x) {
        acc += m.weight(j as usize);
        out.push(acc);
    }
    out
}

fn ratio(mass: f64, r: f64, theta: f64, vol: f64) -> f64 {
    if mass == 0.0 {
        return 0.0;
    }
    if vol <= 0.0 {
        return f64::INFINITY;
    }
    mass * r.powf(theta) / vol
}

/// Extremal constants of the regularity conditions on a finite sequence.
pub fn verify(
    seq: &MeasureSequence,
    space: &FiniteMetricSpace,
    mu: Ambient<'_>,
    s: &SetOfPoints,
    test_sets: &[SetOfPoints],
    opts: &VerifyOptions,
) -> Result<SequenceReport> {
    if seq.measures[0].len() != space.len() {
        return Err(Error::BadParameter("sequence does not live on this space".into()));
    }
    seq.check_support(s)?;
    let (k0, k1) = opts.k_range.unwrap_or((0, seq.depth()));
    if k0 > k1 || k1 > seq.depth() {
        return Err(Error::SequenceDepthExceeded { needed: k1 as i64, depth: seq.depth() });
    }
    for x in s.iter() {
        if seq.measures[0].weight(x) <= 0.0 {
            return Err(Error::ZeroDensity(x));
        }
    }
    let theta = seq.theta;
    let eps = seq.eps;
    let rmin = opts.min_radius;
    let s_mask = s.mask(space.len());

    let per_point: Vec<(Extremum, Option<Extremum>)> = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let prof = profile(space, x);
            let mu_pre = match mu {
                Ambient::Atomic(m) => Some(prefix(space, x, m)),
                Ambient::Lebesgue { .. } => None,
            };
            let vol = |g: usize, r: f64| match (mu, &mu_pre) {
                (Ambient::Atomic(_), Some(p)) => p[prof.ends[g]],
                (Ambient::Lebesgue { dim }, _) => unit_ball_volume(dim) * r.powi(dim as i32),
                _ => unreachable!(),
            };
            let mut up = Extremum { value: 0.0, point: x, k: k0, radius: 0.0 };
            let mut down: Option<Extremum> = None;
            for k in k0..=k1 {
                let pre = prefix(space, x, &seq.measures[k]);
                let big = eps.powi(k as i32);
                let g_count = prof.radii.len();
                for g in 0..g_count {
                    let next = prof.radii.get(g + 1).copied().unwrap_or(f64::INFINITY);
                    let mass = pre[prof.ends[g]];
                    // upper constant: r in (0, ε^k]
                    let lo = prof.radii[g].max(rmin);
                    let hi = next.min(big);
                    if lo <= hi && prof.radii[g] <= big + TOL {
                        for r in [lo, hi] {
                            if r <= 0.0 && matches!(mu, Ambient::Lebesgue { .. }) {
                                continue;
                            }
                            let v = ratio(mass, r, theta, vol(g, r));
                            if v > up.value {
                                up = Extremum { value: v, point: x, k, radius: r };
                            }
                        }
                    }
                    // lower constant: r in [ε^k, 1], centres in S
                    if s_mask[x] {
                        let lo = prof.radii[g].max(big).max(rmin);
                        let hi = next.min(1.0);
                        if lo <= hi {
                            for r in [lo, hi] {
                                let v = ratio(mass, r, theta, vol(g, r));
                                if down.is_none_or(|d| v < d.value) {
                                    down = Some(Extremum { value: v, point: x, k, radius: r });
                                }
                            }
                        }
                    }
                }
            }
            (up, down)
        })
        .collect();
    let mut c1 = per_point[0].0;
    let mut c2: Option<Extremum> = None;
    for (u, d) in &per_point {
        if u.value > c1.value {
            c1 = *u;
        }
        if let Some(d) = d {
            if c2.is_none_or(|c| d.value < c.value) {
                c2 = Some(*d);
            }
        }
    }
    let c2 = c2.ok_or(Error::EmptyTargetSet)?;

    let mut c3 = 0.0f64;
    let mut c3_at = (s.members()[0], k0, 0);
    for x in s.iter() {
        for k in k0..=k1 {
            for j in 0..=(k1 - k) {
                let a = seq.density(k, x);
                let b = seq.density(k + j, x);
                let v = (a / b).max(eps.powf(theta * j as f64) * b / a);
                if v > c3 {
                    c3 = v;
                    c3_at = (x, k, j);
                }
            }
        }
    }

    let mut densities = Vec::new();
    let mut m5_min = f64::INFINITY;
    for (si, e) in test_sets.iter().enumerate() {
        let e_mask = e.mask(space.len());
        let rows: Vec<Vec<f64>> = e
            .members()
            .par_iter()
            .map(|&x| {
                (k0..=k1)
                    .map(|k| {
                        let m = &seq.measures[k];
                        let ball = space.ball_prefix(x, eps.powi(k as i32));
                        let tot = m.mass_u32(ball);
                        let part: f64 = ball.iter().filter(|&&y| e_mask[y as usize]).map(|&y| m.weight(y as usize)).sum();
                        if tot > 0.0 {
                            part / tot
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let per_depth = (k0..=k1)
            .enumerate()
            .map(|(i, k)| {
                let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
                DepthStats {
                    k,
                    min: col.iter().cloned().fold(f64::INFINITY, f64::min),
                    max: col.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    mean: col.iter().sum::<f64>() / col.len().max(1) as f64,
                }
            })
            .collect();
        let min_over_points = rows
            .iter()
            .map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min);
        m5_min = m5_min.min(min_over_points);
        densities.push(DensityProfile { set_index: si, per_depth, min_over_points });
    }

    let pass = PassFlags {
        m1: true,
        m2: c1.value.is_finite() && opts.c1_max.is_none_or(|t| c1.value <= t),
        m3: c2.value > 0.0 && opts.c2_min.is_none_or(|t| c2.value >= t),
        m4: c3.is_finite() && opts.c3_max.is_none_or(|t| c3 <= t),
        m5: opts.m5_min.is_none_or(|t| m5_min >= t),
    };
    Ok(SequenceReport { c1, c2, c3, c3_at, densities, m5_min_density: m5_min, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adr_factor_and_order() {
        let base = Measure::new(vec![1.0, 2.0]).unwrap();
        let seq = adr_sequence(&base, 0.0, 1.0, 0.5, 3).unwrap();
        assert_eq!(seq.measures[3].weights(), &[8.0, 16.0]);
        let flat = adr_sequence(&base, 1.0, 1.0, 0.5, 3).unwrap();
        assert!(flat.measures.iter().all(|m| m == &base));
        assert!(matches!(adr_sequence(&base, 2.0, 1.0, 0.5, 3), Err(Error::ThetaOrder { .. })));
    }

    #[test]
    fn composite_is_additive() {
        let a = Measure::new(vec![1.0, 0.0]).unwrap();
        let b = Measure::new(vec![0.0, 3.0]).unwrap();
        let sa = adr_sequence(&a, 0.5, 1.5, 0.5, 4).unwrap();
        let sb = adr_sequence(&b, 1.0, 1.5, 0.5, 4).unwrap();
        let sc = composite_adr_sequence(&[(a, 0.5), (b, 1.0)], 1.5, 0.5, 4).unwrap();
        for k in 0..=4 {
            let sum = sa.measures[k].add(&sb.measures[k]).unwrap();
            assert_eq!(sum, sc.measures[k]);
        }
    }

    #[test]
    fn ball_volumes() {
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-15);
    }
}
