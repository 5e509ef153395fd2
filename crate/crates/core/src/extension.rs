//! Whitney-type extension from `S` to the whole space: partitions of unity
//! on net balls, cell averages, elementary steps and their sums, plus the
//! discrete gradient, maximal and residual diagnostics used to assess it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{average, Measure};
use crate::mms_core::{FiniteMetricSpace, NetHierarchy, SetOfPoints, TOL};
use crate::regular_seq::MeasureSequence;

/// Normalised tent functions on the balls `B_{2ε^k}(z)`, `z` in the level-`k` net.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    pub level: i32,
    pub eps: f64,
    pub centers: Vec<usize>,
    /// Whether the support ball meets `U_{k-1}(S)`.
    pub active: Vec<bool>,
    /// Per point: `(center index, φ)` for every centre with `φ > 0`.
    pub entries: Vec<Vec<(u32, f64)>>,
}

impl PartitionOfUnity {
    pub fn sum_at(&self, x: usize) -> f64 {
        self.entries[x].iter().map(|e| e.1).sum()
    }

    pub fn phi(&self, x: usize, a: usize) -> f64 {
        self.entries[x].iter().find(|e| e.0 as usize == a).map_or(0.0, |e| e.1)
    }

    pub fn support_radius(&self) -> f64 {
        2.0 * self.eps.powi(self.level)
    }
}

fn net_index(n: usize, net: &[usize]) -> Vec<u32> {
    let mut idx = vec![u32::MAX; n];
    for (a, &z) in net.iter().enumerate() {
        idx[z] = a as u32;
    }
    idx
}

pub fn partition_of_unity(
    space: &FiniteMetricSpace,
    nets: &NetHierarchy,
    s: &SetOfPoints,
    k: i32,
) -> Result<PartitionOfUnity> {
    if k < nets.k_min() || k > nets.k_max() {
        return Err(Error::BadParameter(format!("level {k} outside the net range")));
    }
    if s.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    let eps = nets.eps();
    let centers = nets.level(k).to_vec();
    let idx = net_index(space.len(), &centers);
    let support = 2.0 * eps.powi(k);
    let ds = space.dist_to_set_all(s);
    let outer = 5.0 * eps.powi(k - 1);
    let active = centers
        .iter()
        .map(|&z| space.ball_prefix(z, support).iter().any(|&y| ds[y as usize] < outer))
        .collect();
    let entries: Vec<Result<Vec<(u32, f64)>>> = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let order = space.sorted(x);
            let dists = space.sorted_distances(x);
            let mut raw = Vec::new();
            for (t, &y) in order.iter().enumerate() {
                if dists[t] >= support {
                    break;
                }
                let a = idx[y as usize];
                if a != u32::MAX {
                    raw.push((a, 1.0 - dists[t] / support));
                }
            }
            let total: f64 = raw.iter().map(|e| e.1).sum();
            if total <= 0.0 {
                return Err(Error::UncoveredPoint(x));
            }
            raw.sort_by_key(|e| e.0);
            Ok(raw.into_iter().map(|(a, b)| (a, b / total)).collect())
        })
        .collect();
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PartitionOfUnity { level: k, eps, centers, active, entries })
}

/// `f_{k,α}`: the `m_k`-average of `f` over `B_{6ε^{k-1}}(z_α)` for active
/// indices, zero otherwise.
pub fn cell_averages(
    space: &FiniteMetricSpace,
    f: &[f64],
    seq: &MeasureSequence,
    pou: &PartitionOfUnity,
) -> Result<Vec<f64>> {
    let k = pou.level;
    if k < 0 {
        return Err(Error::BadParameter("negative level".into()));
    }
    let m = seq.get(k as usize)?;
    let r = 6.0 * pou.eps.powi(k - 1);
    pou.centers
        .iter()
        .zip(&pou.active)
        .map(|(&z, &act)| {
            if !act {
                return Ok(0.0);
            }
            let ball: Vec<usize> = space.ball_prefix(z, r).iter().map(|&y| y as usize).collect();
            if m.mass(&ball) <= 0.0 {
                return Err(Error::ZeroMass);
            }
            Ok(average(f, &ball, m))
        })
        .collect()
}

/// `f_k = Σ_α φ_{k,α} f_{k,α}`.
pub fn approximant(pou: &PartitionOfUnity, averages: &[f64]) -> Vec<f64> {
    pou.entries
        .iter()
        .map(|row| row.iter().map(|&(a, phi)| phi * averages[a as usize]).sum())
        .collect()
}

/// `St_i = Σ_{α active} φ_{i,α} (f_{i,α} − f_{i-1})`.
pub fn step(pou: &PartitionOfUnity, averages: &[f64], prev: &[f64]) -> Vec<f64> {
    pou.entries
        .iter()
        .enumerate()
        .map(|(x, row)| {
            row.iter()
                .filter(|e| pou.active[e.0 as usize])
                .map(|&(a, phi)| phi * (averages[a as usize] - prev[x]))
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtensionResult {
    pub values: Vec<f64>,
    /// `steps[i-1] = St_i`.
    pub steps: Vec<Vec<f64>>,
    /// `partial[j-1] = f^j = Σ_{i≤j} St_i`.
    pub partial: Vec<Vec<f64>>,
    /// Smallest `j ≥ 1` with `x ∉ U_{j-1}(S)`; `None` on `S`.
    pub j_star: Vec<Option<usize>>,
    pub depth: usize,
}

impl ExtensionResult {
    /// Off-`S` points whose stabilisation level lies beyond the computed depth.
    pub fn unresolved(&self) -> usize {
        self.j_star.iter().filter(|j| j.is_some_and(|j| j > self.depth)).count()
    }
}

pub fn stabilization_level(dist_to_s: f64, eps: f64) -> Option<usize> {
    if dist_to_s <= 0.0 {
        return None;
    }
    let mut j = 1usize;
    while dist_to_s < 5.0 * eps.powi(j as i32 - 1) {
        j += 1;
    }
    Some(j)
}

pub fn extend(
    space: &FiniteMetricSpace,
    f: &[f64],
    seq: &MeasureSequence,
    s: &SetOfPoints,
    nets: &NetHierarchy,
    depth: usize,
) -> Result<ExtensionResult> {
    if depth == 0 || depth > seq.depth() {
        return Err(Error::SequenceDepthExceeded { needed: depth as i64, depth: seq.depth() });
    }
    if nets.k_min() > 1 || nets.k_max() < depth as i32 {
        return Err(Error::BadParameter("nets must cover levels 1..=depth".into()));
    }
    if (nets.eps() - seq.eps).abs() > 1e-15 {
        return Err(Error::BadParameter("net and sequence scales differ".into()));
    }
    let n = space.len();
    let mut prev_approx = vec![0.0; n];
    let mut total = vec![0.0; n];
    let mut steps = Vec::with_capacity(depth);
    let mut partial = Vec::with_capacity(depth);
    for i in 1..=depth as i32 {
        let pou = partition_of_unity(space, nets, s, i)?;
        let avg = cell_averages(space, f, seq, &pou)?;
        let st = step(&pou, &avg, &prev_approx);
        for (t, v) in total.iter_mut().zip(&st) {
            *t += v;
        }
        prev_approx = approximant(&pou, &avg);
        steps.push(st);
        partial.push(total.clone());
    }
    let ds = space.dist_to_set_all(s);
    let j_star: Vec<Option<usize>> = ds.iter().map(|&d| stabilization_level(d, seq.eps)).collect();
    let values = (0..n)
        .map(|x| match j_star[x] {
            None => f[x],
            Some(j) => partial[j.min(depth) - 1][x],
        })
        .collect();
    Ok(ExtensionResult { values, steps, partial, j_star, depth })
}

/// `max_{0<d(x,y)≤h} |g(x) − g(y)| / d(x,y)`, zero when no such `y`.
pub fn lip(space: &FiniteMetricSpace, g: &[f64], h: f64) -> Vec<f64> {
    (0..space.len())
        .into_par_iter()
        .map(|x| {
            let order = space.sorted(x);
            let dists = space.sorted_distances(x);
            let mut best = 0.0f64;
            for (t, &y) in order.iter().enumerate() {
                let d = dists[t];
                if d > h {
                    break;
                }
                if d > 0.0 {
                    best = best.max((g[x] - g[y as usize]).abs() / d);
                }
            }
            best
        })
        .collect()
}

/// `Σ_x (lip_h g)(x)^p μ(x)`: an upper proxy for the Cheeger energy.
pub fn cheeger_energy(space: &FiniteMetricSpace, mu: &Measure, g: &[f64], p: f64, h: f64) -> f64 {
    lip(space, g, h)
        .iter()
        .zip(mu.weights())
        .map(|(l, w)| l.powf(p) * w)
        .sum()
}

/// `sup_{0<r≤R} r^α (⨍_{B_r(x)} |g|^q dμ)^{1/q}`.
pub fn fractional_maximal(
    space: &FiniteMetricSpace,
    mu: &Measure,
    g: &[f64],
    q: f64,
    alpha: f64,
    r_max: f64,
) -> Result<Vec<f64>> {
    if !(q >= 1.0) || !(alpha >= 0.0) || !(r_max > 0.0) {
        return Err(Error::BadParameter("need q ≥ 1, α ≥ 0, R > 0".into()));
    }
    Ok((0..space.len())
        .into_par_iter()
        .map(|x| {
            let order = space.sorted(x);
            let dists = space.sorted_distances(x);
            let (mut mass, mut acc, mut best) = (0.0, 0.0, 0.0f64);
            let mut t = 0;
            while t < order.len() && dists[t] <= r_max + TOL {
                let d0 = dists[t];
                while t < order.len() && dists[t] <= d0 + TOL {
                    let y = order[t] as usize;
                    mass += mu.weight(y);
                    acc += g[y].abs().powf(q) * mu.weight(y);
                    t += 1;
                }
                let r = dists.get(t).copied().unwrap_or(f64::INFINITY).min(r_max);
                if mass > 0.0 {
                    best = best.max(r.powf(alpha) * (acc / mass).powf(1.0 / q));
                }
            }
            best
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidualRow {
    pub point: usize,
    pub k: usize,
    pub residual: f64,
}

/// `⨍_{B_{ε^k}(x)} |f(x) − Ext f| dμ` for `x ∈ S` and `k` in the range.
pub fn trace_residual(
    space: &FiniteMetricSpace,
    mu: &Measure,
    f: &[f64],
    ext: &[f64],
    s: &SetOfPoints,
    k_range: (usize, usize),
    eps: f64,
) -> Vec<ResidualRow> {
    let mut out = Vec::new();
    for x in s.iter() {
        for k in k_range.0..=k_range.1 {
            let ball = space.ball_prefix(x, eps.powi(k as i32));
            let mass = mu.mass_u32(ball);
            let residual = if mass > 0.0 {
                ball.iter().map(|&y| (f[x] - ext[y as usize]).abs() * mu.weight(y as usize)).sum::<f64>() / mass
            } else {
                0.0
            };
            out.push(ResidualRow { point: x, k, residual });
        }
    }
    out
}

/// Double average of `|f(y) − f(z)|` over `y ∈ B ∩ S1` (under `nu1`) and `z ∈ B ∩ S2` (under `nu2`).
#[allow(clippy::too_many_arguments)]
pub fn gluing(
    space: &FiniteMetricSpace,
    f: &[f64],
    s1: &SetOfPoints,
    nu1: &Measure,
    s2: &SetOfPoints,
    nu2: &Measure,
    center: usize,
    radius: f64,
) -> Result<f64> {
    let ball = space.ball(center, radius);
    let a: Vec<usize> = ball.intersection(s1).iter().filter(|&y| nu1.weight(y) > 0.0).collect();
    let b: Vec<usize> = ball.intersection(s2).iter().filter(|&z| nu2.weight(z) > 0.0).collect();
    let (ma, mb) = (nu1.mass(&a), nu2.mass(&b));
    if ma <= 0.0 || mb <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let mut sum = 0.0;
    for &y in &a {
        for &z in &b {
            sum += (f[y] - f[z]).abs() * nu1.weight(y) * nu2.weight(z);
        }
    }
    Ok(sum / (ma * mb))
}
