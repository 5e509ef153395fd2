//! Mass redistribution on quasicubes: atoms of height `μ(Q̃)/ε^{jθ}` at the
//! fine level, then a top-down cap pass towards a coarse level.

use serde::{Deserialize, Serialize};

use super::MeasureSequence;
use crate::dyadic::{PartialOrder, Violation};
use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::mms_core::{FiniteMetricSpace, NetHierarchy};

const REL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Redistribution {
    pub eps: f64,
    pub theta: f64,
    pub fine: i32,
    pub coarse: i32,
    /// Point index of each fine-level atom.
    pub atoms: Vec<usize>,
    /// `ancestors[i - coarse][β]`: net index at level `i` above atom `β`.
    pub ancestors: Vec<Vec<usize>>,
    /// `mu_quasicube[i - coarse][α]` = `μ(Q̃_{i,α})`.
    pub mu_quasicube: Vec<Vec<f64>>,
    /// `heights[i - coarse][α]` = `μ(Q̃_{i,α}) / ε^{iθ}`.
    pub heights: Vec<Vec<f64>>,
    /// Atom weights after the cap pass has reached level `i`: `stages[i - coarse]`.
    pub stages: Vec<Vec<f64>>,
    /// Ambient points that fall into two quasicubes of one level.
    pub overlaps: usize,
    n: usize,
}

impl Redistribution {
    fn li(&self, level: i32) -> usize {
        (level - self.coarse) as usize
    }

    /// `m^{j,level}` as a measure on the ambient space.
    pub fn measure(&self, level: i32) -> Measure {
        let mut w = vec![0.0; self.n];
        for (b, &z) in self.atoms.iter().enumerate() {
            w[z] += self.stages[self.li(level)][b];
        }
        Measure::new(w).expect("cap pass keeps weights nonnegative")
    }

    /// `c_{j,level}(β) = m^{j,level}(z_β) / m^{j,j}(z_β)`.
    pub fn scaling(&self, level: i32) -> Vec<f64> {
        let top = &self.stages[self.li(self.fine)];
        self.stages[self.li(level)].iter().zip(top).map(|(a, b)| a / b).collect()
    }

    fn group_sums(&self, stage: i32, level: i32) -> Vec<f64> {
        let mut sums = vec![0.0; self.heights[self.li(level)].len()];
        for (b, &w) in self.stages[self.li(stage)].iter().enumerate() {
            sums[self.ancestors[self.li(level)][b]] += w;
        }
        sums
    }

    /// Cap property at every stage and every level between it and the fine level.
    pub fn check_caps(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for stage in self.coarse..=self.fine {
            for level in stage..=self.fine {
                let sums = self.group_sums(stage, level);
                for (a, (&s, &h)) in sums.iter().zip(&self.heights[self.li(level)]).enumerate() {
                    if s > h {
                        out.push(Violation::new("CAP", format!("stage {stage}, level {level}, cube {a}: {s} > {h}")));
                    }
                }
            }
        }
        out
    }

    /// `ε^i c_{j,l} ≤ c_{j,l-i} ≤ c_{j,l}` and atomwise monotonicity.
    pub fn check_sandwich(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for l in self.coarse..=self.fine {
            let cl = self.scaling(l);
            for i in 0..=(l - self.coarse) {
                let ci = self.scaling(l - i);
                let f = self.eps.powi(i);
                for (b, (&hi, &lo)) in cl.iter().zip(&ci).enumerate() {
                    if lo > hi || lo < f * hi * (1.0 - REL_SLACK) {
                        out.push(Violation::new("SANDWICH", format!("atom {b}, level {l}, step {i}: {lo} vs {hi}")));
                    }
                }
            }
        }
        out
    }

    /// Smallest ratio of a cap to the sum of its children's caps.
    pub fn lower_ratio(&self) -> f64 {
        let mut best = f64::INFINITY;
        for level in self.coarse..self.fine {
            let child_net = self.heights[self.li(level + 1)].len();
            let mut sums = vec![0.0; self.heights[self.li(level)].len()];
            let mut seen = vec![false; child_net];
            for b in 0..self.atoms.len() {
                let c = self.ancestors[self.li(level + 1)][b];
                if !seen[c] {
                    seen[c] = true;
                    sums[self.ancestors[self.li(level)][b]] += self.heights[self.li(level + 1)][c];
                }
            }
            for (h, s) in self.heights[self.li(level)].iter().zip(sums) {
                if s > 0.0 {
                    best = best.min(h / s);
                }
            }
        }
        best
    }
}

/// Quasicube masses `μ(Q̃_{i,α})` for levels `coarse..=fine` of the `S`-nets,
/// where `Q̃_{i,α}` collects ambient points within `ε^l/8` of a descendant
/// net point at some level `l ≥ i`.
fn quasicube_masses(
    space: &FiniteMetricSpace,
    s_nets: &NetHierarchy,
    order: &PartialOrder,
    mu: &Measure,
    coarse: i32,
) -> (Vec<Vec<f64>>, usize) {
    let n = space.len();
    let (lo, hi) = (s_nets.k_min(), s_nets.k_max());
    let index: Vec<Vec<usize>> = (lo..=hi)
        .map(|k| {
            let mut v = vec![usize::MAX; n];
            for (a, &z) in s_nets.level(k).iter().enumerate() {
                v[z] = a;
            }
            v
        })
        .collect();
    let mut masses: Vec<Vec<f64>> = (coarse..=hi).map(|i| vec![0.0; s_nets.level(i).len()]).collect();
    let mut overlaps = 0;
    for x in 0..n {
        let mut hits: Vec<(i32, usize)> = Vec::new();
        for l in coarse..=hi {
            let r = s_nets.scale(l) / 8.0;
            let order_x = space.sorted(x);
            let dists = space.sorted_distances(x);
            for (t, &y) in order_x.iter().enumerate() {
                if dists[t] >= r {
                    break;
                }
                let a = index[(l - lo) as usize][y as usize];
                if a != usize::MAX {
                    hits.push((l, a));
                    break;
                }
            }
        }
        let mut overlapped = false;
        for i in coarse..=hi {
            let mut owners: Vec<usize> = hits
                .iter()
                .filter(|(l, _)| *l >= i)
                .map(|&(l, a)| order.ancestor(l, a, i))
                .collect();
            owners.sort_unstable();
            owners.dedup();
            overlapped |= owners.len() > 1;
            for a in owners {
                masses[(i - coarse) as usize][a] += mu.weight(x);
            }
        }
        overlaps += overlapped as usize;
    }
    (masses, overlaps)
}

/// Cap pass from level `fine` down to `coarse` on quasicubes of `S`.
pub fn redistribute(
    space: &FiniteMetricSpace,
    s_nets: &NetHierarchy,
    order: &PartialOrder,
    mu: &Measure,
    theta: f64,
    fine: i32,
    coarse: i32,
) -> Result<Redistribution> {
    if coarse > fine || coarse < s_nets.k_min() || fine > s_nets.k_max() {
        return Err(Error::BadParameter(format!("levels {coarse}..={fine} outside the net range")));
    }
    let eps = s_nets.eps();
    let (all_masses, overlaps) = quasicube_masses(space, s_nets, order, mu, coarse);
    let mu_quasicube: Vec<Vec<f64>> = all_masses[..=(fine - coarse) as usize].to_vec();
    let mut heights = Vec::new();
    for (li, masses) in mu_quasicube.iter().enumerate() {
        let level = coarse + li as i32;
        if let Some(index) = masses.iter().position(|&m| m <= 0.0) {
            return Err(Error::EmptyCube { level, index });
        }
        let scale = eps.powf(level as f64 * theta);
        heights.push(masses.iter().map(|m| m / scale).collect::<Vec<f64>>());
    }
    let atoms = s_nets.level(fine).to_vec();
    let ancestors: Vec<Vec<usize>> = (coarse..=fine)
        .map(|i| (0..atoms.len()).map(|b| order.ancestor(fine, b, i)).collect())
        .collect();
    let mut w = heights[(fine - coarse) as usize].clone();
    let mut stages = vec![Vec::new(); (fine - coarse + 1) as usize];
    stages[(fine - coarse) as usize] = w.clone();
    for level in (coarse..fine).rev() {
        let li = (level - coarse) as usize;
        let anc = &ancestors[li];
        let mut sums = vec![0.0; heights[li].len()];
        for (b, &wb) in w.iter().enumerate() {
            sums[anc[b]] += wb;
        }
        for (a, &s) in sums.iter().enumerate() {
            let cap = heights[li][a];
            if s <= cap {
                continue;
            }
            let members: Vec<usize> = (0..w.len()).filter(|&b| anc[b] == a).collect();
            let mut factor = cap / s;
            // shave the factor until the rounded group sum respects the cap
            loop {
                let total: f64 = members.iter().map(|&b| w[b] * factor).sum();
                if total <= cap {
                    break;
                }
                factor = factor.next_down();
            }
            for b in members {
                w[b] *= factor;
            }
        }
        stages[li] = w.clone();
    }
    Ok(Redistribution {
        eps,
        theta,
        fine,
        coarse,
        atoms,
        ancestors,
        mu_quasicube,
        heights,
        stages,
        overlaps,
        n: space.len(),
    })
}

/// `m_k = m^{fine,k}` for `k = 0..=depth`.
pub fn redistributed_sequence(
    space: &FiniteMetricSpace,
    s_nets: &NetHierarchy,
    order: &PartialOrder,
    mu: &Measure,
    theta: f64,
    fine: i32,
    depth: usize,
) -> Result<MeasureSequence> {
    if depth as i32 > fine {
        return Err(Error::BadParameter("depth exceeds the fine level".into()));
    }
    let red = redistribute(space, s_nets, order, mu, theta, fine, 0)?;
    let measures = (0..=depth as i32).map(|k| red.measure(k)).collect();
    MeasureSequence::new(s_nets.eps(), theta, measures, "redistribute")
}
