//! Parent order on nested nets, dyadic cubes and quasicubes, and hat cubes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mms_core::{FiniteMetricSpace, NetHierarchy, SetOfPoints, TOL};

/// `max{k : r <= ε^k}`.
pub fn scale_index(r: f64, eps: f64) -> i64 {
    let mut k = (r.ln() / eps.ln()).floor() as i64;
    let fits = |k: i64| r <= eps.powi(k as i32) * (1.0 + 1e-12);
    while !fits(k) {
        k -= 1;
    }
    while fits(k + 1) {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub detail: String,
}

impl Violation {
    pub fn new(condition: &str, detail: impl Into<String>) -> Self {
        Self { condition: condition.to_string(), detail: detail.into() }
    }
}

/// Parent links between consecutive net levels (indices are net indices).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartialOrder {
    k_min: i32,
    parents: Vec<Vec<usize>>,
}

impl PartialOrder {
    pub fn k_min(&self) -> i32 {
        self.k_min
    }
    pub fn k_max(&self) -> i32 {
        self.k_min + self.parents.len() as i32 - 1
    }
    /// Net index at level `k - 1` of the parent of net point `a` at level `k`.
    pub fn parent(&self, k: i32, a: usize) -> Option<usize> {
        if k <= self.k_min {
            return None;
        }
        Some(self.parents[(k - self.k_min) as usize][a])
    }
    /// Ancestor at level `j <= k`.
    pub fn ancestor(&self, k: i32, mut a: usize, j: i32) -> usize {
        let mut l = k;
        while l > j {
            a = self.parents[(l - self.k_min) as usize][a];
            l -= 1;
        }
        a
    }
}

/// Parent = nearest point of the previous level, ties by net index.
pub fn build_order(space: &FiniteMetricSpace, nets: &NetHierarchy) -> Result<PartialOrder> {
    let mut parents = vec![Vec::new()];
    for k in (nets.k_min() + 1)..=nets.k_max() {
        let coarse = nets.level(k - 1);
        let bound = nets.scale(k - 1) + TOL;
        let mut lvl = Vec::with_capacity(nets.level(k).len());
        for &p in nets.level(k) {
            let mut best = (f64::INFINITY, 0usize);
            for (b, &q) in coarse.iter().enumerate() {
                let d = space.d(p, q);
                if d < best.0 {
                    best = (d, b);
                }
            }
            if best.0 > bound {
                return Err(Error::OrphanPoint { level: k, point: p });
            }
            lvl.push(best.1);
        }
        parents.push(lvl);
    }
    Ok(PartialOrder { k_min: nets.k_min(), parents })
}

/// PO1 parents sit one level up, PO2 ancestor chains are well defined,
/// PO3 `d(child, parent) < ε^{k-1}`, PO4 a coarse point closer than
/// `ε^{k-1}/2` is the parent.
pub fn verify_order(space: &FiniteMetricSpace, nets: &NetHierarchy, order: &PartialOrder) -> Vec<Violation> {
    let mut out = Vec::new();
    if order.k_min() != nets.k_min() || order.k_max() != nets.k_max() {
        out.push(Violation::new("PO1", "order and nets cover different levels"));
        return out;
    }
    for k in (nets.k_min() + 1)..=nets.k_max() {
        let fine = nets.level(k);
        let coarse = nets.level(k - 1);
        let r = nets.scale(k - 1);
        let links = &order.parents[(k - order.k_min) as usize];
        if links.len() != fine.len() {
            out.push(Violation::new("PO2", format!("level {k}: {} links for {} points", links.len(), fine.len())));
            continue;
        }
        for (a, &p) in fine.iter().enumerate() {
            let b = links[a];
            if b >= coarse.len() {
                out.push(Violation::new("PO1", format!("level {k}: {p} linked to missing index {b}")));
                continue;
            }
            let d = space.d(p, coarse[b]);
            if d >= r + TOL {
                out.push(Violation::new("PO3", format!("level {k}: {p} -> {} at {d}", coarse[b])));
            }
            for (c, &q) in coarse.iter().enumerate() {
                if c != b && space.d(p, q) < 0.5 * r {
                    out.push(Violation::new("PO4", format!("level {k}: {p} is within ε^(k-1)/2 of {q} but not its child")));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cube {
    pub center: usize,
    pub members: Vec<usize>,
    pub parent: Option<usize>,
}

/// Nested partitions of a domain indexed by net points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DyadicCubeSystem {
    eps: f64,
    a_param: f64,
    k_min: i32,
    domain: Vec<usize>,
    levels: Vec<Vec<Cube>>,
    cube_of: Vec<Vec<usize>>,
}

impl DyadicCubeSystem {
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn a_param(&self) -> f64 {
        self.a_param
    }
    pub fn k_min(&self) -> i32 {
        self.k_min
    }
    pub fn k_max(&self) -> i32 {
        self.k_min + self.levels.len() as i32 - 1
    }
    pub fn domain(&self) -> &[usize] {
        &self.domain
    }
    pub fn scale(&self, k: i32) -> f64 {
        self.eps.powi(k)
    }
    pub fn level(&self, k: i32) -> &[Cube] {
        &self.levels[(k - self.k_min) as usize]
    }
    /// Cube index containing point `x` at level `k` (`None` off the domain).
    pub fn cube_of(&self, k: i32, x: usize) -> Option<usize> {
        let c = self.cube_of[(k - self.k_min) as usize][x];
        (c != usize::MAX).then_some(c)
    }

    /// Test hook: move one point into a neighbouring cube at the finest level.
    pub fn inject_partition_fault(&mut self) -> bool {
        let k = self.levels.len() - 1;
        let lvl = &mut self.levels[k];
        if lvl.len() < 2 {
            return false;
        }
        let x = lvl[0].members[0];
        lvl[1].members.push(x);
        true
    }
}

pub fn build_cubes(
    space: &FiniteMetricSpace,
    nets: &NetHierarchy,
    order: &PartialOrder,
    a_param: f64,
) -> Result<DyadicCubeSystem> {
    if !(a_param > 0.0 && a_param <= 0.125) {
        return Err(Error::BadParameter(format!("cube inner radius factor {a_param} outside (0, 1/8]")));
    }
    let n = space.len();
    let kmax = nets.k_max();
    let finest = nets.level(kmax);
    let nlev = (kmax - nets.k_min() + 1) as usize;
    let mut cube_of = vec![vec![usize::MAX; n]; nlev];
    let assign: Vec<usize> = nets
        .domain()
        .par_iter()
        .map(|&x| {
            let row = space.row(x);
            let mut best = (f64::INFINITY, 0usize);
            for (a, &z) in finest.iter().enumerate() {
                if row[z] < best.0 {
                    best = (row[z], a);
                }
            }
            best.1
        })
        .collect();
    for (i, &x) in nets.domain().iter().enumerate() {
        let mut a = assign[i];
        for k in (nets.k_min()..=kmax).rev() {
            cube_of[(k - nets.k_min()) as usize][x] = a;
            if let Some(p) = order.parent(k, a) {
                a = p;
            }
        }
    }
    let mut levels = Vec::with_capacity(nlev);
    for k in nets.k_min()..=kmax {
        let li = (k - nets.k_min()) as usize;
        let mut cubes: Vec<Cube> = nets
            .level(k)
            .iter()
            .enumerate()
            .map(|(a, &z)| Cube { center: z, members: Vec::new(), parent: order.parent(k, a) })
            .collect();
        for &x in nets.domain() {
            cubes[cube_of[li][x]].members.push(x);
        }
        if let Some(index) = cubes.iter().position(|c| c.members.is_empty()) {
            return Err(Error::EmptyCube { level: k, index });
        }
        levels.push(cubes);
    }
    Ok(DyadicCubeSystem {
        eps: nets.eps(),
        a_param,
        k_min: nets.k_min(),
        domain: nets.domain().to_vec(),
        levels,
        cube_of,
    })
}

/// Cubes built from nets of a subset `S`, with inner radius factor 1/8.
pub fn build_quasicubes(
    space: &FiniteMetricSpace,
    s_nets: &NetHierarchy,
    order: &PartialOrder,
) -> Result<DyadicCubeSystem> {
    build_cubes(space, s_nets, order, 0.125)
}

pub fn verify_cubes(space: &FiniteMetricSpace, nets: &NetHierarchy, cubes: &DyadicCubeSystem) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = space.len();
    let dom = SetOfPoints::new(cubes.domain().to_vec(), n).unwrap_or_default();
    for k in cubes.k_min()..=cubes.k_max() {
        let lvl = cubes.level(k);
        let r = cubes.scale(k);
        let mut count = vec![0usize; n];
        for (a, q) in lvl.iter().enumerate() {
            for &x in &q.members {
                count[x] += 1;
                if cubes.cube_of(k, x) != Some(a) {
                    out.push(Violation::new("PARTITION", format!("level {k}: {x} listed in cube {a} but mapped elsewhere")));
                }
                let d = space.d(x, q.center);
                if d > 2.0 * r + TOL {
                    out.push(Violation::new("DQ4-outer", format!("level {k}: {x} at {d} from centre {}", q.center)));
                }
            }
            for &y in space.ball_prefix(q.center, cubes.a_param() * r) {
                let y = y as usize;
                if dom.contains(y) && cubes.cube_of(k, y) != Some(a) {
                    out.push(Violation::new("DQ4-inner", format!("level {k}: {y} near centre {} outside its cube", q.center)));
                }
            }
            if k > cubes.k_min() {
                match q.parent {
                    Some(p) => {
                        let up = &cubes.level(k - 1)[p];
                        if q.members.iter().any(|&x| cubes.cube_of(k - 1, x) != Some(p)) {
                            out.push(Violation::new("DQ3", format!("level {k}: cube {a} not inside parent {p}")));
                        }
                        if !nets.level(k).contains(&up.center) {
                            out.push(Violation::new("DQ3", format!("level {k}: parent centre not nested")));
                        }
                    }
                    None => out.push(Violation::new("DQ3", format!("level {k}: cube {a} has no parent"))),
                }
            }
        }
        for &x in cubes.domain() {
            if count[x] != 1 {
                out.push(Violation::new("DQ1", format!("level {k}: point {x} lies in {} cubes", count[x])));
            }
        }
        if k > cubes.k_min() {
            for &x in cubes.domain() {
                if let (Some(a), Some(b)) = (cubes.cube_of(k, x), cubes.cube_of(k - 1, x)) {
                    if lvl[a].parent != Some(b) {
                        out.push(Violation::new("DQ2", format!("level {k}: point {x} breaks nesting")));
                    }
                }
            }
        }
    }
    out
}

/// `Q̂_{k,a}`: union of level-`k` cubes with a member within `5 ε^k` of the centre.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HatCubes {
    k_min: i32,
    levels: Vec<Vec<Vec<usize>>>,
}

impl HatCubes {
    pub fn k_min(&self) -> i32 {
        self.k_min
    }
    pub fn k_max(&self) -> i32 {
        self.k_min + self.levels.len() as i32 - 1
    }
    pub fn hat(&self, k: i32, a: usize) -> &[usize] {
        &self.levels[(k - self.k_min) as usize][a]
    }
    pub fn level(&self, k: i32) -> &[Vec<usize>] {
        &self.levels[(k - self.k_min) as usize]
    }
}

pub fn build_hat_cubes(space: &FiniteMetricSpace, cubes: &DyadicCubeSystem) -> HatCubes {
    let levels = (cubes.k_min()..=cubes.k_max())
        .map(|k| {
            let lvl = cubes.level(k);
            let r = 5.0 * cubes.scale(k);
            lvl.par_iter()
                .map(|q| {
                    let mut ids: Vec<usize> = space
                        .ball_prefix(q.center, r)
                        .iter()
                        .filter_map(|&y| cubes.cube_of(k, y as usize))
                        .collect();
                    ids.sort_unstable();
                    ids.dedup();
                    let mut m: Vec<usize> = ids.iter().flat_map(|&b| lvl[b].members.iter().copied()).collect();
                    m.sort_unstable();
                    m
                })
                .collect()
        })
        .collect();
    HatCubes { k_min: cubes.k_min(), levels }
}

/// Largest number of hats at level `k` containing a single point.
pub fn hat_overlap(space: &FiniteMetricSpace, hats: &HatCubes, k: i32) -> usize {
    let mut count = vec![0usize; space.len()];
    for h in hats.level(k) {
        for &x in h {
            count[x] += 1;
        }
    }
    count.into_iter().max().unwrap_or(0)
}

/// Largest number of level-`k` cubes meeting a ball `B_radius(x)`, over all `x`.
pub fn max_cubes_meeting_ball(space: &FiniteMetricSpace, cubes: &DyadicCubeSystem, k: i32, radius: f64) -> usize {
    (0..space.len())
        .into_par_iter()
        .map(|x| {
            let mut ids: Vec<usize> = space
                .ball_prefix(x, radius)
                .iter()
                .filter_map(|&y| cubes.cube_of(k, y as usize))
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids.len()
        })
        .max()
        .unwrap_or(0)
}

/// Containment in `B_{9ε^k}`, overlap against `overlap_bound(k)`, and nesting of hats.
pub fn verify_hats(
    space: &FiniteMetricSpace,
    cubes: &DyadicCubeSystem,
    hats: &HatCubes,
    overlap_bound: impl Fn(i32) -> f64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for k in cubes.k_min()..=cubes.k_max() {
        let r = cubes.scale(k);
        for (a, q) in cubes.level(k).iter().enumerate() {
            let h = hats.hat(k, a);
            if let Some(&x) = h.iter().find(|&&x| space.d(x, q.center) > 9.0 * r + TOL) {
                out.push(Violation::new("HAT-ball", format!("level {k}: {x} outside B_9(centre {})", q.center)));
            }
            if k > cubes.k_min() {
                let up = hats.hat(k - 1, q.parent.unwrap_or(0));
                if h.iter().any(|x| up.binary_search(x).is_err()) {
                    out.push(Violation::new("HAT-nested", format!("level {k}: hat {a} escapes its parent hat")));
                }
            }
        }
        let ov = hat_overlap(space, hats, k);
        if ov as f64 > overlap_bound(k) {
            out.push(Violation::new("HAT-overlap", format!("level {k}: overlap {ov}")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_index_exact_powers() {
        assert_eq!(scale_index(0.1, 0.1), 1);
        assert_eq!(scale_index(0.01, 0.1), 2);
        assert_eq!(scale_index(0.011, 0.1), 1);
        assert_eq!(scale_index(1.0, 0.1), 0);
        assert_eq!(scale_index(0.25, 0.5), 2);
        assert_eq!(scale_index(0.3, 0.5), 1);
        assert_eq!(scale_index(2.0, 0.5), -1);
    }
}
