//! Trace functionals on a subset `S`: sharp maximal function, the Calderón,
//! Besov, Brudnyi–Shvartsman and Whitney-family functionals, porous points,
//! and validation/search of ball families.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::scale_index;
use crate::error::{Error, Result};
use crate::measures::{best_l1_constant, Measure};
use crate::mms_core::{FiniteMetricSpace, SetOfPoints, TOL};
use crate::regular_seq::MeasureSequence;

/// Everything the functionals need about the ambient space and the subset.
pub struct TraceContext<'a> {
    pub space: &'a FiniteMetricSpace,
    pub mu: &'a Measure,
    pub s: &'a SetOfPoints,
    pub seq: &'a MeasureSequence,
    s_mask: Vec<bool>,
    dist_to_s: Vec<f64>,
    s_sorted: Vec<Vec<(u32, f64)>>,
}

impl<'a> TraceContext<'a> {
    pub fn new(
        space: &'a FiniteMetricSpace,
        mu: &'a Measure,
        s: &'a SetOfPoints,
        seq: &'a MeasureSequence,
    ) -> Result<Self> {
        let n = space.len();
        if mu.len() != n || seq.measures[0].len() != n {
            return Err(Error::BadParameter("measure length mismatch".into()));
        }
        if s.is_empty() {
            return Err(Error::EmptyTargetSet);
        }
        s.validate(n)?;
        let s_mask = s.mask(n);
        let s_sorted: Vec<Vec<(u32, f64)>> = (0..n)
            .into_par_iter()
            .map(|x| {
                space
                    .sorted(x)
                    .iter()
                    .zip(space.sorted_distances(x))
                    .filter(|(&y, _)| s_mask[y as usize])
                    .map(|(&y, &d)| (y, d))
                    .collect()
            })
            .collect();
        let dist_to_s = s_sorted.iter().map(|l| l[0].1).collect();
        Ok(Self { space, mu, s, seq, s_mask, dist_to_s, s_sorted })
    }

    pub fn dist_to_s(&self, x: usize) -> f64 {
        self.dist_to_s[x]
    }

    pub fn in_s(&self, x: usize) -> bool {
        self.s_mask[x]
    }

    /// Number of points of `S` in `B_rho(x)`.
    fn s_count(&self, x: usize, rho: f64) -> usize {
        self.s_sorted[x].partition_point(|&(_, d)| d <= rho + TOL)
    }

    fn k_of(&self, r: f64) -> Result<usize> {
        let k = scale_index(r, self.seq.eps).max(0);
        if k as usize > self.seq.depth() {
            return Err(Error::SequenceDepthExceeded { needed: k, depth: self.seq.depth() });
        }
        Ok(k as usize)
    }
}

/// Oscillations `E_{m_k}` over the first `t` points of `S` seen from `x`.
struct Oscillations<'c, 'a> {
    ctx: &'c TraceContext<'a>,
    f: &'c [f64],
    x: usize,
    cache: HashMap<(usize, usize), f64>,
}

impl<'c, 'a> Oscillations<'c, 'a> {
    fn new(ctx: &'c TraceContext<'a>, f: &'c [f64], x: usize) -> Self {
        Self { ctx, f, x, cache: HashMap::new() }
    }

    fn get(&mut self, k: usize, t: usize) -> f64 {
        if t < 2 {
            return 0.0;
        }
        if let Some(&v) = self.cache.get(&(k, t)) {
            return v;
        }
        let set: Vec<usize> = self.ctx.s_sorted[self.x][..t].iter().map(|&(y, _)| y as usize).collect();
        let v = best_l1_constant(self.f, &set, &self.ctx.seq.measures[k]).map(|r| r.0).unwrap_or(0.0);
        self.cache.insert((k, t), v);
        v
    }

    /// `Ẽ_{m_k}(f, B_rho(x))`.
    fn tilde(&mut self, k: usize, rho: f64) -> f64 {
        if self.ctx.dist_to_s[self.x] > rho + TOL {
            return 0.0;
        }
        let t = self.ctx.s_count(self.x, 2.0 * rho);
        self.get(k, t)
    }
}

/// Value of the sharp maximal function at a point with the radius attaining it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SharpPoint {
    pub value: f64,
    pub radius: f64,
    pub k: usize,
}

fn sharp_at(ctx: &TraceContext<'_>, f: &[f64], x: usize) -> Result<SharpPoint> {
    let list = &ctx.s_sorted[x];
    let mut best = SharpPoint { value: 0.0, radius: 1.0, k: 0 };
    if list.len() < 2 {
        return Ok(best);
    }
    let r_min = ctx.dist_to_s[x].max(0.5 * list[1].1);
    if r_min > 1.0 + TOL {
        return Ok(best);
    }
    let eps = ctx.seq.eps;
    let k_last = scale_index(r_min, eps).max(0) as usize;
    if k_last > ctx.seq.depth() {
        return Err(Error::SequenceDepthExceeded { needed: k_last as i64, depth: ctx.seq.depth() });
    }
    let mut breaks: Vec<f64> = list.iter().flat_map(|&(_, d)| [d, 0.5 * d]).filter(|&r| r > 0.0 && r <= 1.0).collect();
    breaks.push(1.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut osc = Oscillations::new(ctx, f, x);
    for k in 0..=k_last {
        let hi = eps.powi(k as i32).min(1.0);
        let lo = eps.powi(k as i32 + 1);
        let mut cands: Vec<f64> = breaks.iter().copied().filter(|&r| r > lo && r <= hi).collect();
        cands.push(lo);
        for r in cands {
            let v = osc.tilde(k, r) / r;
            if v > best.value {
                best = SharpPoint { value: v, radius: r, k };
            }
        }
    }
    Ok(best)
}

pub fn sharp_maximal_detail(ctx: &TraceContext<'_>, f: &[f64]) -> Result<Vec<SharpPoint>> {
    (0..ctx.space.len()).into_par_iter().map(|x| sharp_at(ctx, f, x)).collect()
}

/// `f♯(x) = sup_{0<r≤1} Ẽ_{m_{k(r)}}(f, B_r(x)) / r`.
pub fn sharp_maximal(ctx: &TraceContext<'_>, f: &[f64]) -> Result<Vec<f64>> {
    Ok(sharp_maximal_detail(ctx, f)?.into_iter().map(|s| s.value).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Nice,
    Whitney,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallFamily {
    pub balls: Vec<(usize, f64)>,
    pub kind: FamilyKind,
    pub c: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Witness {
    None,
    Pointwise(Vec<f64>),
    Family(BallFamily),
    Besov { sharp_on_s: f64, per_level: Vec<f64> },
    Whitney { delta: f64, per_delta: Vec<(f64, f64)>, nice: BallFamily, whitney: BallFamily },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub value: f64,
    /// `‖f‖_{L_p(m_0)}`.
    pub lp_term: f64,
    /// The part of `value` that ignores constants.
    pub oscillation_term: f64,
    pub witness: Witness,
    pub exact: bool,
}

fn lp_m0(ctx: &TraceContext<'_>, f: &[f64], p: f64) -> f64 {
    ctx.seq.measures[0].lp_norm(f, p)
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::BadParameter(format!("exponent p = {p} must lie in (1, ∞)")));
    }
    Ok(())
}

/// `‖f‖_{L_p(m_0)} + ‖f♯‖_{L_p(μ)}`.
pub fn cn(ctx: &TraceContext<'_>, f: &[f64], p: f64) -> Result<FunctionalValue> {
    check_p(p)?;
    let sharp = sharp_maximal(ctx, f)?;
    let lp = lp_m0(ctx, f, p);
    let osc = ctx.mu.lp_norm(&sharp, p);
    Ok(FunctionalValue { value: lp + osc, lp_term: lp, oscillation_term: osc, witness: Witness::Pointwise(sharp), exact: true })
}

fn porous_from(ctx: &TraceContext<'_>, r: f64, sigma: f64) -> Vec<bool> {
    let space = ctx.space;
    (0..space.len())
        .into_par_iter()
        .map(|x| {
            space
                .ball_prefix(x, (1.0 - sigma) * r)
                .iter()
                .any(|&y| ctx.dist_to_s[y as usize] > sigma * r + TOL)
        })
        .collect()
}

/// Points `x` such that `B_r(x)` contains a ball of radius `σr` missing `S`.
pub fn porous_points(space: &FiniteMetricSpace, s: &SetOfPoints, r: f64, sigma: f64) -> Result<SetOfPoints> {
    if !(sigma > 0.0 && sigma <= 1.0) || !(r > 0.0) {
        return Err(Error::BadParameter("porosity needs σ in (0,1] and r > 0".into()));
    }
    let ds = space.dist_to_set_all(s);
    let mask: Vec<bool> = (0..space.len())
        .map(|x| space.ball_prefix(x, (1.0 - sigma) * r).iter().any(|&y| ds[y as usize] > sigma * r + TOL))
        .collect();
    Ok(SetOfPoints::from_mask(&mask))
}

/// `‖f‖_{L_p(m_0)} + ‖f♯‖_{L_p(S,μ)} + (Σ_k ε^{k(θ-p)} Σ_{porous x∈S} E_{m_k}(f,B_{ε^k}(x))^p m_k(x))^{1/p}`.
pub fn bn(ctx: &TraceContext<'_>, f: &[f64], p: f64, sigma: f64) -> Result<FunctionalValue> {
    check_p(p)?;
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::BadParameter("σ must lie in (0, 1]".into()));
    }
    let sharp = sharp_maximal(ctx, f)?;
    let lp = lp_m0(ctx, f, p);
    let sharp_on_s = ctx.mu.restrict(ctx.s).lp_norm(&sharp, p);
    let eps = ctx.seq.eps;
    let theta = ctx.seq.theta;
    let mut per_level = Vec::new();
    for k in 1..=ctx.seq.depth() {
        let r = eps.powi(k as i32);
        let porous = porous_from(ctx, r, sigma);
        let m = &ctx.seq.measures[k];
        let terms: Vec<f64> = ctx
            .s
            .members()
            .par_iter()
            .map(|&x| {
                if !porous[x] || m.weight(x) <= 0.0 {
                    return 0.0;
                }
                let t = ctx.s_count(x, r);
                let mut osc = Oscillations::new(ctx, f, x);
                osc.get(k, t).powf(p) * m.weight(x)
            })
            .collect();
        per_level.push(eps.powf(k as f64 * (theta - p)) * terms.iter().sum::<f64>());
    }
    let besov = per_level.iter().sum::<f64>().powf(1.0 / p);
    Ok(FunctionalValue {
        value: lp + sharp_on_s + besov,
        lp_term: lp,
        oscillation_term: sharp_on_s + besov,
        witness: Witness::Besov { sharp_on_s, per_level },
        exact: true,
    })
}

/// Geometry of a candidate ball, independent of the function.
#[derive(Debug, Clone, Copy)]
pub struct PoolBall {
    pub center: usize,
    pub radius: f64,
    pub count: usize,
    pub mu_ball: f64,
    pub k: usize,
    /// `S` points in the doubled dilated ball `B_{2cr}`.
    pub dilated_s: usize,
    /// `B_{cr}` meets `S`.
    pub meets: bool,
    /// `B_r` misses `S`.
    pub avoids: bool,
}

/// Candidate balls shared by every family search on one configuration:
/// point centres and all radii `≤ δ_max` where one of `B_r`, `B_{cr} ∩ S`
/// or `B_{2cr} ∩ S` changes.
pub struct CandidatePool {
    pub c: f64,
    pub delta_max: f64,
    pub balls: Vec<PoolBall>,
}

impl CandidatePool {
    pub fn new(ctx: &TraceContext<'_>, c: f64, delta_max: f64) -> Result<Self> {
        if !(c > 1.0) {
            return Err(Error::BadParameter("dilation c must exceed 1".into()));
        }
        if !(delta_max > 0.0 && delta_max <= 1.0) {
            return Err(Error::BadParameter("δ must lie in (0, 1]".into()));
        }
        let space = ctx.space;
        let per: Vec<Result<Vec<PoolBall>>> = (0..space.len())
            .into_par_iter()
            .map(|x| {
                let mut radii: Vec<f64> = space.critical_radii(x);
                for &(_, d) in &ctx.s_sorted[x] {
                    radii.push(d / c);
                    radii.push(d / (2.0 * c));
                }
                // just above each scale boundary, where the coarser measure applies
                let eps = ctx.seq.eps;
                for k in 1..=ctx.seq.depth() as i32 {
                    radii.push(eps.powi(k) * (1.0 + 1e-9));
                }
                radii.retain(|&r| r > 0.0 && r <= delta_max);
                radii.sort_by(f64::total_cmp);
                radii.dedup_by(|a, b| *a <= *b + TOL);
                let mut out = Vec::new();
                for r in radii {
                    let meets = ctx.dist_to_s[x] <= c * r + TOL;
                    let dilated_s = ctx.s_count(x, 2.0 * c * r);
                    if !meets || dilated_s < 2 {
                        continue;
                    }
                    let count = space.ball_count(x, r);
                    let mu_ball = ctx.mu.mass_u32(&space.sorted(x)[..count]);
                    if mu_ball <= 0.0 {
                        continue;
                    }
                    out.push(PoolBall {
                        center: x,
                        radius: r,
                        count,
                        mu_ball,
                        k: ctx.k_of(r)?,
                        dilated_s,
                        meets,
                        avoids: ctx.dist_to_s[x] > r + TOL,
                    });
                }
                Ok(out)
            })
            .collect();
        let mut balls = Vec::new();
        for v in per {
            balls.extend(v?);
        }
        Ok(Self { c, delta_max, balls })
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// `μ(B)/r^p · Ẽ_{m_{k(r)}}(f, cB)^p` per ball.
    pub fn weights(&self, ctx: &TraceContext<'_>, f: &[f64], p: f64) -> Vec<f64> {
        // balls are grouped by centre in ascending order
        let mut starts = vec![0usize];
        for i in 1..self.balls.len() {
            if self.balls[i].center != self.balls[i - 1].center {
                starts.push(i);
            }
        }
        starts.push(self.balls.len());
        let chunks: Vec<Vec<f64>> = starts
            .par_windows(2)
            .map(|w| {
                let slice = &self.balls[w[0]..w[1]];
                let mut osc = Oscillations::new(ctx, f, slice[0].center);
                slice
                    .iter()
                    .map(|b| b.mu_ball / b.radius.powf(p) * osc.get(b.k, b.dilated_s).powf(p))
                    .collect()
            })
            .collect();
        chunks.concat()
    }

    fn ball_points<'s>(&self, space: &'s FiniteMetricSpace, i: usize) -> &'s [u32] {
        let b = &self.balls[i];
        &space.sorted(b.center)[..b.count]
    }

    pub fn family(&self, members: &[usize], kind: FamilyKind, delta: f64) -> BallFamily {
        BallFamily {
            balls: members.iter().map(|&i| (self.balls[i].center, self.balls[i].radius)).collect(),
            kind,
            c: self.c,
            delta,
        }
    }
}

/// Outcome of a disjoint-family search: pool indices and `Σ weights`.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub members: Vec<usize>,
    pub total: f64,
    pub exact: bool,
}

const QUANT: f64 = (1u64 << 40) as f64;

/// Maximum-weight family of pairwise disjoint balls among `allowed` pool entries.
pub fn search_family(
    space: &FiniteMetricSpace,
    pool: &CandidatePool,
    weights: &[f64],
    allowed: impl Fn(&PoolBall) -> bool,
    budget: usize,
    warm: &[&[usize]],
) -> SearchResult {
    let mut cand: Vec<usize> = (0..pool.len()).filter(|&i| weights[i] > 0.0 && allowed(&pool.balls[i])).collect();
    let wmax = cand.iter().map(|&i| weights[i]).fold(0.0, f64::max);
    let q: HashMap<usize, u128> = cand.iter().map(|&i| (i, (weights[i] / wmax * QUANT).round() as u128)).collect();
    cand.sort_by(|&a, &b| q[&b].cmp(&q[&a]).then(a.cmp(&b)));
    let total = |m: &[usize]| m.iter().map(|&i| weights[i]).sum::<f64>();
    let budget = budget.min(60);
    let mut best = if cand.is_empty() {
        SearchResult { members: Vec::new(), total: 0.0, exact: true }
    } else if cand.len() <= budget {
        let members = exact_family(space, pool, weights, &cand);
        SearchResult { total: total(&members), members, exact: true }
    } else {
        let members = greedy_family(space, pool, &q, &cand);
        SearchResult { total: total(&members), members, exact: false }
    };
    for w in warm {
        let t = total(w);
        if t > best.total {
            best = SearchResult { members: w.to_vec(), total: t, exact: best.exact };
        }
    }
    best
}

fn exact_family(space: &FiniteMetricSpace, pool: &CandidatePool, weights: &[f64], cand: &[usize]) -> Vec<usize> {
    let m = cand.len();
    let n = space.len();
    let mut owner_sets: Vec<Vec<bool>> = Vec::with_capacity(m);
    for &i in cand {
        let mut mask = vec![false; n];
        for &y in pool.ball_points(space, i) {
            mask[y as usize] = true;
        }
        owner_sets.push(mask);
    }
    let mut conflict = vec![0u64; m];
    for a in 0..m {
        for b in (a + 1)..m {
            if pool.ball_points(space, cand[b]).iter().any(|&y| owner_sets[a][y as usize]) {
                conflict[a] |= 1 << b;
                conflict[b] |= 1 << a;
            }
        }
    }
    let w: Vec<f64> = cand.iter().map(|&i| weights[i]).collect();
    let mut suffix = vec![0.0; m + 1];
    for i in (0..m).rev() {
        suffix[i] = suffix[i + 1] + w[i];
    }
    fn go(i: usize, chosen: u64, value: f64, w: &[f64], conflict: &[u64], suffix: &[f64], best: &mut (f64, u64)) {
        if value > best.0 {
            *best = (value, chosen);
        }
        if i == w.len() || value + suffix[i] <= best.0 {
            return;
        }
        if conflict[i] & chosen == 0 {
            go(i + 1, chosen | 1 << i, value + w[i], w, conflict, suffix, best);
        }
        go(i + 1, chosen, value, w, conflict, suffix, best);
    }
    let mut best = (0.0, 0u64);
    go(0, 0, 0.0, &w, &conflict, &suffix, &mut best);
    (0..m).filter(|&i| best.1 >> i & 1 == 1).map(|i| cand[i]).collect()
}

fn greedy_family(space: &FiniteMetricSpace, pool: &CandidatePool, q: &HashMap<usize, u128>, order: &[usize]) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    let mut owner = vec![NONE; space.len()];
    let mut selected = vec![false; pool.len()];
    let fill = |owner: &mut Vec<usize>, selected: &mut Vec<bool>| {
        for &i in order {
            if !selected[i] && pool.ball_points(space, i).iter().all(|&y| owner[y as usize] == NONE) {
                for &y in pool.ball_points(space, i) {
                    owner[y as usize] = i;
                }
                selected[i] = true;
            }
        }
    };
    fill(&mut owner, &mut selected);
    for _pass in 0..20 {
        let mut improved = false;
        for &i in order {
            if selected[i] {
                continue;
            }
            let mut owners: Vec<usize> =
                pool.ball_points(space, i).iter().map(|&y| owner[y as usize]).filter(|&o| o != NONE).collect();
            owners.sort_unstable();
            owners.dedup();
            let displaced: u128 = owners.iter().map(|o| q[o]).sum();
            if q[&i] > displaced {
                for o in owners {
                    for &y in pool.ball_points(space, o) {
                        owner[y as usize] = NONE;
                    }
                    selected[o] = false;
                }
                for &y in pool.ball_points(space, i) {
                    owner[y as usize] = i;
                }
                selected[i] = true;
                improved = true;
            }
        }
        fill(&mut owner, &mut selected);
        if !improved {
            break;
        }
    }
    order.iter().copied().filter(|&i| selected[i]).collect()
}

/// `(Σ_{B∈F} μ(B)/r^p Ẽ_{m_{k(r)}}(f, cB)^p)^{1/p}` for an explicit family.
pub fn evaluate_family(ctx: &TraceContext<'_>, f: &[f64], family: &BallFamily, p: f64) -> Result<f64> {
    let mut sum = 0.0;
    for &(x, r) in &family.balls {
        let k = ctx.k_of(r)?;
        let mut osc = Oscillations::new(ctx, f, x);
        let mb = ctx.mu.mass_u32(ctx.space.ball_prefix(x, r));
        sum += mb / r.powf(p) * osc.tilde(k, family.c * r).powf(p);
    }
    Ok(sum.powf(1.0 / p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyViolation {
    pub condition: String,
    pub first: usize,
    pub second: Option<usize>,
}

pub fn validate_family(family: &BallFamily, space: &FiniteMetricSpace, s: &SetOfPoints) -> Vec<FamilyViolation> {
    let mut out = Vec::new();
    let v = |c: &str, a, b| FamilyViolation { condition: c.to_string(), first: a, second: b };
    let masks: Vec<Vec<bool>> = family
        .balls
        .iter()
        .map(|&(x, r)| {
            let mut m = vec![false; space.len()];
            for &y in space.ball_prefix(x, r) {
                m[y as usize] = true;
            }
            m
        })
        .collect();
    for a in 0..family.balls.len() {
        for b in (a + 1)..family.balls.len() {
            let (x, r) = family.balls[b];
            if space.ball_prefix(x, r).iter().any(|&y| masks[a][y as usize]) {
                out.push(v("B1", a, Some(b)));
            }
        }
    }
    for (a, &(x, r)) in family.balls.iter().enumerate() {
        if r > family.delta {
            out.push(v("B2", a, None));
        }
        let d = space.dist_to_set(x, s);
        if d > family.c * r + TOL {
            out.push(v("B3", a, None));
        }
        if family.kind == FamilyKind::Whitney && d <= r + TOL {
            out.push(v("B4", a, None));
        }
    }
    out
}

fn family_value(
    ctx: &TraceContext<'_>,
    f: &[f64],
    p: f64,
    found: &SearchResult,
    pool: &CandidatePool,
    kind: FamilyKind,
    delta: f64,
) -> FunctionalValue {
    let lp = lp_m0(ctx, f, p);
    let osc = found.total.powf(1.0 / p);
    FunctionalValue {
        value: lp + osc,
        lp_term: lp,
        oscillation_term: osc,
        witness: Witness::Family(pool.family(&found.members, kind, delta)),
        exact: found.exact,
    }
}

/// `‖f‖_{L_p(m_0)} + sup_F (...)^{1/p}` over `(S, c, δ)`-nice families.
pub fn bsn(ctx: &TraceContext<'_>, f: &[f64], p: f64, c: f64, delta: f64, budget: usize) -> Result<FunctionalValue> {
    check_p(p)?;
    let pool = CandidatePool::new(ctx, c, delta)?;
    let w = pool.weights(ctx, f, p);
    let found = search_family(ctx.space, &pool, &w, |b| b.radius <= delta, budget, &[]);
    Ok(family_value(ctx, f, p, &found, &pool, FamilyKind::Nice, delta))
}

/// Minimum over `delta_grid` of the `δ`-scale functional plus the Whitney-family term.
pub fn n_functional(
    ctx: &TraceContext<'_>,
    f: &[f64],
    p: f64,
    c: f64,
    delta_grid: &[f64],
    budget: usize,
) -> Result<FunctionalValue> {
    Ok(trace_norms(ctx, f, &NormParams { p, c, sigma: 1.0, delta_grid: delta_grid.to_vec(), budget })?.n)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormParams {
    pub p: f64,
    pub c: f64,
    pub sigma: f64,
    pub delta_grid: Vec<f64>,
    pub budget: usize,
}

impl NormParams {
    pub fn new(p: f64, c: f64, sigma: f64, eps: f64) -> Self {
        Self { p, c, sigma, delta_grid: vec![eps, eps * eps, eps * eps * eps], budget: 22 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceNorms {
    pub cn: FunctionalValue,
    pub bn: FunctionalValue,
    pub bsn: FunctionalValue,
    /// `(δ, BSN^δ)` on the grid.
    pub bsn_delta: Vec<(f64, FunctionalValue)>,
    pub whitney_term: f64,
    pub n: FunctionalValue,
}

/// All four functionals on one shared candidate pool. The full-scale search
/// is warm-started with every smaller-scale and Whitney family, so the
/// comparisons between them are exact.
pub fn trace_norms(ctx: &TraceContext<'_>, f: &[f64], params: &NormParams) -> Result<TraceNorms> {
    let p = params.p;
    check_p(p)?;
    if params.c < 3.0 / ctx.seq.eps {
        return Err(Error::BadParameter(format!("dilation c = {} below 3/ε", params.c)));
    }
    if params.delta_grid.is_empty() || params.delta_grid.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
        return Err(Error::BadParameter("δ grid must be nonempty inside (0, 1]".into()));
    }
    let cn_v = cn(ctx, f, p)?;
    let bn_v = bn(ctx, f, p, params.sigma)?;
    let pool = CandidatePool::new(ctx, params.c, 1.0)?;
    let w = pool.weights(ctx, f, p);
    let space = ctx.space;
    let mut per_delta = Vec::new();
    let mut delta_found = Vec::new();
    for &d in &params.delta_grid {
        let found = search_family(space, &pool, &w, |b| b.radius <= d, params.budget, &[]);
        per_delta.push((d, family_value(ctx, f, p, &found, &pool, FamilyKind::Nice, d)));
        delta_found.push(found);
    }
    let whitney = search_family(space, &pool, &w, |b| b.avoids, params.budget, &[]);
    let mut warm: Vec<&[usize]> = delta_found.iter().map(|s| s.members.as_slice()).collect();
    warm.push(&whitney.members);
    let full = search_family(space, &pool, &w, |_| true, params.budget, &warm);
    let bsn_v = family_value(ctx, f, p, &full, &pool, FamilyKind::Nice, 1.0);
    let (best_i, _) = per_delta
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.value.total_cmp(&b.1 .1.value).then(a.0.cmp(&b.0)))
        .expect("nonempty grid");
    let first = &per_delta[best_i].1;
    let whitney_term = whitney.total.powf(1.0 / p);
    let n = FunctionalValue {
        value: first.value + whitney_term,
        lp_term: first.lp_term,
        oscillation_term: first.oscillation_term + whitney_term,
        witness: Witness::Whitney {
            delta: per_delta[best_i].0,
            per_delta: per_delta.iter().map(|(d, v)| (*d, v.value)).collect(),
            nice: pool.family(&delta_found[best_i].members, FamilyKind::Nice, per_delta[best_i].0),
            whitney: pool.family(&whitney.members, FamilyKind::Whitney, 1.0),
        },
        exact: first.exact && whitney.exact,
    };
    Ok(TraceNorms { cn: cn_v, bn: bn_v, bsn: bsn_v, bsn_delta: per_delta, whitney_term, n })
}
