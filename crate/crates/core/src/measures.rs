//! Atomic measures, averages, best L1 constants and Hausdorff-type contents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mms_core::{FiniteMetricSpace, SetOfPoints};

pub type ScalarField = Vec<f64>;

/// Nonnegative weights on the points of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Measure {
    weights: Vec<f64>,
    support: Vec<usize>,
}

impl TryFrom<Vec<f64>> for Measure {
    type Error = Error;
    fn try_from(w: Vec<f64>) -> Result<Self> {
        Measure::new(w)
    }
}

impl From<Measure> for Vec<f64> {
    fn from(m: Measure) -> Self {
        m.weights
    }
}

impl Measure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::NegativeWeight(i));
        }
        let support = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        Ok(Self { weights, support })
    }

    pub fn zero(n: usize) -> Self {
        Self { weights: vec![0.0; n], support: Vec::new() }
    }

    pub fn dirac(n: usize, at: usize, w: f64) -> Self {
        let mut v = vec![0.0; n];
        v[at] = w;
        Self::new(v).expect("dirac weight must be nonnegative")
    }

    pub fn uniform_on(n: usize, set: &SetOfPoints, w: f64) -> Self {
        let mut v = vec![0.0; n];
        for i in set.iter() {
            v[i] = w;
        }
        Self::new(v).expect("uniform weight must be nonnegative")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.weights[i]).sum()
    }

    pub fn mass_u32(&self, set: &[u32]) -> f64 {
        set.iter().map(|&i| self.weights[i as usize]).sum()
    }

    pub fn restrict(&self, set: &SetOfPoints) -> Self {
        let mut v = vec![0.0; self.len()];
        for i in set.iter() {
            v[i] = self.weights[i];
        }
        Self::new(v).expect("restriction keeps weights valid")
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.weights.iter().map(|w| w * factor).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.len() != self.len() {
            return Err(Error::BadParameter("measure length mismatch".into()));
        }
        Self::new(self.weights.iter().zip(&other.weights).map(|(a, b)| a + b).collect())
    }

    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        self.support
            .iter()
            .map(|&i| f[i].abs().powf(p) * self.weights[i])
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

/// Weighted average of `f` over `set`; zero when `m(set) = 0`.
pub fn average(f: &[f64], set: &[usize], m: &Measure) -> f64 {
    let mass = m.mass(set);
    if mass <= 0.0 {
        return 0.0;
    }
    set.iter().map(|&i| f[i] * m.weight(i)).sum::<f64>() / mass
}

/// `(1/m(G)) Σ_{i∈G} |f_i − c| m_i`.
pub fn l1_deviation(f: &[f64], set: &[usize], m: &Measure, c: f64) -> f64 {
    let mass = m.mass(set);
    if mass <= 0.0 {
        return 0.0;
    }
    set.iter().map(|&i| (f[i] - c).abs() * m.weight(i)).sum::<f64>() / mass
}

/// Minimal mean absolute deviation over constants and the smallest minimiser.
///
/// Weighted-median search; within 1e-9 of a half-mass split every sample value
/// in the flat region is re-evaluated so rounding cannot pick a worse point.
pub fn best_l1_constant(f: &[f64], set: &[usize], m: &Measure) -> Result<(f64, f64)> {
    let mut vals: Vec<(f64, f64)> = set
        .iter()
        .filter(|&&i| m.weight(i) > 0.0)
        .map(|&i| (f[i], m.weight(i)))
        .collect();
    if vals.is_empty() {
        return Err(Error::ZeroMass);
    }
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = vals.iter().map(|v| v.1).sum();
    let half = 0.5 * total;
    let slack = 1e-9 * total;
    let mut cum = 0.0;
    let mut lo = None;
    let mut hi = vals.len() - 1;
    for (t, v) in vals.iter().enumerate() {
        cum += v.1;
        if lo.is_none() && cum >= half - slack {
            lo = Some(t);
        }
        if cum > half + slack {
            hi = t;
            break;
        }
    }
    let lo = lo.unwrap_or(vals.len() - 1);
    let (vlo, vhi) = (vals[lo].0, vals[hi].0);
    let dev = |c: f64| l1_deviation(f, set, m, c);
    if lo == hi || vlo == vhi {
        return Ok((dev(vlo), vlo));
    }
    let mut cands: Vec<f64> = set
        .iter()
        .map(|&i| f[i])
        .filter(|&v| v >= vlo && v <= vhi)
        .collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let mut best = (f64::INFINITY, vlo);
    for c in cands {
        let e = dev(c);
        if e < best.0 {
            best = (e, c);
        }
    }
    Ok(best)
}

/// `E_m(f, G)`; zero when `m(G) = 0`.
pub fn oscillation(f: &[f64], set: &[usize], m: &Measure) -> f64 {
    match best_l1_constant(f, set, m) {
        Ok((e, _)) => e,
        Err(_) => 0.0,
    }
}

/// `Ẽ_m(f, B_r(x))`: the oscillation over the doubled ball when the ball
/// meets `supp_test`, zero otherwise.
pub fn tilde_e(
    space: &FiniteMetricSpace,
    f: &[f64],
    center: usize,
    r: f64,
    m: &Measure,
    supp_test: &SetOfPoints,
) -> Result<f64> {
    let meets = space.ball_prefix(center, r).iter().any(|&j| supp_test.contains(j as usize));
    if !meets {
        return Ok(0.0);
    }
    let big: Vec<usize> = space.ball_prefix(center, 2.0 * r).iter().map(|&j| j as usize).collect();
    Ok(oscillation(f, &big, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ContentMode {
    Exact,
    Greedy,
    #[default]
    Auto,
}

/// Which points may serve as ball centres in a content cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CenterPolicy {
    #[default]
    OnSet,
    AllPoints,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContentOptions {
    pub mode: ContentMode,
    pub cap: usize,
    pub centers: CenterPolicy,
}

impl Default for ContentOptions {
    fn default() -> Self {
        Self { mode: ContentMode::Auto, cap: 24, centers: CenterPolicy::OnSet }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContentResult {
    pub value: f64,
    /// `(center, radius)` pairs of the certifying cover.
    pub cover: Vec<(usize, f64)>,
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct CoverCandidate {
    pub center: usize,
    pub radius: f64,
    pub cost: f64,
    /// Positions (into the target list) covered by the ball.
    pub covers: Vec<usize>,
}

#[derive(Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn full(n: usize) -> Self {
        let mut b = Self::new(n);
        for i in 0..n {
            b.set(i);
        }
        b
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
    fn subset_of(&self, o: &Self) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a & !b == 0)
    }
    fn minus(&self, o: &Self) -> Self {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & !b).collect())
    }
    fn count_and(&self, o: &Self) -> u32 {
        self.0.iter().zip(&o.0).map(|(a, b)| (a & b).count_ones()).sum()
    }
    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            (0..64).filter(move |b| word >> b & 1 == 1).map(move |b| w * 64 + b)
        })
    }
}

/// Candidate radii at centre `x` strictly below `delta`: critical distances,
/// midpoints of consecutive ones (starting from 0), and the midpoint of the
/// last gap below `delta`. The last one always exists, so every target point
/// can be covered on its own.
pub fn content_radii(space: &FiniteMetricSpace, x: usize, delta: f64) -> Vec<f64> {
    let crit = space.critical_radii(x);
    let mut out = Vec::new();
    let mut prev = 0.0;
    let mut below = 0;
    for &d in &crit {
        let mid = 0.5 * (prev + d);
        if mid < delta {
            out.push(mid);
        }
        if d < delta {
            out.push(d);
            below += 1;
            prev = d;
        } else {
            break;
        }
    }
    let tail = 0.5 * (prev + delta);
    if crit.get(below).is_none_or(|&next| tail < next) {
        out.push(tail);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Pruned candidate balls for covering `target`.
pub fn content_candidates(
    space: &FiniteMetricSpace,
    mu: &Measure,
    target: &[usize],
    theta: f64,
    delta: f64,
    centers: CenterPolicy,
) -> Vec<CoverCandidate> {
    let pos = |p: usize| target.iter().position(|&t| t == p);
    let centre_list: Vec<usize> = match centers {
        CenterPolicy::OnSet => target.to_vec(),
        CenterPolicy::AllPoints => (0..space.len()).collect(),
    };
    let mut raw: Vec<(CoverCandidate, Bits)> = Vec::new();
    for &x in &centre_list {
        // per centre: cheapest radius for each distinct coverage
        let mut per: Vec<(CoverCandidate, Bits)> = Vec::new();
        for r in content_radii(space, x, delta) {
            let ball = space.ball_prefix(x, r);
            let mut covers: Vec<usize> = ball.iter().filter_map(|&j| pos(j as usize)).collect();
            if covers.is_empty() {
                continue;
            }
            covers.sort_unstable();
            let cost = mu.mass_u32(ball) / r.powf(theta);
            let mut bits = Bits::new(target.len());
            for &c in &covers {
                bits.set(c);
            }
            match per.iter_mut().find(|(c, _)| c.covers == covers) {
                Some((c, _)) if cost < c.cost => {
                    c.cost = cost;
                    c.radius = r;
                }
                Some(_) => {}
                None => per.push((CoverCandidate { center: x, radius: r, cost, covers }, bits)),
            }
        }
        raw.extend(per);
    }
    let keep: Vec<bool> = (0..raw.len())
        .map(|a| {
            !(0..raw.len()).any(|b| {
                b != a
                    && raw[a].1.subset_of(&raw[b].1)
                    && raw[b].0.cost <= raw[a].0.cost
                    && (raw[b].0.cost < raw[a].0.cost || raw[a].1 != raw[b].1 || b < a)
            })
        })
        .collect();
    raw.into_iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c.0).collect()
}

/// `H^θ_δ(E)`: minimal `Σ μ(B_i)/r_i^θ` over covers of `E` by balls of radius `< δ`.
pub fn hausdorff_content(
    space: &FiniteMetricSpace,
    mu: &Measure,
    target: &SetOfPoints,
    theta: f64,
    delta: f64,
    opts: ContentOptions,
) -> Result<ContentResult> {
    if target.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    if !(delta > 0.0) {
        return Err(Error::BadParameter("delta must be positive".into()));
    }
    let e = target.members();
    let cands = content_candidates(space, mu, e, theta, delta, opts.centers);
    let bits: Vec<Bits> = cands
        .iter()
        .map(|c| {
            let mut b = Bits::new(e.len());
            for &i in &c.covers {
                b.set(i);
            }
            b
        })
        .collect();
    let mut coverable = Bits::new(e.len());
    for b in &bits {
        for i in b.ones() {
            coverable.set(i);
        }
    }
    if coverable != Bits::full(e.len()) {
        return Err(Error::NoFeasibleCover);
    }
    let greedy = greedy_cover(&cands, &bits, e.len());
    let exact = match opts.mode {
        ContentMode::Greedy => false,
        ContentMode::Exact => true,
        ContentMode::Auto => cands.len() <= opts.cap,
    };
    let chosen = if exact { exact_cover(&cands, &bits, e.len(), greedy) } else { greedy };
    let cover: Vec<(usize, f64)> = chosen.iter().map(|&i| (cands[i].center, cands[i].radius)).collect();
    let value = cover
        .iter()
        .map(|&(x, r)| mu.mass_u32(space.ball_prefix(x, r)) / r.powf(theta))
        .sum();
    Ok(ContentResult { value, cover, exact })
}

fn cost_of(cands: &[CoverCandidate], set: &[usize]) -> f64 {
    set.iter().map(|&i| cands[i].cost).sum()
}

fn greedy_cover(cands: &[CoverCandidate], bits: &[Bits], m: usize) -> Vec<usize> {
    let mut uncovered = Bits::full(m);
    let mut chosen = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for (i, b) in bits.iter().enumerate() {
            let gain = b.count_and(&uncovered);
            if gain == 0 {
                continue;
            }
            let ratio = cands[i].cost / gain as f64;
            if best.is_none_or(|(r, _)| ratio < r) {
                best = Some((ratio, i));
            }
        }
        let (_, i) = best.expect("coverability checked before greedy");
        uncovered = uncovered.minus(&bits[i]);
        chosen.push(i);
    }
    // drop redundant members, most expensive first
    let mut order: Vec<usize> = (0..chosen.len()).collect();
    order.sort_by(|&a, &b| cands[chosen[b]].cost.total_cmp(&cands[chosen[a]].cost));
    let mut alive = vec![true; chosen.len()];
    for a in order {
        alive[a] = false;
        let mut cov = Bits::new(m);
        for (j, &c) in chosen.iter().enumerate() {
            if alive[j] {
                for i in bits[c].ones() {
                    cov.set(i);
                }
            }
        }
        if cov != Bits::full(m) {
            alive[a] = true;
        }
    }
    chosen.into_iter().zip(alive).filter(|(_, a)| *a).map(|(c, _)| c).collect()
}

fn exact_cover(cands: &[CoverCandidate], bits: &[Bits], m: usize, seed: Vec<usize>) -> Vec<usize> {
    let mut covering: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, b) in bits.iter().enumerate() {
        for e in b.ones() {
            covering[e].push(i);
        }
    }
    for list in &mut covering {
        list.sort_by(|&a, &b| cands[a].cost.total_cmp(&cands[b].cost).then(a.cmp(&b)));
    }
    let min_cost: Vec<f64> = covering.iter().map(|l| cands[l[0]].cost).collect();
    struct Search<'a> {
        cands: &'a [CoverCandidate],
        bits: &'a [Bits],
        covering: &'a [Vec<usize>],
        min_cost: &'a [f64],
        best_cost: f64,
        best: Vec<usize>,
        stack: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, uncovered: Bits, cost: f64) {
            if uncovered.is_empty() {
                if cost < self.best_cost {
                    self.best_cost = cost;
                    self.best = self.stack.clone();
                }
                return;
            }
            let mut lb = 0.0f64;
            let mut pick = (usize::MAX, usize::MAX);
            for e in uncovered.ones() {
                lb = lb.max(self.min_cost[e]);
                if self.covering[e].len() < pick.0 {
                    pick = (self.covering[e].len(), e);
                }
            }
            if cost + lb >= self.best_cost {
                return;
            }
            for &c in &self.covering[pick.1] {
                let next_cost = cost + self.cands[c].cost;
                if next_cost >= self.best_cost {
                    break;
                }
                self.stack.push(c);
                self.go(uncovered.minus(&self.bits[c]), next_cost);
                self.stack.pop();
            }
        }
    }
    let mut s = Search {
        cands,
        bits,
        covering: &covering,
        min_cost: &min_cost,
        best_cost: cost_of(cands, &seed),
        best: seed,
        stack: Vec::new(),
    };
    s.go(Bits::full(m), 0.0);
    s.best
}

/// Summary of `H^θ_{r}(B_r(x) ∩ S) r^θ / μ(B_r(x))` over centres in `S` and a radius grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContentRatios {
    pub min: f64,
    pub max: f64,
    pub argmin: (usize, f64),
    pub argmax: (usize, f64),
    pub all_exact: bool,
}

pub fn content_ratios(
    space: &FiniteMetricSpace,
    mu: &Measure,
    s: &SetOfPoints,
    theta: f64,
    r_grid: &[f64],
    opts: ContentOptions,
) -> Result<ContentRatios> {
    if r_grid.is_empty() {
        return Err(Error::EmptyRadiusGrid);
    }
    if s.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    let mut out = ContentRatios {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        argmin: (0, 0.0),
        argmax: (0, 0.0),
        all_exact: true,
    };
    for x in s.iter() {
        for &r in r_grid {
            let piece = space.ball(x, r).intersection(s);
            let h = hausdorff_content(space, mu, &piece, theta, r, opts)?;
            let mb = mu.mass_u32(space.ball_prefix(x, r));
            if mb <= 0.0 {
                return Err(Error::ZeroMuBall(x));
            }
            let ratio = h.value * r.powf(theta) / mb;
            out.all_exact &= h.exact;
            if ratio < out.min {
                out.min = ratio;
                out.argmin = (x, r);
            }
            if ratio > out.max {
                out.max = ratio;
                out.argmax = (x, r);
            }
        }
    }
    Ok(out)
}

/// Lower codimensional regularity constant: the infimum of the content ratio.
pub fn lcr_lambda(
    space: &FiniteMetricSpace,
    mu: &Measure,
    s: &SetOfPoints,
    theta: f64,
    r_grid: &[f64],
    opts: ContentOptions,
) -> Result<f64> {
    Ok(content_ratios(space, mu, s, theta, r_grid, opts)?.min)
}

/// Two-sided codimensional Ahlfors constants `(c1, c2)` of a measure `nu` on `S`:
/// `c1 ≤ ν(B_r(x)) r^θ / μ(B_r(x)) ≤ c2` over `x ∈ S` and the radius grid.
pub fn adr_constants(
    space: &FiniteMetricSpace,
    mu: &Measure,
    nu: &Measure,
    s: &SetOfPoints,
    theta: f64,
    r_grid: &[f64],
) -> Result<(f64, f64)> {
    if r_grid.is_empty() {
        return Err(Error::EmptyRadiusGrid);
    }
    if s.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for x in s.iter() {
        for &r in r_grid {
            let ball = space.ball_prefix(x, r);
            let mb = mu.mass_u32(ball);
            if mb <= 0.0 {
                return Err(Error::ZeroMuBall(x));
            }
            let ratio = nu.mass_u32(ball) * r.powf(theta) / mb;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mms_core::Metric;

    #[test]
    fn average_and_zero_mass() {
        let m = Measure::new(vec![1.0, 3.0, 0.0]).unwrap();
        let f = vec![2.0, 6.0, 100.0];
        assert_eq!(average(&f, &[0, 1, 2], &m), 5.0);
        assert_eq!(average(&f, &[2], &m), 0.0);
        assert_eq!(best_l1_constant(&f, &[2], &m).unwrap_err(), Error::ZeroMass);
    }

    #[test]
    fn l1_on_uniform_line() {
        // f = x on 11 equispaced points, uniform weights: E = 30/121
        let f: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let m = Measure::new(vec![1.0; 11]).unwrap();
        let set: Vec<usize> = (0..11).collect();
        let (e, c) = best_l1_constant(&f, &set, &m).unwrap();
        assert!((c - 0.5).abs() < 1e-15);
        assert!((e - 3.0 / 11.0).abs() < 1e-12, "{e}");
    }

    #[test]
    fn l1_even_split_picks_smallest() {
        let f = vec![0.0, 1.0];
        let m = Measure::new(vec![1.0, 1.0]).unwrap();
        let (e, c) = best_l1_constant(&f, &[0, 1], &m).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(e, 0.5);
    }

    #[test]
    fn content_single_and_isolated_points() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let s = FiniteMetricSpace::from_points(&pts, Metric::Euclidean).unwrap();
        let mu = Measure::new(vec![1.0; 5]).unwrap();
        let one = SetOfPoints::new(vec![2], 5).unwrap();
        let h = hausdorff_content(&s, &mu, &one, 1.0, 0.3, ContentOptions::default()).unwrap();
        assert!(h.exact);
        assert!((h.value - 1.0 / 0.15).abs() < 1e-12);
        // neighbours further apart than δ are covered one by one
        let two = SetOfPoints::new(vec![1, 2], 5).unwrap();
        let h = hausdorff_content(&s, &mu, &two, 1.0, 0.3, ContentOptions::default()).unwrap();
        assert!((h.value - 2.0 / 0.15).abs() < 1e-12);
    }
}
