//! Finite metric spaces, point sets, nested nets and the basic counting
//! quantities (doubling constant, packing bound, neighbourhoods).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Measure;

/// Absolute slack used for closed-ball membership and table validation.
pub const TOL: f64 = 1e-9;

const FULL_TRIANGLE_CHECK_MAX: usize = 300;
const TRIANGLE_SAMPLE_SEED: u64 = 0x6d6d_7472;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Chebyshev,
}

impl Metric {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Chebyshev => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
        }
    }
}

/// JSON input: either coordinates with a metric, or an explicit table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceInput {
    Points {
        points: Vec<Vec<f64>>,
        #[serde(default)]
        metric: Metric,
        #[serde(default)]
        labels: Option<Vec<String>>,
    },
    Table {
        dist: Vec<Vec<f64>>,
        #[serde(default)]
        labels: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone)]
pub struct FiniteMetricSpace {
    n: usize,
    dist: Vec<f64>,
    labels: Option<Vec<String>>,
    coords: Option<Vec<Vec<f64>>>,
    order: Vec<Vec<u32>>,
    sorted_dist: Vec<Vec<f64>>,
    diameter: f64,
}

pub fn build_space(input: &SpaceInput) -> Result<FiniteMetricSpace> {
    match input {
        SpaceInput::Points { points, metric, labels } => {
            let s = FiniteMetricSpace::from_points(points, *metric)?;
            s.with_labels(labels.clone())
        }
        SpaceInput::Table { dist, labels } => {
            let s = FiniteMetricSpace::from_table(dist)?;
            s.with_labels(labels.clone())
        }
    }
}

impl FiniteMetricSpace {
    pub fn from_points(points: &[Vec<f64>], metric: Metric) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::BadParameter("empty point set".into()));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
            return Err(Error::BadParameter("ragged or non-finite coordinates".into()));
        }
        let n = points.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = metric.eval(&points[i], &points[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let mut s = Self::assemble(n, dist);
        s.coords = Some(points.to_vec());
        Ok(s)
    }

    pub fn from_table(table: &[Vec<f64>]) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::BadParameter("empty distance table".into()));
        }
        if table.iter().any(|row| row.len() != n) {
            return Err(Error::BadParameter("distance table is not square".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let d = table[i][j];
                if !d.is_finite() {
                    return Err(Error::BadParameter(format!("non-finite distance at ({i}, {j})")));
                }
                if d < 0.0 || (i == j && d.abs() > TOL) || (i != j && d <= 0.0) {
                    return Err(Error::NegativeDistance(i, j));
                }
                if (d - table[j][i]).abs() > TOL {
                    return Err(Error::AsymmetricTable(i.min(j), i.max(j)));
                }
            }
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    // symmetrise so downstream code sees an exact metric table
                    dist[i * n + j] = 0.5 * (table[i][j] + table[j][i]);
                }
            }
        }
        check_triangle(n, &dist)?;
        Ok(Self::assemble(n, dist))
    }

    fn assemble(n: usize, dist: Vec<f64>) -> Self {
        let order: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &dist[i * n..(i + 1) * n];
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| {
                    row[a as usize]
                        .total_cmp(&row[b as usize])
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        let sorted_dist = order
            .iter()
            .enumerate()
            .map(|(i, o)| o.iter().map(|&j| dist[i * n + j as usize]).collect())
            .collect();
        let diameter = dist.iter().cloned().fold(0.0, f64::max);
        Self { n, dist, labels: None, coords: None, order, sorted_dist, diameter }
    }

    pub fn with_labels(mut self, labels: Option<Vec<String>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.n {
                return Err(Error::BadParameter("label count does not match point count".into()));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// All points ordered by distance from `i` (ties by index); `i` comes first.
    pub fn sorted(&self, i: usize) -> &[u32] {
        &self.order[i]
    }

    /// Distances matching [`Self::sorted`].
    pub fn sorted_distances(&self, i: usize) -> &[f64] {
        &self.sorted_dist[i]
    }

    /// Number of points in the closed ball `B_r(center)`.
    pub fn ball_count(&self, center: usize, r: f64) -> usize {
        self.sorted_dist[center].partition_point(|&d| d <= r + TOL)
    }

    /// Points of the closed ball ordered by distance from the centre.
    pub fn ball_prefix(&self, center: usize, r: f64) -> &[u32] {
        &self.order[center][..self.ball_count(center, r)]
    }

    pub fn ball(&self, center: usize, r: f64) -> SetOfPoints {
        let mut m: Vec<usize> = self.ball_prefix(center, r).iter().map(|&j| j as usize).collect();
        m.sort_unstable();
        SetOfPoints { members: m }
    }

    /// Distinct positive distances from `center`, ascending.
    pub fn critical_radii(&self, center: usize) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &d in &self.sorted_dist[center][1..] {
            match out.last() {
                Some(&last) if d <= last + TOL => {}
                _ => out.push(d),
            }
        }
        out
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn set_diameter(&self, set: &[usize]) -> f64 {
        if set.len() == self.n {
            return self.diameter;
        }
        let mut best = 0.0f64;
        for (a, &i) in set.iter().enumerate() {
            let row = self.row(i);
            for &j in &set[a + 1..] {
                best = best.max(row[j]);
            }
        }
        best
    }

    pub fn dist_to_set(&self, x: usize, set: &SetOfPoints) -> f64 {
        let row = self.row(x);
        set.members.iter().map(|&s| row[s]).fold(f64::INFINITY, f64::min)
    }

    pub fn dist_to_set_all(&self, set: &SetOfPoints) -> Vec<f64> {
        (0..self.n).map(|x| self.dist_to_set(x, set)).collect()
    }

    pub fn min_positive_distance(&self) -> f64 {
        (0..self.n)
            .filter_map(|i| self.sorted_dist[i].get(1).copied())
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_triangle(n: usize, dist: &[f64]) -> Result<()> {
    let test = |i: usize, j: usize, k: usize| -> Result<()> {
        if dist[i * n + k] > dist[i * n + j] + dist[j * n + k] + TOL {
            Err(Error::TriangleViolation { i, j, k })
        } else {
            Ok(())
        }
    };
    if n <= FULL_TRIANGLE_CHECK_MAX {
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    test(i, j, k)?;
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(TRIANGLE_SAMPLE_SEED);
        for _ in 0..10 * n * n {
            test(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n))?;
        }
    }
    Ok(())
}

/// Sorted, duplicate-free list of point indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SetOfPoints {
    members: Vec<usize>,
}

impl SetOfPoints {
    pub fn new(mut members: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(&bad) = members.iter().find(|&&m| m >= n) {
            return Err(Error::BadParameter(format!("point index {bad} out of range")));
        }
        members.sort_unstable();
        members.dedup();
        Ok(Self { members })
    }

    pub fn all(n: usize) -> Self {
        Self { members: (0..n).collect() }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        Self { members: (0..mask.len()).filter(|&i| mask[i]).collect() }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.members {
            m[i] = true;
        }
        m
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut m = self.members.clone();
        m.extend_from_slice(&other.members);
        m.sort_unstable();
        m.dedup();
        Self { members: m }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self { members: self.members.iter().copied().filter(|&i| other.contains(i)).collect() }
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self { members: self.members.iter().copied().filter(|&i| !other.contains(i)).collect() }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.members.iter().all(|&i| other.contains(i))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.members.windows(2).any(|w| w[0] >= w[1]) || self.members.iter().any(|&m| m >= n) {
            return Err(Error::BadParameter("malformed point set".into()));
        }
        Ok(())
    }
}

/// Nested maximal separated sets `Z_k`, `k_min ..= k_max`, inside a domain.
///
/// Level `k` is `ε^k`-separated (strictly) and `ε^k`-dense (closed) in the
/// domain; level `k + 1` contains level `k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetHierarchy {
    eps: f64,
    k_min: i32,
    k_max: i32,
    domain: Vec<usize>,
    levels: Vec<Vec<usize>>,
}

impl NetHierarchy {
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn k_min(&self) -> i32 {
        self.k_min
    }
    pub fn k_max(&self) -> i32 {
        self.k_max
    }
    pub fn domain(&self) -> &[usize] {
        &self.domain
    }
    pub fn scale(&self, k: i32) -> f64 {
        self.eps.powi(k)
    }
    /// Net points of level `k`, in insertion order (the net index).
    pub fn level(&self, k: i32) -> &[usize] {
        &self.levels[(k - self.k_min) as usize]
    }
    pub fn levels(&self) -> impl Iterator<Item = (i32, &[usize])> {
        self.levels
            .iter()
            .enumerate()
            .map(move |(i, l)| (self.k_min + i as i32, l.as_slice()))
    }
}

pub fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(Error::EpsOutOfRange(eps));
    }
    Ok(())
}

pub fn build_nets(
    space: &FiniteMetricSpace,
    eps: f64,
    k_min: i32,
    k_max: i32,
    seed_order: Option<&[usize]>,
) -> Result<NetHierarchy> {
    build_nets_on(space, &SetOfPoints::all(space.len()), eps, k_min, k_max, seed_order)
}

/// Greedy sequential insertion in `seed_order` (default: ascending index).
pub fn build_nets_on(
    space: &FiniteMetricSpace,
    domain: &SetOfPoints,
    eps: f64,
    k_min: i32,
    k_max: i32,
    seed_order: Option<&[usize]>,
) -> Result<NetHierarchy> {
    check_eps(eps)?;
    if k_min > k_max {
        return Err(Error::BadParameter("k_min exceeds k_max".into()));
    }
    if domain.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    domain.validate(space.len())?;
    let order: Vec<usize> = match seed_order {
        Some(o) => {
            let mut sorted = o.to_vec();
            sorted.sort_unstable();
            if sorted != domain.members() {
                return Err(Error::BadParameter("seed order is not a permutation of the domain".into()));
            }
            o.to_vec()
        }
        None => domain.members().to_vec(),
    };
    let mut nearest = vec![f64::INFINITY; space.len()];
    let mut net: Vec<usize> = Vec::new();
    let mut levels = Vec::with_capacity((k_max - k_min + 1) as usize);
    for k in k_min..=k_max {
        let r = eps.powi(k);
        for &p in &order {
            if nearest[p] > r {
                net.push(p);
                let row = space.row(p);
                for &q in domain.members() {
                    nearest[q] = nearest[q].min(row[q]);
                }
            }
        }
        levels.push(net.clone());
    }
    Ok(NetHierarchy { eps, k_min, k_max, domain: domain.members().to_vec(), levels })
}

/// Separation, covering and nesting violations, as human-readable strings.
pub fn verify_nets(space: &FiniteMetricSpace, nets: &NetHierarchy) -> Vec<String> {
    let mut out = Vec::new();
    let mut prev: Option<&[usize]> = None;
    for (k, z) in nets.levels() {
        let r = nets.scale(k);
        for (a, &p) in z.iter().enumerate() {
            for &q in &z[a + 1..] {
                if space.d(p, q) <= r {
                    out.push(format!("level {k}: points {p} and {q} not separated"));
                }
            }
        }
        for &x in nets.domain() {
            if z.iter().all(|&p| space.d(x, p) > r) {
                out.push(format!("level {k}: point {x} not covered"));
            }
        }
        if let Some(pz) = prev {
            if pz.iter().any(|p| !z.contains(p)) {
                out.push(format!("level {k}: not nested in level {}", k - 1));
            }
        }
        prev = Some(z);
    }
    out
}

/// Sup over points and radii `0 < r <= R` of `μ(B_2r)/μ(B_r)`, over balls of positive mass.
pub fn doubling_constant(space: &FiniteMetricSpace, mu: &Measure, r_max: f64) -> Result<f64> {
    if mu.len() != space.len() {
        return Err(Error::BadParameter("measure length mismatch".into()));
    }
    if mu.total() <= 0.0 {
        return Err(Error::ZeroMassEverywhere);
    }
    if !(r_max > 0.0) {
        return Err(Error::BadParameter("radius bound must be positive".into()));
    }
    let best = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let order = space.sorted(x);
            let mut prefix = Vec::with_capacity(order.len() + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            for &j in order {
                acc += mu.weight(j as usize);
                prefix.push(acc);
            }
            let mass = |r: f64| prefix[space.ball_count(x, r)];
            let mut radii = vec![r_max];
            for &d in &space.sorted_distances(x)[1..] {
                for r in [d, 0.5 * d] {
                    if r <= r_max {
                        radii.push(r);
                    }
                }
            }
            radii
                .into_iter()
                .filter_map(|r| {
                    let m1 = mass(r);
                    (m1 > 0.0).then(|| mass(2.0 * r) / m1)
                })
                .fold(1.0f64, f64::max)
        })
        .reduce(|| 1.0, f64::max);
    Ok(best)
}

/// Cardinality bound for `r`-separated subsets of a ball of radius `c r`:
/// `floor(C^(log2(2c) + 1)) + 1`, where `C` is the doubling constant at
/// scale `(c + 1) r`.
pub fn packing_bound(doubling: f64, c: f64) -> f64 {
    (doubling.powf((2.0 * c).log2() + 1.0)).floor() + 1.0
}

pub fn packing_bound_at(
    space: &FiniteMetricSpace,
    mu: &Measure,
    r: f64,
    c: f64,
) -> Result<f64> {
    let cmu = doubling_constant(space, mu, (c + 1.0) * r)?;
    Ok(packing_bound(cmu, c))
}

/// `{x : dist(x, S) < 5 ε^k}` from precomputed distances to `S`.
pub fn neighborhood_from_dist(dist_to_s: &[f64], eps: f64, k: i32) -> SetOfPoints {
    let r = 5.0 * eps.powi(k);
    SetOfPoints { members: (0..dist_to_s.len()).filter(|&x| dist_to_s[x] < r).collect() }
}

/// `(U_k(S), U_{k-1}(S) \ U_k(S))`.
pub fn neighborhood_and_layer(
    space: &FiniteMetricSpace,
    s: &SetOfPoints,
    eps: f64,
    k: i32,
) -> Result<(SetOfPoints, SetOfPoints)> {
    if s.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::EpsOutOfRange(eps));
    }
    let ds = space.dist_to_set_all(s);
    let inner = neighborhood_from_dist(&ds, eps, k);
    let outer = neighborhood_from_dist(&ds, eps, k - 1);
    let layer = outer.difference(&inner);
    Ok((inner, layer))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> FiniteMetricSpace {
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        FiniteMetricSpace::from_points(&pts, Metric::Euclidean).unwrap()
    }

    #[test]
    fn rejects_triangle_violation() {
        let t = vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ];
        assert_eq!(
            FiniteMetricSpace::from_table(&t).unwrap_err(),
            Error::TriangleViolation { i: 0, j: 1, k: 2 }
        );
    }

    #[test]
    fn rejects_asymmetry_and_negatives() {
        let t = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(FiniteMetricSpace::from_table(&t), Err(Error::AsymmetricTable(0, 1))));
        let t = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
        assert!(matches!(FiniteMetricSpace::from_table(&t), Err(Error::NegativeDistance(..))));
    }

    #[test]
    fn eps_range() {
        let s = line(5);
        assert_eq!(build_nets(&s, 0.5, 0, 2, None).unwrap_err(), Error::EpsOutOfRange(0.5));
        assert!(build_nets(&s, 0.1, 0, 2, None).is_ok());
    }

    #[test]
    fn doubling_on_uniform_line() {
        let s = line(11);
        let mu = Measure::new(vec![1.0; 11]).unwrap();
        let c = doubling_constant(&s, &mu, 0.1 + 1e-12).unwrap();
        assert!((c - 3.0).abs() < 1e-12, "{c}");
    }

    #[test]
    fn doubling_dirac_is_one() {
        let s = line(7);
        let mu = Measure::dirac(7, 3, 2.0);
        assert_eq!(doubling_constant(&s, &mu, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn neighborhood_example() {
        let s = line(101);
        let set = SetOfPoints::new(vec![0], 101).unwrap();
        let (u1, _) = neighborhood_and_layer(&s, &set, 0.1, 1).unwrap();
        // dist < 0.5 strictly: x_0 .. x_49
        assert_eq!(u1.members(), (0..50).collect::<Vec<_>>().as_slice());
        let (_, v1) = neighborhood_and_layer(&s, &set, 0.1, 1).unwrap();
        assert_eq!(v1.members(), (50..101).collect::<Vec<_>>().as_slice());
    }
}
