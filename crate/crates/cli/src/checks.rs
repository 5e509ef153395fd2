//! Invariant suites over a geometry. Each returns named pass/fail records
//! with the constants they achieved.

use std::collections::BTreeMap;

use serde::Serialize;

use mmtrace::dyadic::{
    build_cubes, build_hat_cubes, build_order, hat_overlap, scale_index, verify_cubes, verify_hats, verify_order,
    DyadicCubeSystem, HatCubes, Violation,
};
use mmtrace::extension::{extend, partition_of_unity, stabilization_level, trace_residual};
use mmtrace::mms_core::{build_nets, build_nets_on, neighborhood_from_dist, packing_bound_at, verify_nets};
use mmtrace::potentials::{cube_energy_bound, dyadic_energy_split, dyadic_riesz, hedberg_wolff_check, riesz};
use mmtrace::regular_seq::{redistribute, verify, Ambient, VerifyOptions};
use mmtrace::{Measure, NetHierarchy, SetOfPoints};

use crate::geometry::Geometry;
use crate::suite::{lipschitz_constant, TestFunction};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub geometry: String,
    pub pass: bool,
    pub detail: String,
    pub constants: BTreeMap<String, f64>,
}

impl Check {
    pub fn new(name: &str, geometry: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), geometry: geometry.into(), pass, detail: detail.into(), constants: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.constants.insert(key.into(), value);
        self
    }
}

fn summarize(violations: &[Violation]) -> String {
    if violations.is_empty() {
        return "ok".into();
    }
    let mut names: Vec<&str> = violations.iter().map(|v| v.condition.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    format!("{} violations ({}); first: {}", violations.len(), names.join(", "), violations[0].detail)
}

/// Finest level worth building: one past the scale of the closest pair.
pub fn finest_level(g: &Geometry, eps: f64, cap: i32) -> i32 {
    (scale_index(g.space.min_positive_distance(), eps) as i32 + 1).clamp(1, cap)
}

/// Depth at which every point off `S` has stabilised, at least `floor`.
pub fn stabilization_depth(g: &Geometry, eps: f64, floor: usize) -> usize {
    g.space
        .dist_to_set_all(&g.s)
        .into_iter()
        .filter_map(|d| stabilization_level(d, eps))
        .fold(floor, usize::max)
}

pub struct CubeBundle {
    pub nets: NetHierarchy,
    pub cubes: DyadicCubeSystem,
    pub hats: HatCubes,
}

pub fn cube_bundle(g: &Geometry, eps: f64, k_max: i32) -> Result<CubeBundle, CliError> {
    let nets = build_nets(&g.space, eps, 0, k_max, None)?;
    let order = build_order(&g.space, &nets)?;
    let cubes = build_cubes(&g.space, &nets, &order, 0.125)?;
    let hats = build_hat_cubes(&g.space, &cubes);
    Ok(CubeBundle { nets, cubes, hats })
}

/// Nets, parent order, cubes and hat cubes.
pub fn net_suite(g: &Geometry, eps: f64, k_max: i32) -> Result<Vec<Check>, CliError> {
    let name = g.spec.label();
    let nets = build_nets(&g.space, eps, 0, k_max, None)?;
    let net_v = verify_nets(&g.space, &nets);
    let order = build_order(&g.space, &nets)?;
    let order_v = verify_order(&g.space, &nets, &order);
    let cubes = build_cubes(&g.space, &nets, &order, 0.125)?;
    let cube_v = verify_cubes(&g.space, &nets, &cubes);
    let hats = build_hat_cubes(&g.space, &cubes);
    // a point lies in at most as many hats as there are ε^k-separated centres within 9ε^k
    let bounds: Vec<f64> = (0..=k_max)
        .map(|k| packing_bound_at(&g.space, &g.mu, eps.powi(k), 9.0))
        .collect::<Result<_, _>>()?;
    let hat_v = verify_hats(&g.space, &cubes, &hats, |k| bounds[k as usize]);
    let overlap = (0..=k_max).map(|k| hat_overlap(&g.space, &hats, k)).max().unwrap_or(0);
    let bound = bounds.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::new("nets", name, net_v.is_empty(), net_v.first().cloned().unwrap_or_else(|| "ok".into()))
            .with("levels", (k_max + 1) as f64),
        Check::new("order PO1-PO4", name, order_v.is_empty(), summarize(&order_v)),
        Check::new("cubes DQ1-DQ4", name, cube_v.is_empty(), summarize(&cube_v)),
        Check::new("hat cubes", name, hat_v.is_empty(), summarize(&hat_v))
            .with("max_overlap", overlap as f64)
            .with("packing_bound", bound),
    ])
}

/// `Σ_α φ_{k,α} = 1` at every point; `perturb` scales one weight to test the check.
pub fn partition_identity(g: &Geometry, nets: &NetHierarchy, levels: &[i32], perturb: bool) -> Result<Check, CliError> {
    let mut worst = 0.0f64;
    for &k in levels {
        let mut pou = partition_of_unity(&g.space, nets, &g.s, k)?;
        if perturb {
            pou.entries[0][0].1 *= 1.01;
        }
        for x in 0..g.space.len() {
            worst = worst.max((pou.sum_at(x) - 1.0).abs());
        }
    }
    Ok(Check::new("partition identity", g.spec.label(), worst <= 1e-12, format!("max |Σφ − 1| = {worst:.3e}"))
        .with("max_error", worst))
}

/// Regularity conditions of the canonical sequence.
pub fn sequence_suite(g: &Geometry, eps: f64, depth: usize) -> Result<Vec<Check>, CliError> {
    let name = g.spec.label();
    let seq = g.sequence(eps, depth)?;
    if let Some(c) = &g.cantor {
        return cantor_suite(g, c, depth);
    }
    let opts = VerifyOptions { m5_min: Some(0.2), ..Default::default() };
    let rep = verify(&seq, &g.space, Ambient::Atomic(&g.mu), &g.s, &g.test_sets, &opts)?;
    let mut per_depth_min = f64::INFINITY;
    for prof in &rep.densities {
        for d in &prof.per_depth {
            per_depth_min = per_depth_min.min(d.max);
        }
    }
    Ok(vec![
        Check::new("M2 upper constant", name, rep.pass.m2, format!("C1 = {}", rep.c1.value)).with("c1", rep.c1.value),
        Check::new("M3 lower constant", name, rep.pass.m3, format!("C2 = {}", rep.c2.value)).with("c2", rep.c2.value),
        Check::new("M4 density ratio", name, rep.c3 == 1.0, format!("C3 = {}", rep.c3)).with("c3", rep.c3),
        Check::new("M5 density surrogate", name, per_depth_min >= 0.2, format!("smallest per-depth density {per_depth_min}"))
            .with("m5_min", per_depth_min),
    ])
}

fn cantor_suite(
    g: &Geometry,
    c: &mmtrace::regular_seq::CantorConstruction,
    depth: usize,
) -> Result<Vec<Check>, CliError> {
    let name = g.spec.label();
    let theta = c.theta;
    let seq = &c.sequence;
    let depth = depth.min(seq.depth());
    let upper_bound = 2f64.powf(theta) / (theta - 1.0) * 15.0;
    let lower_bound = 1.0 / (c.c1 * (theta - 1.0));
    let ratio_bound = 1f64.max(1.0 / c.c2);
    let mut worst_upper = 0.0f64;
    let mut worst_lower = f64::INFINITY;
    let mut c3 = 0.0f64;
    let mut decay = Vec::new();
    for k in 0..=depth {
        let opts = VerifyOptions { k_range: Some((k, k)), min_radius: c.cell, ..Default::default() };
        let rep = verify(seq, &g.space, Ambient::Lebesgue { dim: 2 }, &g.s, &g.test_sets, &opts)?;
        worst_upper = worst_upper.max(rep.c1.value / upper_bound);
        // the lower bound weakens like 2^{-k(2-θ)}
        worst_lower = worst_lower.min(rep.c2.value / (lower_bound * 2f64.powf(-(k as f64) * (2.0 - theta))));
        c3 = c3.max(rep.c3);
        decay.push(rep.densities[0].per_depth[0].max);
    }
    let full = verify(
        seq,
        &g.space,
        Ambient::Lebesgue { dim: 2 },
        &g.s,
        &[],
        &VerifyOptions { k_range: Some((0, depth)), min_radius: c.cell, ..Default::default() },
    )?;
    c3 = c3.max(full.c3);
    let envelope: Vec<f64> =
        (0..=depth).map(|k| 2.0 * c.c1 * (theta - 1.0) * 2f64.powf(-(k as f64) * (theta - 1.0))).collect();
    let under = decay.iter().zip(&envelope).all(|(d, e)| d <= e);
    let decreasing = decay.windows(2).skip(2).all(|w| w[1] < w[0]) || depth < 3;
    let mut m5 = Check::new(
        "M5 decay on the Cantor set",
        name,
        under && decreasing,
        format!("per-depth densities {decay:?}"),
    );
    for (k, d) in decay.iter().enumerate() {
        m5 = m5.with(&format!("density_k{k}"), *d);
    }
    Ok(vec![
        Check::new("M2 Cantor bound", name, worst_upper <= 2.0, format!("max C1/bound = {worst_upper}"))
            .with("ratio", worst_upper),
        Check::new("M3 Cantor bound", name, worst_lower >= 0.5, format!("min C2/bound = {worst_lower}"))
            .with("ratio", worst_lower),
        Check::new("M4 Cantor bound", name, c3 <= 2.0 * ratio_bound, format!("C3 = {c3}, bound {ratio_bound}"))
            .with("c3", c3),
        m5,
    ])
}

/// Cap pass on quasicubes of `S` for fine levels `1..=fine`.
pub fn redistribution_suite(g: &Geometry, eps: f64, fine: i32) -> Result<Vec<Check>, CliError> {
    let name = g.spec.label();
    let s_nets = build_nets_on(&g.space, &g.s, eps, 0, fine, None)?;
    let order = build_order(&g.space, &s_nets)?;
    let mut caps = Vec::new();
    let mut sandwich = Vec::new();
    let mut lower = f64::INFINITY;
    for j in 1..=fine {
        let red = redistribute(&g.space, &s_nets, &order, &g.mu, g.theta, j, 0)?;
        caps.extend(red.check_caps());
        sandwich.extend(red.check_sandwich());
        lower = lower.min(red.lower_ratio());
    }
    Ok(vec![
        Check::new("redistribution caps", name, caps.is_empty(), summarize(&caps)),
        Check::new("redistribution sandwich", name, sandwich.is_empty(), summarize(&sandwich))
            .with("lower_ratio", lower),
    ])
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionSummary {
    pub checks: Vec<Check>,
    /// `max residual_finest / (Lip f · ε^depth)` over functions.
    pub constant: f64,
    /// Share of `(point, function)` pairs with nonincreasing residuals for `k ≥ 2`.
    pub monotone_share: f64,
    /// `max residual_k / (Lip f · ε^k)` for `k = 1..=depth`.
    pub depth_constants: Vec<f64>,
}

/// Step supports, stabilisation and trace residuals of the extension.
pub fn extension_suite(g: &Geometry, eps: f64, depth: usize, funcs: &[TestFunction]) -> Result<ExtensionSummary, CliError> {
    let name = g.spec.label();
    let seq = g.sequence(eps, depth)?;
    let nets = build_nets(&g.space, eps, 0, depth as i32, None)?;
    let ds = g.space.dist_to_set_all(&g.s);
    let mut support_bad = 0usize;
    let mut stab_bad = 0usize;
    let mut unresolved = 0usize;
    let mut constant = 0.0f64;
    let (mut mono, mut pairs) = (0usize, 0usize);
    let scale = eps.powi(depth as i32);
    let mut depth_constants = vec![0.0f64; depth];
    for f in funcs {
        let ext = extend(&g.space, &f.values, &seq, &g.s, &nets, depth)?;
        for (i, st) in ext.steps.iter().enumerate() {
            let u = neighborhood_from_dist(&ds, eps, i as i32 + 1 - 2);
            support_bad += (0..st.len()).filter(|&x| st[x] != 0.0 && !u.contains(x)).count();
        }
        unresolved += ext.unresolved();
        for (x, j) in ext.j_star.iter().enumerate() {
            if let Some(j) = *j {
                if j <= depth {
                    let base = ext.partial[j - 1][x];
                    stab_bad += ext.partial[j..].iter().filter(|p| p[x] != base).count();
                    stab_bad += usize::from(ext.values[x] != base);
                }
            }
        }
        let lip = lipschitz_constant(&g.space, &f.values);
        let rows = trace_residual(&g.space, &g.mu, &f.values, &ext.values, &g.s, (1, depth), eps);
        let per = depth;
        for chunk in rows.chunks(per) {
            let finest = chunk[per - 1].residual;
            if lip > 0.0 {
                constant = constant.max(finest / (lip * scale));
                for r in chunk {
                    let c = &mut depth_constants[r.k - 1];
                    *c = c.max(r.residual / (lip * eps.powi(r.k as i32)));
                }
            }
            let tail: Vec<f64> = chunk.iter().filter(|r| r.k >= 2).map(|r| r.residual).collect();
            pairs += 1;
            mono += usize::from(tail.windows(2).all(|w| w[1] <= w[0]));
        }
    }
    let share = if pairs == 0 { 1.0 } else { mono as f64 / pairs as f64 };
    let checks = vec![
        Check::new("step support", name, support_bad == 0, format!("{support_bad} points outside U_(i-2)")),
        Check::new(
            "stabilisation",
            name,
            stab_bad == 0 && unresolved == 0,
            format!("{stab_bad} changes after j*, {unresolved} unresolved points"),
        ),
        Check::new("trace residual", name, share >= 0.9, format!("constant {constant:.4}, monotone share {share:.3}"))
            .with("constant", constant)
            .with("monotone_share", share),
    ];
    Ok(ExtensionSummary { checks, constant, monotone_share: share, depth_constants })
}

/// Riesz against dyadic Riesz, the telescoping and per-cube energy bounds, and
/// the Hedberg–Wolff comparison, for the base measure on `S` and a Dirac mass.
pub fn potential_suite(g: &Geometry, eps: f64, p: f64) -> Result<Vec<Check>, CliError> {
    let name = g.spec.label();
    let k_max = finest_level(g, eps, 6);
    let bundle = cube_bundle(g, eps, k_max)?;
    let nu = g.nu();
    let dirac = Measure::dirac(g.space.len(), g.s.members()[g.s.len() / 2], 1.0);
    let r = eps;
    let mut out = Vec::new();
    for (label, m) in [("base", &nu), ("dirac", &dirac)] {
        let i = riesz(&g.space, &g.mu, m, eps, r)?;
        let hat = dyadic_riesz(&g.space, &bundle.cubes, &bundle.hats, &g.mu, m, r)?;
        let mut c = 0.0f64;
        let mut uncovered = 0usize;
        for (a, b) in i.values.iter().zip(&hat.values) {
            if *b > 0.0 {
                c = c.max(a / b);
            } else if *a > 0.0 {
                uncovered += 1;
            }
        }
        out.push(
            Check::new(&format!("riesz vs dyadic ({label})"), name, uncovered == 0, format!("C = {c:.4}, {uncovered} uncovered"))
                .with("constant", c),
        );
        let all = SetOfPoints::all(g.space.len());
        let (lhs, rhs) = dyadic_energy_split(&g.space, &bundle.cubes, &bundle.hats, &g.mu, m, &all, p, r)?;
        out.push(
            Check::new(&format!("telescoping energy ({label})"), name, lhs <= rhs * (1.0 + 1e-12), format!("{lhs} ≤ {rhs}"))
                .with("lhs", lhs)
                .with("rhs", rhs),
        );
        let rep = cube_energy_bound(&g.space, &bundle.cubes, &bundle.hats, &g.mu, m, p, r)?;
        out.push(
            Check::new(
                &format!("cube energy ({label})"),
                name,
                rep.failures == 0 && rep.constant.is_finite(),
                format!("C = {:.4} over {} cubes, {} failures", rep.constant, rep.cubes_checked, rep.failures),
            )
            .with("constant", rep.constant),
        );
        let hw = hedberg_wolff_check(&g.space, &g.mu, m, &g.s, p, eps, r);
        let (pass, detail, ratio) = match hw {
            Ok(h) => (h.ratio.is_some_and(f64::is_finite), format!("lhs {} rhs {}", h.lhs, h.rhs), h.ratio.unwrap_or(f64::NAN)),
            Err(e) => (false, e.to_string(), f64::NAN),
        };
        out.push(Check::new(&format!("hedberg-wolff ({label})"), name, pass, detail).with("ratio", ratio));
    }
    Ok(out)
}
