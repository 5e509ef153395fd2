//! Restricted Riesz, dyadic Riesz and Wolff potentials of a measure, their
//! energies, and numerical checks of the energy inequalities relating them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{scale_index, DyadicCubeSystem, HatCubes};
use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::mms_core::{FiniteMetricSpace, SetOfPoints};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Riesz,
    DyadicRiesz,
    Wolff,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialField {
    pub values: Vec<f64>,
    pub scale: f64,
    pub kind: PotentialKind,
    pub p: Option<f64>,
}

pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Smallest `k` with `ε^k ≤ R`.
pub fn first_level(r: f64, eps: f64) -> i32 {
    let k = scale_index(r, eps);
    // scale_index gives the largest k with r ≤ ε^k; step down if ε^k is strictly larger than r
    if eps.powi(k as i32) <= r * (1.0 + 1e-12) {
        k as i32
    } else {
        k as i32 + 1
    }
}

fn check(eps: f64, r: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::EpsOutOfRange(eps));
    }
    if !(r > 0.0) {
        return Err(Error::BadParameter("scale R must be positive".into()));
    }
    Ok(())
}

/// `a_m(E) = m(E) diam(E) / μ(E)`.
pub fn coefficient(space: &FiniteMetricSpace, mu: &Measure, m: &Measure, set: &[usize]) -> Result<f64> {
    let mm = m.mass(set);
    if mm == 0.0 || set.len() < 2 {
        return Ok(0.0);
    }
    let mb = mu.mass(set);
    if mb <= 0.0 {
        return Err(Error::ZeroMuBall(set[0]));
    }
    Ok(mm / mb * space.set_diameter(set))
}

fn ball_coefficient(space: &FiniteMetricSpace, mu: &Measure, m: &Measure, x: usize, r: f64) -> Result<f64> {
    let ball: Vec<usize> = space.ball_prefix(x, r).iter().map(|&y| y as usize).collect();
    coefficient(space, mu, m, &ball)
}

/// `I^R[m](x) = Σ_{ε^k ≤ R} a_m(B_{ε^k}(x))`.
pub fn riesz(space: &FiniteMetricSpace, mu: &Measure, m: &Measure, eps: f64, r: f64) -> Result<PotentialField> {
    check(eps, r)?;
    let k0 = first_level(r, eps);
    let values = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let mut sum = 0.0;
            let mut k = k0;
            while space.ball_count(x, eps.powi(k)) > 1 {
                sum += ball_coefficient(space, mu, m, x, eps.powi(k))?;
                k += 1;
            }
            Ok(sum)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PotentialField { values, scale: r, kind: PotentialKind::Riesz, p: None })
}

/// `a_m(Q̂_{k,α})` for every hat of every level.
pub fn hat_coefficients(
    space: &FiniteMetricSpace,
    hats: &HatCubes,
    mu: &Measure,
    m: &Measure,
) -> Result<Vec<Vec<f64>>> {
    (hats.k_min()..=hats.k_max())
        .map(|k| hats.level(k).par_iter().map(|h| coefficient(space, mu, m, h)).collect())
        .collect()
}

/// Levels `k` of the cube system with `ε^k ≤ R`.
fn dyadic_levels(cubes: &DyadicCubeSystem, r: f64) -> std::ops::RangeInclusive<i32> {
    first_level(r, cubes.eps()).max(cubes.k_min())..=cubes.k_max()
}

/// `Î^R[m](x) = Σ_{ε^k ≤ R} a_m(Q̂_k(x))` over the levels of the cube system.
pub fn dyadic_riesz(
    space: &FiniteMetricSpace,
    cubes: &DyadicCubeSystem,
    hats: &HatCubes,
    mu: &Measure,
    m: &Measure,
    r: f64,
) -> Result<PotentialField> {
    check(cubes.eps(), r)?;
    let coef = hat_coefficients(space, hats, mu, m)?;
    let values = (0..space.len())
        .map(|x| {
            dyadic_levels(cubes, r)
                .filter_map(|k| cubes.cube_of(k, x).map(|a| coef[(k - hats.k_min()) as usize][a]))
                .sum()
        })
        .collect();
    Ok(PotentialField { values, scale: r, kind: PotentialKind::DyadicRiesz, p: None })
}

/// `∫_E field^{p'} dμ`.
pub fn energy(mu: &Measure, field: &PotentialField, set: &SetOfPoints, p: f64) -> f64 {
    let q = conjugate(p);
    set.iter().map(|x| field.values[x].powf(q) * mu.weight(x)).sum()
}

/// `W^R_p[m](x) = Σ_{ε^k ≤ R} (ε^{kp} m(B_{ε^k}(x)) / μ(B_{ε^k}(x)))^{p'-1}`,
/// with the singleton tail summed in closed form.
pub fn wolff(space: &FiniteMetricSpace, mu: &Measure, m: &Measure, eps: f64, r: f64, p: f64) -> Result<PotentialField> {
    check(eps, r)?;
    if !(p > 1.0) {
        return Err(Error::BadParameter("p must exceed 1".into()));
    }
    let q = conjugate(p);
    let k0 = first_level(r, eps);
    let values = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let mut sum = 0.0;
            let mut k = k0;
            loop {
                let ball = space.ball_prefix(x, eps.powi(k));
                let mb = mu.mass_u32(ball);
                let mm = m.mass_u32(ball);
                if mm > 0.0 && mb <= 0.0 {
                    return Err(Error::ZeroMuBall(x));
                }
                let ratio = if mm > 0.0 { mm / mb } else { 0.0 };
                if ball.len() == 1 {
                    sum += ratio.powf(q - 1.0) * eps.powf(k as f64 * q) / (1.0 - eps.powf(q));
                    break;
                }
                sum += (eps.powf(k as f64 * p) * ratio).powf(q - 1.0);
                k += 1;
            }
            Ok(sum)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PotentialField { values, scale: r, kind: PotentialKind::Wolff, p: Some(p) })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HedbergWolff {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
    pub level: i64,
    pub wolff_scale: f64,
    pub neighborhood_radius: f64,
}

/// Riesz energy of `E` against `∫_{U(E)} W dm` with scales `18ε^k`, `11ε^k`, `k = k(R)`.
#[allow(clippy::too_many_arguments)]
pub fn hedberg_wolff_check(
    space: &FiniteMetricSpace,
    mu: &Measure,
    m: &Measure,
    set: &SetOfPoints,
    p: f64,
    eps: f64,
    r: f64,
) -> Result<HedbergWolff> {
    check(eps, r)?;
    if set.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    let level = scale_index(r, eps);
    let base = eps.powi(level as i32);
    let (wolff_scale, neighborhood_radius) = (18.0 * base, 11.0 * base);
    let lhs = energy(mu, &riesz(space, mu, m, eps, r)?, set, p);
    let w = wolff(space, mu, m, eps, wolff_scale, p)?;
    let rhs: f64 = (0..space.len())
        .filter(|&y| space.dist_to_set(y, set) < neighborhood_radius)
        .map(|y| w.values[y] * m.weight(y))
        .sum();
    if rhs <= 0.0 && lhs > 0.0 {
        return Err(Error::RhsZeroWithPositiveLhs);
    }
    let ratio = (rhs > 0.0).then(|| lhs / rhs);
    Ok(HedbergWolff { lhs, rhs, ratio, level, wolff_scale, neighborhood_radius })
}

/// Both sides of the telescoping bound
/// `∫_E (Î^R)^{p'} dμ ≤ p' Σ_k Σ_α a(Q̂_{k,α}) ∫_{Q_{k,α}∩E} (Î^{ε^k})^{p'-1} dμ`.
#[allow(clippy::too_many_arguments)]
pub fn dyadic_energy_split(
    space: &FiniteMetricSpace,
    cubes: &DyadicCubeSystem,
    hats: &HatCubes,
    mu: &Measure,
    m: &Measure,
    set: &SetOfPoints,
    p: f64,
    r: f64,
) -> Result<(f64, f64)> {
    let q = conjugate(p);
    let coef = hat_coefficients(space, hats, mu, m)?;
    let levels: Vec<i32> = dyadic_levels(cubes, r).collect();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for x in set.iter() {
        let terms: Vec<f64> = levels
            .iter()
            .map(|&k| cubes.cube_of(k, x).map_or(0.0, |a| coef[(k - hats.k_min()) as usize][a]))
            .collect();
        // tails[i] = Î^{ε^{levels[i]}}(x)
        let mut tails = vec![0.0; terms.len() + 1];
        for i in (0..terms.len()).rev() {
            tails[i] = tails[i + 1] + terms[i];
        }
        lhs += tails[0].powf(q) * mu.weight(x);
        rhs += q * terms.iter().zip(&tails).map(|(a, t)| a * t.powf(q - 1.0)).sum::<f64>() * mu.weight(x);
    }
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeEnergyReport {
    /// Largest `lhs / rhs` over cubes with positive right side.
    pub constant: f64,
    /// Cubes with positive left side and vanishing right side.
    pub failures: usize,
    pub cubes_checked: usize,
}

/// Per cube `Q_{k,α}`: `∫_Q (Î^{ε^k})^{p'} dμ` against
/// `Σ_{j≥k} Σ_{Q_{j,β} ⊆ Q} ε^j m(Q̂_{j,β}) a(Q̂_{j,β})^{p'-1}`.
#[allow(clippy::too_many_arguments)]
pub fn cube_energy_bound(
    space: &FiniteMetricSpace,
    cubes: &DyadicCubeSystem,
    hats: &HatCubes,
    mu: &Measure,
    m: &Measure,
    p: f64,
    r: f64,
) -> Result<CubeEnergyReport> {
    let q = conjugate(p);
    let coef = hat_coefficients(space, hats, mu, m)?;
    let levels: Vec<i32> = dyadic_levels(cubes, r).collect();
    let li = |k: i32| (k - hats.k_min()) as usize;
    // per-cube contribution ε^j m(Q̂) a(Q̂)^{p'-1}
    let contrib: Vec<Vec<f64>> = (hats.k_min()..=hats.k_max())
        .map(|j| {
            hats.level(j)
                .iter()
                .zip(&coef[li(j)])
                .map(|(h, &a)| if a > 0.0 { cubes.scale(j) * m.mass(h) * a.powf(q - 1.0) } else { 0.0 })
                .collect()
        })
        .collect();
    let mut report = CubeEnergyReport { constant: 0.0, failures: 0, cubes_checked: 0 };
    for &k in &levels {
        for (a, cube) in cubes.level(k).iter().enumerate() {
            let mut lhs = 0.0;
            for &x in &cube.members {
                let tail: f64 = levels
                    .iter()
                    .filter(|&&j| j >= k)
                    .filter_map(|&j| cubes.cube_of(j, x).map(|b| coef[li(j)][b]))
                    .sum();
                lhs += tail.powf(q) * mu.weight(x);
            }
            let mut rhs = 0.0;
            for &j in levels.iter().filter(|&&j| j >= k) {
                for (b, sub) in cubes.level(j).iter().enumerate() {
                    if cubes.cube_of(k, sub.members[0]) == Some(a) {
                        rhs += contrib[li(j)][b];
                    }
                }
            }
            report.cubes_checked += 1;
            if rhs > 0.0 {
                report.constant = report.constant.max(lhs / rhs);
            } else if lhs > 0.0 {
                report.failures += 1;
            }
        }
    }
    Ok(report)
}

/// Kernel `K(x,y) = Σ_{ε^k ≤ R, y ∈ B_{ε^k}(x)} diam B / μ(B)`, so that
/// `I^R[g ν](x) = Σ_y K(x,y) g(y) ν(y)`.
pub fn riesz_kernel(space: &FiniteMetricSpace, mu: &Measure, eps: f64, r: f64) -> Result<Vec<Vec<f64>>> {
    check(eps, r)?;
    let n = space.len();
    let k0 = first_level(r, eps);
    let mut kernel = vec![vec![0.0; n]; n];
    for (x, row) in kernel.iter_mut().enumerate() {
        let mut k = k0;
        loop {
            let ball = space.ball_prefix(x, eps.powi(k));
            if ball.len() < 2 {
                break;
            }
            let mb = mu.mass_u32(ball);
            if mb <= 0.0 {
                return Err(Error::ZeroMuBall(x));
            }
            let set: Vec<usize> = ball.iter().map(|&y| y as usize).collect();
            let coef = space.set_diameter(&set) / mb;
            for &y in &set {
                row[y] += coef;
            }
            k += 1;
        }
    }
    Ok(kernel)
}

/// Norm of `g ↦ I^R[g ν]` from `L_{p̃}(ν)` to `L_1(σ)`, computed as
/// `(primal, dual)`: the value at the extremal `g` and the adjoint norm.
pub fn duality_gap(
    space: &FiniteMetricSpace,
    mu: &Measure,
    nu: &Measure,
    sigma: &Measure,
    p_tilde: f64,
    eps: f64,
    r: f64,
) -> Result<(f64, f64)> {
    if !(p_tilde > 1.0) {
        return Err(Error::BadParameter("p̃ must exceed 1".into()));
    }
    let q = conjugate(p_tilde);
    let kernel = riesz_kernel(space, mu, eps, r)?;
    let n = space.len();
    let adjoint: Vec<f64> = (0..n).map(|y| (0..n).map(|x| sigma.weight(x) * kernel[x][y]).sum()).collect();
    let dual = (0..n).map(|y| nu.weight(y) * adjoint[y].powf(q)).sum::<f64>().powf(1.0 / q);
    if dual == 0.0 {
        return Ok((0.0, 0.0));
    }
    let g: Vec<f64> = adjoint.iter().map(|h| (h / dual).powf(q - 1.0)).collect();
    let primal = (0..n)
        .map(|x| sigma.weight(x) * (0..n).map(|y| kernel[x][y] * g[y] * nu.weight(y)).sum::<f64>().abs())
        .sum();
    Ok((primal, dual))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_level_rounds_up() {
        assert_eq!(first_level(0.1, 0.1), 1);
        assert_eq!(first_level(0.05, 0.1), 2);
        assert_eq!(first_level(1.0, 0.1), 0);
        assert_eq!(first_level(0.3, 0.1), 1);
    }
}
