//! Seeded families of Lipschitz test functions on a point cloud.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mmtrace::FiniteMetricSpace;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: String,
    pub values: Vec<f64>,
}

/// `max_{x≠y} |f(x) − f(y)| / d(x,y)` over all pairs.
pub fn lipschitz_constant(space: &FiniteMetricSpace, f: &[f64]) -> f64 {
    (0..space.len())
        .into_par_iter()
        .map(|x| {
            let row = space.row(x);
            (0..x).map(|y| (f[x] - f[y]).abs() / row[y]).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.1 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `count` functions cycling through linear, cone, ridge, tent and folded-linear shapes.
pub fn lipschitz_suite(points: &[Vec<f64>], count: usize, seed: u64) -> Vec<TestFunction> {
    let dim = points.first().map_or(1, |p| p.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let scale = rng.gen_range(0.5..2.0);
            let a = unit(&mut rng, dim);
            let shift = rng.gen_range(-1.0..1.0);
            let (kind, values): (&str, Vec<f64>) = match i % 5 {
                0 => ("linear", points.iter().map(|p| scale * dot(&a, p) + shift).collect()),
                1 => {
                    let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let v = points
                        .iter()
                        .map(|p| scale * p.iter().zip(&c).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
                        .collect();
                    ("cone", v)
                }
                2 => {
                    let omega = rng.gen_range(2.0..8.0);
                    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                    ("ridge", points.iter().map(|p| scale / omega * (omega * dot(&a, p) + phase).sin()).collect())
                }
                3 => {
                    let b = unit(&mut rng, dim);
                    let off = rng.gen_range(-0.5..0.5);
                    ("tent", points.iter().map(|p| scale * dot(&a, p).min(dot(&b, p) + off)).collect())
                }
                _ => {
                    let t = rng.gen_range(0.2..0.8);
                    ("fold", points.iter().map(|p| scale * (dot(&a, p) - t).abs()).collect())
                }
            };
            TestFunction { id: format!("{kind}-{i:02}"), values }
        })
        .collect()
}

/// Constant functions with seeded values.
pub fn constant_suite(n: usize, count: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| TestFunction { id: format!("const-{i:02}"), values: vec![rng.gen_range(-3.0..3.0); n] })
        .collect()
}
