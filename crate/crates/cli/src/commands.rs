//! Subcommand bodies. Everything is written under one output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mmtrace::extension::{extend, trace_residual};
use mmtrace::mms_core::{build_nets, build_space};
use mmtrace::potentials::{dyadic_riesz, hedberg_wolff_check, riesz, wolff};
use mmtrace::{Measure, MeasureSequence, Metric, SetOfPoints, SpaceInput};

use crate::checks::{self, Check};
use crate::eval::{evaluate_suite, required_depth, summarize, write_csv, EvalParams, EvalRow, EvalSummary};
use crate::geometry::{Geometry, GeometrySpec};
use crate::suite::lipschitz_suite;
use crate::CliError;

/// Everything that determines a run; written next to its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub geometry: GeometrySpec,
    /// Directory of `example` output used instead of `geometry`, if any.
    pub input: Option<PathBuf>,
    pub eps: f64,
    pub depth: Option<usize>,
    pub eval: EvalParams,
    pub functions: usize,
    pub r: f64,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value)?)?;
    files.push(path);
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<T, CliError> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GeometryMeta {
    spec: GeometrySpec,
    theta: f64,
    dim: u32,
    parts: Vec<(f64, Measure)>,
    test_sets: Vec<SetOfPoints>,
}

/// A space, subset, ambient measure and sequence, from files or built fresh.
pub struct Loaded {
    pub geometry: Geometry,
    pub seq: MeasureSequence,
}

fn default_depth(g: &Geometry, cfg: &RunConfig) -> usize {
    match &g.cantor {
        Some(c) => cfg.depth.unwrap_or(c.depth).min(c.depth),
        None => cfg.depth.unwrap_or_else(|| required_depth(&g.space, cfg.eps, cfg.eval.c)),
    }
}

pub fn load(cfg: &RunConfig) -> Result<Loaded, CliError> {
    match &cfg.input {
        None => {
            let geometry = Geometry::build(&cfg.geometry)?;
            let depth = default_depth(&geometry, cfg);
            let seq = geometry.sequence(cfg.eps, depth)?;
            Ok(Loaded { geometry, seq })
        }
        Some(dir) => {
            let input: SpaceInput = read_json(dir, "space.json")?;
            let space = build_space(&input)?;
            let points = match input {
                SpaceInput::Points { points, .. } => points,
                SpaceInput::Table { .. } => Vec::new(),
            };
            let mu: Measure = read_json(dir, "mu.json")?;
            let s: SetOfPoints = read_json(dir, "subset.json")?;
            let seq: MeasureSequence = read_json(dir, "sequence.json")?;
            let meta: GeometryMeta = read_json(dir, "geometry.json")?;
            let n = space.len();
            s.validate(n)?;
            if mu.len() != n || seq.measures[0].len() != n {
                return Err(CliError::Input("measure lengths do not match the space".into()));
            }
            let geometry = Geometry {
                spec: meta.spec,
                points,
                space,
                mu,
                s,
                parts: meta.parts.into_iter().map(|(t, m)| (m, t)).collect(),
                theta: meta.theta,
                test_sets: meta.test_sets,
                dim: meta.dim,
                cantor: None,
            };
            Ok(Loaded { geometry, seq })
        }
    }
}

/// Writes `space.json`, `subset.json`, `mu.json`, `sequence.json` and `geometry.json`.
pub fn cmd_example(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = Geometry::build(&cfg.geometry)?;
    let depth = default_depth(&g, cfg);
    let seq = g.sequence(cfg.eps, depth)?;
    fs::create_dir_all(&cfg.out)?;
    let mut files = Vec::new();
    let input = SpaceInput::Points { points: g.points.clone(), metric: Metric::Euclidean, labels: None };
    write_json(&cfg.out, "space.json", &input, &mut files)?;
    write_json(&cfg.out, "subset.json", &g.s, &mut files)?;
    write_json(&cfg.out, "mu.json", &g.mu, &mut files)?;
    write_json(&cfg.out, "sequence.json", &seq, &mut files)?;
    let meta = GeometryMeta {
        spec: g.spec.clone(),
        theta: g.theta,
        dim: g.dim,
        parts: g.parts.iter().map(|(m, t)| (*t, m.clone())).collect(),
        test_sets: g.test_sets.clone(),
    };
    write_json(&cfg.out, "geometry.json", &meta, &mut files)?;
    if let Some(c) = &g.cantor {
        write_json(&cfg.out, "gaps.json", &c.gaps, &mut files)?;
    }
    write_json(&cfg.out, "config.json", cfg, &mut files)?;
    Ok(Outcome { passed: true, files })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub geometry: String,
    pub points: usize,
    pub subset: usize,
    pub depth: usize,
    pub summary: EvalSummary,
}

/// Functional values for the seeded Lipschitz suite.
pub fn run_eval(cfg: &RunConfig) -> Result<(Vec<EvalRow>, EvalReport, Vec<serde_json::Value>), CliError> {
    let loaded = load(cfg)?;
    let g = &loaded.geometry;
    let needed = required_depth(&g.space, loaded.seq.eps, cfg.eval.c);
    if needed > loaded.seq.depth() {
        return Err(CliError::Input(format!(
            "the functionals reach scale level {needed} but the sequence stops at {}; supply a deeper sequence",
            loaded.seq.depth()
        )));
    }
    let funcs = lipschitz_suite(&g.points, cfg.functions, cfg.seed);
    let results = evaluate_suite(&g.space, &g.mu, &g.s, &loaded.seq, &funcs, &cfg.eval)?;
    let mut rows = Vec::new();
    let mut witnesses = Vec::new();
    for (row, norms) in results {
        witnesses.push(serde_json::json!({
            "function": row.function,
            "bsn": norms.bsn.witness,
            "n": norms.n.witness,
            "bn": norms.bn.witness,
        }));
        rows.push(row);
    }
    let report = EvalReport {
        geometry: g.spec.label().into(),
        points: g.space.len(),
        subset: g.s.len(),
        depth: loaded.seq.depth(),
        summary: summarize(&rows),
    };
    Ok((rows, report, witnesses))
}

/// `eval.csv`, `summary.json`, `witnesses.json`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (rows, report, witnesses) = run_eval(cfg)?;
    fs::create_dir_all(&cfg.out)?;
    let mut files = Vec::new();
    let csv_path = cfg.out.join("eval.csv");
    let mut buf = Vec::new();
    write_csv(&mut buf, &rows)?;
    fs::write(&csv_path, buf)?;
    files.push(csv_path);
    write_json(&cfg.out, "summary.json", &report, &mut files)?;
    write_json(&cfg.out, "witnesses.json", &witnesses, &mut files)?;
    write_json(&cfg.out, "config.json", cfg, &mut files)?;
    let s = &report.summary;
    Ok(Outcome { passed: s.n_le_twice_bsn && s.bsn_delta_le_bsn && s.families_valid, files })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub geometry: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Faults that `verify` can inject to show the corresponding check fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    PartitionWeights,
    CubePartition,
}

pub fn run_verify(cfg: &RunConfig, fault: Option<Fault>) -> Result<VerifyReport, CliError> {
    let loaded = load(cfg)?;
    let g = &loaded.geometry;
    let name = g.spec.label();
    let mut all = Vec::new();
    if g.cantor.is_some() {
        all.extend(checks::sequence_suite(g, cfg.eps, loaded.seq.depth())?);
    } else {
        let eps = cfg.eps;
        let k_max = checks::finest_level(g, eps, 6);
        all.extend(checks::net_suite(g, eps, k_max)?);
        if fault == Some(Fault::CubePartition) {
            let mut bundle = checks::cube_bundle(g, eps, k_max)?;
            bundle.cubes.inject_partition_fault();
            let v = mmtrace::dyadic::verify_cubes(&g.space, &bundle.nets, &bundle.cubes);
            all.push(Check::new("cubes with injected fault", name, v.is_empty(), format!("{} violations", v.len())));
        }
        let nets = build_nets(&g.space, eps, 0, 5, None)?;
        all.push(checks::partition_identity(g, &nets, &[1, 2, 3, 4, 5], fault == Some(Fault::PartitionWeights))?);
        all.extend(checks::sequence_suite(g, eps, loaded.seq.depth().min(5))?);
        if g.theta <= 1.0 {
            all.extend(checks::redistribution_suite(g, eps, 4)?);
        }
        let funcs = lipschitz_suite(&g.points, cfg.functions.min(3), cfg.seed);
        let depth = checks::stabilization_depth(g, eps, 4.max(checks::finest_level(g, eps, 6) as usize));
        all.extend(checks::extension_suite(g, eps, depth, &funcs)?.checks);
        all.extend(checks::potential_suite(g, eps, cfg.eval.p)?);
    }
    let passed = all.iter().all(|c| c.pass);
    Ok(VerifyReport { geometry: name.into(), passed, checks: all })
}

/// `verify.json`; fails when any check fails.
pub fn cmd_verify(cfg: &RunConfig, fault: Option<Fault>) -> Result<Outcome, CliError> {
    let report = run_verify(cfg, fault)?;
    fs::create_dir_all(&cfg.out)?;
    let mut files = Vec::new();
    write_json(&cfg.out, "verify.json", &report, &mut files)?;
    write_json(&cfg.out, "config.json", cfg, &mut files)?;
    Ok(Outcome { passed: report.passed, files })
}

/// `extension.json` with extended values and `residuals.csv`.
pub fn cmd_extend(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut loaded = load(cfg)?;
    let g = &loaded.geometry;
    // fresh geometries get a sequence deep enough for every point to stabilise
    if cfg.input.is_none() && cfg.depth.is_none() {
        let needed = checks::stabilization_depth(g, cfg.eps, loaded.seq.depth());
        if needed > loaded.seq.depth() {
            loaded.seq = g.sequence(cfg.eps, needed)?;
        }
    }
    let g = &loaded.geometry;
    let depth = loaded.seq.depth();
    let nets = build_nets(&g.space, cfg.eps, 0, depth as i32, None)?;
    let funcs = lipschitz_suite(&g.points, cfg.functions, cfg.seed);
    fs::create_dir_all(&cfg.out)?;
    let mut files = Vec::new();
    let res_path = cfg.out.join("residuals.csv");
    let mut w = csv::Writer::from_path(&res_path)?;
    w.write_record(["function", "point", "k", "residual"])?;
    let mut exts = Vec::new();
    for f in &funcs {
        let ext = extend(&g.space, &f.values, &loaded.seq, &g.s, &nets, depth)?;
        for row in trace_residual(&g.space, &g.mu, &f.values, &ext.values, &g.s, (1, depth), cfg.eps) {
            w.write_record([f.id.clone(), row.point.to_string(), row.k.to_string(), format!("{:e}", row.residual)])?;
        }
        exts.push(serde_json::json!({ "function": f.id, "values": ext.values, "j_star": ext.j_star }));
    }
    w.flush()?;
    files.push(res_path);
    write_json(&cfg.out, "extension.json", &exts, &mut files)?;
    let summary = checks::extension_suite(g, cfg.eps, depth, &funcs)?;
    let passed = summary.checks.iter().all(|c| c.pass);
    write_json(&cfg.out, "extension_checks.json", &summary, &mut files)?;
    write_json(&cfg.out, "config.json", cfg, &mut files)?;
    Ok(Outcome { passed, files })
}

/// `fields.json` (Riesz, dyadic Riesz, Wolff of the base measure) and `report.json`.
pub fn cmd_potentials(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let loaded = load(cfg)?;
    let g = &loaded.geometry;
    let eps = cfg.eps;
    let p = cfg.eval.p;
    let nu = g.nu();
    let k_max = checks::finest_level(g, eps, 6);
    let bundle = checks::cube_bundle(g, eps, k_max)?;
    let fields = serde_json::json!({
        "riesz": riesz(&g.space, &g.mu, &nu, eps, cfg.r)?,
        "dyadic_riesz": dyadic_riesz(&g.space, &bundle.cubes, &bundle.hats, &g.mu, &nu, cfg.r)?,
        "wolff": wolff(&g.space, &g.mu, &nu, eps, cfg.r, p)?,
    });
    fs::create_dir_all(&cfg.out)?;
    let mut files = Vec::new();
    write_json(&cfg.out, "fields.json", &fields, &mut files)?;
    let hw = hedberg_wolff_check(&g.space, &g.mu, &nu, &g.s, p, eps, cfg.r)?;
    let suite = checks::potential_suite(g, eps, p)?;
    let passed = suite.iter().all(|c| c.pass);
    let report = serde_json::json!({
        "lhs": hw.lhs,
        "rhs": hw.rhs,
        "ratio": hw.ratio,
        "params": { "p": p, "eps": eps, "R": cfg.r, "wolff_scale": hw.wolff_scale, "neighborhood_radius": hw.neighborhood_radius },
        "checks": suite,
    });
    write_json(&cfg.out, "report.json", &report, &mut files)?;
    write_json(&cfg.out, "config.json", cfg, &mut files)?;
    Ok(Outcome { passed, files })
}
