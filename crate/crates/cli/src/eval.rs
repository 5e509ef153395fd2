//! The four trace functionals over a function suite, as rows and ratios.

use std::io::Write;

use serde::{Deserialize, Serialize};

use mmtrace::dyadic::scale_index;
use mmtrace::functionals::{trace_norms, validate_family, NormParams, TraceContext, TraceNorms, Witness};
use mmtrace::{FiniteMetricSpace, Measure, MeasureSequence, SetOfPoints};

use crate::suite::{lipschitz_constant, TestFunction};
use crate::CliError;

pub const CSV_HEADER: &str = "# mmtrace eval v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalParams {
    pub p: f64,
    pub c: f64,
    pub sigma: f64,
    pub delta_grid: Vec<f64>,
    pub budget: usize,
}

impl EvalParams {
    /// Defaults tied to `ε`: `p = 2`, `c = 3/ε`, `σ = 1/2`, `δ ∈ {ε, ε², ε³}`.
    pub fn for_eps(eps: f64) -> Self {
        let base = NormParams::new(2.0, 3.0 / eps, 0.5, eps);
        Self { p: base.p, c: base.c, sigma: base.sigma, delta_grid: base.delta_grid, budget: base.budget }
    }

    fn norm_params(&self) -> NormParams {
        NormParams { p: self.p, c: self.c, sigma: self.sigma, delta_grid: self.delta_grid.clone(), budget: self.budget }
    }
}

/// Depth needed so that every scale the functionals touch has a measure.
pub fn required_depth(space: &FiniteMetricSpace, eps: f64, c: f64) -> usize {
    let smallest = space.min_positive_distance() / (2.0 * c);
    scale_index(smallest, eps).max(1) as usize
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRow {
    pub function: String,
    pub lip: f64,
    pub cn: f64,
    pub bsn: f64,
    pub bn: f64,
    pub n: f64,
    pub cn_osc: f64,
    pub bsn_osc: f64,
    pub bn_osc: f64,
    pub n_osc: f64,
    /// Largest `BSN^δ` over the `δ` grid, for the monotonicity check.
    pub bsn_delta_max: f64,
    pub exact: bool,
    /// Ball-family violations found in the witnesses.
    pub family_violations: usize,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

impl EvalRow {
    pub fn ratios(&self) -> [(&'static str, f64); 4] {
        [
            ("bsn_over_cn", ratio(self.bsn, self.cn)),
            ("bn_osc_over_cn", ratio(self.bn_osc, self.cn)),
            ("n_over_cn", ratio(self.n, self.cn)),
            ("n_over_bsn", ratio(self.n, self.bsn)),
        ]
    }
}

pub fn evaluate(ctx: &TraceContext<'_>, f: &TestFunction, params: &EvalParams) -> Result<(EvalRow, TraceNorms), CliError> {
    let norms = trace_norms(ctx, &f.values, &params.norm_params())?;
    let mut violations = 0;
    let mut check = |w: &Witness| {
        match w {
            Witness::Family(fam) => violations += validate_family(fam, ctx.space, ctx.s).len(),
            Witness::Whitney { nice, whitney, .. } => {
                violations += validate_family(nice, ctx.space, ctx.s).len();
                violations += validate_family(whitney, ctx.space, ctx.s).len();
            }
            _ => {}
        }
    };
    check(&norms.bsn.witness);
    check(&norms.n.witness);
    let row = EvalRow {
        function: f.id.clone(),
        lip: lipschitz_constant(ctx.space, &f.values),
        cn: norms.cn.value,
        bsn: norms.bsn.value,
        bn: norms.bn.value,
        n: norms.n.value,
        cn_osc: norms.cn.oscillation_term,
        bsn_osc: norms.bsn.oscillation_term,
        bn_osc: norms.bn.oscillation_term,
        n_osc: norms.n.oscillation_term,
        bsn_delta_max: norms.bsn_delta.iter().map(|(_, v)| v.value).fold(0.0, f64::max),
        exact: norms.bsn.exact && norms.n.exact,
        family_violations: violations,
    };
    Ok((row, norms))
}

/// Rows for a whole suite on one configuration, in suite order.
pub fn evaluate_suite(
    space: &FiniteMetricSpace,
    mu: &Measure,
    s: &SetOfPoints,
    seq: &MeasureSequence,
    funcs: &[TestFunction],
    params: &EvalParams,
) -> Result<Vec<(EvalRow, TraceNorms)>, CliError> {
    let ctx = TraceContext::new(space, mu, s, seq)?;
    funcs.iter().map(|f| evaluate(&ctx, f, params)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub functions: usize,
    pub ratios: Vec<(String, RatioRange)>,
    /// `N ≤ 2·BSN` for every function.
    pub n_le_twice_bsn: bool,
    /// `BSN^δ ≤ BSN^1` for every function and grid value.
    pub bsn_delta_le_bsn: bool,
    pub families_valid: bool,
    pub all_exact: bool,
}

pub fn summarize(rows: &[EvalRow]) -> EvalSummary {
    let mut ratios: Vec<(String, RatioRange)> = Vec::new();
    for (i, (name, _)) in rows.first().map(|r| r.ratios()).unwrap_or_default().iter().enumerate() {
        let vals: Vec<f64> = rows.iter().map(|r| r.ratios()[i].1).collect();
        ratios.push((
            name.to_string(),
            RatioRange {
                min: vals.iter().cloned().fold(f64::INFINITY, f64::min),
                max: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            },
        ));
    }
    EvalSummary {
        functions: rows.len(),
        ratios,
        n_le_twice_bsn: rows.iter().all(|r| r.n <= 2.0 * r.bsn),
        bsn_delta_le_bsn: rows.iter().all(|r| r.bsn_delta_max <= r.bsn),
        families_valid: rows.iter().all(|r| r.family_violations == 0),
        all_exact: rows.iter().all(|r| r.exact),
    }
}

/// Versioned CSV: a header comment, then one row per function.
pub fn write_csv(out: &mut impl Write, rows: &[EvalRow]) -> Result<(), CliError> {
    writeln!(out, "{CSV_HEADER}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "function", "lip", "cn", "bsn", "bn", "n", "cn_osc", "bsn_osc", "bn_osc", "n_osc", "bsn_over_cn",
        "bn_osc_over_cn", "n_over_cn", "n_over_bsn", "exact",
    ])?;
    for r in rows {
        let mut rec = vec![r.function.clone()];
        for v in [r.lip, r.cn, r.bsn, r.bn, r.n, r.cn_osc, r.bsn_osc, r.bn_osc, r.n_osc] {
            rec.push(format!("{v:e}"));
        }
        for (_, v) in r.ratios() {
            rec.push(format!("{v:e}"));
        }
        rec.push(r.exact.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
