use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mmtrace_cli::commands::{cmd_eval, cmd_example, cmd_extend, cmd_potentials, cmd_verify, Fault, RunConfig};
use mmtrace_cli::eval::EvalParams;
use mmtrace_cli::{GeometrySpec, EXIT_INPUT, EXIT_INVARIANT, EXIT_PASS};

#[derive(Parser)]
#[command(name = "mmtrace", version, about = "Traces, extensions and potentials on finite metric measure spaces")]
struct Cli {
    /// Seed for the test-function suite.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "mmtrace-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Name {
    Line,
    Grid2d,
    Segment,
    Ball,
    Composite,
    Cantor,
}

#[derive(Args, Clone)]
struct GeometryArgs {
    /// Example geometry.
    #[arg(long, value_enum, default_value = "segment")]
    geometry: Name,
    /// Points on the line, the segment or the curve.
    #[arg(long)]
    n: Option<usize>,
    /// Side of the ambient grid (even).
    #[arg(long)]
    side: Option<usize>,
    /// Disc radius for `ball`.
    #[arg(long, default_value_t = 0.3)]
    radius: f64,
    /// Codimension for `cantor`.
    #[arg(long, default_value_t = 1.5)]
    theta: f64,
    /// Removal generations for `cantor`.
    #[arg(long, default_value_t = 6)]
    generations: usize,
    /// Read `example` output from this directory instead of building a geometry.
    #[arg(long)]
    input: Option<PathBuf>,
}

impl GeometryArgs {
    fn spec(&self) -> GeometrySpec {
        match self.geometry {
            Name::Line => GeometrySpec::Line { n: self.n.unwrap_or(65) },
            Name::Grid2d => GeometrySpec::Grid2d { side: self.side.unwrap_or(24) },
            Name::Segment => GeometrySpec::Segment { n: self.n.unwrap_or(61), side: self.side.unwrap_or(20) },
            Name::Ball => GeometrySpec::Ball { side: self.side.unwrap_or(24), radius: self.radius },
            Name::Composite => GeometrySpec::Composite { side: self.side.unwrap_or(20), curve: self.n.unwrap_or(41) },
            Name::Cantor => GeometrySpec::Cantor { theta: self.theta, depth: self.generations },
        }
    }
}

#[derive(Args, Clone)]
struct Params {
    /// Scale parameter ε (default 0.1; 1/2 for `cantor`).
    #[arg(long)]
    eps: Option<f64>,
    /// Sequence depth K (default: what the functionals need).
    #[arg(long)]
    depth: Option<usize>,
    /// Exponent p.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Dilation c (default 3/ε).
    #[arg(long)]
    c: Option<f64>,
    /// Porosity σ.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Radius grid for the δ-scale functional (default ε, ε², ε³).
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    /// Largest candidate count searched exactly.
    #[arg(long, default_value_t = 22)]
    budget: usize,
    /// Number of test functions.
    #[arg(long, default_value_t = 20)]
    functions: usize,
    /// Potential scale R.
    #[arg(long, default_value_t = 0.1)]
    r: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    PartitionWeights,
    CubePartition,
}

#[derive(Subcommand)]
enum Command {
    /// Write a geometry with its subset, measures and sequence.
    Example {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        params: Params,
    },
    /// Evaluate CN, BSN, BN and N on the Lipschitz suite.
    Eval {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        params: Params,
    },
    /// Run every invariant suite; exit 2 on any failure.
    Verify {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        params: Params,
        /// Corrupt one structure to check that its suite notices.
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
    /// Extend the suite from the subset and report trace residuals.
    Extend {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        params: Params,
    },
    /// Riesz, dyadic Riesz and Wolff potentials with the energy checks.
    Potentials {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        params: Params,
    },
}

fn config(name: &str, g: &GeometryArgs, p: &Params, seed: u64, out: PathBuf) -> RunConfig {
    let eps = p.eps.unwrap_or(if matches!(g.geometry, Name::Cantor) { 0.5 } else { 0.1 });
    let mut eval = EvalParams::for_eps(eps);
    eval.p = p.p;
    eval.sigma = p.sigma;
    eval.budget = p.budget;
    if let Some(c) = p.c {
        eval.c = c;
    }
    if let Some(d) = &p.delta {
        eval.delta_grid = d.clone();
    }
    RunConfig {
        command: name.into(),
        geometry: g.spec(),
        input: g.input.clone(),
        eps,
        depth: p.depth,
        eval,
        functions: p.functions,
        r: p.r,
        seed,
        out,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("mmtrace: {e}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    }
    let result = match &cli.command {
        Command::Example { geometry, params } => cmd_example(&config("example", geometry, params, cli.seed, cli.out.clone())),
        Command::Eval { geometry, params } => cmd_eval(&config("eval", geometry, params, cli.seed, cli.out.clone())),
        Command::Verify { geometry, params, inject_fault } => {
            let fault = inject_fault.map(|f| match f {
                FaultArg::PartitionWeights => Fault::PartitionWeights,
                FaultArg::CubePartition => Fault::CubePartition,
            });
            cmd_verify(&config("verify", geometry, params, cli.seed, cli.out.clone()), fault)
        }
        Command::Extend { geometry, params } => cmd_extend(&config("extend", geometry, params, cli.seed, cli.out.clone())),
        Command::Potentials { geometry, params } => {
            cmd_potentials(&config("potentials", geometry, params, cli.seed, cli.out.clone()))
        }
    };
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.passed {
                ExitCode::from(EXIT_PASS as u8)
            } else {
                eprintln!("mmtrace: invariant failure (see reports)");
                ExitCode::from(EXIT_INVARIANT as u8)
            }
        }
        Err(e) => {
            eprintln!("mmtrace: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
