use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use frndp::experiment::{run_experiment, ExperimentSpec, InstanceSource, SolverKind};
use frndp::gaga::{BackendKind, GagaConfig};
use frndp::netmodel::{generate_random_instance, save_instance, GeneratorParams};

#[derive(Parser)]
#[command(name = "frndp", version, about = "First responder network design experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance as JSON.
    Generate(GenerateArgs),
    /// Run one solver and write results into the output directory.
    Solve(SolveArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    fr_count: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Solver {
    Gaga,
    Bnb,
    Enumerate,
    UeOnly,
}

impl From<Solver> for SolverKind {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Gaga => SolverKind::Gaga,
            Solver::Bnb => SolverKind::Bnb,
            Solver::Enumerate => SolverKind::Enumerate,
            Solver::UeOnly => SolverKind::UeOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Sa,
    Yens,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(value_enum, value_name = "SOLVER")]
    solver_positional: Option<Solver>,
    #[arg(long, value_enum)]
    solver: Option<Solver>,
    /// Instance JSON file; otherwise one is generated from --n/--p/--seed.
    #[arg(long, conflicts_with_all = ["n", "p"])]
    instance: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Generator seed and solver RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 25)]
    n_paths: usize,
    #[arg(long, default_value_t = 10_000)]
    n_samples: usize,
    /// Number of outer seeds.
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, value_enum, default_value_t = Backend::Sa)]
    path_backend: Backend,
    /// Relative per-pass tolerance for the inner walk.
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    normalize: bool,
    /// Seconds; BnB search limit and GAGA walk budget.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Fathom BnB nodes with the system-optimum bound.
    #[arg(long)]
    use_bounds: bool,
    /// Largest design count `enumerate` accepts.
    #[arg(long, default_value_t = 10_000)]
    cap: usize,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut params = GeneratorParams::new(args.n, args.p, args.seed);
    params.fr_count = args.fr_count;
    let net = generate_random_instance(&params)?;
    save_instance(&net, &args.out)?;
    println!(
        "wrote {} ({} nodes, {} arcs, F = {:?})",
        args.out.display(),
        net.node_count(),
        net.link_count(),
        net.fr_nodes()
    );
    Ok(())
}

fn spec_from(args: SolveArgs) -> Result<ExperimentSpec> {
    let solver = match (args.solver_positional, args.solver) {
        (Some(a), Some(b)) if a != b => bail!("conflicting solver choices"),
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => bail!("a solver is required (gaga, bnb, enumerate, ue-only)"),
    };
    let instance = match (args.instance, args.n, args.p) {
        (Some(path), _, _) => InstanceSource::File(path),
        (None, Some(n), Some(p)) => InstanceSource::Generated(GeneratorParams::new(n, p, args.seed)),
        _ => bail!("either --instance or both --n and --p are required"),
    };
    let mut spec = ExperimentSpec::new(instance, solver.into(), args.out_dir);
    spec.gaga = GagaConfig {
        n_paths: args.n_paths,
        n_samples: args.n_samples,
        m: args.m,
        inner_tolerance: args.inner_tol,
        normalized: args.normalize,
        path_backend: match args.path_backend {
            Backend::Sa => BackendKind::Sa,
            Backend::Yens => BackendKind::Yens,
        },
        rng_seed: args.seed,
        time_budget: args.time_limit,
        ..GagaConfig::default()
    };
    if let Some(t) = args.time_limit {
        spec.time_limit = t;
    }
    spec.use_bounds = args.use_bounds;
    spec.enumerate_cap = args.cap;
    Ok(spec)
}

fn solve(args: SolveArgs) -> Result<()> {
    let spec = spec_from(args)?;
    let report = run_experiment(&spec).with_context(|| format!("{} on {}", spec.solver.name(), spec.instance_id()))?;
    for row in &report.rows {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
        println!(
            "{}\t{}\t{}\tgaga_only={}\tfinal={}",
            row.instance,
            row.solver,
            row.setting,
            fmt(row.objective_gaga_only),
            fmt(row.objective_final)
        );
    }
    println!("results in {}", spec.out_dir.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
    }
}
