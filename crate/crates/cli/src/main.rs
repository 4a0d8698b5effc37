use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rtrec::experiment::{self, RunConfig};

#[derive(Parser)]
#[command(
    name = "rtrec",
    version,
    about = "Raviart-Thomas mixed FEM with superconvergent flux recovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a benchmark problem on a mesh sequence and write table.csv, orders.txt and convergence.svg.
    Run(RunArgs),
    /// Check the local interpolation identities on random triangles.
    Verify(VerifyArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat key=value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// 1 or 2: smooth solution on the unit square; 3: corner singularity.
    #[arg(long)]
    problem: Option<u8>,
    /// RT degree (0..=3).
    #[arg(long)]
    r: Option<usize>,
    /// regular | bisection | adaptive
    #[arg(long)]
    refine: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    /// Adaptive runs stop once the system dimension exceeds this.
    #[arg(long)]
    max_ndof: Option<f64>,
    /// Dörfler fraction.
    #[arg(long)]
    theta: Option<f64>,
    /// Seed of the initial mesh generator.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Initial mesh file.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Quadrature degree for assembly and error norms.
    #[arg(long)]
    quad_degree: Option<usize>,
    /// Triangle count of the generated initial mesh.
    #[arg(long)]
    initial_nt: Option<usize>,
    /// Reaction coefficient c in -div p + c u = f (Problems 1 and 2).
    #[arg(long)]
    reaction: Option<f64>,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Largest aspect ratio of the random triangles.
    #[arg(long, default_value_t = 20.0)]
    aspect_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let mut pairs: Vec<(&str, String)> = Vec::new();
    let mut push = |k: &'static str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k, v));
        }
    };
    push("problem", args.problem.map(|v| v.to_string()));
    push("r", args.r.map(|v| v.to_string()));
    push("refine", args.refine.clone());
    push("levels", args.levels.map(|v| v.to_string()));
    push("max-ndof", args.max_ndof.map(|v| v.to_string()));
    push("theta", args.theta.map(|v| v.to_string()));
    push("seed", args.seed.map(|v| v.to_string()));
    push("out", args.out.as_ref().map(|v| v.display().to_string()));
    push("mesh", args.mesh.as_ref().map(|v| v.display().to_string()));
    push("quad-degree", args.quad_degree.map(|v| v.to_string()));
    push("initial-nt", args.initial_nt.map(|v| v.to_string()));
    push("reaction", args.reaction.map(|v| v.to_string()));

    let file = match &args.config {
        Some(path) => Some(
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        ),
        None => None,
    };
    // the problem id picks the defaults, so resolve it first
    let mut probe = RunConfig::default();
    if let Some(text) = &file {
        probe.apply_config(text)?;
    }
    let problem = args.problem.unwrap_or(probe.problem);
    let mut config = RunConfig::for_problem(problem);
    if let Some(text) = &file {
        config.apply_config(text)?;
    }
    for (k, v) in pairs {
        config.set(k, &v)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let config = build_config(&args)?;
    let out = experiment::run(&config)?;
    let mut csv = Vec::new();
    rtrec::analysis::write_csv(&mut csv, &out.reports)?;
    print!("{}", String::from_utf8_lossy(&csv));
    println!();
    print!("{}", experiment::format_orders(&out.orders));
    eprintln!("wrote {}", config.out.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let summary = rtrec::verify::run_suite(args.samples, args.aspect_max, args.seed)?;
    print!("{summary}");
    if summary.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        if let Some(worst) = summary.worst_triangle() {
            eprintln!("worst triangle: {worst:?}");
        }
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Verify(args) => verify(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
