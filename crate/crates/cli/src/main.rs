use clap::{Args, Parser, Subcommand};
use lawson_core::config::RunConfig;
use lawson_core::pipeline::{cmd_build, cmd_group_verify, cmd_spectrum, ExitStatus, PipelineError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Lawson surfaces ξ(m,k) in S³: group checks, Plateau construction and
/// Laplace spectrum.
///
/// Exit codes: 0 pass, 1 group or usage, 2 solver, 3 topology, 4 eigen.
/// LAWSON_THREADS sets the worker thread count.
#[derive(Parser)]
#[command(name = "lawson", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustive checks on the reflection group and its cell orbit.
    GroupVerify(Common),
    /// Solve the Plateau problem, assemble the closed surface, write meshes.
    Build(BuildArgs),
    /// Build, then compute eigenpairs, Takahashi residuals and nodal reports.
    Spectrum(SpectrumArgs),
}

#[derive(Args)]
struct Common {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: Option<usize>,
    /// Mean-curvature residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    weld_tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Let arc vertices slide along their boundary arcs.
    #[arg(long)]
    slide_boundary: bool,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    build: BuildArgs,
    #[arg(long)]
    eigs: Option<usize>,
    #[arg(long)]
    eigen_tol: Option<f64>,
    /// `lumped` or `consistent`.
    #[arg(long)]
    mass: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
}

fn set<T: ToString>(
    cfg: &mut RunConfig,
    key: &str,
    value: &Option<T>,
) -> Result<(), PipelineError> {
    if let Some(v) = value {
        cfg.set(key, &v.to_string())?;
    }
    Ok(())
}

fn common_config(c: &Common) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path)?;
        cfg.apply_text(&text)?;
    }
    set(&mut cfg, "m", &c.m)?;
    set(&mut cfg, "k", &c.k)?;
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn build_config(b: &BuildArgs) -> Result<RunConfig, PipelineError> {
    let mut cfg = common_config(&b.common)?;
    set(&mut cfg, "n", &b.n)?;
    set(&mut cfg, "solver_tol", &b.tol)?;
    set(&mut cfg, "weld_tol", &b.weld_tol)?;
    set(&mut cfg, "max_iterations", &b.max_iterations)?;
    if b.slide_boundary {
        cfg.slide_boundary = true;
    }
    Ok(cfg)
}

fn spectrum_config(s: &SpectrumArgs) -> Result<RunConfig, PipelineError> {
    let mut cfg = build_config(&s.build)?;
    set(&mut cfg, "eigen_count", &s.eigs)?;
    set(&mut cfg, "eigen_tol", &s.eigen_tol)?;
    set(&mut cfg, "mass", &s.mass)?;
    set(&mut cfg, "seed", &s.seed)?;
    set(&mut cfg, "lambda_min", &s.lambda_min)?;
    set(&mut cfg, "lambda_max", &s.lambda_max)?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<ExitStatus, PipelineError> {
    match &cli.command {
        Command::GroupVerify(c) => {
            let cfg = common_config(c)?;
            let (status, r) = cmd_group_verify(&cfg)?;
            println!(
                "group m={} k={} order={} (expected {})",
                r.m, r.k, r.order, r.expected_order
            );
            println!(
                "cell orbit size={} stabilizer={}",
                r.orbit_size, r.stabilizer_size
            );
            for c in &r.checks {
                println!("  {:<32} {}", c.name, if c.passed { "ok" } else { "FAIL" });
            }
            if let Some(c) = r.first_failure() {
                eprintln!(
                    "first counterexample ({}): {}",
                    c.name,
                    c.counterexample.as_deref().unwrap_or("?")
                );
            }
            Ok(status)
        }
        Command::Build(b) => {
            let cfg = build_config(b)?;
            let (status, s) = cmd_build(&cfg)?;
            println!(
                "plateau {:?} after {} iterations, residual {:.3e}, patch area {:.6}",
                s.stop, s.iterations, s.residual, s.patch_area
            );
            println!(
                "surface V={} E={} F={} chi={} genus={} (expected chi={} genus={}) area={:.6}",
                s.topology.v,
                s.topology.e,
                s.topology.f,
                s.topology.chi,
                s.topology.genus,
                s.expected_chi,
                s.expected_genus,
                s.topology.area
            );
            match (s.embeddedness.min_separation, &s.embeddedness.notice) {
                (Some(d), _) => println!("min separation of disjoint faces {d:.3e}"),
                (None, Some(n)) => println!("embeddedness: {n}"),
                _ => {}
            }
            println!("wrote {}", cfg.out.display());
            Ok(status)
        }
        Command::Spectrum(sa) => {
            let cfg = spectrum_config(sa)?;
            let (status, s) = cmd_spectrum(&cfg)?;
            println!(
                "{} eigenpairs on {} vertices ({} mass), converged={} max residual {:.2e}",
                s.lambdas.len(),
                s.vertices,
                s.mass,
                s.converged,
                s.max_residual
            );
            for (i, l) in s.lambdas.iter().enumerate() {
                println!("  λ{i:<2} = {l:.8}");
            }
            println!(
                "λ1 = {:.8} band [{}, {}] {}; zero mode {:?}",
                s.lambda1,
                s.lambda_band[0],
                s.lambda_band[1],
                if s.lambda1_in_band { "ok" } else { "OUT" },
                s.zero_mode
            );
            println!(
                "cluster at 2: size {}, projection defect {:?}",
                s.two_cluster_size, s.projection_defect
            );
            println!("takahashi residuals {:?}", s.takahashi);
            println!(
                "nodal domains of φ1: {}; Courant {}",
                s.phi1_domains,
                if s.courant_ok { "ok" } else { "FAIL" }
            );
            println!(
                "obstruction classifier consistent: {}",
                s.classifier_consistent
            );
            println!("wrote {}", cfg.out.display());
            Ok(status)
        }
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("LAWSON_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let status = match run(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_status()
        }
    };
    ExitCode::from(status.code() as u8)
}
