//! `bilevel run` reproduces the inversion experiments; `bilevel verify` runs
//! the discretization self-checks.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bilevel_core::{run_experiment, verify, Error, GeometrySpec64, History};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::FileConfig;

#[derive(Parser)]
#[command(name = "bilevel", version, about = "Bi-level Landweber inversion for a Helmholtz inverse source problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize data and compare the bi-level and the direct iteration.
    Run(RunArgs),
    /// Run a discretization self-check.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Relative noise level, e.g. 0.01.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSVs, summary and dumps.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run both methods one after the other (default; fair timings).
    #[arg(long, conflicts_with = "parallel")]
    serial: bool,
    /// Run both methods concurrently.
    #[arg(long)]
    parallel: bool,
    /// Write mesh and field dumps.
    #[arg(long)]
    emit_fields: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Adjoint,
    Convergence,
    Monotonicity,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// TOML configuration supplying the geometry.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn is_config_error(e: &anyhow::Error) -> bool {
    matches!(e.downcast_ref::<Error>(), Some(Error::Config(_) | Error::Geometry(_) | Error::Argument(_)))
}

fn load(path: Option<&PathBuf>) -> Result<FileConfig, Failure> {
    match path {
        Some(p) => FileConfig::load(p).map_err(Failure::Config),
        None => Ok(FileConfig::default()),
    }
}

fn print_history(label: &str, h: &History) {
    let sizes: Vec<String> = h.mesh_sizes().iter().map(|s| format!("{s:.4}")).collect();
    println!(
        "{label:<8} {:<13} j={:<5} refinements={} h=[{}] residual={:.4e} (tau*delta={:.4e}) error={:.4e} time={:.3}s",
        h.stop_reason.to_string(),
        h.iterations(),
        h.refinements.len(),
        sizes.join(", "),
        h.final_residual(),
        h.tau * h.delta,
        h.final_error(),
        h.total_time()
    );
}

fn run(args: RunArgs) -> Result<bool, Failure> {
    let file = load(args.config.as_ref())?;
    let mut cfg = file.experiment().map_err(Failure::Config)?;
    if let Some(n) = args.noise {
        cfg.inversion.noise_level = n;
    }
    if let Some(s) = args.seed {
        cfg.inversion.seed = s;
    }
    if let Some(o) = args.out {
        cfg.out_dir = Some(o);
    }
    if args.parallel {
        cfg.parallel = true;
    }
    if args.serial {
        cfg.parallel = false;
    }
    cfg.emit_fields |= args.emit_fields;
    cfg.validate().map_err(|e| Failure::Config(e.into()))?;

    let result = run_experiment(&cfg).map_err(|e| {
        let e = anyhow::Error::from(e);
        if is_config_error(&e) {
            Failure::Config(e)
        } else {
            Failure::Run(e)
        }
    })?;
    println!("noise level {} (delta = {:.4e})", cfg.inversion.noise_level, result.problem.delta);
    print_history("bilevel", &result.bilevel.history);
    print_history("direct", &result.direct.history);
    if let Some(dir) = &cfg.out_dir {
        println!("outputs written to {}", dir.display());
    }
    Ok(true)
}

fn check(args: VerifyArgs) -> Result<bool, Failure> {
    let geometry: GeometrySpec64 = load(args.config.as_ref())?.geometry();
    geometry.validate().map_err(|e| Failure::Config(e.into()))?;
    let fail = |e: Error| Failure::Run(e.into());
    let passed = match args.suite {
        Suite::Adjoint => {
            let r = verify::adjoint_suite(&geometry, 0.27, 20, args.seed).map_err(fail)?;
            println!(
                "adjoint: {} pairs on {} vertices, max relative gap {:.3e} (tolerance {:.0e}), {:.2}s",
                r.gaps.len(),
                r.vertices,
                r.max_gap(),
                verify::ADJOINT_TOLERANCE,
                r.seconds
            );
            r.passed()
        }
        Suite::Convergence => {
            let r = verify::convergence_suite(&geometry, &[0.27, 0.135, 0.068], 0.023).map_err(fail)?;
            for (h, e) in r.sizes.iter().zip(&r.errors) {
                println!("convergence: h = {h:.4}  relative error {e:.4e}");
            }
            println!(
                "convergence: observed order {:.3} (expected {} +/- {})",
                r.order(),
                verify::EXPECTED_ORDER,
                verify::ORDER_TOLERANCE
            );
            r.passed()
        }
        Suite::Monotonicity => {
            let r = verify::monotonicity_suite(&geometry, 0.27, 100, 0.01, args.seed).map_err(fail)?;
            println!(
                "monotonicity: mu = {:.4e}, {} steps, largest residual increase {:.3e}",
                r.mu,
                r.residuals.len(),
                r.max_increase()
            );
            r.passed()
        }
    };
    println!("{}", if passed { "PASS" } else { "FAIL" });
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Verify(a) => check(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
    }
}
