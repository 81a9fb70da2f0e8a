use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mfg_torus::commands::{self, Run};
use mfg_torus::{CliError, Result, RunConfig};

#[derive(Parser)]
#[command(name = "mfg-torus", version, about = "Mean field games on the flat torus: solves, equilibria and certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "MFG_TORUS_THREADS")]
    threads: Option<usize>,
    /// Multiply n_x and n_t by this factor.
    #[arg(long, global = true, default_value_t = 1)]
    resolution_scale: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Backward solve for the stationary evaluation curve at mu0.
    SolveHj,
    /// Optimal curves from the atoms of mu0.
    OptimalCurves,
    /// Pinned-endpoint action matrix over all cell pairs.
    CostMatrix,
    /// Damped fixed-point iteration and equilibrium report.
    Mfg,
    /// Recompute the certificate numbers of a stored report.
    Verify {
        /// Report to check; defaults to report.json in the output directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Perturbed-Lagrangian conjugate flags and biconjugate sweep.
    FenchelSweep,
    /// Continuity-equation residuals and field comparison on the seed image.
    ContinuityCheck,
}

fn execute(cli: Cli) -> Result<()> {
    let path = cli.config.ok_or_else(|| CliError::Config(String::from("--config is required")))?;
    let config = RunConfig::load(&path)?.refined(cli.resolution_scale)?;
    let base = path.parent().map(PathBuf::from).unwrap_or_default();
    let run = Run::new(config, base, cli.out)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;

    pool.install(|| match cli.command {
        Command::SolveHj => commands::solve_hj(&run),
        Command::OptimalCurves => commands::optimal_curves(&run),
        Command::CostMatrix => commands::cost_matrix(&run),
        Command::Mfg => commands::mfg(&run),
        Command::Verify { report } => {
            let report = report.unwrap_or_else(|| run.out.join("report.json"));
            let v = commands::verify(&run, &report)?;
            if v.mismatches.is_empty() {
                println!("verify: pass (max deviation {:e})", v.max_deviation);
                Ok(())
            } else {
                Err(CliError::Mismatch(v.mismatches.join("; ")))
            }
        }
        Command::FenchelSweep => commands::fenchel_sweep(&run),
        Command::ContinuityCheck => commands::continuity_check(&run),
    })
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mfg-torus: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
