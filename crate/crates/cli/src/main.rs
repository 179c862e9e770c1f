use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sweep_cli::commands::{self, OptimizeArgs};
use sweep_cli::CliError;

#[derive(Parser)]
#[command(
    name = "sweep",
    version,
    about = "Delayed sweeping processes over polyhedra: simulate, refine, discretize, optimize"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Inclusive level range `m1..m2`.
#[derive(Clone, Debug)]
struct Levels(Vec<u32>);

fn levels(s: &str) -> Result<Levels, String> {
    commands::parse_levels(s).map(Levels)
}

#[derive(Subcommand)]
enum Command {
    /// Sample the standing assumptions; exit 0 iff no violation is found.
    Validate {
        scenario: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the catching-up solver on 2^level intervals.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        substeps: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Double the mesh until successive solutions agree within --tol.
    Refine {
        scenario: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Discrete approximations of the nominal pair with their residuals.
    Feasible {
        scenario: PathBuf,
        #[arg(long, value_parser = levels)]
        levels: Option<Levels>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Solve the discrete optimal control problem of one level.
    Optimize {
        scenario: PathBuf,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        oracle_grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also run the level study over `m1..m2`.
        #[arg(long, value_parser = levels)]
        study: Option<Levels>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SWEEP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Parse(format!("SWEEP_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Numerical(sweep_core::SweepError::NumericalFailure(e.to_string())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Validate { scenario, samples, seed } => {
            let report = commands::validate(&scenario, samples, seed)?;
            print!("{report}");
            if !report.passed() {
                let ids: Vec<&str> = report.failures().map(|c| c.id).collect();
                return Err(CliError::Validation(format!("violated: {}", ids.join(", "))));
            }
        }
        Command::Simulate { scenario, level, substeps, out } => {
            let sim = commands::simulate(&scenario, level, substeps, &out)?;
            let r = &sim.report;
            println!(
                "k = {}, substeps = {}: max |x| = {:.6e} (l = {:.6e}), max node |x| = {:.6e} (M = {:.6e}), bounds {}",
                r.k,
                r.substeps,
                r.max_state_norm,
                r.l_bound,
                r.max_node_norm,
                r.m_bound,
                if r.bounds_applicable { "applicable" } else { "not applicable" }
            );
            println!(
                "wrote {} and {}",
                out.join(commands::TRAJECTORY_CSV).display(),
                out.join(commands::REPORT_JSON).display()
            );
        }
        Command::Refine { scenario, tol, kmax, out } => {
            let rep = commands::refine(&scenario, tol, kmax, &out)?;
            println!("converged at k = {} (tol {:.3e})", rep.k_final, rep.tol);
            println!("wrote {}", out.join(commands::REFINE_CSV).display());
        }
        Command::Feasible { scenario, levels, out } => {
            let table = commands::feasible(&scenario, levels.map(|l| l.0), &out)?;
            for r in &table.rows {
                println!(
                    "m = {:>2}: |r|_L2 = {:.6e}, |x - xbar|_W12 = {:.6e}, |u - ubar|_L2 = {:.6e}",
                    r.level, r.r_l2, r.x_w12, r.u_l2
                );
            }
            println!("wrote {}", out.join(commands::FEASIBLE_CSV).display());
        }
        Command::Optimize { scenario, level, starts, oracle_grid, seed, study, out } => {
            let args = OptimizeArgs { level, starts, oracle_grid, seed, study: study.map(|l| l.0) };
            let res = commands::optimize(&scenario, &args, &out)?;
            println!("J_local = {:.10e} (feasible: {})", res.local.objective, res.local.feasible);
            if let Some(o) = &res.oracle {
                println!("J_oracle = {:.10e} over {} rollouts", o.objective, o.trace.evaluations);
            }
            println!("J[xbar, ubar] = {:.10e}", res.reference_objective);
            println!("wrote {}", out.join(commands::OPTIMIZE_JSON).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
