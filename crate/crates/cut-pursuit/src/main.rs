use clap::{Args, Parser, Subcommand};
use cut_pursuit::cli::{self, CliError, GenParams};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cut-pursuit", version, about = "Working-set solver for graph total variation problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file with the working-set solver
    Solve {
        /// Problem description (JSON)
        problem: PathBuf,
        /// Where to write the solution CSV
        #[arg(long, default_value = "solution.csv")]
        out: PathBuf,
        /// Also write a per-iteration trace CSV here
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Solve a problem file with the direct full-graph splitting solver
    Baseline {
        problem: PathBuf,
        /// Relative change tolerance for the splitting iteration
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 500_000)]
        max_iter: usize,
        #[arg(long, default_value = "solution.csv")]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run both solvers over a tolerance sweep and tabulate the results
    Compare {
        problem: PathBuf,
        /// Tolerances to sweep (repeat the flag or comma-separate)
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-4, 1e-6])]
        tols: Vec<f64>,
        /// Ground-truth solution CSV; adds a Dice support-overlap column
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Support threshold for the Dice score
        #[arg(long, default_value_t = 1e-6)]
        support_eps: f64,
        #[arg(long, default_value_t = 500_000)]
        baseline_max_iter: usize,
        #[arg(long, default_value = "compare.csv")]
        out: PathBuf,
    },
    /// Generate a synthetic problem instance
    Gen {
        /// One of: fused1d, fused2d, eeg_like, multilabel_grid
        kind: String,
        #[arg(long, default_value = "problem.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Chain length (fused1d)
        #[arg(long)]
        size: Option<usize>,
        /// Grid width (fused2d, eeg_like, multilabel_grid)
        #[arg(long)]
        width: Option<usize>,
        /// Grid height (fused2d, eeg_like, multilabel_grid)
        #[arg(long)]
        height: Option<usize>,
        /// Number of classes (multilabel_grid)
        #[arg(long)]
        classes: Option<usize>,
        /// Number of linear measurements (eeg_like)
        #[arg(long)]
        measurements: Option<usize>,
        /// Noise standard deviation
        #[arg(long)]
        noise: Option<f64>,
        /// Active fraction of the ground truth (eeg_like)
        #[arg(long)]
        sparsity: Option<f64>,
        /// Vertex l1 weight (eeg_like)
        #[arg(long)]
        lambda: Option<f64>,
        /// Edge weight scale (eeg_like)
        #[arg(long)]
        tv: Option<f64>,
    },
    /// Print the steepest ternary direction at a point
    Direction {
        problem: PathBuf,
        /// Point to inspect, as a solution CSV
        #[arg(long)]
        point: PathBuf,
        /// Equality threshold for grouping edge values
        #[arg(long)]
        eps_eq: Option<f64>,
        /// Snap distance for rounding onto nearby kinks
        #[arg(long)]
        eps_snap: Option<f64>,
    },
}

#[derive(Args)]
struct SolverFlags {
    /// Stop when the steepest descent rate is above -tol-dir
    #[arg(long)]
    tol_dir: Option<f64>,
    /// Stop when iterates stall relative to their size
    #[arg(long)]
    tol_x: Option<f64>,
    /// Equality threshold for grouping edge values
    #[arg(long)]
    eps_eq: Option<f64>,
    /// Snap distance for rounding onto nearby kinks
    #[arg(long)]
    eps_snap: Option<f64>,
    /// Component merge threshold (0 disables merging)
    #[arg(long)]
    merge_eps: Option<f64>,
    /// Outer iteration budget
    #[arg(long)]
    max_iter: Option<usize>,
    /// Reduced-problem tolerance as a fraction of tol-x
    #[arg(long)]
    reduced_tol_factor: Option<f64>,
    /// Reduced-problem iteration budget
    #[arg(long)]
    reduced_max_iter: Option<usize>,
    /// Use the single two-stage ternary cut instead of the two-cut split
    #[arg(long)]
    ternary: bool,
}

fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Solve {
            problem,
            out,
            trace,
            solver,
        } => {
            let opts = cli::solve_options_from_flags(
                solver.tol_dir,
                solver.tol_x,
                solver.eps_eq,
                solver.eps_snap,
                solver.merge_eps,
                solver.max_iter,
                solver.reduced_tol_factor,
                solver.reduced_max_iter,
                solver.ternary,
            );
            cli::cmd_solve(&problem, &out, trace.as_deref(), &opts)
        }
        Command::Baseline {
            problem,
            tol,
            max_iter,
            out,
            trace,
        } => cli::cmd_baseline(&problem, tol, max_iter, &out, trace.as_deref()),
        Command::Compare {
            problem,
            tols,
            truth,
            support_eps,
            baseline_max_iter,
            out,
        } => cli::cmd_compare(
            &problem,
            &tols,
            truth.as_deref(),
            support_eps,
            baseline_max_iter,
            &out,
        ),
        Command::Gen {
            kind,
            out,
            seed,
            size,
            width,
            height,
            classes,
            measurements,
            noise,
            sparsity,
            lambda,
            tv,
        } => {
            let params = GenParams {
                size,
                width,
                height,
                classes,
                measurements,
                noise,
                sparsity,
                lambda,
                tv,
                seed,
            };
            cli::cmd_gen(&kind, &params, &out)
        }
        Command::Direction {
            problem,
            point,
            eps_eq,
            eps_snap,
        } => cli::cmd_direction(&problem, &point, eps_eq, eps_snap),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
