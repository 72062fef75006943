use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stepup_planner::cli::{cmd_compare_torque, cmd_plan, CompareOptions, PlanOptions};
use stepup_planner::GradientMode;

/// Step-up trajectory planner.
#[derive(Parser)]
#[command(name = "stepup", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GradientModeArg {
    Algorithmic,
    CentralDifference,
}

impl From<GradientModeArg> for GradientMode {
    fn from(mode: GradientModeArg) -> GradientMode {
        match mode {
            GradientModeArg::Algorithmic => GradientMode::Algorithmic,
            GradientModeArg::CentralDifference => GradientMode::CentralDifference,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Plan a scenario; writes plan.json, trajectory.csv and audit.json.
    ///
    /// Exits 0 when the solve converged and the dense audit is clean,
    /// 1 otherwise, 2 on I/O or parse errors.
    Plan {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Rollout substeps per shooting interval.
        #[arg(long, default_value_t = 20)]
        substeps: usize,
        /// Cap on outer solver iterations.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Constraint tolerance for convergence.
        #[arg(long)]
        tol: Option<f64>,
        /// Gradient evaluation mode.
        #[arg(long, value_enum)]
        gradient_mode: Option<GradientModeArg>,
    },
    /// Solve with and without the torque tasks and compare the leading
    /// foot's torque heuristic; writes comparison.json and both
    /// trajectory CSVs.
    CompareTorque {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        substeps: usize,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum)]
        gradient_mode: Option<GradientModeArg>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let status = match args.command {
        Command::Plan {
            scenario,
            out,
            substeps,
            max_iter,
            tol,
            gradient_mode,
        } => cmd_plan(&PlanOptions {
            scenario,
            out_dir: out,
            substeps,
            max_outer_iterations: max_iter,
            constraint_tolerance: tol,
            gradient_mode: gradient_mode.map(Into::into),
        }),
        Command::CompareTorque {
            scenario,
            out,
            substeps,
            max_iter,
            tol,
            gradient_mode,
        } => cmd_compare_torque(&CompareOptions {
            scenario,
            out_dir: out,
            substeps,
            max_outer_iterations: max_iter,
            constraint_tolerance: tol,
            gradient_mode: gradient_mode.map(Into::into),
        }),
    };
    ExitCode::from(status.exit_code())
}
