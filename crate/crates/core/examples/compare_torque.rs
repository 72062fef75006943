//! Solves the step-up scenario twice, with the torque heuristic tasks
//! enabled and disabled, and reports the reduction in the leading foot's
//! maximum torque heuristic.

use stepup_planner::{torque_reduction_experiment, Scenario, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::canonical_step_up();
    let config = SolverConfig::default();

    println!("solving both arms (this runs two full plans concurrently) ...");
    let comparison = torque_reduction_experiment(&scenario, &config)?;

    println!(
        "leading foot: {}  conclusive: {}",
        comparison.leading_foot, comparison.conclusive
    );
    println!(
        "max |tau_lead|  with torque task: {:.4}   baseline: {:.4}",
        comparison.with_task.max_tau_lead, comparison.baseline.max_tau_lead
    );
    println!("relative reduction: {:.1}%", 100.0 * comparison.relative_reduction);
    println!(
        "arm status: with={:?} ({} s), baseline={:?} ({} s)",
        comparison.with_task.plan.report.status,
        comparison.with_task.plan.report.wall_time.as_secs_f64().round(),
        comparison.baseline.plan.report.status,
        comparison.baseline.plan.report.wall_time.as_secs_f64().round(),
    );
    Ok(())
}
