//! Plans the shipped 0.31 m step-up scenario and prints the solution
//! summary: solver diagnostics, cost breakdown, optimized phase
//! durations and the terminal tracking error of the RK4 rollout.

use stepup_planner::{plan, rollout, Scenario, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::canonical_step_up();
    let config = SolverConfig::default();

    println!(
        "planning {} phases x {} knots ...",
        scenario.num_phases(),
        scenario.knots_per_phase
    );
    let solution = plan(&scenario, &config)?;
    let report = &solution.report;
    println!(
        "status: {:?} after {} outer / {} inner iterations ({:.2} s)",
        report.status,
        report.outer_iterations,
        report.inner_iterations,
        report.wall_time.as_secs_f64()
    );
    println!("max constraint violation: {:.3e}", report.max_constraint_violation);
    println!("objective: {:.6}", report.objective);
    println!("cost breakdown:");
    println!("  terminal:          {:.6}", solution.cost.terminal);
    println!("  torque (sum):      {:.6}", solution.cost.torque_sum);
    println!("  torque (max):      {:.6}", solution.cost.torque_max);
    println!("  control variation: {:.6}", solution.cost.control_variation);
    println!("  regularization:    {:.6}", solution.cost.regularization);
    println!("phase durations [s]: {:?}", solution.durations);

    let result = rollout(&solution, &scenario, 50)?;
    println!(
        "rollout terminal error: {:.2} mm position, {:.4} m/s velocity",
        1e3 * result.terminal_position_error,
        result.terminal_velocity_error
    );
    for d in &result.knot_discrepancies {
        println!(
            "phase {}: knot discrepancy {:.3e} m (bound {:.3e} m)",
            d.phase, d.max_position_error, d.bound
        );
    }
    Ok(())
}
