//! Plans the step-up scenario, re-integrates it with RK4 at fine
//! resolution, and audits every contact constraint along the dense
//! trajectory. This is the independent check that a converged plan is
//! dynamically consistent: the integrator is not the planner's Taylor
//! rule, and the constraints are evaluated between the knots the solver
//! saw.

use stepup_planner::{audit_constraints, plan, rollout, Scenario, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::canonical_step_up();
    println!("planning ...");
    let solution = plan(&scenario, &SolverConfig::default())?;
    println!("solver status: {:?}", solution.report.status);

    let substeps = 50;
    let result = rollout(&solution, &scenario, substeps)?;
    println!(
        "rolled out {} samples over {:.3} s at {} substeps per interval",
        result.times.len(),
        solution.total_duration(),
        substeps
    );

    println!("per-phase Taylor-vs-RK4 knot discrepancy:");
    for d in &result.knot_discrepancies {
        println!(
            "  phase {}: {:.3} mm position, {:.4} m/s velocity (bound {:.3} mm)",
            d.phase,
            1e3 * d.max_position_error,
            d.max_velocity_error,
            1e3 * d.bound
        );
    }
    println!(
        "terminal error: {:.2} mm position, {:.4} m/s velocity",
        1e3 * result.terminal_position_error,
        result.terminal_velocity_error
    );
    println!(
        "max torque heuristic along the dense trajectory: left {:.3}, right {:.3}",
        result.max_tau.0, result.max_tau.1
    );

    let audit = audit_constraints(&result, &scenario, 1e-4)?;
    if audit.is_clean() {
        println!(
            "audit clean: no residual above {:.0e} across {} samples (max {:.2e})",
            audit.tolerance, audit.samples, audit.max_residual
        );
    } else {
        println!("audit found {} violations:", audit.violations.len());
        for v in audit.violations.iter().take(10) {
            println!("  t={:.3}s phase {} {}: {:.3e}", v.time, v.phase, v.constraint, v.value);
        }
    }
    Ok(())
}
