//! Independent verification of planned trajectories.
//!
//! A converged plan only guarantees the discrete shooting equations at
//! the knots. This module re-integrates the continuous dynamics with the
//! planned zero-order-hold controls at fine resolution (RK4 by default,
//! so the check is not circular with the planner's Taylor rule), audits
//! every contact constraint along the dense trajectory, and runs the
//! torque-heuristic comparison experiment.
//!
//! Integration restarts from the planned knot state at each phase
//! boundary, mirroring the multiple-shooting structure: per-phase
//! discrepancies then measure local integration error instead of the
//! compounded drift of an open-loop unstable system.

use nalgebra::Vector3;

use crate::constraints::{evaluate_knot_constraints, ContactFoot, KnotConstraintContext};
use crate::error::{Error, Result};
use crate::model::{contact_acceleration, cop_world, foot_force, CoMState, ControlInput, Side};
use crate::objectives::{self, knee_torque_heuristic, CostBreakdown};
use crate::solver::{SolveReport, SolveStatus, SolverConfig};
use crate::transcription::{Scenario, VariableLayout};

/// Optimized trajectory extracted from a decision vector.
#[derive(Clone, Debug)]
pub struct PlanSolution {
    /// Knot states, `N · P + 1` entries.
    pub states: Vec<CoMState>,
    /// Controls per interval, `N · P` entries.
    pub controls: Vec<ControlInput>,
    /// Knot accelerations per interval, `N · P` entries.
    pub accelerations: Vec<Vector3<f64>>,
    /// Optimized phase durations [s], `P` entries.
    pub durations: Vec<f64>,
    /// Torque epigraph slacks (left, right).
    pub torque_slacks: (f64, f64),
    pub cost: CostBreakdown,
    pub report: SolveReport,
}

impl PlanSolution {
    /// Extracts a plan from the flat decision vector of `layout`.
    pub fn from_decision_vector(
        scenario: &Scenario,
        layout: &VariableLayout,
        x: &[f64],
        report: SolveReport,
    ) -> Result<PlanSolution> {
        if x.len() != layout.dim() {
            return Err(Error::config(format!(
                "decision vector length {} does not match layout dimension {}",
                x.len(),
                layout.dim()
            )));
        }
        let states: Vec<CoMState> = (0..layout.num_knots())
            .map(|k| {
                CoMState::new(
                    Vector3::from_column_slice(&x[layout.position_range(k)]),
                    Vector3::from_column_slice(&x[layout.velocity_range(k)]),
                )
            })
            .collect();
        let controls: Vec<ControlInput> = (0..layout.total_intervals())
            .map(|k| ControlInput {
                lambda_left: x[layout.lambda_index(Side::Left, k)],
                lambda_right: x[layout.lambda_index(Side::Right, k)],
                cop_left: Vector3::from_column_slice(&x[layout.cop_range(Side::Left, k)]),
                cop_right: Vector3::from_column_slice(&x[layout.cop_range(Side::Right, k)]),
            })
            .collect();
        let accelerations: Vec<Vector3<f64>> = (0..layout.total_intervals())
            .map(|k| Vector3::from_column_slice(&x[layout.acceleration_range(k)]))
            .collect();
        let durations: Vec<f64> = (0..layout.num_phases()).map(|i| x[layout.duration_index(i)]).collect();
        let torque_slacks = (
            x[layout.slack_index(Side::Left)],
            x[layout.slack_index(Side::Right)],
        );

        let cost = evaluate_costs(scenario, &states, &controls, &durations, torque_slacks)?;
        Ok(PlanSolution {
            states,
            controls,
            accelerations,
            durations,
            torque_slacks,
            cost,
            report,
        })
    }

    pub fn total_duration(&self) -> f64 {
        self.durations.iter().sum()
    }

    /// Knot-level torque heuristic profile of one foot, zero where the
    /// foot is not in contact.
    pub fn tau_profile(&self, scenario: &Scenario, side: Side) -> Vec<f64> {
        (0..self.controls.len())
            .map(|k| {
                let phase = &scenario.phases[scenario.phase_of_interval(k)];
                match phase.foot(side) {
                    Some(foot) if phase.mode.is_active(side) => knee_torque_heuristic(
                        &self.states[k],
                        foot,
                        self.controls[k].lambda(side),
                        scenario.torque_params.delta(side),
                        true,
                    ),
                    _ => 0.0,
                }
            })
            .collect()
    }

    fn validate_shape(&self, scenario: &Scenario) -> Result<()> {
        let intervals = scenario.total_intervals();
        if self.states.len() != intervals + 1
            || self.controls.len() != intervals
            || self.accelerations.len() != intervals
            || self.durations.len() != scenario.num_phases()
        {
            return Err(Error::config("plan arrays are inconsistent with (N, P)"));
        }
        Ok(())
    }
}

fn evaluate_costs(
    scenario: &Scenario,
    states: &[CoMState],
    controls: &[ControlInput],
    durations: &[f64],
    slacks: (f64, f64),
) -> Result<CostBreakdown> {
    let weights = &scenario.weights;
    let knot_range = scenario
        .target
        .terminal_knots(scenario.knots_per_phase, scenario.num_phases());
    let terminal_states: Vec<CoMState> = knot_range.map(|k| states[k]).collect();
    let terminal = objectives::terminal_cost(&terminal_states, &scenario.target, weights.w_xd)?;

    let tau = |side: Side| -> Vec<f64> {
        (0..controls.len())
            .map(|k| {
                let phase = &scenario.phases[scenario.phase_of_interval(k)];
                match phase.foot(side) {
                    Some(foot) if phase.mode.is_active(side) => knee_torque_heuristic(
                        &states[k],
                        foot,
                        controls[k].lambda(side),
                        scenario.torque_params.delta(side),
                        true,
                    ),
                    _ => 0.0,
                }
            })
            .collect()
    };
    let torque_sum = weights.w_tau
        * tau(Side::Left)
            .iter()
            .chain(tau(Side::Right).iter())
            .map(|t| t * t)
            .sum::<f64>();
    let torque_max = weights.w_tau_max * (slacks.0 + slacks.1);

    let control_variation = objectives::control_variation_cost(controls, weights.w_du)?;
    let desired: Vec<f64> = scenario.phases.iter().map(|p| p.t_desired).collect();
    let regularization = objectives::regularization_cost(durations, &desired, controls, weights)?;

    Ok(CostBreakdown {
        terminal,
        torque_sum,
        torque_max,
        control_variation,
        regularization,
    })
}

/// Integration rule used by [`rollout_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    /// Classic fourth-order Runge-Kutta: the independent oracle.
    RungeKutta4,
    /// The planner's own second-order Taylor update; with one substep per
    /// interval this reproduces the shooting chain exactly.
    TaylorSecondOrder,
}

/// Worst per-phase deviation between the re-integrated trajectory and the
/// shooting knots, with the Taylor-vs-RK4 consistency bound
/// `10 · max‖a‖ · dt_i²` for that phase.
#[derive(Clone, Copy, Debug)]
pub struct PhaseDiscrepancy {
    pub phase: usize,
    pub max_position_error: f64,
    pub max_velocity_error: f64,
    /// `10 · max‖a(k)‖ · dt²` over the phase's knots.
    pub bound: f64,
}

/// Dense forward integration of a plan.
#[derive(Clone, Debug)]
pub struct RolloutResult {
    /// Strictly increasing sample times spanning the total duration [s].
    pub times: Vec<f64>,
    pub states: Vec<CoMState>,
    /// Contact acceleration evaluated at each sample.
    pub accelerations: Vec<Vector3<f64>>,
    /// Control interval each sample belongs to.
    pub interval_indices: Vec<usize>,
    pub phase_indices: Vec<usize>,
    /// Contact constraint residuals at each sample.
    pub residuals: Vec<crate::constraints::ConstraintResiduals>,
    /// Torque heuristic (left, right) at each sample.
    pub taus: Vec<(f64, f64)>,
    /// Contact forces (left, right) at each sample [N].
    pub forces: Vec<(Vector3<f64>, Vector3<f64>)>,
    /// World CoP positions where the phase defines the foot.
    pub cops_world: Vec<(Option<Vector3<f64>>, Option<Vector3<f64>>)>,
    pub terminal_position_error: f64,
    pub terminal_velocity_error: f64,
    /// Max |τ| per foot over the dense trajectory.
    pub max_tau: (f64, f64),
    pub knot_discrepancies: Vec<PhaseDiscrepancy>,
}

/// RK4 rollout with the default integrator; see [`rollout_with`].
pub fn rollout(plan: &PlanSolution, scenario: &Scenario, substeps: usize) -> Result<RolloutResult> {
    rollout_with(plan, scenario, substeps, Integrator::RungeKutta4)
}

/// Integrates `ẍ = a(x, u)` with zero-order-hold controls at
/// `dt_i / substeps` resolution, recording states, constraint residuals,
/// torque heuristics and contact forces at every substep.
pub fn rollout_with(
    plan: &PlanSolution,
    scenario: &Scenario,
    substeps: usize,
    integrator: Integrator,
) -> Result<RolloutResult> {
    if substeps < 1 {
        return Err(Error::invalid("substeps must be at least 1"));
    }
    scenario.validate()?;
    plan.validate_shape(scenario)?;

    let n = scenario.knots_per_phase;
    let contexts: Vec<KnotConstraintContext> = scenario
        .phases
        .iter()
        .map(|phase| {
            Ok(KnotConstraintContext {
                mode: phase.mode,
                left: phase.left.clone().map(ContactFoot::new).transpose()?,
                right: phase.right.clone().map(ContactFoot::new).transpose()?,
                friction: scenario.friction,
                leg_limits: scenario.leg_limits,
            })
        })
        .collect::<Result<_>>()?;

    let mut out = RolloutResult {
        times: Vec::new(),
        states: Vec::new(),
        accelerations: Vec::new(),
        interval_indices: Vec::new(),
        phase_indices: Vec::new(),
        residuals: Vec::new(),
        taus: Vec::new(),
        forces: Vec::new(),
        cops_world: Vec::new(),
        terminal_position_error: 0.0,
        terminal_velocity_error: 0.0,
        max_tau: (0.0, 0.0),
        knot_discrepancies: Vec::new(),
    };

    let record = |t: f64, state: &CoMState, k: usize, out: &mut RolloutResult| -> Result<()> {
        if !state.position.iter().chain(state.velocity.iter()).all(|c| c.is_finite()) {
            return Err(Error::Divergence { time: t });
        }
        let phase_index = scenario.phase_of_interval(k);
        let phase = &scenario.phases[phase_index];
        let u = &plan.controls[k];
        let accel = contact_acceleration(state, phase.mode, phase.left.as_ref(), phase.right.as_ref(), u, &scenario.gravity)?;
        let residuals = evaluate_knot_constraints(state, &contexts[phase_index], u)?;

        let mut taus = (0.0, 0.0);
        let mut forces = (Vector3::zeros(), Vector3::zeros());
        let mut cops = (None, None);
        for side in Side::BOTH {
            if let Some(foot) = phase.foot(side) {
                let active = phase.mode.is_active(side);
                let lambda = if active { u.lambda(side) } else { 0.0 };
                let tau = knee_torque_heuristic(state, foot, lambda, scenario.torque_params.delta(side), active);
                let force = foot_force(state, foot, lambda, u.cop(side), scenario.mass)?;
                let cop = cop_world(foot, u.cop(side))?;
                match side {
                    Side::Left => {
                        taus.0 = tau;
                        forces.0 = force;
                        cops.0 = Some(cop);
                    }
                    Side::Right => {
                        taus.1 = tau;
                        forces.1 = force;
                        cops.1 = Some(cop);
                    }
                }
            }
        }
        out.max_tau.0 = out.max_tau.0.max(taus.0.abs());
        out.max_tau.1 = out.max_tau.1.max(taus.1.abs());

        out.times.push(t);
        out.states.push(*state);
        out.accelerations.push(accel);
        out.interval_indices.push(k);
        out.phase_indices.push(phase_index);
        out.residuals.push(residuals);
        out.taus.push(taus);
        out.forces.push(forces);
        out.cops_world.push(cops);
        Ok(())
    };

    let mut t = 0.0;
    record(t, &plan.states[0], 0, &mut out)?;

    for (phase_index, phase) in scenario.phases.iter().enumerate() {
        let dt = plan.durations[phase_index] / n as f64;
        let h = dt / substeps as f64;
        // Re-anchor on the phase's first knot.
        let mut state = plan.states[phase_index * n];
        let mut max_pos_err = 0.0f64;
        let mut max_vel_err = 0.0f64;
        for j in 0..n {
            let k = phase_index * n + j;
            let u = &plan.controls[k];
            for _ in 0..substeps {
                state = step(&state, phase, u, scenario, h, integrator, t)?;
                t += h;
                record(t, &state, k, &mut out)?;
            }
            let knot = &plan.states[k + 1];
            max_pos_err = max_pos_err.max((state.position - knot.position).norm());
            max_vel_err = max_vel_err.max((state.velocity - knot.velocity).norm());
        }
        let max_accel = (phase_index * n..(phase_index + 1) * n)
            .map(|k| plan.accelerations[k].norm())
            .fold(0.0f64, f64::max);
        out.knot_discrepancies.push(PhaseDiscrepancy {
            phase: phase_index,
            max_position_error: max_pos_err,
            max_velocity_error: max_vel_err,
            bound: 10.0 * max_accel * dt * dt,
        });
    }

    let terminal = out.states.last().expect("at least the initial sample");
    out.terminal_position_error = (terminal.position - scenario.target.position).norm();
    out.terminal_velocity_error = (terminal.velocity - scenario.target.velocity).norm();
    Ok(out)
}

fn step(
    state: &CoMState,
    phase: &crate::transcription::Phase,
    u: &ControlInput,
    scenario: &Scenario,
    h: f64,
    integrator: Integrator,
    t: f64,
) -> Result<CoMState> {
    if !state.position.iter().chain(state.velocity.iter()).all(|c| c.is_finite()) {
        return Err(Error::Divergence { time: t });
    }
    let accel = |pos: &Vector3<f64>| -> Result<Vector3<f64>> {
        let probe = CoMState::new(*pos, Vector3::zeros());
        contact_acceleration(&probe, phase.mode, phase.left.as_ref(), phase.right.as_ref(), u, &scenario.gravity)
    };
    match integrator {
        Integrator::TaylorSecondOrder => {
            let a = accel(&state.position)?;
            crate::model::taylor_step(state, &a, h)
        }
        Integrator::RungeKutta4 => {
            let (x, v) = (state.position, state.velocity);
            let a1 = accel(&x)?;
            let x2 = x + v * (h / 2.0);
            let v2 = v + a1 * (h / 2.0);
            let a2 = accel(&x2)?;
            let x3 = x + v2 * (h / 2.0);
            let v3 = v + a2 * (h / 2.0);
            let a3 = accel(&x3)?;
            let x4 = x + v3 * h;
            let v4 = v + a3 * h;
            let a4 = accel(&x4)?;
            Ok(CoMState {
                position: x + (v + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0),
                velocity: v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0),
            })
        }
    }
}

/// One constraint residual above tolerance on the dense trajectory.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct AuditViolation {
    pub time: f64,
    pub phase: usize,
    pub constraint: String,
    pub value: f64,
}

/// Outcome of a dense constraint audit; empty `violations` means the plan
/// holds every contact constraint at the audited resolution.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct AuditReport {
    pub tolerance: f64,
    pub samples: usize,
    pub max_residual: f64,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Scans a rollout for constraint residuals above `tolerance`.
pub fn audit_constraints(result: &RolloutResult, _scenario: &Scenario, tolerance: f64) -> Result<AuditReport> {
    if !(tolerance > 0.0) {
        return Err(Error::invalid(format!("audit tolerance must be positive, got {tolerance}")));
    }
    let mut report = AuditReport {
        tolerance,
        samples: result.times.len(),
        max_residual: f64::NEG_INFINITY,
        violations: Vec::new(),
    };
    for ((time, phase), residuals) in result
        .times
        .iter()
        .zip(&result.phase_indices)
        .zip(&result.residuals)
    {
        for (id, value) in &residuals.entries {
            report.max_residual = report.max_residual.max(*value);
            if *value > tolerance {
                report.violations.push(AuditViolation {
                    time: *time,
                    phase: *phase,
                    constraint: id.to_string(),
                    value: *value,
                });
            }
        }
    }
    Ok(report)
}

/// One arm of the torque comparison.
#[derive(Clone, Debug)]
pub struct TorqueArm {
    /// Max |τ| of the leading foot over the knots.
    pub max_tau_lead: f64,
    /// Knot-level τ profile of the leading foot.
    pub tau_profile: Vec<f64>,
    pub plan: PlanSolution,
}

/// Result of solving a scenario with and without the torque tasks.
#[derive(Clone, Debug)]
pub struct TorqueComparison {
    /// True when both arms converged.
    pub conclusive: bool,
    pub leading_foot: Side,
    pub with_task: TorqueArm,
    pub baseline: TorqueArm,
    /// `(baseline - with_task) / max(baseline, 0.01)`; the denominator
    /// floor avoids blowups against a near-zero baseline.
    pub relative_reduction: f64,
}

/// Solves the scenario twice, with the configured torque weights and with
/// both set to zero, and compares the leading foot's max torque
/// heuristic. The two solves run concurrently; they are independent
/// problems.
pub fn torque_reduction_experiment(scenario: &Scenario, config: &SolverConfig) -> Result<TorqueComparison> {
    scenario.validate()?;
    let mut baseline_scenario = scenario.clone();
    baseline_scenario.weights.w_tau = 0.0;
    baseline_scenario.weights.w_tau_max = 0.0;

    let (with_plan, baseline_plan) = std::thread::scope(|scope| {
        let with_handle = scope.spawn(|| crate::plan(scenario, config));
        let baseline_handle = scope.spawn(|| crate::plan(&baseline_scenario, config));
        (
            with_handle.join().expect("planner thread panicked"),
            baseline_handle.join().expect("planner thread panicked"),
        )
    });
    let with_plan = with_plan?;
    let baseline_plan = baseline_plan?;

    let lead = scenario.leading_foot;
    let arm = |plan: PlanSolution, arm_scenario: &Scenario| -> TorqueArm {
        let tau_profile = plan.tau_profile(arm_scenario, lead);
        let max_tau_lead = tau_profile.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        TorqueArm {
            max_tau_lead,
            tau_profile,
            plan,
        }
    };
    let with_task = arm(with_plan, scenario);
    let baseline = arm(baseline_plan, &baseline_scenario);

    let conclusive = with_task.plan.report.status == SolveStatus::Converged
        && baseline.plan.report.status == SolveStatus::Converged;
    let relative_reduction =
        (baseline.max_tau_lead - with_task.max_tau_lead) / baseline.max_tau_lead.max(0.01);

    Ok(TorqueComparison {
        conclusive,
        leading_foot: lead,
        with_task,
        baseline,
        relative_reduction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ContactMode;
    use crate::transcription::Phase;
    use approx::assert_relative_eq;
    use std::time::Duration;

    fn dummy_report() -> SolveReport {
        SolveReport {
            status: SolveStatus::Converged,
            outer_iterations: 0,
            inner_iterations: 0,
            objective: 0.0,
            max_constraint_violation: 0.0,
            violation_history: Vec::new(),
            cost_breakdown: Vec::new(),
            guess_clipped: false,
            wall_time: Duration::ZERO,
        }
    }

    fn flight_scenario(v0: Vector3<f64>) -> Scenario {
        let mut scenario = Scenario::canonical_step_up();
        scenario.phases = vec![Phase {
            mode: ContactMode::Flight,
            left: None,
            right: None,
            t_min: 0.2,
            t_max: 1.0,
            t_desired: 0.4,
        }];
        scenario.knots_per_phase = 8;
        scenario.initial = CoMState::new(Vector3::new(0.0, 0.0, 1.0), v0);
        scenario
    }

    /// Ballistic plan whose knots come from the exact Taylor chain.
    fn flight_plan(scenario: &Scenario) -> PlanSolution {
        let n = scenario.knots_per_phase;
        let dt = scenario.phases[0].t_desired / n as f64;
        let g = scenario.gravity.vector();
        let mut states = vec![scenario.initial];
        for k in 0..n {
            states.push(crate::model::taylor_step(&states[k], &(-g), dt).unwrap());
        }
        PlanSolution {
            states,
            controls: vec![ControlInput::zero(); n],
            accelerations: vec![-g; n],
            durations: vec![scenario.phases[0].t_desired],
            torque_slacks: (0.0, 0.0),
            cost: CostBreakdown::default(),
            report: dummy_report(),
        }
    }

    #[test]
    fn flight_rollout_matches_ballistic_closed_form() {
        let scenario = flight_scenario(Vector3::zeros());
        let plan = flight_plan(&scenario);
        let result = rollout(&plan, &scenario, 50).unwrap();
        for (t, state) in result.times.iter().zip(&result.states) {
            let expected = 1.0 - 0.5 * 9.81 * t * t;
            assert!(
                (state.position.z - expected).abs() <= 1e-8,
                "z({t}) = {} expected {expected}",
                state.position.z
            );
        }
    }

    #[test]
    fn flight_energy_is_conserved() {
        let scenario = flight_scenario(Vector3::new(0.8, 0.0, 1.5));
        let plan = flight_plan(&scenario);
        let result = rollout(&plan, &scenario, 40).unwrap();
        let g = scenario.gravity.z();
        let reference = {
            let s = &result.states[0];
            s.velocity.z * s.velocity.z + 2.0 * g * s.position.z
        };
        for s in &result.states {
            let energy = s.velocity.z * s.velocity.z + 2.0 * g * s.position.z;
            assert!((energy - reference).abs() <= 1e-8, "energy drifted to {energy}");
        }
    }

    #[test]
    fn taylor_integrator_with_one_substep_reproduces_knots() {
        let scenario = flight_scenario(Vector3::new(0.5, -0.2, 1.0));
        let plan = flight_plan(&scenario);
        let result = rollout_with(&plan, &scenario, 1, Integrator::TaylorSecondOrder).unwrap();
        let n = scenario.knots_per_phase;
        for k in 0..=n {
            let sample = &result.states[k];
            let knot = &plan.states[k];
            assert_relative_eq!(sample.position, knot.position, epsilon = 1e-12);
            assert_relative_eq!(sample.velocity, knot.velocity, epsilon = 1e-12);
        }
    }

    #[test]
    fn flight_rollout_has_no_contact_residuals() {
        let scenario = flight_scenario(Vector3::zeros());
        let plan = flight_plan(&scenario);
        let result = rollout(&plan, &scenario, 5).unwrap();
        assert!(result.residuals.iter().all(|r| r.is_empty()));
        let audit = audit_constraints(&result, &scenario, 1e-4).unwrap();
        assert!(audit.is_clean());
    }

    #[test]
    fn rollout_times_strictly_increase_and_span_duration() {
        let scenario = flight_scenario(Vector3::zeros());
        let plan = flight_plan(&scenario);
        let result = rollout(&plan, &scenario, 7).unwrap();
        for w in result.times.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert_relative_eq!(*result.times.last().unwrap(), plan.total_duration(), epsilon = 1e-12);
    }

    fn standing_scenario() -> Scenario {
        let mut scenario = Scenario::canonical_step_up();
        scenario.phases.truncate(1);
        scenario.knots_per_phase = 4;
        scenario.target.position = scenario.initial.position;
        scenario
    }

    /// Standing plan: equilibrium controls, stationary states.
    fn standing_plan(scenario: &Scenario, cop_left: Vector3<f64>) -> PlanSolution {
        let n = scenario.knots_per_phase;
        let u = ControlInput {
            lambda_left: 4.905,
            lambda_right: 4.905,
            cop_left,
            cop_right: Vector3::zeros(),
        };
        PlanSolution {
            states: vec![scenario.initial; n + 1],
            controls: vec![u; n],
            accelerations: vec![Vector3::zeros(); n],
            durations: vec![scenario.phases[0].t_desired],
            torque_slacks: (0.0, 0.0),
            cost: CostBreakdown::default(),
            report: dummy_report(),
        }
    }

    #[test]
    fn cop_outside_polygon_is_flagged_at_every_contact_sample() {
        let scenario = standing_scenario();
        let plan = standing_plan(&scenario, Vector3::new(0.2, 0.0, 0.0));
        let result = rollout(&plan, &scenario, 3).unwrap();
        let audit = audit_constraints(&result, &scenario, 1e-4).unwrap();
        assert!(!audit.is_clean());
        let cop_violations = audit
            .violations
            .iter()
            .filter(|v| v.constraint.starts_with("cop_halfspace_left"))
            .count();
        // The offending halfspace must be flagged at every sample.
        assert!(cop_violations >= result.times.len());
    }

    #[test]
    fn divergent_state_reports_failure_time() {
        let scenario = standing_scenario();
        let mut plan = standing_plan(&scenario, Vector3::zeros());
        plan.states[0].position.x = f64::NAN;
        match rollout(&plan, &scenario, 2) {
            Err(Error::Divergence { time }) => assert_eq!(time, 0.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn audit_rejects_nonpositive_tolerance() {
        let scenario = standing_scenario();
        let plan = standing_plan(&scenario, Vector3::zeros());
        let result = rollout(&plan, &scenario, 2).unwrap();
        assert!(audit_constraints(&result, &scenario, 0.0).is_err());
    }

    #[test]
    fn plan_shape_mismatch_is_rejected() {
        let scenario = standing_scenario();
        let mut plan = standing_plan(&scenario, Vector3::zeros());
        plan.controls.pop();
        assert!(matches!(rollout(&plan, &scenario, 2), Err(Error::Configuration(_))));
    }
}
