//! Cost terms of the planner.
//!
//! Four weighted tasks are summed into the objective:
//!
//! - terminal tracking: squared distance of the trailing knots from the
//!   desired state;
//! - a torque heuristic `τ_* = (x_z - x_{*,z} - δ_*) λ_*` that penalizes
//!   large multipliers on a bent leg, with both a sum-of-squares part and
//!   a max-over-knots part (the max is handled exactly through epigraph
//!   slacks);
//! - control variation between consecutive knots;
//! - regularization of phase durations, multipliers and CoP offsets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoMState, ControlInput, FootSpec, Side};

/// Relative priorities of the cost terms; all nonnegative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskWeights {
    pub w_xd: f64,
    pub w_tau: f64,
    pub w_tau_max: f64,
    pub w_du: f64,
    pub w_t: f64,
    pub w_lambda: f64,
    pub w_p: f64,
}

impl TaskWeights {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("w_xd", self.w_xd),
            ("w_tau", self.w_tau),
            ("w_tau_max", self.w_tau_max),
            ("w_du", self.w_du),
            ("w_t", self.w_t),
            ("w_lambda", self.w_lambda),
            ("w_p", self.w_p),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::invalid(format!("{name} must be finite and nonnegative, got {value}")));
            }
        }
        Ok(())
    }
}

impl Default for TaskWeights {
    /// Engineering defaults for the shipped step-up scenario; these are
    /// not calibrated constants, just values that balance the tasks well
    /// at meter/second scales.
    fn default() -> Self {
        TaskWeights {
            w_xd: 40.0,
            w_tau: 0.1,
            w_tau_max: 1.0,
            w_du: 1e-3,
            w_t: 4.0,
            w_lambda: 1e-4,
            w_p: 1e-2,
        }
    }
}

/// Desired terminal state plus the trailing portion of the last phase
/// over which it is tracked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TerminalTarget {
    /// Desired CoM position [m].
    pub position: nalgebra::Vector3<f64>,
    /// Desired CoM velocity [m/s].
    pub velocity: nalgebra::Vector3<f64>,
    /// Fraction in (0, 1] of the last phase's knots that track the
    /// target, counted from the end and always including the terminal
    /// knot.
    pub terminal_fraction: f64,
}

impl TerminalTarget {
    pub fn validate(&self) -> Result<()> {
        if !self.position.iter().all(|c| c.is_finite()) || !self.velocity.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("terminal target has non-finite components"));
        }
        if !(self.terminal_fraction > 0.0 && self.terminal_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "terminal_fraction must lie in (0, 1], got {}",
                self.terminal_fraction
            )));
        }
        Ok(())
    }

    /// Global knot indices tracked by the terminal task for a problem
    /// with `knots_per_phase` knots per phase and `phases` phases.
    pub fn terminal_knots(&self, knots_per_phase: usize, phases: usize) -> std::ops::RangeInclusive<usize> {
        let last = knots_per_phase * phases;
        let count = ((self.terminal_fraction * knots_per_phase as f64).ceil() as usize)
            .clamp(1, knots_per_phase);
        (last - count + 1)..=last
    }
}

/// Reference height differences `δ_l`, `δ_r` of the torque heuristic [m].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorqueHeuristicParams {
    pub delta_left: f64,
    pub delta_right: f64,
}

impl TorqueHeuristicParams {
    /// Default reference: three quarters of the maximum leg extension, a
    /// comfortably stretched leg.
    pub fn from_leg_extension(l_max: f64) -> Self {
        TorqueHeuristicParams {
            delta_left: 0.75 * l_max,
            delta_right: 0.75 * l_max,
        }
    }

    pub fn delta(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.delta_left,
            Side::Right => self.delta_right,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta_left.is_finite() || !self.delta_right.is_finite() {
            return Err(Error::invalid("torque heuristic deltas must be finite"));
        }
        Ok(())
    }
}

/// Knee-torque heuristic `τ = (x_z - x_{*,z} - δ) λ` when the foot is in
/// contact, zero otherwise.
///
/// When the CoM drops toward the foot the height mismatch grows and any
/// sizable multiplier becomes expensive, which steers load away from a
/// bent leg.
pub fn knee_torque_heuristic(
    state: &CoMState,
    foot: &FootSpec,
    lambda: f64,
    delta: f64,
    in_contact: bool,
) -> f64 {
    if !in_contact {
        return 0.0;
    }
    (state.position.z - foot.position.z - delta) * lambda
}

/// Terminal tracking cost over the given knot states:
/// `w_xd Σ (‖x - x_d‖² + ‖v - v_d‖²)`.
pub fn terminal_cost(states: &[CoMState], target: &TerminalTarget, w_xd: f64) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::config("terminal cost needs a nonempty terminal knot set"));
    }
    let mut total = 0.0;
    for s in states {
        total += (s.position - target.position).norm_squared();
        total += (s.velocity - target.velocity).norm_squared();
    }
    Ok(w_xd * total)
}

/// Epigraph description of the max-of-squares torque term for one foot:
/// a slack `s` with constraints `s >= τ(k)²` for every knot.
#[derive(Clone, Debug, PartialEq)]
pub struct EpigraphSlack {
    /// Lower bounds `τ(k)²` imposed on the slack, one per knot.
    pub squared_bounds: Vec<f64>,
    /// Smallest feasible slack, `max_k τ(k)²`.
    pub optimal: f64,
}

impl EpigraphSlack {
    fn from_taus(taus: &[f64]) -> Self {
        let squared_bounds: Vec<f64> = taus.iter().map(|t| t * t).collect();
        let optimal = squared_bounds.iter().fold(0.0f64, |m, v| m.max(*v));
        EpigraphSlack { squared_bounds, optimal }
    }
}

/// Torque cost evaluated at the optimal slacks, plus the slack constraint
/// sets for embedding into a program.
#[derive(Clone, Debug, PartialEq)]
pub struct TorqueCost {
    /// `w_tau Σ τ² + w_tau_max Σ s` at the optimal slacks.
    pub value: f64,
    pub left: EpigraphSlack,
    pub right: EpigraphSlack,
}

/// Sum-of-squares plus max-of-squares torque cost.
///
/// The max over knots is reformulated exactly: minimizing
/// `w_tau_max · s` subject to `s >= τ(k)²` for all `k` recovers
/// `w_tau_max · max_k τ(k)²` at the optimum, while keeping the program
/// smooth.
pub fn torque_cost(tau_left: &[f64], tau_right: &[f64], w_tau: f64, w_tau_max: f64) -> TorqueCost {
    let left = EpigraphSlack::from_taus(tau_left);
    let right = EpigraphSlack::from_taus(tau_right);
    let sum_sq: f64 = tau_left.iter().chain(tau_right).map(|t| t * t).sum();
    TorqueCost {
        value: w_tau * sum_sq + w_tau_max * (left.optimal + right.optimal),
        left,
        right,
    }
}

fn control_difference_squared(a: &ControlInput, b: &ControlInput) -> f64 {
    let mut acc = (a.lambda_left - b.lambda_left).powi(2) + (a.lambda_right - b.lambda_right).powi(2);
    acc += (a.cop_left - b.cop_left).norm_squared();
    acc += (a.cop_right - b.cop_right).norm_squared();
    acc
}

/// Control variation cost `w_du Σ ‖u(k) - u(k-1)‖²` with
/// `u = (λ_l, λ_r, p_l, p_r)` stacked; the sum runs across phase
/// boundaries.
pub fn control_variation_cost(controls: &[ControlInput], w_du: f64) -> Result<f64> {
    if controls.len() < 2 {
        return Err(Error::config(format!(
            "control variation needs at least 2 knots, got {}",
            controls.len()
        )));
    }
    let total: f64 = controls.windows(2).map(|w| control_difference_squared(&w[1], &w[0])).sum();
    Ok(w_du * total)
}

/// Regularization `w_t Σ (T_i - T_{i,d})² + w_λ Σ λ² + w_p Σ ‖p‖²` over
/// both feet and all knots.
pub fn regularization_cost(
    durations: &[f64],
    desired_durations: &[f64],
    controls: &[ControlInput],
    weights: &TaskWeights,
) -> Result<f64> {
    if durations.len() != desired_durations.len() {
        return Err(Error::config(format!(
            "duration lists disagree in length: {} vs {}",
            durations.len(),
            desired_durations.len()
        )));
    }
    let duration_term: f64 = durations
        .iter()
        .zip(desired_durations)
        .map(|(t, td)| (t - td).powi(2))
        .sum();
    let lambda_term: f64 = controls
        .iter()
        .map(|u| u.lambda_left * u.lambda_left + u.lambda_right * u.lambda_right)
        .sum();
    let cop_term: f64 = controls
        .iter()
        .map(|u| u.cop_left.norm_squared() + u.cop_right.norm_squared())
        .sum();
    Ok(weights.w_t * duration_term + weights.w_lambda * lambda_term + weights.w_p * cop_term)
}

/// Value of each task at a solution, with the torque term split into its
/// sum and max parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub terminal: f64,
    pub torque_sum: f64,
    pub torque_max: f64,
    pub control_variation: f64,
    pub regularization: f64,
}

impl CostBreakdown {
    pub fn torque(&self) -> f64 {
        self.torque_sum + self.torque_max
    }

    pub fn total(&self) -> f64 {
        self.terminal + self.torque_sum + self.torque_max + self.control_variation + self.regularization
    }
}
