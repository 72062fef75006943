//! Direct multiple shooting transcription.
//!
//! The continuous planning problem is discretized over a fixed contact
//! sequence of `P` phases with `N` knots each. Knot states, knot
//! accelerations, per-interval controls, phase durations and two epigraph
//! slacks form the decision vector:
//!
//! ```text
//! x(k), v(k)            k = 0 .. N·P      (states)
//! a(k), λ_*(k), p_*(k)  k = 0 .. N·P - 1  (accelerations and controls,
//!                                          indexed by the interval they
//!                                          act on)
//! T_i                   i = 1 .. P        (phase durations)
//! s_l, s_r                                (torque epigraph slacks)
//! ```
//!
//! Equality constraints pin the initial state, tie consecutive states
//! through the second-order Taylor step with `dt_i = T_i / N`, and tie
//! each `a(k)` to the contact acceleration of its phase. Accelerations
//! stay explicit decision variables; substituting them inline would
//! densify the problem for no benefit.
//!
//! Contact inequality constraints are instantiated per knot for the feet
//! active in that knot's phase. Multipliers of inactive feet are pinned
//! to zero through equal variable bounds, CoP z components likewise.

use nalgebra::Vector3;

use crate::constraints::{self, kernel, polygon_to_halfspaces, FrictionParams, HalfspaceSet, LegLimits};
use crate::error::{Error, Result};
use crate::model::{CoMState, ContactMode, FootSpec, Gravity, Side};
use crate::objectives::{CostBreakdown, TaskWeights, TerminalTarget, TorqueHeuristicParams};
use crate::solver::{Dual, GradientMode, Nlp, Real};

/// Largest number of decision variables any single term touches
/// (the control-variation pairs, 2 × 8).
pub const MAX_TERM_ARITY: usize = 16;

/// One contact phase: mode, the active foot poses, and duration bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct Phase {
    pub mode: ContactMode,
    pub left: Option<FootSpec>,
    pub right: Option<FootSpec>,
    /// Duration lower bound [s].
    pub t_min: f64,
    /// Duration upper bound [s].
    pub t_max: f64,
    /// Desired duration [s], used by regularization and the initial guess.
    pub t_desired: f64,
}

impl Phase {
    pub fn foot(&self, side: Side) -> Option<&FootSpec> {
        match side {
            Side::Left => self.left.as_ref(),
            Side::Right => self.right.as_ref(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min.is_finite() && self.t_max.is_finite() && self.t_desired.is_finite()) {
            return Err(Error::invalid("phase durations must be finite"));
        }
        if !(0.0 < self.t_min && self.t_min <= self.t_desired && self.t_desired <= self.t_max) {
            return Err(Error::invalid(format!(
                "phase durations must satisfy 0 < t_min <= t_desired <= t_max, got ({}, {}, {})",
                self.t_min, self.t_desired, self.t_max
            )));
        }
        for side in self.mode.active_sides() {
            match self.foot(side) {
                Some(foot) => foot.validate()?,
                None => {
                    return Err(Error::invalid(format!(
                        "mode {} requires a {side} foot",
                        self.mode.label()
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Full problem definition: contact sequence, boundary data, weights and
/// physical parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub phases: Vec<Phase>,
    /// Knots per phase, `N >= 2`.
    pub knots_per_phase: usize,
    pub initial: CoMState,
    pub target: TerminalTarget,
    pub weights: TaskWeights,
    pub friction: FrictionParams,
    pub leg_limits: LegLimits,
    pub torque_params: TorqueHeuristicParams,
    /// Robot mass [kg]; the dynamics are mass-normalized, so this only
    /// enters force reconstruction and reporting.
    pub mass: f64,
    pub gravity: Gravity,
    /// Upper bound on the multipliers [1/s²].
    pub lambda_max: f64,
    /// The foot whose final support is on the elevated surface; the
    /// torque comparison tracks this one.
    pub leading_foot: Side,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::config("scenario needs at least one phase"));
        }
        if self.knots_per_phase < 2 {
            return Err(Error::config(format!(
                "knots_per_phase must be at least 2, got {}",
                self.knots_per_phase
            )));
        }
        if !self.mass.is_finite() || self.mass <= 0.0 {
            return Err(Error::config(format!("mass must be positive, got {}", self.mass)));
        }
        if !self.lambda_max.is_finite() || self.lambda_max <= 0.0 {
            return Err(Error::config(format!("lambda_max must be positive, got {}", self.lambda_max)));
        }
        self.initial.validate()?;
        self.target.validate()?;
        self.weights.validate()?;
        self.friction.validate()?;
        self.leg_limits.validate()?;
        self.torque_params.validate()?;
        for phase in &self.phases {
            phase.validate()?;
        }
        Ok(())
    }

    pub fn num_phases(&self) -> usize {
        self.phases.len()
    }

    /// Total number of control intervals, `N · P`.
    pub fn total_intervals(&self) -> usize {
        self.knots_per_phase * self.phases.len()
    }

    pub fn phase_of_interval(&self, k: usize) -> usize {
        k / self.knots_per_phase
    }

    /// The shipped 0.31 m step-up: stand on the ground, shift to the
    /// right foot while the left swings onto the step, split-level double
    /// support, shift to the left foot while the right follows, and end
    /// in double support on the step. 0.40 m of forward travel, feet
    /// 0.20 m apart, rectangular 0.20 m × 0.10 m soles.
    pub fn canonical_step_up() -> Scenario {
        let step_height = 0.31;
        let forward = 0.40;
        let half_length = 0.1;
        let half_width = 0.05;
        let foot = |x: f64, y: f64, z: f64| FootSpec::flat(Vector3::new(x, y, z), half_length, half_width).unwrap();
        let left_ground = foot(0.0, 0.10, 0.0);
        let right_ground = foot(0.0, -0.10, 0.0);
        let left_step = foot(forward, 0.10, step_height);
        let right_step = foot(forward, -0.10, step_height);
        let timed = |mode: ContactMode, left: Option<FootSpec>, right: Option<FootSpec>| Phase {
            mode,
            left,
            right,
            t_min: 0.4,
            t_max: 1.6,
            t_desired: 0.8,
        };
        let leg_limits = LegLimits::new(0.5, 1.35).unwrap();
        Scenario {
            phases: vec![
                timed(ContactMode::Double, Some(left_ground.clone()), Some(right_ground.clone())),
                timed(ContactMode::RightOnly, None, Some(right_ground.clone())),
                timed(ContactMode::Double, Some(left_step.clone()), Some(right_ground)),
                timed(ContactMode::LeftOnly, Some(left_step.clone()), None),
                timed(ContactMode::Double, Some(left_step), Some(right_step)),
            ],
            knots_per_phase: 20,
            initial: CoMState::new(Vector3::new(0.0, 0.0, 1.0), Vector3::zeros()),
            target: TerminalTarget {
                position: Vector3::new(forward, 0.0, 1.0 + step_height),
                velocity: Vector3::zeros(),
                terminal_fraction: 0.3,
            },
            weights: TaskWeights::default(),
            friction: FrictionParams::new(0.7, 0.1).unwrap(),
            leg_limits,
            torque_params: TorqueHeuristicParams::from_leg_extension(leg_limits.l_max),
            mass: 100.0,
            gravity: Gravity::standard(),
            lambda_max: 100.0,
            leading_foot: Side::Left,
        }
    }
}

/// Maps named decision variables to slots of the flat vector and owns
/// the variable bounds. The layout is block-contiguous and deterministic:
/// positions, velocities, accelerations, multipliers (left then right),
/// CoP offsets (left then right), durations, slacks.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableLayout {
    knots_per_phase: usize,
    num_phases: usize,
    velocity_offset: usize,
    acceleration_offset: usize,
    lambda_offset: usize,
    cop_offset: usize,
    duration_offset: usize,
    slack_offset: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl VariableLayout {
    pub fn dim(&self) -> usize {
        self.slack_offset + 2
    }

    pub fn knots_per_phase(&self) -> usize {
        self.knots_per_phase
    }

    pub fn num_phases(&self) -> usize {
        self.num_phases
    }

    /// Number of control intervals, `N · P`.
    pub fn total_intervals(&self) -> usize {
        self.knots_per_phase * self.num_phases
    }

    /// Number of knot states, `N · P + 1`.
    pub fn num_knots(&self) -> usize {
        self.total_intervals() + 1
    }

    pub fn phase_of_interval(&self, k: usize) -> usize {
        k / self.knots_per_phase
    }

    pub fn position_range(&self, k: usize) -> std::ops::Range<usize> {
        debug_assert!(k < self.num_knots());
        3 * k..3 * k + 3
    }

    pub fn velocity_range(&self, k: usize) -> std::ops::Range<usize> {
        debug_assert!(k < self.num_knots());
        self.velocity_offset + 3 * k..self.velocity_offset + 3 * k + 3
    }

    pub fn acceleration_range(&self, k: usize) -> std::ops::Range<usize> {
        debug_assert!(k < self.total_intervals());
        self.acceleration_offset + 3 * k..self.acceleration_offset + 3 * k + 3
    }

    pub fn lambda_index(&self, side: Side, k: usize) -> usize {
        debug_assert!(k < self.total_intervals());
        let block = match side {
            Side::Left => 0,
            Side::Right => self.total_intervals(),
        };
        self.lambda_offset + block + k
    }

    pub fn cop_range(&self, side: Side, k: usize) -> std::ops::Range<usize> {
        debug_assert!(k < self.total_intervals());
        let block = match side {
            Side::Left => 0,
            Side::Right => 3 * self.total_intervals(),
        };
        let start = self.cop_offset + block + 3 * k;
        start..start + 3
    }

    pub fn duration_index(&self, phase: usize) -> usize {
        debug_assert!(phase < self.num_phases);
        self.duration_offset + phase
    }

    pub fn slack_index(&self, side: Side) -> usize {
        match side {
            Side::Left => self.slack_offset,
            Side::Right => self.slack_offset + 1,
        }
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }
}

/// Builds the deterministic variable layout and bounds for a scenario.
///
/// Bounds encode everything that is a pure variable restriction:
/// `0 <= λ <= λ_max` for active feet, `λ = 0` for inactive feet,
/// `p_z = 0`, `T_i` within its phase bounds, slacks nonnegative.
pub fn build_layout(scenario: &Scenario) -> Result<VariableLayout> {
    scenario.validate().map_err(|e| match e {
        Error::InvalidInput(m) => Error::Configuration(m),
        other => other,
    })?;
    let intervals = scenario.total_intervals();
    let knots = intervals + 1;
    let velocity_offset = 3 * knots;
    let acceleration_offset = 6 * knots;
    let lambda_offset = acceleration_offset + 3 * intervals;
    let cop_offset = lambda_offset + 2 * intervals;
    let duration_offset = cop_offset + 6 * intervals;
    let slack_offset = duration_offset + scenario.num_phases();
    let dim = slack_offset + 2;

    let mut layout = VariableLayout {
        knots_per_phase: scenario.knots_per_phase,
        num_phases: scenario.num_phases(),
        velocity_offset,
        acceleration_offset,
        lambda_offset,
        cop_offset,
        duration_offset,
        slack_offset,
        lower: vec![f64::NEG_INFINITY; dim],
        upper: vec![f64::INFINITY; dim],
    };

    for k in 0..intervals {
        let phase = &scenario.phases[layout.phase_of_interval(k)];
        for side in Side::BOTH {
            let li = layout.lambda_index(side, k);
            if phase.mode.is_active(side) {
                layout.lower[li] = 0.0;
                layout.upper[li] = scenario.lambda_max;
            } else {
                layout.lower[li] = 0.0;
                layout.upper[li] = 0.0;
            }
            let pz = layout.cop_range(side, k).start + 2;
            layout.lower[pz] = 0.0;
            layout.upper[pz] = 0.0;
        }
    }
    for (i, phase) in scenario.phases.iter().enumerate() {
        let ti = layout.duration_index(i);
        layout.lower[ti] = phase.t_min;
        layout.upper[ti] = phase.t_max;
    }
    for side in Side::BOTH {
        let si = layout.slack_index(side);
        layout.lower[si] = 0.0;
    }
    Ok(layout)
}

/// The initialization strategy: phase durations start at their desired
/// values, the CoM position interpolates linearly from the initial
/// position to the target over the global knot index, and every other
/// variable starts at zero.
pub fn initial_guess(scenario: &Scenario, layout: &VariableLayout) -> Vec<f64> {
    let mut x = vec![0.0; layout.dim()];
    let knots = layout.num_knots();
    let last = (knots - 1) as f64;
    let x0 = scenario.initial.position;
    let xd = scenario.target.position;
    for k in 0..knots {
        let t = k as f64 / last;
        let pos = x0 + (xd - x0) * t;
        x[layout.position_range(k)].copy_from_slice(pos.as_slice());
    }
    for (i, phase) in scenario.phases.iter().enumerate() {
        x[layout.duration_index(i)] = phase.t_desired;
    }
    x
}

/// Per-contact constants of an acceleration-definition row.
#[derive(Clone, Debug)]
struct ContactTermRow {
    /// Component `d` of the foot position.
    foot_component: f64,
    /// Row `d` of the foot rotation, multiplying the CoP offset.
    rotation_row: [f64; 3],
}

/// Closed-form scalar term of the program; evaluated on `f64` or on dual
/// numbers through the same generic code path.
#[derive(Clone, Debug)]
enum TermKernel {
    /// `Σ c_i x_i + offset`
    Linear { coeffs: Vec<f64>, offset: f64 },
    /// Shooting defect `x' - x - dt v - dt² a / 2` with `dt = T / N`;
    /// vars `[x', x, v, a, T]`.
    PositionDefect { inv_n: f64 },
    /// Shooting defect `v' - v - dt a`; vars `[v', v, a, T]`.
    VelocityDefect { inv_n: f64 },
    /// `a_d + g_d - Σ λ (x_d - x_{*,d} - (R p)_d)`;
    /// vars `[a_d, x_d, (λ, p_x, p_y, p_z) per contact]`.
    AccelerationMatch {
        gravity_component: f64,
        contacts: Vec<ContactTermRow>,
    },
    /// Squared friction cone residual; vars `[x(3), p(3)]`.
    FrictionCone {
        rotation: [[f64; 3]; 3],
        foot_position: [f64; 3],
        mu_s: f64,
    },
    /// One torsional friction row; vars `[x(3), p(3)]`.
    TorsionRow {
        rotation: [[f64; 3]; 3],
        foot_position: [f64; 3],
        mu_t: f64,
        upper: bool,
    },
    /// Squared leg-length residual; vars `[x(3)]`.
    LegLength {
        foot_position: [f64; 3],
        bound_sq: f64,
        is_min: bool,
    },
    /// `w ((x_z - h) λ)²`; vars `[x_z, λ]`.
    TorqueSquared { height_ref: f64, weight: f64 },
    /// Epigraph row `((x_z - h) λ)² - s`; vars `[x_z, λ, s]`.
    EpigraphGap { height_ref: f64 },
    /// `w Σ (x_i - target_i)²`
    QuadraticDistance { target: Vec<f64>, weight: f64 },
    /// `w Σ_{i < n/2} (x_i - x_{i + n/2})²`
    SquaredDifference { weight: f64 },
}

impl TermKernel {
    fn eval<S: Real>(&self, x: &[S]) -> S {
        match self {
            TermKernel::Linear { coeffs, offset } => {
                let mut acc = S::from_f64(*offset);
                for (c, xi) in coeffs.iter().zip(x) {
                    acc = acc + *xi * *c;
                }
                acc
            }
            TermKernel::PositionDefect { inv_n } => {
                let dt = x[4] * *inv_n;
                x[0] - x[1] - dt * x[2] - dt * dt * x[3] * 0.5
            }
            TermKernel::VelocityDefect { inv_n } => x[0] - x[1] - x[3] * *inv_n * x[2],
            TermKernel::AccelerationMatch { gravity_component, contacts } => {
                let mut acc = x[0] + *gravity_component;
                let mut base = 2;
                for contact in contacts {
                    let lambda = x[base];
                    let rotated_cop = x[base + 1] * contact.rotation_row[0]
                        + x[base + 2] * contact.rotation_row[1]
                        + x[base + 3] * contact.rotation_row[2];
                    acc = acc - lambda * (x[1] - contact.foot_component - rotated_cop);
                    base += 4;
                }
                acc
            }
            TermKernel::FrictionCone { rotation, foot_position, mu_s } => {
                let pos = [x[0], x[1], x[2]];
                let cop = [x[3], x[4], x[5]];
                let r = kernel::rotated_offset(rotation, foot_position, &pos, &cop);
                kernel::friction_residual(&r, *mu_s)
            }
            TermKernel::TorsionRow { rotation, foot_position, mu_t, upper } => {
                let pos = [x[0], x[1], x[2]];
                let cop = [x[3], x[4], x[5]];
                let r = kernel::rotated_offset(rotation, foot_position, &pos, &cop);
                kernel::torsion_residual(&r, &cop, *mu_t, *upper)
            }
            TermKernel::LegLength { foot_position, bound_sq, is_min } => {
                let pos = [x[0], x[1], x[2]];
                kernel::leg_residual(&pos, foot_position, *bound_sq, *is_min)
            }
            TermKernel::TorqueSquared { height_ref, weight } => {
                let tau = (x[0] - *height_ref) * x[1];
                tau * tau * *weight
            }
            TermKernel::EpigraphGap { height_ref } => {
                let tau = (x[0] - *height_ref) * x[1];
                tau * tau - x[2]
            }
            TermKernel::QuadraticDistance { target, weight } => {
                let mut acc = S::ZERO;
                for (xi, t) in x.iter().zip(target) {
                    let d = *xi - *t;
                    acc = acc + d * d;
                }
                acc * *weight
            }
            TermKernel::SquaredDifference { weight } => {
                let half = x.len() / 2;
                let mut acc = S::ZERO;
                for i in 0..half {
                    let d = x[i] - x[half + i];
                    acc = acc + d * d;
                }
                acc * *weight
            }
        }
    }
}

/// One scalar expression of the program together with the decision-vector
/// slots it reads. Terms are the unit of sparsity: gradients are computed
/// locally and scattered.
#[derive(Clone, Debug)]
pub struct Term {
    label: String,
    vars: Vec<usize>,
    kernel: TermKernel,
}

impl Term {
    fn new(label: String, vars: Vec<usize>, kernel: TermKernel) -> Term {
        debug_assert!(vars.len() <= MAX_TERM_ARITY);
        Term { label, vars, kernel }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Global indices of the variables this term reads.
    pub fn variables(&self) -> &[usize] {
        &self.vars
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// Evaluates on a local slice ordered like [`Term::variables`].
    pub fn eval_local(&self, local: &[f64]) -> f64 {
        debug_assert_eq!(local.len(), self.vars.len());
        self.kernel.eval(local)
    }

    /// Dual-number evaluation on a local slice.
    pub fn eval_local_dual(&self, local: &[Dual]) -> Dual {
        debug_assert_eq!(local.len(), self.vars.len());
        self.kernel.eval(local)
    }

    /// Evaluates against the full decision vector.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut local = [0.0; MAX_TERM_ARITY];
        self.gather(x, &mut local);
        self.kernel.eval(&local[..self.vars.len()])
    }

    /// Local gradient in the requested mode.
    pub fn gradient_local(&self, local: &[f64], mode: GradientMode) -> Vec<f64> {
        let mut out = [0.0; MAX_TERM_ARITY];
        self.gradient_local_into(local, mode, &mut out);
        out[..self.vars.len()].to_vec()
    }

    fn gather(&self, x: &[f64], local: &mut [f64; MAX_TERM_ARITY]) {
        for (slot, &j) in local.iter_mut().zip(&self.vars) {
            *slot = x[j];
        }
    }

    fn gradient_local_into(&self, local: &[f64], mode: GradientMode, out: &mut [f64; MAX_TERM_ARITY]) {
        let n = self.vars.len();
        match mode {
            GradientMode::Algorithmic => {
                let mut duals = [Dual::ZERO; MAX_TERM_ARITY];
                for (d, &v) in duals.iter_mut().zip(local) {
                    *d = Dual::constant(v);
                }
                for i in 0..n {
                    duals[i].eps = 1.0;
                    out[i] = self.kernel.eval(&duals[..n]).eps;
                    duals[i].eps = 0.0;
                }
            }
            GradientMode::CentralDifference => {
                let mut work = [0.0; MAX_TERM_ARITY];
                work[..n].copy_from_slice(local);
                for i in 0..n {
                    let h = 1e-6 * local[i].abs().max(1.0);
                    work[i] = local[i] + h;
                    let above = self.kernel.eval(&work[..n]);
                    work[i] = local[i] - h;
                    let below = self.kernel.eval(&work[..n]);
                    work[i] = local[i];
                    out[i] = (above - below) / (2.0 * h);
                }
            }
        }
    }
}

/// Which task a cost term contributes to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostGroup {
    Terminal,
    TorqueSum,
    TorqueMax,
    ControlVariation,
    Regularization,
}

/// The assembled program: variable layout plus objective, equality and
/// inequality terms. Instances are immutable after construction and all
/// evaluations are pure, so a problem may be shared across threads.
#[derive(Clone, Debug)]
pub struct NlpProblem {
    layout: VariableLayout,
    cost_terms: Vec<(CostGroup, Term)>,
    equality_terms: Vec<Term>,
    inequality_terms: Vec<Term>,
}

impl NlpProblem {
    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    pub fn cost_terms(&self) -> &[(CostGroup, Term)] {
        &self.cost_terms
    }

    pub fn equality_terms(&self) -> &[Term] {
        &self.equality_terms
    }

    pub fn inequality_terms(&self) -> &[Term] {
        &self.inequality_terms
    }

    /// Task values at `x`, in the same grouping used for reports.
    pub fn evaluate_cost_breakdown(&self, x: &[f64]) -> CostBreakdown {
        let mut breakdown = CostBreakdown::default();
        for (group, term) in &self.cost_terms {
            let value = term.eval(x);
            match group {
                CostGroup::Terminal => breakdown.terminal += value,
                CostGroup::TorqueSum => breakdown.torque_sum += value,
                CostGroup::TorqueMax => breakdown.torque_max += value,
                CostGroup::ControlVariation => breakdown.control_variation += value,
                CostGroup::Regularization => breakdown.regularization += value,
            }
        }
        breakdown
    }

    fn accumulate_terms(&self, terms: &[Term], x: &[f64], weights: Option<&[f64]>, mode: GradientMode, grad: &mut [f64]) {
        let mut local = [0.0; MAX_TERM_ARITY];
        let mut local_grad = [0.0; MAX_TERM_ARITY];
        for (j, term) in terms.iter().enumerate() {
            let scale = weights.map_or(1.0, |w| w[j]);
            if scale == 0.0 {
                continue;
            }
            term.gather(x, &mut local);
            term.gradient_local_into(&local[..term.arity()], mode, &mut local_grad);
            for (slot, &var) in term.vars.iter().enumerate() {
                grad[var] += scale * local_grad[slot];
            }
        }
    }
}

impl Nlp for NlpProblem {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn lower_bounds(&self) -> &[f64] {
        &self.layout.lower
    }

    fn upper_bounds(&self) -> &[f64] {
        &self.layout.upper
    }

    fn num_equalities(&self) -> usize {
        self.equality_terms.len()
    }

    fn num_inequalities(&self) -> usize {
        self.inequality_terms.len()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.cost_terms.iter().map(|(_, t)| t.eval(x)).sum()
    }

    fn equalities(&self, x: &[f64], out: &mut [f64]) {
        for (slot, term) in out.iter_mut().zip(&self.equality_terms) {
            *slot = term.eval(x);
        }
    }

    fn inequalities(&self, x: &[f64], out: &mut [f64]) {
        for (slot, term) in out.iter_mut().zip(&self.inequality_terms) {
            *slot = term.eval(x);
        }
    }

    fn objective_gradient(&self, x: &[f64], mode: GradientMode, grad: &mut [f64]) {
        grad.fill(0.0);
        let mut local = [0.0; MAX_TERM_ARITY];
        let mut local_grad = [0.0; MAX_TERM_ARITY];
        for (_, term) in &self.cost_terms {
            term.gather(x, &mut local);
            term.gradient_local_into(&local[..term.arity()], mode, &mut local_grad);
            for (slot, &var) in term.vars.iter().enumerate() {
                grad[var] += local_grad[slot];
            }
        }
    }

    fn equalities_gradient_weighted(&self, x: &[f64], weights: &[f64], mode: GradientMode, grad: &mut [f64]) {
        self.accumulate_terms(&self.equality_terms, x, Some(weights), mode, grad);
    }

    fn inequalities_gradient_weighted(&self, x: &[f64], weights: &[f64], mode: GradientMode, grad: &mut [f64]) {
        self.accumulate_terms(&self.inequality_terms, x, Some(weights), mode, grad);
    }

    fn cost_breakdown(&self, x: &[f64]) -> Vec<(String, f64)> {
        let b = self.evaluate_cost_breakdown(x);
        vec![
            ("terminal".into(), b.terminal),
            ("torque_sum".into(), b.torque_sum),
            ("torque_max".into(), b.torque_max),
            ("control_variation".into(), b.control_variation),
            ("regularization".into(), b.regularization),
            ("total".into(), b.total()),
        ]
    }

    fn constraint_curvature_diagonal(
        &self,
        x: &[f64],
        eq_weights: &[f64],
        ineq_weights: &[f64],
        mode: GradientMode,
        out: &mut [f64],
    ) -> bool {
        let mut local = [0.0; MAX_TERM_ARITY];
        let mut local_grad = [0.0; MAX_TERM_ARITY];
        for (terms, weights) in [
            (&self.equality_terms, eq_weights),
            (&self.inequality_terms, ineq_weights),
        ] {
            for (term, &w) in terms.iter().zip(weights) {
                if w == 0.0 {
                    continue;
                }
                term.gather(x, &mut local);
                term.gradient_local_into(&local[..term.arity()], mode, &mut local_grad);
                for (slot, &var) in term.vars.iter().enumerate() {
                    out[var] += w * local_grad[slot] * local_grad[slot];
                }
            }
        }
        true
    }
}

const COMPONENT: [&str; 3] = ["x", "y", "z"];

struct PhaseFootData {
    side: Side,
    position: [f64; 3],
    rotation: [[f64; 3]; 3],
    halfspaces: HalfspaceSet,
    torque_height_ref: f64,
}

/// Assembles the complete program for a scenario.
pub fn build_nlp(scenario: &Scenario) -> Result<NlpProblem> {
    let layout = build_layout(scenario)?;
    let n = scenario.knots_per_phase;
    let intervals = scenario.total_intervals();
    let inv_n = 1.0 / n as f64;
    let gravity = scenario.gravity.vector();

    // Foot poses are phase-constant, so per-phase constraint data is
    // prepared once.
    let mut phase_feet: Vec<Vec<PhaseFootData>> = Vec::with_capacity(scenario.num_phases());
    for phase in &scenario.phases {
        let mut feet = Vec::new();
        for side in phase.mode.active_sides() {
            let spec = phase.foot(side).expect("validated above");
            feet.push(PhaseFootData {
                side,
                position: spec.position.into(),
                rotation: constraints::matrix_rows(spec),
                halfspaces: polygon_to_halfspaces(&spec.polygon)?,
                torque_height_ref: spec.position.z + scenario.torque_params.delta(side),
            });
        }
        phase_feet.push(feet);
    }

    let mut equality_terms = Vec::new();

    for d in 0..3 {
        equality_terms.push(Term::new(
            format!("initial_position[{}]", COMPONENT[d]),
            vec![layout.position_range(0).start + d],
            TermKernel::Linear { coeffs: vec![1.0], offset: -scenario.initial.position[d] },
        ));
    }
    for d in 0..3 {
        equality_terms.push(Term::new(
            format!("initial_velocity[{}]", COMPONENT[d]),
            vec![layout.velocity_range(0).start + d],
            TermKernel::Linear { coeffs: vec![1.0], offset: -scenario.initial.velocity[d] },
        ));
    }

    for k in 0..intervals {
        let phase = layout.phase_of_interval(k);
        let t_index = layout.duration_index(phase);
        for d in 0..3 {
            equality_terms.push(Term::new(
                format!("defect_position[{k}][{}]", COMPONENT[d]),
                vec![
                    layout.position_range(k + 1).start + d,
                    layout.position_range(k).start + d,
                    layout.velocity_range(k).start + d,
                    layout.acceleration_range(k).start + d,
                    t_index,
                ],
                TermKernel::PositionDefect { inv_n },
            ));
        }
        for d in 0..3 {
            equality_terms.push(Term::new(
                format!("defect_velocity[{k}][{}]", COMPONENT[d]),
                vec![
                    layout.velocity_range(k + 1).start + d,
                    layout.velocity_range(k).start + d,
                    layout.acceleration_range(k).start + d,
                    t_index,
                ],
                TermKernel::VelocityDefect { inv_n },
            ));
        }
    }

    for k in 0..intervals {
        let feet = &phase_feet[layout.phase_of_interval(k)];
        for d in 0..3 {
            let mut vars = vec![
                layout.acceleration_range(k).start + d,
                layout.position_range(k).start + d,
            ];
            let mut contacts = Vec::with_capacity(feet.len());
            for foot in feet {
                vars.push(layout.lambda_index(foot.side, k));
                vars.extend(layout.cop_range(foot.side, k));
                contacts.push(ContactTermRow {
                    foot_component: foot.position[d],
                    rotation_row: foot.rotation[d],
                });
            }
            equality_terms.push(Term::new(
                format!("acceleration_match[{k}][{}]", COMPONENT[d]),
                vars,
                TermKernel::AccelerationMatch { gravity_component: gravity[d], contacts },
            ));
        }
    }

    let mut inequality_terms = Vec::new();
    for k in 0..intervals {
        let feet = &phase_feet[layout.phase_of_interval(k)];
        for foot in feet {
            let side = foot.side;
            let x_vars: Vec<usize> = layout.position_range(k).collect();
            let p_vars: Vec<usize> = layout.cop_range(side, k).collect();

            for (row, (a, b)) in foot.halfspaces.rows().enumerate() {
                inequality_terms.push(Term::new(
                    format!("cop_{side}[{k}][{row}]"),
                    vec![p_vars[0], p_vars[1]],
                    TermKernel::Linear { coeffs: vec![a.x, a.y], offset: -b },
                ));
            }

            let mut xp_vars = x_vars.clone();
            xp_vars.extend(&p_vars);
            inequality_terms.push(Term::new(
                format!("friction_{side}[{k}]"),
                xp_vars.clone(),
                TermKernel::FrictionCone {
                    rotation: foot.rotation,
                    foot_position: foot.position,
                    mu_s: scenario.friction.mu_s,
                },
            ));
            for upper in [true, false] {
                inequality_terms.push(Term::new(
                    format!("torsion_{}_{side}[{k}]", if upper { "upper" } else { "lower" }),
                    xp_vars.clone(),
                    TermKernel::TorsionRow {
                        rotation: foot.rotation,
                        foot_position: foot.position,
                        mu_t: scenario.friction.mu_t,
                        upper,
                    },
                ));
            }
            for is_min in [true, false] {
                let bound = if is_min { scenario.leg_limits.l_min } else { scenario.leg_limits.l_max };
                inequality_terms.push(Term::new(
                    format!("leg_{}_{side}[{k}]", if is_min { "min" } else { "max" }),
                    x_vars.clone(),
                    TermKernel::LegLength {
                        foot_position: foot.position,
                        bound_sq: bound * bound,
                        is_min,
                    },
                ));
            }
        }
    }
    // The leg constraint depends on the state alone, so it is also
    // enforced on each phase's final knot; that state still stands on the
    // phase's feet for the whole last interval, which the per-interval
    // rows above do not see.
    for (i, _) in scenario.phases.iter().enumerate() {
        let end_knot = (i + 1) * n;
        let x_vars: Vec<usize> = layout.position_range(end_knot).collect();
        for foot in &phase_feet[i] {
            for is_min in [true, false] {
                let bound = if is_min { scenario.leg_limits.l_min } else { scenario.leg_limits.l_max };
                inequality_terms.push(Term::new(
                    format!("leg_{}_{}_phase_end[{i}]", if is_min { "min" } else { "max" }, foot.side),
                    x_vars.clone(),
                    TermKernel::LegLength {
                        foot_position: foot.position,
                        bound_sq: bound * bound,
                        is_min,
                    },
                ));
            }
        }
    }
    for k in 0..intervals {
        let feet = &phase_feet[layout.phase_of_interval(k)];
        for foot in feet {
            inequality_terms.push(Term::new(
                format!("epigraph_{}[{k}]", foot.side),
                vec![
                    layout.position_range(k).start + 2,
                    layout.lambda_index(foot.side, k),
                    layout.slack_index(foot.side),
                ],
                TermKernel::EpigraphGap { height_ref: foot.torque_height_ref },
            ));
        }
    }

    let mut cost_terms = Vec::new();
    let weights = &scenario.weights;

    let mut terminal_target = Vec::with_capacity(6);
    terminal_target.extend(scenario.target.position.iter());
    terminal_target.extend(scenario.target.velocity.iter());
    for k in scenario.target.terminal_knots(n, scenario.num_phases()) {
        let mut vars: Vec<usize> = layout.position_range(k).collect();
        vars.extend(layout.velocity_range(k));
        cost_terms.push((
            CostGroup::Terminal,
            Term::new(
                format!("terminal[{k}]"),
                vars,
                TermKernel::QuadraticDistance { target: terminal_target.clone(), weight: weights.w_xd },
            ),
        ));
    }

    for k in 0..intervals {
        let feet = &phase_feet[layout.phase_of_interval(k)];
        for foot in feet {
            cost_terms.push((
                CostGroup::TorqueSum,
                Term::new(
                    format!("torque_{}[{k}]", foot.side),
                    vec![layout.position_range(k).start + 2, layout.lambda_index(foot.side, k)],
                    TermKernel::TorqueSquared { height_ref: foot.torque_height_ref, weight: weights.w_tau },
                ),
            ));
        }
    }
    for side in Side::BOTH {
        cost_terms.push((
            CostGroup::TorqueMax,
            Term::new(
                format!("torque_slack_{side}"),
                vec![layout.slack_index(side)],
                TermKernel::Linear { coeffs: vec![weights.w_tau_max], offset: 0.0 },
            ),
        ));
    }

    for k in 1..intervals {
        let mut vars = Vec::with_capacity(16);
        for interval in [k, k - 1] {
            vars.push(layout.lambda_index(Side::Left, interval));
            vars.push(layout.lambda_index(Side::Right, interval));
            vars.extend(layout.cop_range(Side::Left, interval));
            vars.extend(layout.cop_range(Side::Right, interval));
        }
        cost_terms.push((
            CostGroup::ControlVariation,
            Term::new(
                format!("control_variation[{k}]"),
                vars,
                TermKernel::SquaredDifference { weight: weights.w_du },
            ),
        ));
    }

    for (i, phase) in scenario.phases.iter().enumerate() {
        cost_terms.push((
            CostGroup::Regularization,
            Term::new(
                format!("duration_reg[{i}]"),
                vec![layout.duration_index(i)],
                TermKernel::QuadraticDistance { target: vec![phase.t_desired], weight: weights.w_t },
            ),
        ));
    }
    for k in 0..intervals {
        for side in Side::BOTH {
            cost_terms.push((
                CostGroup::Regularization,
                Term::new(
                    format!("lambda_reg_{side}[{k}]"),
                    vec![layout.lambda_index(side, k)],
                    TermKernel::QuadraticDistance { target: vec![0.0], weight: weights.w_lambda },
                ),
            ));
            cost_terms.push((
                CostGroup::Regularization,
                Term::new(
                    format!("cop_reg_{side}[{k}]"),
                    layout.cop_range(side, k).collect(),
                    TermKernel::QuadraticDistance { target: vec![0.0; 3], weight: weights.w_p },
                ),
            ));
        }
    }

    Ok(NlpProblem {
        layout,
        cost_terms,
        equality_terms,
        inequality_terms,
    })
}


#[cfg(test)]
mod gradient_probe {
    use super::*;
    use crate::solver::Nlp;

    #[test]
    fn assembled_gradients_match_whole_vector_differences() {
        let mut scenario = Scenario::canonical_step_up();
        scenario.phases.truncate(2);
        scenario.knots_per_phase = 3;
        let nlp = build_nlp(&scenario).unwrap();
        let layout = nlp.layout();
        let mut x = initial_guess(&scenario, layout);
        // Nudge everything off zero so no derivative vanishes trivially.
        for (i, v) in x.iter_mut().enumerate() {
            *v += 0.01 * ((i % 7) as f64 - 3.0);
        }
        for k in 0..layout.total_intervals() {
            for side in Side::BOTH {
                x[layout.lambda_index(side, k)] = 2.0 + 0.1 * k as f64;
            }
        }

        // Objective gradient.
        let mut grad = vec![0.0; layout.dim()];
        nlp.objective_gradient(&x, GradientMode::Algorithmic, &mut grad);
        let mut work = x.clone();
        for i in 0..layout.dim() {
            let h = 1e-6 * x[i].abs().max(1.0);
            work[i] = x[i] + h;
            let above = nlp.objective(&work);
            work[i] = x[i] - h;
            let below = nlp.objective(&work);
            work[i] = x[i];
            let fd = (above - below) / (2.0 * h);
            let scale = fd.abs().max(grad[i].abs()).max(1.0);
            assert!(
                (grad[i] - fd).abs() <= 1e-5 * scale,
                "objective grad[{i}]: ad {} fd {}",
                grad[i],
                fd
            );
        }

        // Weighted equality gradient: sum_j w_j c_j with pseudo-random weights.
        let weights: Vec<f64> = (0..nlp.num_equalities())
            .map(|j| ((j * 2654435761) % 1000) as f64 / 500.0 - 1.0)
            .collect();
        let weighted = |x: &[f64]| -> f64 {
            let mut c = vec![0.0; nlp.num_equalities()];
            nlp.equalities(x, &mut c);
            c.iter().zip(&weights).map(|(ci, wi)| ci * wi).sum()
        };
        grad.fill(0.0);
        nlp.equalities_gradient_weighted(&x, &weights, GradientMode::Algorithmic, &mut grad);
        for i in 0..layout.dim() {
            let h = 1e-6 * x[i].abs().max(1.0);
            work[i] = x[i] + h;
            let above = weighted(&work);
            work[i] = x[i] - h;
            let below = weighted(&work);
            work[i] = x[i];
            let fd = (above - below) / (2.0 * h);
            let scale = fd.abs().max(grad[i].abs()).max(1.0);
            assert!(
                (grad[i] - fd).abs() <= 1e-4 * scale,
                "equality grad[{i}]: ad {} fd {}",
                grad[i],
                fd
            );
        }
    }
}
