//! Scenario files, report emission and the command front end.
//!
//! Scenarios are human-editable JSON: phases with foot poses (rotation as
//! a 3×3 matrix or yaw-pitch-roll degrees), polygon vertices and duration
//! bounds, plus the initial state, target, weights and physical
//! parameters. Omitted optional fields take documented defaults. Parsing
//! failures carry line information; validation failures name the field
//! path (for example `phases[2].t_min`).
//!
//! Commands emit:
//!
//! - `plan.json` — the optimized trajectory plus solver diagnostics;
//! - `trajectory.csv` — the dense RK4 rollout, one row per sample;
//! - `audit.json` — dense constraint residuals above tolerance;
//! - `comparison.json` plus two trajectory CSVs for the torque
//!   comparison.
//!
//! Outputs are deterministic for fixed inputs: reports exclude wall-clock
//! data and all numbers are printed in full precision.

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::constraints::{FrictionParams, LegLimits};
use crate::error::{Error, Result};
use crate::model::{rotation_from_yaw_pitch_roll, CoMState, ContactMode, FootSpec, Gravity, Side};
use crate::objectives::{CostBreakdown, TaskWeights, TerminalTarget, TorqueHeuristicParams};
use crate::solver::{GradientMode, SolveReport, SolveStatus, SolverConfig};
use crate::transcription::{Phase, Scenario};
use crate::validation::{audit_constraints, rollout, AuditReport, PlanSolution, RolloutResult, TorqueComparison};

const DEFAULT_TERMINAL_FRACTION: f64 = 0.3;
const DEFAULT_LAMBDA_MAX: f64 = 100.0;
/// Audit tolerance deciding the `plan` exit status.
pub const AUDIT_TOLERANCE: f64 = 1e-4;

// ---------------------------------------------------------------------------
// Scenario documents
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<f64>,
    pub knots_per_phase: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leading_foot: Option<String>,
    pub initial_state: StateDoc,
    pub target: TargetDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsDoc>,
    pub friction: FrictionDoc,
    pub leg_limits: LegLimitsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque_params: Option<TorqueParamsDoc>,
    pub phases: Vec<PhaseDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDoc {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_fraction: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_xd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_tau_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_du: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_p: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionDoc {
    pub mu_s: f64,
    pub mu_t: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegLimitsDoc {
    pub l_min: f64,
    pub l_max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorqueParamsDoc {
    pub delta_l: f64,
    pub delta_r: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDoc {
    /// One of `flight`, `left`, `right`, `double`.
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_foot: Option<FootDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_foot: Option<FootDoc>,
    pub t_min: f64,
    pub t_max: f64,
    pub t_desired: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootDoc {
    pub position: [f64; 3],
    /// Row-major 3×3 rotation; mutually exclusive with
    /// `yaw_pitch_roll_deg`. Identity when both are omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_pitch_roll_deg: Option<[f64; 3]>,
    /// Convex counter-clockwise support polygon in foot coordinates.
    pub polygon: Vec<[f64; 2]>,
}

fn parse_mode(s: &str, path: &str) -> Result<ContactMode> {
    match s {
        "flight" => Ok(ContactMode::Flight),
        "left" => Ok(ContactMode::LeftOnly),
        "right" => Ok(ContactMode::RightOnly),
        "double" => Ok(ContactMode::Double),
        other => Err(Error::scenario(
            path,
            format!("unknown mode `{other}` (expected flight, left, right or double)"),
        )),
    }
}

fn parse_side(s: &str, path: &str) -> Result<Side> {
    match s {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        other => Err(Error::scenario(path, format!("unknown side `{other}`"))),
    }
}

fn foot_from_doc(doc: &FootDoc, path: &str) -> Result<FootSpec> {
    let rotation = match (&doc.rotation, &doc.yaw_pitch_roll_deg) {
        (Some(_), Some(_)) => {
            return Err(Error::scenario(
                format!("{path}.rotation"),
                "give either a rotation matrix or yaw_pitch_roll_deg, not both",
            ))
        }
        (Some(m), None) => Matrix3::from_fn(|r, c| m[r][c]),
        (None, Some(ypr)) => rotation_from_yaw_pitch_roll(
            ypr[0].to_radians(),
            ypr[1].to_radians(),
            ypr[2].to_radians(),
        ),
        (None, None) => Matrix3::identity(),
    };
    if doc.polygon.len() < 3 {
        return Err(Error::scenario(
            format!("{path}.polygon"),
            format!("need at least 3 vertices, got {}", doc.polygon.len()),
        ));
    }
    let polygon: Vec<Vector2<f64>> = doc.polygon.iter().map(|v| Vector2::new(v[0], v[1])).collect();
    FootSpec::new(Vector3::from_column_slice(&doc.position), rotation, polygon)
        .map_err(|e| Error::scenario(path, e.to_string()))
}

fn phase_from_doc(doc: &PhaseDoc, index: usize) -> Result<Phase> {
    let path = format!("phases[{index}]");
    let mode = parse_mode(&doc.mode, &format!("{path}.mode"))?;
    if doc.t_min > doc.t_max {
        return Err(Error::scenario(
            format!("{path}.t_min"),
            format!("t_min ({}) exceeds t_max ({})", doc.t_min, doc.t_max),
        ));
    }
    if doc.t_desired < doc.t_min || doc.t_desired > doc.t_max {
        return Err(Error::scenario(
            format!("{path}.t_desired"),
            format!(
                "t_desired ({}) must lie within [{}, {}]",
                doc.t_desired, doc.t_min, doc.t_max
            ),
        ));
    }
    let left = doc
        .left_foot
        .as_ref()
        .map(|f| foot_from_doc(f, &format!("{path}.left_foot")))
        .transpose()?;
    let right = doc
        .right_foot
        .as_ref()
        .map(|f| foot_from_doc(f, &format!("{path}.right_foot")))
        .transpose()?;
    for side in mode.active_sides() {
        let present = match side {
            Side::Left => left.is_some(),
            Side::Right => right.is_some(),
        };
        if !present {
            return Err(Error::scenario(
                format!("{path}.{side}_foot"),
                format!("mode `{}` requires this foot", doc.mode),
            ));
        }
    }
    let phase = Phase {
        mode,
        left,
        right,
        t_min: doc.t_min,
        t_max: doc.t_max,
        t_desired: doc.t_desired,
    };
    phase.validate().map_err(|e| Error::scenario(&path, e.to_string()))?;
    Ok(phase)
}

/// Converts a parsed document into a validated [`Scenario`], applying
/// defaults for omitted optional fields.
pub fn scenario_from_doc(doc: &ScenarioDoc) -> Result<Scenario> {
    let leg_limits = LegLimits::new(doc.leg_limits.l_min, doc.leg_limits.l_max)
        .map_err(|e| Error::scenario("leg_limits", e.to_string()))?;
    let defaults = TaskWeights::default();
    let weights = match &doc.weights {
        None => defaults,
        Some(w) => TaskWeights {
            w_xd: w.w_xd.unwrap_or(defaults.w_xd),
            w_tau: w.w_tau.unwrap_or(defaults.w_tau),
            w_tau_max: w.w_tau_max.unwrap_or(defaults.w_tau_max),
            w_du: w.w_du.unwrap_or(defaults.w_du),
            w_t: w.w_t.unwrap_or(defaults.w_t),
            w_lambda: w.w_lambda.unwrap_or(defaults.w_lambda),
            w_p: w.w_p.unwrap_or(defaults.w_p),
        },
    };
    weights.validate().map_err(|e| Error::scenario("weights", e.to_string()))?;
    let torque_params = match &doc.torque_params {
        None => TorqueHeuristicParams::from_leg_extension(leg_limits.l_max),
        Some(t) => TorqueHeuristicParams {
            delta_left: t.delta_l,
            delta_right: t.delta_r,
        },
    };
    let gravity = match doc.gravity {
        None => Gravity::standard(),
        Some(z) => Gravity::new(z).map_err(|e| Error::scenario("gravity", e.to_string()))?,
    };
    let scenario = Scenario {
        phases: doc
            .phases
            .iter()
            .enumerate()
            .map(|(i, p)| phase_from_doc(p, i))
            .collect::<Result<_>>()?,
        knots_per_phase: doc.knots_per_phase,
        initial: CoMState::new(
            Vector3::from_column_slice(&doc.initial_state.position),
            Vector3::from_column_slice(&doc.initial_state.velocity),
        ),
        target: TerminalTarget {
            position: Vector3::from_column_slice(&doc.target.position),
            velocity: Vector3::from_column_slice(&doc.target.velocity),
            terminal_fraction: doc.target.terminal_fraction.unwrap_or(DEFAULT_TERMINAL_FRACTION),
        },
        weights,
        friction: FrictionParams::new(doc.friction.mu_s, doc.friction.mu_t)
            .map_err(|e| Error::scenario("friction", e.to_string()))?,
        leg_limits,
        torque_params,
        mass: doc.mass,
        gravity,
        lambda_max: doc.lambda_max.unwrap_or(DEFAULT_LAMBDA_MAX),
        leading_foot: match &doc.leading_foot {
            None => Side::Left,
            Some(s) => parse_side(s, "leading_foot")?,
        },
    };
    scenario
        .validate()
        .map_err(|e| Error::scenario("scenario", e.to_string()))?;
    Ok(scenario)
}

/// Parses scenario JSON text.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    scenario_from_doc(&doc)
}

/// Reads and parses a scenario file.
pub fn parse_scenario_file(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_scenario_str(&text)
}

fn foot_to_doc(foot: &FootSpec) -> FootDoc {
    FootDoc {
        position: foot.position.into(),
        rotation: Some([
            [foot.rotation[(0, 0)], foot.rotation[(0, 1)], foot.rotation[(0, 2)]],
            [foot.rotation[(1, 0)], foot.rotation[(1, 1)], foot.rotation[(1, 2)]],
            [foot.rotation[(2, 0)], foot.rotation[(2, 1)], foot.rotation[(2, 2)]],
        ]),
        yaw_pitch_roll_deg: None,
        polygon: foot.polygon.iter().map(|v| [v.x, v.y]).collect(),
    }
}

/// Renders a scenario as a fully explicit document (every optional field
/// populated, rotations as matrices).
pub fn scenario_to_doc(scenario: &Scenario) -> ScenarioDoc {
    ScenarioDoc {
        mass: scenario.mass,
        gravity: Some(scenario.gravity.z()),
        knots_per_phase: scenario.knots_per_phase,
        lambda_max: Some(scenario.lambda_max),
        leading_foot: Some(scenario.leading_foot.label().to_string()),
        initial_state: StateDoc {
            position: scenario.initial.position.into(),
            velocity: scenario.initial.velocity.into(),
        },
        target: TargetDoc {
            position: scenario.target.position.into(),
            velocity: scenario.target.velocity.into(),
            terminal_fraction: Some(scenario.target.terminal_fraction),
        },
        weights: Some(WeightsDoc {
            w_xd: Some(scenario.weights.w_xd),
            w_tau: Some(scenario.weights.w_tau),
            w_tau_max: Some(scenario.weights.w_tau_max),
            w_du: Some(scenario.weights.w_du),
            w_t: Some(scenario.weights.w_t),
            w_lambda: Some(scenario.weights.w_lambda),
            w_p: Some(scenario.weights.w_p),
        }),
        friction: FrictionDoc {
            mu_s: scenario.friction.mu_s,
            mu_t: scenario.friction.mu_t,
        },
        leg_limits: LegLimitsDoc {
            l_min: scenario.leg_limits.l_min,
            l_max: scenario.leg_limits.l_max,
        },
        torque_params: Some(TorqueParamsDoc {
            delta_l: scenario.torque_params.delta_left,
            delta_r: scenario.torque_params.delta_right,
        }),
        phases: scenario
            .phases
            .iter()
            .map(|p| PhaseDoc {
                mode: p.mode.label().to_string(),
                left_foot: p.left.as_ref().map(foot_to_doc),
                right_foot: p.right.as_ref().map(foot_to_doc),
                t_min: p.t_min,
                t_max: p.t_max,
                t_desired: p.t_desired,
            })
            .collect(),
    }
}

/// Writes a scenario as pretty-printed JSON.
pub fn write_scenario_file(scenario: &Scenario, path: &Path) -> Result<()> {
    write_json(path, &scenario_to_doc(scenario))
}

// ---------------------------------------------------------------------------
// Emitted documents
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlDoc {
    pub lambda_l: f64,
    pub lambda_r: f64,
    pub p_l: [f64; 3],
    pub p_r: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlackDoc {
    pub left: f64,
    pub right: f64,
}

/// Wire form of a [`PlanSolution`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanDocument {
    pub knots_per_phase: usize,
    pub num_phases: usize,
    pub mass: f64,
    pub states: Vec<StateDoc>,
    pub controls: Vec<ControlDoc>,
    pub accelerations: Vec<[f64; 3]>,
    pub durations: Vec<f64>,
    pub torque_slacks: SlackDoc,
    pub cost: CostBreakdown,
    pub report: SolveReport,
}

impl PlanDocument {
    pub fn new(plan: &PlanSolution, scenario: &Scenario) -> PlanDocument {
        PlanDocument {
            knots_per_phase: scenario.knots_per_phase,
            num_phases: scenario.num_phases(),
            mass: scenario.mass,
            states: plan
                .states
                .iter()
                .map(|s| StateDoc {
                    position: s.position.into(),
                    velocity: s.velocity.into(),
                })
                .collect(),
            controls: plan
                .controls
                .iter()
                .map(|u| ControlDoc {
                    lambda_l: u.lambda_left,
                    lambda_r: u.lambda_right,
                    p_l: u.cop_left.into(),
                    p_r: u.cop_right.into(),
                })
                .collect(),
            accelerations: plan.accelerations.iter().map(|a| (*a).into()).collect(),
            durations: plan.durations.clone(),
            torque_slacks: SlackDoc {
                left: plan.torque_slacks.0,
                right: plan.torque_slacks.1,
            },
            cost: plan.cost,
            report: plan.report.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonArmDoc {
    pub converged: bool,
    pub objective: f64,
    pub max_tau_lead: f64,
    pub tau_profile: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonDocument {
    pub conclusive: bool,
    pub leading_foot: String,
    pub relative_reduction: f64,
    pub with_task: ComparisonArmDoc,
    pub baseline: ComparisonArmDoc,
}

impl ComparisonDocument {
    pub fn new(comparison: &TorqueComparison) -> ComparisonDocument {
        let arm = |a: &crate::validation::TorqueArm| ComparisonArmDoc {
            converged: a.plan.report.status == SolveStatus::Converged,
            objective: a.plan.report.objective,
            max_tau_lead: a.max_tau_lead,
            tau_profile: a.tau_profile.clone(),
        };
        ComparisonDocument {
            conclusive: comparison.conclusive,
            leading_foot: comparison.leading_foot.label().to_string(),
            relative_reduction: comparison.relative_reduction,
            with_task: arm(&comparison.with_task),
            baseline: arm(&comparison.baseline),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value).map_err(|e| Error::Parse(e.to_string()))?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

/// Column order of `trajectory.csv`.
pub const TRAJECTORY_COLUMNS: [&str; 31] = [
    "t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az", "lambda_l", "lambda_r", "pl_x", "pl_y",
    "pr_x", "pr_y", "copl_wx", "copl_wy", "copl_wz", "copr_wx", "copr_wy", "copr_wz", "fl_x", "fl_y",
    "fl_z", "fr_x", "fr_y", "fr_z", "tau_l", "tau_r", "phase_index",
];

/// Writes the dense rollout as CSV, one row per sample, numbers with 11
/// significant digits.
pub fn write_trajectory_csv(path: &Path, plan: &PlanSolution, result: &RolloutResult) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", TRAJECTORY_COLUMNS.join(","))?;
    for (i, t) in result.times.iter().enumerate() {
        let state = &result.states[i];
        let accel = &result.accelerations[i];
        let u = &plan.controls[result.interval_indices[i]];
        let (copl, copr) = &result.cops_world[i];
        let zero = Vector3::zeros();
        let copl = copl.unwrap_or(zero);
        let copr = copr.unwrap_or(zero);
        let (fl, fr) = &result.forces[i];
        let (tau_l, tau_r) = result.taus[i];
        let mut row = Vec::with_capacity(31);
        for v in [
            *t,
            state.position.x,
            state.position.y,
            state.position.z,
            state.velocity.x,
            state.velocity.y,
            state.velocity.z,
            accel.x,
            accel.y,
            accel.z,
            u.lambda_left,
            u.lambda_right,
            u.cop_left.x,
            u.cop_left.y,
            u.cop_right.x,
            u.cop_right.y,
            copl.x,
            copl.y,
            copl.z,
            copr.x,
            copr.y,
            copr.z,
            fl.x,
            fl.y,
            fl.z,
            fr.x,
            fr.y,
            fr.z,
            tau_l,
            tau_r,
        ] {
            row.push(format!("{v:.10e}"));
        }
        row.push(result.phase_indices[i].to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Exit classification shared by the commands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandStatus {
    /// Converged and audit-clean (exit 0).
    Success,
    /// Ran, but not converged / not clean / inconclusive (exit 1).
    Failed,
    /// I/O or parse problems (exit 2).
    UsageError,
}

impl CommandStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            CommandStatus::Success => 0,
            CommandStatus::Failed => 1,
            CommandStatus::UsageError => 2,
        }
    }
}

/// Options of the `plan` command.
#[derive(Clone, Debug)]
pub struct PlanOptions {
    pub scenario: PathBuf,
    pub out_dir: PathBuf,
    /// Rollout substeps per interval.
    pub substeps: usize,
    pub max_outer_iterations: Option<usize>,
    pub constraint_tolerance: Option<f64>,
    pub gradient_mode: Option<GradientMode>,
}

impl PlanOptions {
    pub fn new(scenario: PathBuf, out_dir: PathBuf) -> PlanOptions {
        PlanOptions {
            scenario,
            out_dir,
            substeps: 20,
            max_outer_iterations: None,
            constraint_tolerance: None,
            gradient_mode: None,
        }
    }

    fn solver_config(&self) -> SolverConfig {
        let mut config = SolverConfig::default();
        if let Some(n) = self.max_outer_iterations {
            config.max_outer_iterations = n;
        }
        if let Some(tol) = self.constraint_tolerance {
            config.constraint_tolerance = tol;
        }
        if let Some(mode) = self.gradient_mode {
            config.gradient_mode = mode;
        }
        config
    }
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

struct PlannedScenario {
    scenario: Scenario,
    plan: PlanSolution,
    rollout: RolloutResult,
    audit: AuditReport,
}

fn plan_and_audit(scenario: Scenario, config: &SolverConfig, substeps: usize) -> Result<PlannedScenario> {
    let plan = crate::plan(&scenario, config)?;
    let result = rollout(&plan, &scenario, substeps)?;
    let audit = audit_constraints(&result, &scenario, AUDIT_TOLERANCE)?;
    Ok(PlannedScenario {
        scenario,
        plan,
        rollout: result,
        audit,
    })
}

/// Plans a scenario and writes `plan.json`, `trajectory.csv` and
/// `audit.json` into the output directory.
pub fn cmd_plan(options: &PlanOptions) -> CommandStatus {
    let scenario = match parse_scenario_file(&options.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return CommandStatus::UsageError;
        }
    };
    if let Err(e) = prepare_out_dir(&options.out_dir) {
        eprintln!("error: {e}");
        return CommandStatus::UsageError;
    }
    let config = options.solver_config();
    let planned = match plan_and_audit(scenario, &config, options.substeps) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return CommandStatus::Failed;
        }
    };

    let report = &planned.plan.report;
    println!(
        "status: {:?}  objective: {:.6}  max violation: {:.3e}  ({} outer / {} inner iterations, {:.2} s)",
        report.status,
        report.objective,
        report.max_constraint_violation,
        report.outer_iterations,
        report.inner_iterations,
        report.wall_time.as_secs_f64()
    );
    println!(
        "audit: {} violations above {:.1e} over {} samples (max residual {:.3e})",
        planned.audit.violations.len(),
        planned.audit.tolerance,
        planned.audit.samples,
        planned.audit.max_residual
    );

    let outputs: [(&str, Result<()>); 3] = [
        (
            "plan.json",
            write_json(
                &options.out_dir.join("plan.json"),
                &PlanDocument::new(&planned.plan, &planned.scenario),
            ),
        ),
        (
            "trajectory.csv",
            write_trajectory_csv(&options.out_dir.join("trajectory.csv"), &planned.plan, &planned.rollout),
        ),
        ("audit.json", write_json(&options.out_dir.join("audit.json"), &planned.audit)),
    ];
    for (name, outcome) in outputs {
        if let Err(e) = outcome {
            eprintln!("error writing {name}: {e}");
            return CommandStatus::UsageError;
        }
    }

    if report.status == SolveStatus::Converged && planned.audit.is_clean() {
        CommandStatus::Success
    } else {
        CommandStatus::Failed
    }
}

/// Options of the `compare-torque` command.
#[derive(Clone, Debug)]
pub struct CompareOptions {
    pub scenario: PathBuf,
    pub out_dir: PathBuf,
    pub substeps: usize,
    pub max_outer_iterations: Option<usize>,
    pub constraint_tolerance: Option<f64>,
    pub gradient_mode: Option<GradientMode>,
}

impl CompareOptions {
    pub fn new(scenario: PathBuf, out_dir: PathBuf) -> CompareOptions {
        CompareOptions {
            scenario,
            out_dir,
            substeps: 20,
            max_outer_iterations: None,
            constraint_tolerance: None,
            gradient_mode: None,
        }
    }
}

/// Solves the scenario with and without the torque tasks, writing
/// `comparison.json` plus a trajectory CSV per arm.
pub fn cmd_compare_torque(options: &CompareOptions) -> CommandStatus {
    let scenario = match parse_scenario_file(&options.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return CommandStatus::UsageError;
        }
    };
    if let Err(e) = prepare_out_dir(&options.out_dir) {
        eprintln!("error: {e}");
        return CommandStatus::UsageError;
    }
    let plan_options = PlanOptions {
        scenario: options.scenario.clone(),
        out_dir: options.out_dir.clone(),
        substeps: options.substeps,
        max_outer_iterations: options.max_outer_iterations,
        constraint_tolerance: options.constraint_tolerance,
        gradient_mode: options.gradient_mode,
    };
    let config = plan_options.solver_config();

    let comparison = match crate::validation::torque_reduction_experiment(&scenario, &config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return CommandStatus::Failed;
        }
    };

    println!(
        "max |tau_{}|: {:.4} with torque task, {:.4} without -> relative reduction {:.1}%",
        comparison.leading_foot,
        comparison.with_task.max_tau_lead,
        comparison.baseline.max_tau_lead,
        100.0 * comparison.relative_reduction
    );
    if !comparison.conclusive {
        println!("experiment inconclusive: at least one arm did not converge");
    }

    let mut baseline_scenario = scenario.clone();
    baseline_scenario.weights.w_tau = 0.0;
    baseline_scenario.weights.w_tau_max = 0.0;
    let arms: [(&str, &PlanSolution, &Scenario); 2] = [
        ("trajectory_with_torque_task.csv", &comparison.with_task.plan, &scenario),
        ("trajectory_baseline.csv", &comparison.baseline.plan, &baseline_scenario),
    ];
    for (name, plan, arm_scenario) in arms {
        let result = match rollout(plan, arm_scenario, options.substeps) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error rolling out {name}: {e}");
                return CommandStatus::Failed;
            }
        };
        if let Err(e) = write_trajectory_csv(&options.out_dir.join(name), plan, &result) {
            eprintln!("error writing {name}: {e}");
            return CommandStatus::UsageError;
        }
    }
    if let Err(e) = write_json(
        &options.out_dir.join("comparison.json"),
        &ComparisonDocument::new(&comparison),
    ) {
        eprintln!("error writing comparison.json: {e}");
        return CommandStatus::UsageError;
    }

    if comparison.conclusive {
        CommandStatus::Success
    } else {
        CommandStatus::Failed
    }
}
