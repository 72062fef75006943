//! Trajectory optimization for humanoid step-up motions.
//!
//! The planner works on a reduced model of the centroidal dynamics: the
//! center of mass is driven by gravity plus up to two line forces acting
//! from the foot centers of pressure through the CoM (a variable-height
//! double pendulum). Planning runs over a fixed sequence of contact
//! phases whose durations are decision variables, transcribed by direct
//! multiple shooting into a smooth NLP and solved with an augmented
//! Lagrangian method. Solutions are re-verified by independent RK4
//! forward integration and a dense constraint audit.
//!
//! Start with [`Scenario::canonical_step_up`] and [`plan`]:
//!
//! ```no_run
//! use stepup_planner::{plan, SolverConfig, Scenario};
//!
//! let scenario = Scenario::canonical_step_up();
//! let solution = plan(&scenario, &SolverConfig::default()).unwrap();
//! println!("{:?}", solution.report.status);
//! ```
//!
//! The `examples/` directory exercises each capability end to end; the
//! `stepup` binary wraps planning and the torque comparison behind a
//! small CLI.

pub mod cli;
pub mod constraints;
pub mod error;
pub mod model;
pub mod objectives;
pub mod solver;
pub mod transcription;
pub mod validation;

pub use error::{Error, Result};
pub use model::{CoMState, ContactMode, ControlInput, FootSpec, Gravity, Side};
pub use objectives::{TaskWeights, TerminalTarget, TorqueHeuristicParams};
pub use solver::{GradientMode, SolveReport, SolveStatus, SolverConfig};
pub use transcription::{build_layout, build_nlp, initial_guess, Phase, Scenario};
pub use validation::{audit_constraints, rollout, torque_reduction_experiment, PlanSolution, RolloutResult};

/// Plans a scenario end to end: transcribe, build the initial guess,
/// solve, and extract the solution.
///
/// A non-converged solve still returns the best iterate found; check
/// `solution.report.status` before trusting the plan.
pub fn plan(scenario: &Scenario, config: &SolverConfig) -> Result<PlanSolution> {
    config.validate()?;
    let nlp = build_nlp(scenario)?;
    let guess = initial_guess(scenario, nlp.layout());
    let (x, report) = solver::solve(&nlp, &guess, config);
    PlanSolution::from_decision_vector(scenario, nlp.layout(), &x, report)
}
