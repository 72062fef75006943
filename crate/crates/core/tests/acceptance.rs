//! Acceptance suite: every criterion the artifact must meet, one test
//! per criterion, each printing a PASS line with the measured numbers
//! (run with `--nocapture` to see them).

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::Vector3;

use stepup_planner::solver::{solve, DenseNlp, Dual, ScalarFunction};
use stepup_planner::transcription::Term;
use stepup_planner::validation::{rollout_with, Integrator, PlanSolution};
use stepup_planner::{
    audit_constraints, build_layout, build_nlp, initial_guess, plan, rollout, torque_reduction_experiment,
    CoMState, ContactMode, ControlInput, GradientMode, Phase, Scenario, Side, SolveStatus, SolverConfig,
};

/// Deterministic pseudo-random stream for sampling test points.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        (z ^ (z >> 31)) as f64 / u64::MAX as f64
    }

    fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

struct CanonicalRun {
    scenario: Scenario,
    solution: PlanSolution,
    solve_time: Duration,
}

fn canonical_run() -> &'static CanonicalRun {
    static RUN: OnceLock<CanonicalRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let scenario = Scenario::canonical_step_up();
        let start = Instant::now();
        let solution = plan(&scenario, &SolverConfig::default()).expect("planning must not error");
        let solve_time = start.elapsed();
        CanonicalRun {
            scenario,
            solution,
            solve_time,
        }
    })
}

#[test]
fn canonical_step_up_converges_within_budget() {
    let run = canonical_run();
    let report = &run.solution.report;
    assert_eq!(run.scenario.knots_per_phase, 20);
    assert_eq!(run.scenario.num_phases(), 5);
    assert_eq!(report.status, SolveStatus::Converged, "solver status");
    assert!(
        report.max_constraint_violation <= 1e-6,
        "max violation {} above 1e-6",
        report.max_constraint_violation
    );
    assert!(
        run.solve_time.as_secs_f64() <= 60.0,
        "solve took {:.1} s",
        run.solve_time.as_secs_f64()
    );
    println!(
        "PASS: 0.31 m step-up converged, max violation {:.2e}, {:.1} s wall time",
        report.max_constraint_violation,
        run.solve_time.as_secs_f64()
    );
}

#[test]
fn torque_task_reduces_leading_heuristic_by_ten_percent() {
    let scenario = Scenario::canonical_step_up();
    let comparison = torque_reduction_experiment(&scenario, &SolverConfig::default()).unwrap();
    assert!(comparison.conclusive, "both arms must converge");
    assert!(
        comparison.relative_reduction >= 0.10,
        "relative reduction {:.3} below 10%",
        comparison.relative_reduction
    );
    println!(
        "PASS: torque heuristic max |tau_{}| {:.3} -> {:.3}, reduction {:.1}%",
        comparison.leading_foot,
        comparison.baseline.max_tau_lead,
        comparison.with_task.max_tau_lead,
        100.0 * comparison.relative_reduction
    );
}

#[test]
fn rk4_rollout_matches_knots_within_consistency_bound() {
    let run = canonical_run();
    let result = rollout(&run.solution, &run.scenario, 50).unwrap();
    let mut worst = 0.0f64;
    for d in &result.knot_discrepancies {
        assert!(
            d.max_position_error <= d.bound,
            "phase {}: discrepancy {:.3e} above bound {:.3e}",
            d.phase,
            d.max_position_error,
            d.bound
        );
        worst = worst.max(d.max_position_error);
    }
    println!(
        "PASS: RK4 rollout matches shooting knots, worst per-phase discrepancy {:.2} mm within its 10·max|a|·dt² bound",
        1e3 * worst
    );
}

#[test]
fn dense_constraint_audit_is_clean() {
    let run = canonical_run();
    let result = rollout(&run.solution, &run.scenario, 50).unwrap();
    let audit = audit_constraints(&result, &run.scenario, 1e-4).unwrap();
    assert!(
        audit.is_clean(),
        "{} residuals above 1e-4, worst {:?}",
        audit.violations.len(),
        audit.violations.first()
    );
    // Unilaterality on the plan itself.
    for u in &run.solution.controls {
        assert!(u.lambda_left >= -1e-9 && u.lambda_right >= -1e-9);
    }
    // Terminal tracking quality of the dense rollout.
    assert!(
        result.terminal_position_error <= 0.05,
        "terminal position error {:.3} m",
        result.terminal_position_error
    );
    assert!(
        result.terminal_velocity_error <= 0.1,
        "terminal velocity error {:.3} m/s",
        result.terminal_velocity_error
    );
    println!(
        "PASS: dense audit clean at 1e-4 over {} samples (max residual {:.2e}), terminal error {:.1} mm / {:.3} m/s",
        audit.samples, audit.max_residual, 1e3 * result.terminal_position_error, result.terminal_velocity_error
    );
}

fn check_term_gradients(terms: &[&Term], lower: &[f64], upper: &[f64], reference: &[f64], rng: &mut SplitMix64) {
    for term in terms {
        let arity = term.arity();
        for _ in 0..10 {
            let mut local = Vec::with_capacity(arity);
            for &var in term.variables() {
                let lo = lower[var].max(reference[var] - 0.5);
                let hi = upper[var].min(reference[var] + 0.5);
                local.push(if lo == hi { lo } else { rng.in_range(lo, hi) });
            }
            let ad = term.gradient_local(&local, GradientMode::Algorithmic);
            let fd = term.gradient_local(&local, GradientMode::CentralDifference);
            for (slot, (a, f)) in ad.iter().zip(&fd).enumerate() {
                let scale = a.abs().max(f.abs()).max(1.0);
                assert!(
                    (a - f).abs() <= 1e-5 * scale,
                    "{}[{slot}]: algorithmic {a} vs central {f}",
                    term.label()
                );
            }
        }
    }
}

#[test]
fn algorithmic_gradients_match_central_differences_everywhere() {
    let scenario = Scenario::canonical_step_up();
    let nlp = build_nlp(&scenario).unwrap();
    let layout = nlp.layout();
    let reference = initial_guess(&scenario, layout);
    let mut rng = SplitMix64(0x5eed);

    let cost_terms: Vec<&Term> = nlp.cost_terms().iter().map(|(_, t)| t).collect();
    let eq_terms: Vec<&Term> = nlp.equality_terms().iter().collect();
    let ineq_terms: Vec<&Term> = nlp.inequality_terms().iter().collect();
    let total = cost_terms.len() + eq_terms.len() + ineq_terms.len();
    check_term_gradients(&cost_terms, layout.lower_bounds(), layout.upper_bounds(), &reference, &mut rng);
    check_term_gradients(&eq_terms, layout.lower_bounds(), layout.upper_bounds(), &reference, &mut rng);
    check_term_gradients(&ineq_terms, layout.lower_bounds(), layout.upper_bounds(), &reference, &mut rng);
    println!(
        "PASS: algorithmic vs central-difference gradients agree to 1e-5 for {total} evaluators x 10 points"
    );
}

#[test]
fn initial_guess_follows_the_initialization_scheme() {
    let scenario = Scenario::canonical_step_up();
    let layout = build_layout(&scenario).unwrap();
    let guess = initial_guess(&scenario, &layout);

    let knots = layout.num_knots();
    let x0 = scenario.initial.position;
    let xd = scenario.target.position;
    for k in 0..knots {
        let t = k as f64 / (knots - 1) as f64;
        let expected = x0 + (xd - x0) * t;
        for d in 0..3 {
            assert_eq!(guess[layout.position_range(k).start + d], expected[d]);
        }
        assert!(guess[layout.velocity_range(k)].iter().all(|v| *v == 0.0));
    }
    for k in 0..layout.total_intervals() {
        assert!(guess[layout.acceleration_range(k)].iter().all(|v| *v == 0.0));
        for side in Side::BOTH {
            assert_eq!(guess[layout.lambda_index(side, k)], 0.0);
            assert!(guess[layout.cop_range(side, k)].iter().all(|v| *v == 0.0));
        }
    }
    for (i, phase) in scenario.phases.iter().enumerate() {
        assert_eq!(guess[layout.duration_index(i)], phase.t_desired);
    }
    for side in Side::BOTH {
        assert_eq!(guess[layout.slack_index(side)], 0.0);
    }
    println!("PASS: initial guess is T_d durations + linear CoM interpolation + zeros elsewhere");
}

#[test]
fn flight_rollout_matches_ballistic_closed_form() {
    let mut scenario = Scenario::canonical_step_up();
    scenario.phases = vec![Phase {
        mode: ContactMode::Flight,
        left: None,
        right: None,
        t_min: 0.2,
        t_max: 1.0,
        t_desired: 0.5,
    }];
    scenario.knots_per_phase = 10;
    scenario.initial = CoMState::new(Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.4, -0.1, 1.2));

    // Knots from the exact Taylor chain (exact for constant gravity).
    let n = scenario.knots_per_phase;
    let dt = scenario.phases[0].t_desired / n as f64;
    let g = scenario.gravity.vector();
    let mut states = vec![scenario.initial];
    for k in 0..n {
        states.push(stepup_planner::model::taylor_step(&states[k], &(-g), dt).unwrap());
    }
    let plan = PlanSolution {
        states,
        controls: vec![ControlInput::zero(); n],
        accelerations: vec![-g; n],
        durations: vec![scenario.phases[0].t_desired],
        torque_slacks: (0.0, 0.0),
        cost: Default::default(),
        report: stepup_planner::SolveReport {
            status: SolveStatus::Converged,
            outer_iterations: 0,
            inner_iterations: 0,
            objective: 0.0,
            max_constraint_violation: 0.0,
            violation_history: Vec::new(),
            cost_breakdown: Vec::new(),
            guess_clipped: false,
            wall_time: Duration::ZERO,
        },
    };

    let result = rollout(&plan, &scenario, 50).unwrap();
    let p0 = scenario.initial.position;
    let v0 = scenario.initial.velocity;
    let mut worst = 0.0f64;
    for (t, state) in result.times.iter().zip(&result.states) {
        let expected = p0 + v0 * *t - g * (0.5 * t * t);
        worst = worst.max((state.position - expected).norm());
    }
    assert!(worst <= 1e-8, "ballistic deviation {worst:.3e}");

    // The Taylor integrator at one substep must reproduce the knots.
    let taylor = rollout_with(&plan, &scenario, 1, Integrator::TaylorSecondOrder).unwrap();
    for (k, knot) in plan.states.iter().enumerate() {
        assert!((taylor.states[k].position - knot.position).norm() <= 1e-12);
    }
    println!("PASS: flight rollout matches the ballistic closed form to {worst:.1e} (<= 1e-8)");
}

#[test]
fn epigraph_slacks_recover_max_of_squares() {
    struct LinearCost(f64);
    impl ScalarFunction for LinearCost {
        fn eval(&self, x: &[f64]) -> f64 {
            self.0 * x[0]
        }
        fn eval_dual(&self, x: &[Dual]) -> Dual {
            x[0] * self.0
        }
    }
    struct SlackBound(f64);
    impl ScalarFunction for SlackBound {
        fn eval(&self, x: &[f64]) -> f64 {
            self.0 - x[0]
        }
        fn eval_dual(&self, x: &[Dual]) -> Dual {
            -x[0] + self.0
        }
    }

    let config = SolverConfig {
        constraint_tolerance: 1e-11,
        optimality_tolerance: 1e-10,
        ..SolverConfig::default()
    };
    let mut rng = SplitMix64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let knots = 3 + (rng.next_f64() * 17.0) as usize;
        let taus: Vec<f64> = (0..knots).map(|_| rng.in_range(-3.0, 3.0)).collect();
        let expected = taus.iter().map(|t| t * t).fold(0.0f64, f64::max);

        let nlp = DenseNlp {
            objective: Box::new(LinearCost(1.0)),
            equalities: Vec::new(),
            inequalities: taus.iter().map(|t| Box::new(SlackBound(t * t)) as Box<dyn ScalarFunction>).collect(),
            lower: vec![0.0],
            upper: vec![f64::INFINITY],
        };
        let (x, report) = solve(&nlp, &[0.0], &config);
        assert_eq!(report.status, SolveStatus::Converged);
        worst = worst.max((x[0] - expected).abs());
    }
    assert!(worst <= 1e-9, "worst slack error {worst:.3e}");
    println!("PASS: optimal epigraph slacks equal max tau² on 100 random instances (worst error {worst:.1e})");
}

#[test]
fn solver_reaches_known_minimizers() {
    struct ShiftedQuadratic(Vec<(usize, f64)>);
    impl ScalarFunction for ShiftedQuadratic {
        fn eval(&self, x: &[f64]) -> f64 {
            self.0.iter().map(|&(i, t)| (x[i] - t) * (x[i] - t)).sum()
        }
        fn eval_dual(&self, x: &[Dual]) -> Dual {
            self.0.iter().fold(Dual::ZERO, |acc, &(i, t)| {
                let d = x[i] - t;
                acc + d * d
            })
        }
    }
    struct Sum;
    impl ScalarFunction for Sum {
        fn eval(&self, x: &[f64]) -> f64 {
            x.iter().sum()
        }
        fn eval_dual(&self, x: &[Dual]) -> Dual {
            x.iter().fold(Dual::ZERO, |acc, v| acc + *v)
        }
    }
    struct Rosenbrock;
    impl ScalarFunction for Rosenbrock {
        fn eval(&self, x: &[f64]) -> f64 {
            let a = x[1] - x[0] * x[0];
            let b = 1.0 - x[0];
            100.0 * a * a + b * b
        }
        fn eval_dual(&self, x: &[Dual]) -> Dual {
            let a = x[1] - x[0] * x[0];
            let b = -x[0] + 1.0;
            a * a * 100.0 + b * b
        }
    }

    let config = SolverConfig::default();

    // Bound-active quadratic: min (x-1)² with x >= 2.
    let bound = DenseNlp {
        objective: Box::new(ShiftedQuadratic(vec![(0, 1.0)])),
        equalities: Vec::new(),
        inequalities: Vec::new(),
        lower: vec![2.0],
        upper: vec![f64::INFINITY],
    };
    let (x, report) = solve(&bound, &[5.0], &config);
    assert_eq!(report.status, SolveStatus::Converged);
    assert!((x[0] - 2.0).abs() <= 1e-4, "bound-active solution {x:?}");

    // Equality-constrained quadratic: min (x-3)² + (y+1)² with x + y = 0.
    let equality = DenseNlp {
        objective: Box::new(ShiftedQuadratic(vec![(0, 3.0), (1, -1.0)])),
        equalities: vec![Box::new(Sum)],
        inequalities: Vec::new(),
        lower: vec![f64::NEG_INFINITY; 2],
        upper: vec![f64::INFINITY; 2],
    };
    let (x, report) = solve(&equality, &[0.0, 0.0], &config);
    assert_eq!(report.status, SolveStatus::Converged);
    assert!((x[0] - 2.0).abs() <= 1e-4 && (x[1] + 2.0).abs() <= 1e-4, "KKT solution {x:?}");

    // Rosenbrock from the classic start.
    let rosenbrock = DenseNlp::unconstrained(2, Box::new(Rosenbrock));
    let (x, report) = solve(&rosenbrock, &[-1.2, 1.0], &config);
    assert_eq!(report.status, SolveStatus::Converged);
    assert!((x[0] - 1.0).abs() <= 1e-4 && (x[1] - 1.0).abs() <= 1e-4, "Rosenbrock solution {x:?}");

    println!("PASS: bound-active, equality-constrained and Rosenbrock oracles all within 1e-4");
}

#[test]
fn violation_history_is_monotone_after_first_penalty_update() {
    let run = canonical_run();
    let history = &run.solution.report.violation_history;
    let tol = SolverConfig::default().constraint_tolerance;
    assert!(history.len() >= 2, "history too short: {history:?}");
    // The penalty first moves once the initial outer iterations stop
    // making sufficient feasibility progress; from the second entry on
    // the recorded violations must never increase. Entries below the
    // constraint tolerance are solver-resolution noise and compare as
    // equal.
    for (i, pair) in history.windows(2).enumerate().skip(1) {
        assert!(
            pair[1].max(tol) <= pair[0].max(tol),
            "violation increased at outer {}: {:.3e} -> {:.3e}",
            i + 1,
            pair[0],
            pair[1]
        );
    }
    println!(
        "PASS: canonical violation history is non-increasing after the first penalty update ({} outers)",
        history.len()
    );
}
