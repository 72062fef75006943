//! The NLP solver on small classic problems, away from any robotics:
//! a bound-active quadratic, an equality-constrained quadratic with a
//! known KKT point, an inequality-constrained quadratic, and the
//! Rosenbrock function.

use stepup_planner::solver::{solve, DenseNlp, Dual, ScalarFunction, SolverConfig};

struct Quadratic {
    targets: Vec<(usize, f64)>,
}

impl ScalarFunction for Quadratic {
    fn eval(&self, x: &[f64]) -> f64 {
        self.targets.iter().map(|&(i, t)| (x[i] - t) * (x[i] - t)).sum()
    }

    fn eval_dual(&self, x: &[Dual]) -> Dual {
        self.targets.iter().fold(Dual::ZERO, |acc, &(i, t)| {
            let d = x[i] - t;
            acc + d * d
        })
    }
}

struct SumMinusOne;

impl ScalarFunction for SumMinusOne {
    fn eval(&self, x: &[f64]) -> f64 {
        1.0 - x.iter().sum::<f64>()
    }

    fn eval_dual(&self, x: &[Dual]) -> Dual {
        x.iter().fold(Dual::constant(1.0), |acc, v| acc - *v)
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

fn main() {
    let config = SolverConfig::default();

    let bound_active = DenseNlp {
        objective: Box::new(Quadratic { targets: vec![(0, 1.0)] }),
        equalities: Vec::new(),
        inequalities: Vec::new(),
        lower: vec![2.0],
        upper: vec![f64::INFINITY],
    };
    let (x, report) = solve(&bound_active, &[5.0], &config);
    println!("min (x-1)^2 s.t. x >= 2      -> x = {:.6}  ({:?})", x[0], report.status);

    let equality = DenseNlp {
        objective: Box::new(Quadratic { targets: vec![(0, 3.0), (1, -1.0)] }),
        equalities: vec![Box::new(Sum)],
        inequalities: Vec::new(),
        lower: vec![f64::NEG_INFINITY; 2],
        upper: vec![f64::INFINITY; 2],
    };
    let (x, report) = solve(&equality, &[0.0, 0.0], &config);
    println!(
        "min (x-3)^2+(y+1)^2 s.t. x+y=0 -> ({:.6}, {:.6})  ({:?})",
        x[0], x[1], report.status
    );

    let inequality = DenseNlp {
        objective: Box::new(Quadratic { targets: vec![(0, 0.0), (1, 0.0)] }),
        equalities: Vec::new(),
        inequalities: vec![Box::new(SumMinusOne)],
        lower: vec![f64::NEG_INFINITY; 2],
        upper: vec![f64::INFINITY; 2],
    };
    let (x, report) = solve(&inequality, &[0.0, 0.0], &config);
    println!(
        "min x^2+y^2 s.t. x+y >= 1      -> ({:.6}, {:.6})  ({:?})",
        x[0], x[1], report.status
    );

    let rosenbrock = DenseNlp::unconstrained(2, Box::new(Rosenbrock));
    let (x, report) = solve(&rosenbrock, &[-1.2, 1.0], &config);
    println!(
        "Rosenbrock from (-1.2, 1)      -> ({:.6}, {:.6})  ({:?}, {} inner iterations)",
        x[0], x[1], report.status, report.inner_iterations
    );
}
