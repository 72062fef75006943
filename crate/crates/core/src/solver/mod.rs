//! Smooth NLP solver: an augmented-Lagrangian outer loop around a
//! projected quasi-Newton (L-BFGS) inner minimizer.
//!
//! Equality constraints `c(x) = 0` enter the augmented Lagrangian as
//! `λ c + ρ c² / 2`; inequalities `g(x) <= 0` through the standard
//! `max(0, μ + ρ g)` form; variable bounds are handled by projection in
//! the inner loop and never penalized. Multipliers are updated when the
//! constraint violation meets the current acceptance threshold,
//! otherwise the penalty grows.
//!
//! Gradients come either from forward-mode dual numbers (exact for the
//! polynomial evaluators used here) or from central finite differences,
//! which double as the testing oracle for the algorithmic mode.
//!
//! Everything is deterministic: no randomization, no time-dependent
//! decisions, so identical problem, guess and configuration reproduce
//! the iterate sequence bit for bit.

pub mod dual;

pub use dual::{Dual, Real};

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How gradients are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Forward-mode dual numbers; exact derivatives of the elementary
    /// operations.
    #[default]
    Algorithmic,
    /// Central differences with step `1e-6 · max(1, |x_i|)` per
    /// coordinate.
    CentralDifference,
}

impl std::str::FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algorithmic" => Ok(GradientMode::Algorithmic),
            "central-difference" | "central_difference" => Ok(GradientMode::CentralDifference),
            other => Err(Error::invalid(format!(
                "unknown gradient mode `{other}` (expected `algorithmic` or `central-difference`)"
            ))),
        }
    }
}

/// A scalar function of the decision vector that can also run on dual
/// numbers, making it differentiable by the algorithmic mode.
pub trait ScalarFunction {
    fn eval(&self, x: &[f64]) -> f64;
    fn eval_dual(&self, x: &[Dual]) -> Dual;
}

pub(crate) fn gradient_into(f: &dyn ScalarFunction, x: &[f64], mode: GradientMode, out: &mut [f64]) {
    match mode {
        GradientMode::Algorithmic => {
            let mut duals: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
            for i in 0..x.len() {
                duals[i].eps = 1.0;
                out[i] = f.eval_dual(&duals).eps;
                duals[i].eps = 0.0;
            }
        }
        GradientMode::CentralDifference => {
            let mut work = x.to_vec();
            for i in 0..x.len() {
                let h = 1e-6 * x[i].abs().max(1.0);
                work[i] = x[i] + h;
                let above = f.eval(&work);
                work[i] = x[i] - h;
                let below = f.eval(&work);
                work[i] = x[i];
                out[i] = (above - below) / (2.0 * h);
            }
        }
    }
}

/// Gradient of `f` at `x` in the requested mode.
pub fn gradient(f: &dyn ScalarFunction, x: &[f64], mode: GradientMode) -> Result<Vec<f64>> {
    let value = f.eval(x);
    if !value.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "function evaluated to {value} at the differentiation point"
        )));
    }
    let mut out = vec![0.0; x.len()];
    gradient_into(f, x, mode, &mut out);
    if out.iter().any(|g| !g.is_finite()) {
        return Err(Error::NumericalFailure("gradient has non-finite components".into()));
    }
    Ok(out)
}

/// A bound-constrained program with equality and inequality constraints.
///
/// The weighted-gradient methods accumulate `Σ w_j ∇c_j` into `grad`
/// without zeroing it first; entries with zero weight may be skipped,
/// which is what makes inactive inequalities free.
pub trait Nlp {
    fn dim(&self) -> usize;
    fn lower_bounds(&self) -> &[f64];
    fn upper_bounds(&self) -> &[f64];
    fn num_equalities(&self) -> usize;
    fn num_inequalities(&self) -> usize;
    fn objective(&self, x: &[f64]) -> f64;
    fn equalities(&self, x: &[f64], out: &mut [f64]);
    fn inequalities(&self, x: &[f64], out: &mut [f64]);
    fn objective_gradient(&self, x: &[f64], mode: GradientMode, grad: &mut [f64]);
    fn equalities_gradient_weighted(&self, x: &[f64], weights: &[f64], mode: GradientMode, grad: &mut [f64]);
    fn inequalities_gradient_weighted(&self, x: &[f64], weights: &[f64], mode: GradientMode, grad: &mut [f64]);

    /// Named cost components for reporting; empty when the problem does
    /// not distinguish any.
    fn cost_breakdown(&self, _x: &[f64]) -> Vec<(String, f64)> {
        Vec::new()
    }

    /// Accumulates the diagonal Gauss-Newton curvature estimate
    /// `Σ_j w_j (∂c_j/∂x_i)²` over both constraint sets into `out` and
    /// returns true, or returns false when no estimate is available.
    /// The solver uses this to precondition the quasi-Newton iteration.
    fn constraint_curvature_diagonal(
        &self,
        _x: &[f64],
        _eq_weights: &[f64],
        _ineq_weights: &[f64],
        _mode: GradientMode,
        _out: &mut [f64],
    ) -> bool {
        false
    }
}

/// An [`Nlp`] assembled from whole-vector scalar functions. Gradient
/// evaluation is dense (one AD pass per coordinate per function), which
/// is fine for small problems and tests; the transcription provides the
/// sparse path for the planner itself.
pub struct DenseNlp {
    pub objective: Box<dyn ScalarFunction>,
    pub equalities: Vec<Box<dyn ScalarFunction>>,
    pub inequalities: Vec<Box<dyn ScalarFunction>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DenseNlp {
    /// Unbounded problem with no constraints.
    pub fn unconstrained(dim: usize, objective: Box<dyn ScalarFunction>) -> DenseNlp {
        DenseNlp {
            objective,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }
}

impl Nlp for DenseNlp {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    fn num_inequalities(&self) -> usize {
        self.inequalities.len()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    fn equalities(&self, x: &[f64], out: &mut [f64]) {
        for (slot, c) in out.iter_mut().zip(&self.equalities) {
            *slot = c.eval(x);
        }
    }

    fn inequalities(&self, x: &[f64], out: &mut [f64]) {
        for (slot, c) in out.iter_mut().zip(&self.inequalities) {
            *slot = c.eval(x);
        }
    }

    fn objective_gradient(&self, x: &[f64], mode: GradientMode, grad: &mut [f64]) {
        gradient_into(self.objective.as_ref(), x, mode, grad);
    }

    fn equalities_gradient_weighted(&self, x: &[f64], weights: &[f64], mode: GradientMode, grad: &mut [f64]) {
        let mut scratch = vec![0.0; x.len()];
        for (c, &w) in self.equalities.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            gradient_into(c.as_ref(), x, mode, &mut scratch);
            for (g, s) in grad.iter_mut().zip(&scratch) {
                *g += w * s;
            }
        }
    }

    fn inequalities_gradient_weighted(&self, x: &[f64], weights: &[f64], mode: GradientMode, grad: &mut [f64]) {
        let mut scratch = vec![0.0; x.len()];
        for (c, &w) in self.inequalities.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            gradient_into(c.as_ref(), x, mode, &mut scratch);
            for (g, s) in grad.iter_mut().zip(&scratch) {
                *g += w * s;
            }
        }
    }

    fn constraint_curvature_diagonal(
        &self,
        x: &[f64],
        eq_weights: &[f64],
        ineq_weights: &[f64],
        mode: GradientMode,
        out: &mut [f64],
    ) -> bool {
        let mut scratch = vec![0.0; x.len()];
        for (set, weights) in [(&self.equalities, eq_weights), (&self.inequalities, ineq_weights)] {
            for (c, &w) in set.iter().zip(weights) {
                if w == 0.0 {
                    continue;
                }
                gradient_into(c.as_ref(), x, mode, &mut scratch);
                for (o, s) in out.iter_mut().zip(&scratch) {
                    *o += w * s * s;
                }
            }
        }
        true
    }
}

/// Solver parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_outer_iterations: usize,
    /// Inner quasi-Newton iteration budget per outer iteration.
    pub max_inner_iterations: usize,
    /// Feasibility target on the max constraint violation.
    pub constraint_tolerance: f64,
    /// Target on the projected-gradient infinity norm of the augmented
    /// Lagrangian.
    pub optimality_tolerance: f64,
    pub initial_penalty: f64,
    pub penalty_growth_factor: f64,
    pub gradient_mode: GradientMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_outer_iterations: 80,
            max_inner_iterations: 2000,
            constraint_tolerance: 1e-6,
            optimality_tolerance: 1e-5,
            initial_penalty: 100.0,
            penalty_growth_factor: 10.0,
            gradient_mode: GradientMode::Algorithmic,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.constraint_tolerance > 0.0 && self.optimality_tolerance > 0.0) {
            return Err(Error::config("solver tolerances must be positive"));
        }
        if !(self.penalty_growth_factor > 1.0) {
            return Err(Error::config("penalty_growth_factor must exceed 1"));
        }
        if !(self.initial_penalty > 0.0) {
            return Err(Error::config("initial_penalty must be positive"));
        }
        Ok(())
    }
}

/// Outcome classification of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Feasible to `constraint_tolerance` and stationary to
    /// `optimality_tolerance`.
    Converged,
    /// Iteration budget exhausted before both tolerances were met.
    MaxIterations,
    /// The penalty saturated while the violation stagnated well above
    /// tolerance; the constraints are most likely inconsistent.
    Infeasible,
    /// Evaluations stayed non-finite even after step backtracking.
    NumericalFailure,
}

/// Diagnostics of a solve. Wall time is measured but excluded from
/// serialized reports so emitted files stay byte-identical across runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub objective: f64,
    pub max_constraint_violation: f64,
    /// Max constraint violation after each outer iteration.
    pub violation_history: Vec<f64>,
    pub cost_breakdown: Vec<(String, f64)>,
    /// True when the supplied guess had to be clipped into the bounds.
    pub guess_clipped: bool,
    #[serde(skip, default)]
    pub wall_time: Duration,
}

const PENALTY_CAP: f64 = 1e7;
const MULTIPLIER_CAP: f64 = 1e12;
const LBFGS_MEMORY: usize = 20;
const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
/// An outer iteration counts as making feasibility progress when it
/// shrinks the violation at least this much; otherwise the penalty grows.
/// Multiplier-only convergence is linear, so modest geometric progress is
/// accepted rather than escalating the penalty into ill-conditioning.
const PROGRESS_FACTOR: f64 = 0.75;

#[inline]
fn clamp_to(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(hi)
}

struct AugmentedLagrangian<'a, P: Nlp + ?Sized> {
    nlp: &'a P,
    mode: GradientMode,
    lambda: Vec<f64>,
    mu: Vec<f64>,
    rho: f64,
    c_eq: Vec<f64>,
    c_in: Vec<f64>,
    w_eq: Vec<f64>,
    w_in: Vec<f64>,
}

impl<'a, P: Nlp + ?Sized> AugmentedLagrangian<'a, P> {
    fn new(nlp: &'a P, mode: GradientMode, rho: f64) -> Self {
        AugmentedLagrangian {
            nlp,
            mode,
            lambda: vec![0.0; nlp.num_equalities()],
            mu: vec![0.0; nlp.num_inequalities()],
            rho,
            c_eq: vec![0.0; nlp.num_equalities()],
            c_in: vec![0.0; nlp.num_inequalities()],
            w_eq: vec![0.0; nlp.num_equalities()],
            w_in: vec![0.0; nlp.num_inequalities()],
        }
    }

    fn value(&mut self, x: &[f64]) -> f64 {
        let mut phi = self.nlp.objective(x);
        self.nlp.equalities(x, &mut self.c_eq);
        for (c, l) in self.c_eq.iter().zip(&self.lambda) {
            phi += l * c + 0.5 * self.rho * c * c;
        }
        self.nlp.inequalities(x, &mut self.c_in);
        for (g, m) in self.c_in.iter().zip(&self.mu) {
            let shifted = (m + self.rho * g).max(0.0);
            phi += (shifted * shifted - m * m) / (2.0 * self.rho);
        }
        phi
    }

    fn gradient(&mut self, x: &[f64], grad: &mut [f64]) {
        self.nlp.objective_gradient(x, self.mode, grad);
        self.nlp.equalities(x, &mut self.c_eq);
        for (w, (c, l)) in self.w_eq.iter_mut().zip(self.c_eq.iter().zip(&self.lambda)) {
            *w = l + self.rho * c;
        }
        self.nlp
            .equalities_gradient_weighted(x, &self.w_eq, self.mode, grad);
        self.nlp.inequalities(x, &mut self.c_in);
        for (w, (g, m)) in self.w_in.iter_mut().zip(self.c_in.iter().zip(&self.mu)) {
            *w = (m + self.rho * g).max(0.0);
        }
        self.nlp
            .inequalities_gradient_weighted(x, &self.w_in, self.mode, grad);
    }

    /// Max constraint violation at `x`; refreshes the residual buffers.
    fn violation(&mut self, x: &[f64]) -> f64 {
        self.nlp.equalities(x, &mut self.c_eq);
        self.nlp.inequalities(x, &mut self.c_in);
        let eq = self.c_eq.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let ineq = self.c_in.iter().fold(0.0f64, |m, g| m.max(g.max(0.0)));
        eq.max(ineq)
    }

    /// Residual magnitude of the inequality rows whose multiplier would
    /// stay positive after the next update. Feasible-side slack on such
    /// rows is invisible to the violation measure but still means the
    /// multipliers have not settled; uses the buffers refreshed by
    /// [`Self::violation`].
    fn active_complementarity(&self) -> f64 {
        self.mu
            .iter()
            .zip(&self.c_in)
            .filter(|(m, g)| **m + self.rho * **g > 0.0)
            .map(|(_, g)| g.abs())
            .fold(0.0f64, f64::max)
    }

    fn update_multipliers(&mut self) {
        for (l, c) in self.lambda.iter_mut().zip(&self.c_eq) {
            *l = clamp_to(*l + self.rho * c, -MULTIPLIER_CAP, MULTIPLIER_CAP);
        }
        for (m, g) in self.mu.iter_mut().zip(&self.c_in) {
            *m = clamp_to((*m + self.rho * g).max(0.0), 0.0, MULTIPLIER_CAP);
        }
    }

    /// Diagonal curvature estimate `1 + ρ Σ (∇c)²` over the equalities
    /// and the currently active inequalities; returns false when the
    /// problem offers no estimate.
    fn preconditioner(&mut self, x: &[f64], out: &mut [f64]) -> bool {
        out.fill(1.0);
        self.nlp.equalities(x, &mut self.c_eq);
        self.nlp.inequalities(x, &mut self.c_in);
        for w in self.w_eq.iter_mut() {
            *w = self.rho;
        }
        for (w, (g, m)) in self.w_in.iter_mut().zip(self.c_in.iter().zip(&self.mu)) {
            *w = if m + self.rho * g > 0.0 { self.rho } else { 0.0 };
        }
        self.nlp
            .constraint_curvature_diagonal(x, &self.w_eq, &self.w_in, self.mode, out)
    }
}

struct LbfgsMemory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl LbfgsMemory {
    fn new() -> Self {
        LbfgsMemory { pairs: VecDeque::new() }
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        let sn = norm2(&s);
        let yn = norm2(&y);
        if sy > 1e-10 * sn * yn && sy.is_finite() {
            if self.pairs.len() == LBFGS_MEMORY {
                self.pairs.pop_front();
            }
            self.pairs.push_back((s, y, 1.0 / sy));
        }
    }

    /// Two-loop recursion `d = -H g`, with `H0` either the usual scaled
    /// identity or the inverse of the supplied diagonal curvature
    /// estimate.
    fn direction(&self, g: &[f64], precond: Option<&[f64]>, d: &mut Vec<f64>) {
        d.clear();
        d.extend_from_slice(g);
        if self.pairs.is_empty() {
            match precond {
                Some(diag) => {
                    for (v, h) in d.iter_mut().zip(diag) {
                        *v = -*v / h;
                    }
                }
                None => {
                    let scale = -1.0 / norm2(g).max(1.0);
                    for v in d.iter_mut() {
                        *v *= scale;
                    }
                }
            }
            return;
        }
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, r) in self.pairs.iter().rev() {
            let a = r * dot(s, d);
            for (q, yi) in d.iter_mut().zip(y) {
                *q -= a * yi;
            }
            alphas.push(a);
        }
        let (s_last, y_last, _) = self.pairs.back().expect("nonempty");
        match precond {
            Some(diag) => {
                let y_dinv_y: f64 = y_last.iter().zip(diag).map(|(y, h)| y * y / h).sum();
                let gamma = dot(s_last, y_last) / y_dinv_y;
                for (q, h) in d.iter_mut().zip(diag) {
                    *q *= gamma / h;
                }
            }
            None => {
                let gamma = dot(s_last, y_last) / dot(y_last, y_last);
                for q in d.iter_mut() {
                    *q *= gamma;
                }
            }
        }
        for ((s, y, r), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = r * dot(y, d);
            for (q, si) in d.iter_mut().zip(s) {
                *q += (a - b) * si;
            }
        }
        for q in d.iter_mut() {
            *q = -*q;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = clamp_to(*v, *lo, *hi);
    }
}

/// Infinity norm of the projected gradient step `x - P(x - D⁻¹ g)`.
///
/// With the diagonal curvature estimate `D` this measures stationarity in
/// the Newton-step metric, so the test stays meaningful when the penalty
/// makes the raw gradient scale enormous; without an estimate it reduces
/// to the usual projected gradient norm.
fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64], precond: Option<&[f64]>) -> f64 {
    let mut norm = 0.0f64;
    for i in 0..x.len() {
        let scaled = match precond {
            Some(diag) => g[i] / diag[i],
            None => g[i],
        };
        let stepped = clamp_to(x[i] - scaled, lower[i], upper[i]);
        norm = norm.max((x[i] - stepped).abs());
    }
    norm
}

struct InnerOutcome {
    /// Max of the projected quasi-Newton step length and the scaled
    /// projected gradient step at exit.
    optimality: f64,
    iterations: usize,
    numerical_failure: bool,
}

/// Projected L-BFGS with backtracking Armijo line search.
///
/// The optimality measure is the larger of the projected quasi-Newton
/// step length and the Jacobi-scaled projected gradient step. Both are
/// displacement estimates toward the subproblem optimum, so they stay
/// meaningful when large penalties blow up the raw gradient scale, while
/// the quasi-Newton metric keeps flat (constraint-tangent) directions
/// honest.
fn inner_minimize<P: Nlp + ?Sized>(
    al: &mut AugmentedLagrangian<'_, P>,
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> InnerOutcome {
    let lower = al.nlp.lower_bounds().to_vec();
    let upper = al.nlp.upper_bounds().to_vec();
    let dim = x.len();

    let mut memory = LbfgsMemory::new();
    let mut g = vec![0.0; dim];
    let mut d = Vec::with_capacity(dim);
    let mut x_new = vec![0.0; dim];
    let mut g_new = vec![0.0; dim];

    let mut precond_buf = vec![1.0; dim];
    let mut have_precond = al.preconditioner(x, &mut precond_buf);

    let mut f = al.value(x);
    if !f.is_finite() {
        return InnerOutcome {
            optimality: f64::INFINITY,
            iterations: 0,
            numerical_failure: true,
        };
    }
    al.gradient(x, &mut g);

    let mut iterations = 0;
    let mut verified = false;
    loop {
        let precond = if have_precond { Some(&precond_buf[..]) } else { None };
        memory.direction(&g, precond, &mut d);
        if dot(&d, &g) >= 0.0 {
            memory.clear();
            memory.direction(&g, precond, &mut d);
        }
        // The quasi-Newton step length is a displacement estimate toward
        // the subproblem optimum, but only once the memory spans enough
        // directions; with an immature memory it can miss flat
        // (constraint-tangent) error entirely, so the raw projected
        // gradient gates termination until then.
        let newton_step = (0..dim)
            .map(|i| (clamp_to(x[i] + d[i], lower[i], upper[i]) - x[i]).abs())
            .fold(0.0f64, f64::max);
        let displacement = newton_step.max(projected_gradient_norm(x, &g, &lower, &upper, precond));
        let mature = memory.pairs.len() >= LBFGS_MEMORY.min(dim);
        let optimality = if mature {
            displacement
        } else {
            projected_gradient_norm(x, &g, &lower, &upper, None)
        };
        if optimality <= tol && !verified {
            // The diagonal estimate goes stale when the active set moves;
            // re-verify a measure-based exit against a fresh one.
            have_precond = al.preconditioner(x, &mut precond_buf);
            verified = true;
            continue;
        }
        if optimality <= tol || iterations >= max_iters {
            return InnerOutcome {
                optimality,
                iterations,
                numerical_failure: false,
            };
        }
        verified = false;
        iterations += 1;

        let mut search = line_search(al, x, &d, f, &g, &lower, &upper, &mut x_new);
        if matches!(search, SearchOutcome::Failed { .. }) && !memory.pairs.is_empty() {
            // The quasi-Newton direction can be useless near the bounds;
            // retry once along the projected steepest descent.
            memory.clear();
            memory.direction(&g, precond, &mut d);
            search = line_search(al, x, &d, f, &g, &lower, &upper, &mut x_new);
        }
        match search {
            SearchOutcome::Accepted { value } => {
                al.gradient(&x_new, &mut g_new);
                let s: Vec<f64> = (0..dim).map(|i| x_new[i] - x[i]).collect();
                let y: Vec<f64> = (0..dim).map(|i| g_new[i] - g[i]).collect();
                memory.push(s, y);
                x.copy_from_slice(&x_new);
                std::mem::swap(&mut g, &mut g_new);
                f = value;
            }
            SearchOutcome::Failed { saw_finite } => {
                // No descent along the quasi-Newton nor the steepest
                // direction: the subproblem is solved as far as the
                // arithmetic allows, so report the displacement estimate.
                return InnerOutcome {
                    optimality: displacement,
                    iterations,
                    numerical_failure: !saw_finite,
                };
            }
        }
    }
}

enum SearchOutcome {
    Accepted { value: f64 },
    Failed { saw_finite: bool },
}

/// Backtracking Armijo on the projected step `P(x + α d)`; writes the
/// accepted point into `x_new`.
#[allow(clippy::too_many_arguments)]
fn line_search<P: Nlp + ?Sized>(
    al: &mut AugmentedLagrangian<'_, P>,
    x: &[f64],
    d: &[f64],
    f: f64,
    g: &[f64],
    lower: &[f64],
    upper: &[f64],
    x_new: &mut [f64],
) -> SearchOutcome {
    let dim = x.len();
    let mut alpha = 1.0;
    let mut saw_finite = false;
    while alpha >= MIN_STEP {
        for i in 0..dim {
            x_new[i] = clamp_to(x[i] + alpha * d[i], lower[i], upper[i]);
        }
        let f_new = al.value(x_new);
        if f_new.is_finite() {
            saw_finite = true;
            let decrease: f64 = (0..dim).map(|i| g[i] * (x_new[i] - x[i])).sum();
            if decrease < 0.0 && f_new <= f + ARMIJO_C1 * decrease {
                return SearchOutcome::Accepted { value: f_new };
            }
            if decrease == 0.0 && x_new == x {
                // Fully blocked by the bounds; shrinking alpha cannot help.
                return SearchOutcome::Failed { saw_finite };
            }
        }
        alpha *= 0.5;
    }
    SearchOutcome::Failed { saw_finite }
}

/// Minimizes the program from `guess` (clipped into bounds if needed).
///
/// Returns the best feasible-leaning iterate found together with a
/// [`SolveReport`]; a non-`Converged` status still carries a usable
/// vector.
pub fn solve<P: Nlp + ?Sized>(nlp: &P, guess: &[f64], config: &SolverConfig) -> (Vec<f64>, SolveReport) {
    let start = Instant::now();
    let dim = nlp.dim();
    assert_eq!(guess.len(), dim, "guess length must match the problem dimension");

    let mut x = guess.to_vec();
    let before = x.clone();
    project(&mut x, nlp.lower_bounds(), nlp.upper_bounds());
    let guess_clipped = x != before;

    let constrained = nlp.num_equalities() + nlp.num_inequalities() > 0;
    let mut al = AugmentedLagrangian::new(nlp, config.gradient_mode, config.initial_penalty);

    // Inner solves start loose and tighten geometrically down to the
    // optimality tolerance; multipliers update every outer iteration and
    // the penalty grows only when feasibility progress stalls.
    let mut omega = if constrained { 0.1 } else { config.optimality_tolerance };

    let mut history = Vec::new();
    let mut total_inner = 0;
    let mut status = SolveStatus::MaxIterations;
    let mut outer_done = 0;

    let mut best_x = x.clone();
    let mut best_violation = f64::INFINITY;
    let mut best_objective = f64::INFINITY;
    let mut previous_violation = f64::INFINITY;
    let mut stagnant_at_cap = 0usize;
    let mut rejections_in_a_row = 0usize;
    // Stationarity floor; tightened when inner solves exit immediately
    // while feasibility still lags, which happens when the scaled
    // projected gradient underestimates the remaining coupling.
    let mut omega_floor = config.optimality_tolerance;
    let trace = std::env::var_os("STEPUP_SOLVER_TRACE").is_some();

    // Safeguarded outer iteration: a candidate that regresses the max
    // violation is rejected (iterate and multipliers restored) and the
    // subproblem made stricter instead, so the accepted violation
    // sequence is non-increasing once the penalty starts moving.
    let mut x_accepted = x.clone();
    let mut lambda_snapshot = al.lambda.clone();
    let mut mu_snapshot = al.mu.clone();

    for outer in 0..config.max_outer_iterations {
        outer_done = outer + 1;
        let inner_tol = omega.max(omega_floor);
        let outcome = inner_minimize(&mut al, &mut x, inner_tol, config.max_inner_iterations);
        total_inner += outcome.iterations;

        if outcome.numerical_failure {
            status = SolveStatus::NumericalFailure;
            break;
        }

        let violation = al.violation(&x);
        // Regression means losing feasibility above the tolerance band;
        // wiggles below the band are solver-resolution noise and both
        // harmless and unavoidable.
        let regressed = violation > previous_violation.max(config.constraint_tolerance);
        if trace {
            eprintln!(
                "outer {outer:3}  rho {:9.1e}  viol {:11.4e}  opt {:10.3e} (tol {:8.1e})  inner {:5}{}",
                al.rho,
                violation,
                outcome.optimality,
                inner_tol,
                outcome.iterations,
                if regressed { "  regressed" } else { "" }
            );
        }

        // A candidate may converge the solve even while the retained
        // iterate is older: feasibility on two consecutive outers plus
        // stationarity (the second feasible outer is the dual polish that
        // removes the primal bias of inexact multipliers).
        if violation <= config.constraint_tolerance
            && previous_violation <= config.constraint_tolerance
            && al.active_complementarity() <= config.constraint_tolerance
            && outcome.optimality <= config.optimality_tolerance
        {
            history.push(violation);
            status = SolveStatus::Converged;
            best_x.copy_from_slice(&x);
            break;
        }

        if regressed {
            // The retained iterate keeps its place; the recorded
            // violation sequence stays non-increasing.
            history.push(previous_violation);
            rejections_in_a_row += 1;
            if rejections_in_a_row < 3 {
                // Restore and escalate: a larger penalty while it can
                // still grow, a stricter subproblem afterwards.
                x.copy_from_slice(&x_accepted);
                al.lambda.copy_from_slice(&lambda_snapshot);
                al.mu.copy_from_slice(&mu_snapshot);
                if al.rho < PENALTY_CAP {
                    al.rho = (al.rho * config.penalty_growth_factor).min(PENALTY_CAP);
                } else {
                    omega_floor = (0.1 * omega_floor).max(1e-10);
                }
            } else {
                // Probational continuation: some problems must pass
                // through worse violations, so keep searching from the
                // excursion while the retained iterate stays the answer
                // until the excursion beats it.
                al.update_multipliers();
                al.rho = (al.rho * config.penalty_growth_factor).min(PENALTY_CAP);
                omega = (0.1 * omega).max(omega_floor);
            }
            continue;
        }
        rejections_in_a_row = 0;
        history.push(violation);

        // Feasible-leaning preference: within tolerance the objective
        // decides, otherwise lower violation wins.
        let objective = nlp.objective(&x);
        let feasible = violation <= config.constraint_tolerance;
        let best_feasible = best_violation <= config.constraint_tolerance;
        let improved = match (feasible, best_feasible) {
            (true, true) => objective < best_objective,
            (true, false) => true,
            (false, true) => false,
            (false, false) => {
                violation < best_violation * (1.0 - 1e-12)
                    || (violation <= best_violation && objective < best_objective)
            }
        };
        if improved {
            best_violation = violation;
            best_objective = objective;
            best_x.copy_from_slice(&x);
        }

        x_accepted.copy_from_slice(&x);
        lambda_snapshot.copy_from_slice(&al.lambda);
        mu_snapshot.copy_from_slice(&al.mu);

        // First-order multiplier step (the residual buffers are fresh
        // from the violation evaluation above).
        al.update_multipliers();

        let made_progress = violation <= (PROGRESS_FACTOR * previous_violation).max(config.constraint_tolerance);
        if !made_progress {
            if al.rho >= PENALTY_CAP {
                stagnant_at_cap += 1;
                let hopeless = violation > (1e3 * config.constraint_tolerance).max(1e-3);
                if stagnant_at_cap >= 5 && violation > previous_violation * 0.9 && hopeless {
                    status = SolveStatus::Infeasible;
                    break;
                }
            }
            al.rho = (al.rho * config.penalty_growth_factor).min(PENALTY_CAP);
        }
        if outcome.iterations < 10 && violation > config.constraint_tolerance {
            omega_floor = (0.1 * omega_floor).max(1e-10);
        }
        previous_violation = violation;
        omega = (0.1 * omega).max(omega_floor);
    }

    let final_violation = al.violation(&best_x);
    if status == SolveStatus::MaxIterations
        && al.rho >= PENALTY_CAP
        && final_violation > (1e3 * config.constraint_tolerance).max(1e-3)
    {
        status = SolveStatus::Infeasible;
    }

    let report = SolveReport {
        status,
        outer_iterations: outer_done,
        inner_iterations: total_inner,
        objective: nlp.objective(&best_x),
        max_constraint_violation: final_violation,
        violation_history: history,
        cost_breakdown: nlp.cost_breakdown(&best_x),
        guess_clipped,
        wall_time: start.elapsed(),
    };
    (best_x, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct NormSquared;

    impl ScalarFunction for NormSquared {
        fn eval(&self, x: &[f64]) -> f64 {
            x.iter().map(|v| v * v).sum()
        }

        fn eval_dual(&self, x: &[Dual]) -> Dual {
            x.iter().fold(Dual::ZERO, |acc, v| acc + *v * *v)
        }
    }

    struct Constant(f64);

    impl ScalarFunction for Constant {
        fn eval(&self, _x: &[f64]) -> f64 {
            self.0
        }

        fn eval_dual(&self, _x: &[Dual]) -> Dual {
            Dual::constant(self.0)
        }
    }

    fn rosenbrock<S: Real>(x: &[S]) -> S {
        let a = x[1] - x[0] * x[0];
        let b = -x[0] + 1.0;
        a * a * 100.0 + b * b
    }

    struct Rosenbrock;

    impl ScalarFunction for Rosenbrock {
        fn eval(&self, x: &[f64]) -> f64 {
            rosenbrock(x)
        }

        fn eval_dual(&self, x: &[Dual]) -> Dual {
            rosenbrock(x)
        }
    }

    /// `w · Σ (x_i - t_i)²` on selected coordinates.
    struct ShiftedQuadratic {
        targets: Vec<(usize, f64)>,
    }

    impl ScalarFunction for ShiftedQuadratic {
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

    /// `Σ x_i + offset`
    struct SumWithOffset(f64);

    impl ScalarFunction for SumWithOffset {
        fn eval(&self, x: &[f64]) -> f64 {
            x.iter().sum::<f64>() + self.0
        }

        fn eval_dual(&self, x: &[Dual]) -> Dual {
            x.iter().fold(Dual::constant(self.0), |acc, v| acc + *v)
        }
    }

    #[test]
    fn gradient_of_norm_squared() {
        let g = gradient(&NormSquared, &[1.0, 2.0], GradientMode::Algorithmic).unwrap();
        assert_relative_eq!(g[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(g[1], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = gradient(&Constant(7.5), &[0.3, -0.4, 2.0], GradientMode::Algorithmic).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_rejects_non_finite_function() {
        struct Bad;
        impl ScalarFunction for Bad {
            fn eval(&self, _: &[f64]) -> f64 {
                f64::NAN
            }
            fn eval_dual(&self, _: &[Dual]) -> Dual {
                Dual::constant(f64::NAN)
            }
        }
        assert!(matches!(
            gradient(&Bad, &[1.0], GradientMode::Algorithmic).unwrap_err(),
            Error::NumericalFailure(_)
        ));
    }

    /// Deterministic pseudo-random stream.
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

    struct FrictionResidual;

    impl ScalarFunction for FrictionResidual {
        fn eval(&self, x: &[f64]) -> f64 {
            crate::constraints::friction_cone_residual(&[x[0], x[1], x[2]], 0.7)
        }

        fn eval_dual(&self, x: &[Dual]) -> Dual {
            crate::constraints::friction_cone_residual(&[x[0], x[1], x[2]], 0.7)
        }
    }

    #[test]
    fn algorithmic_gradient_matches_central_differences() {
        let mut rng = SplitMix64(7);
        for _ in 0..20 {
            let point = [
                rng.in_range(-1.0, 1.0),
                rng.in_range(-1.0, 1.0),
                rng.in_range(0.2, 1.5),
            ];
            let ad = gradient(&FrictionResidual, &point, GradientMode::Algorithmic).unwrap();
            let fd = gradient(&FrictionResidual, &point, GradientMode::CentralDifference).unwrap();
            for (a, f) in ad.iter().zip(&fd) {
                let scale = a.abs().max(f.abs()).max(1.0);
                assert!((a - f).abs() <= 1e-5 * scale, "ad {a} vs fd {f}");
            }
        }
    }

    #[test]
    fn bound_active_quadratic() {
        // min (x - 1)^2 subject to x >= 2: the bound is active at x = 2.
        let nlp = DenseNlp {
            objective: Box::new(ShiftedQuadratic { targets: vec![(0, 1.0)] }),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lower: vec![2.0],
            upper: vec![f64::INFINITY],
        };
        let (x, report) = solve(&nlp, &[5.0], &SolverConfig::default());
        assert_eq!(report.status, SolveStatus::Converged);
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn equality_constrained_quadratic() {
        // min (x - 3)^2 + (y + 1)^2 subject to x + y = 0; KKT solution
        // (2, -2).
        let nlp = DenseNlp {
            objective: Box::new(ShiftedQuadratic { targets: vec![(0, 3.0), (1, -1.0)] }),
            equalities: vec![Box::new(SumWithOffset(0.0))],
            inequalities: Vec::new(),
            lower: vec![f64::NEG_INFINITY; 2],
            upper: vec![f64::INFINITY; 2],
        };
        let (x, report) = solve(&nlp, &[0.0, 0.0], &SolverConfig::default());
        assert_eq!(report.status, SolveStatus::Converged);
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-4);
        assert_relative_eq!(x[1], -2.0, epsilon = 1e-4);
        assert!(report.max_constraint_violation <= 1e-6);
    }

    #[test]
    fn rosenbrock_unconstrained() {
        let nlp = DenseNlp::unconstrained(2, Box::new(Rosenbrock));
        let (x, report) = solve(&nlp, &[-1.2, 1.0], &SolverConfig::default());
        assert_eq!(report.status, SolveStatus::Converged);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn guess_outside_bounds_is_clipped_and_recorded() {
        let nlp = DenseNlp {
            objective: Box::new(ShiftedQuadratic { targets: vec![(0, 0.0)] }),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lower: vec![1.0],
            upper: vec![4.0],
        };
        let (x, report) = solve(&nlp, &[100.0], &SolverConfig::default());
        assert!(report.guess_clipped);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn inequality_constrained_quadratic() {
        // min x^2 + y^2 subject to 1 - x - y <= 0; optimum (0.5, 0.5).
        struct OneMinusSum;
        impl ScalarFunction for OneMinusSum {
            fn eval(&self, x: &[f64]) -> f64 {
                1.0 - x[0] - x[1]
            }
            fn eval_dual(&self, x: &[Dual]) -> Dual {
                -x[0] - x[1] + 1.0
            }
        }
        let nlp = DenseNlp {
            objective: Box::new(NormSquared),
            equalities: Vec::new(),
            inequalities: vec![Box::new(OneMinusSum)],
            lower: vec![f64::NEG_INFINITY; 2],
            upper: vec![f64::INFINITY; 2],
        };
        let (x, report) = solve(&nlp, &[0.0, 0.0], &SolverConfig::default());
        assert_eq!(report.status, SolveStatus::Converged);
        assert_relative_eq!(x[0], 0.5, epsilon = 1e-4);
        assert_relative_eq!(x[1], 0.5, epsilon = 1e-4);
    }

    #[test]
    fn infeasible_problem_is_flagged() {
        // x = 1 and x = -1 cannot both hold.
        let nlp = DenseNlp {
            objective: Box::new(NormSquared),
            equalities: vec![Box::new(SumWithOffset(1.0)), Box::new(SumWithOffset(-1.0))],
            inequalities: Vec::new(),
            lower: vec![f64::NEG_INFINITY],
            upper: vec![f64::INFINITY],
        };
        let config = SolverConfig {
            max_outer_iterations: 80,
            ..SolverConfig::default()
        };
        let (_, report) = solve(&nlp, &[0.3], &config);
        assert!(
            matches!(report.status, SolveStatus::Infeasible | SolveStatus::MaxIterations),
            "got {:?}",
            report.status
        );
        assert!(report.max_constraint_violation > 0.5);
    }

    #[test]
    fn solve_is_deterministic() {
        let make = || DenseNlp {
            objective: Box::new(Rosenbrock),
            equalities: vec![Box::new(SumWithOffset(-1.5))],
            inequalities: Vec::new(),
            lower: vec![f64::NEG_INFINITY; 2],
            upper: vec![f64::INFINITY; 2],
        };
        let config = SolverConfig::default();
        let (x1, r1) = solve(&make(), &[0.0, 0.0], &config);
        let (x2, r2) = solve(&make(), &[0.0, 0.0], &config);
        assert_eq!(x1, x2, "iterates must be bit-identical");
        assert_eq!(r1.violation_history, r2.violation_history);
        assert_eq!(r1.inner_iterations, r2.inner_iterations);
    }
}
