//! Per-knot inequality constraints on contact forces and kinematics.
//!
//! Every constraint is expressed as a residual that is satisfied when
//! nonpositive:
//!
//! - CoP inside the support polygon, as halfspace rows `A p - b <= 0`;
//! - static friction in squared form,
//!   `r_x² + r_y² - μ_s² r_z² <= 0` with `r = R'(x - x_* - R p)`;
//! - torsional friction, two rows `F R'(x - x_* - R p) <= 0` built from
//!   the CoP lever and the coefficient `μ_t`;
//! - leg length in squared form, `l_min² - ‖x - x_*‖²` and
//!   `‖x - x_*‖² - l_max²`.
//!
//! The squared friction form drops the `λ` factor: whenever `λ = 0` the
//! raw cone constraint is vacuous, so the simplified residual is enforced
//! at every contact knot regardless of `λ`, which additionally keeps the
//! CoM on the correct side of the contact plane.

use nalgebra::{Matrix2x3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::model::{validate_polygon, CoMState, ContactMode, ControlInput, FootSpec, Side};
use crate::solver::Real;

/// Halfspace description `A p <= b` of a convex foot polygon interior.
///
/// Rows are unit-normalized so residuals are distances in meters. The
/// third column of `A` is zero because the CoP z component is fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfspaceSet {
    rows: Vec<(Vector3<f64>, f64)>,
}

impl HalfspaceSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row as `(a, b)` with the constraint `a · p <= b`.
    pub fn row(&self, i: usize) -> (&Vector3<f64>, f64) {
        (&self.rows[i].0, self.rows[i].1)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Vector3<f64>, f64)> {
        self.rows.iter().map(|(a, b)| (a, *b))
    }

    /// Residuals `a · p - b` for all rows.
    pub fn residuals(&self, p: &Vector3<f64>) -> Vec<f64> {
        self.rows.iter().map(|(a, b)| a.dot(p) - b).collect()
    }

    /// True when every row is satisfied within `tol`.
    pub fn contains(&self, p: &Vector3<f64>, tol: f64) -> bool {
        self.rows.iter().all(|(a, b)| a.dot(p) - b <= tol)
    }
}

/// Builds the halfspace form of a convex counter-clockwise polygon.
///
/// For each edge the outward normal is the edge direction rotated by
/// -90 degrees; a point is inside the polygon iff it is on the inner
/// side of every edge.
pub fn polygon_to_halfspaces(polygon: &[Vector2<f64>]) -> Result<HalfspaceSet> {
    validate_polygon(polygon)?;
    let n = polygon.len();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let edge = b - a;
        let normal = Vector2::new(edge.y, -edge.x).normalize();
        rows.push((Vector3::new(normal.x, normal.y, 0.0), normal.dot(&a)));
    }
    Ok(HalfspaceSet { rows })
}

/// Friction coefficients of a contact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrictionParams {
    /// Static friction coefficient, dimensionless and positive.
    pub mu_s: f64,
    /// Torsional friction coefficient [m], nonnegative.
    pub mu_t: f64,
}

impl FrictionParams {
    pub fn new(mu_s: f64, mu_t: f64) -> Result<Self> {
        let params = FrictionParams { mu_s, mu_t };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu_s.is_finite() || self.mu_s <= 0.0 {
            return Err(Error::invalid(format!("mu_s must be positive, got {}", self.mu_s)));
        }
        if !self.mu_t.is_finite() || self.mu_t < 0.0 {
            return Err(Error::invalid(format!("mu_t must be nonnegative, got {}", self.mu_t)));
        }
        Ok(())
    }
}

/// Bounds on the CoM-to-foot distance, standing in for leg kinematics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegLimits {
    pub l_min: f64,
    pub l_max: f64,
}

impl LegLimits {
    pub fn new(l_min: f64, l_max: f64) -> Result<Self> {
        let limits = LegLimits { l_min, l_max };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_min.is_finite() && self.l_max.is_finite() && 0.0 < self.l_min && self.l_min < self.l_max) {
            return Err(Error::invalid(format!(
                "leg limits must satisfy 0 < l_min < l_max, got ({}, {})",
                self.l_min, self.l_max
            )));
        }
        Ok(())
    }
}

/// Scalar-generic constraint formulas shared by direct evaluation and by
/// the transcription terms, so both routes run identical arithmetic.
pub(crate) mod kernel {
    use crate::solver::Real;

    /// `r = R'(x - x_*) - p`: the CoM offset from the CoP, rotated into
    /// foot coordinates (uses R'R = I to avoid rotating p twice).
    #[inline]
    pub fn rotated_offset<S: Real>(
        rotation: &[[f64; 3]; 3],
        foot_position: &[f64; 3],
        x: &[S; 3],
        p: &[S; 3],
    ) -> [S; 3] {
        let mut r = [S::ZERO; 3];
        for (c, out) in r.iter_mut().enumerate() {
            let mut acc = S::ZERO;
            for d in 0..3 {
                acc = acc + (x[d] - foot_position[d]) * rotation[d][c];
            }
            *out = acc - p[c];
        }
        r
    }

    /// Squared friction-cone residual `r_x² + r_y² - μ_s² r_z²`.
    #[inline]
    pub fn friction_residual<S: Real>(r: &[S; 3], mu_s: f64) -> S {
        r[0] * r[0] + r[1] * r[1] - (r[2] * r[2]) * (mu_s * mu_s)
    }

    /// One torsional row `(±c - d) · r` with `c = (-p_y, p_x, 0)` and
    /// `d = (0, 0, μ_t)`; `upper` selects the `+c` row.
    #[inline]
    pub fn torsion_residual<S: Real>(r: &[S; 3], p: &[S; 3], mu_t: f64, upper: bool) -> S {
        let twist = p[0] * r[1] - p[1] * r[0];
        let damped = r[2] * mu_t;
        if upper {
            twist - damped
        } else {
            -twist - damped
        }
    }

    /// Squared leg-length residual against `bound²`; `is_min` selects
    /// `l_min² - d²`, otherwise `d² - l_max²`.
    #[inline]
    pub fn leg_residual<S: Real>(x: &[S; 3], foot_position: &[f64; 3], bound_sq: f64, is_min: bool) -> S {
        let mut d2 = S::ZERO;
        for d in 0..3 {
            let delta = x[d] - foot_position[d];
            d2 = d2 + delta * delta;
        }
        if is_min {
            -d2 + bound_sq
        } else {
            d2 - bound_sq
        }
    }
}

/// Squared friction-cone residual for an offset `r` already rotated into
/// foot coordinates; nonpositive means inside the cone.
pub fn friction_cone_residual<S: Real>(r: &[S; 3], mu_s: f64) -> S {
    kernel::friction_residual(r, mu_s)
}

/// Torsional friction matrix `F` for a CoP offset `p` (with `p_z = 0`),
/// rows `(c - d)'` and `(-c - d)'` with `c = (-p_y, p_x, 0)`,
/// `d = (0, 0, μ_t)`. The constraint `F R'(x - x_* - R p) <= 0` bounds the
/// normal torque by `±μ_t` times the normal force component.
pub fn torsional_matrix(p: &Vector3<f64>, mu_t: f64) -> Matrix2x3<f64> {
    let c = Vector3::new(-p.y, p.x, 0.0);
    let d = Vector3::new(0.0, 0.0, mu_t);
    Matrix2x3::from_rows(&[(c - d).transpose(), (-c - d).transpose()])
}

/// Squared leg-length residual pair `(l_min² - d², d² - l_max²)` with
/// `d = ‖x - x_*‖`; both nonpositive means the leg is within limits.
pub fn leg_length_residuals(x: &Vector3<f64>, foot_position: &Vector3<f64>, limits: &LegLimits) -> (f64, f64) {
    let d2 = (x - foot_position).norm_squared();
    (limits.l_min * limits.l_min - d2, d2 - limits.l_max * limits.l_max)
}

/// Identifies a single constraint row in reports and audits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstraintId {
    pub kind: ConstraintKind,
    pub side: Side,
    /// Halfspace row index for [`ConstraintKind::CopHalfspace`].
    pub row: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    CopHalfspace,
    FrictionCone,
    TorsionUpper,
    TorsionLower,
    LegMin,
    LegMax,
    LambdaNonnegative,
}

impl ConstraintKind {
    pub fn label(self) -> &'static str {
        match self {
            ConstraintKind::CopHalfspace => "cop_halfspace",
            ConstraintKind::FrictionCone => "friction_cone",
            ConstraintKind::TorsionUpper => "torsion_upper",
            ConstraintKind::TorsionLower => "torsion_lower",
            ConstraintKind::LegMin => "leg_min",
            ConstraintKind::LegMax => "leg_max",
            ConstraintKind::LambdaNonnegative => "lambda_nonnegative",
        }
    }
}

impl std::fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.row {
            Some(row) => write!(f, "{}_{}[{}]", self.kind.label(), self.side, row),
            None => write!(f, "{}_{}", self.kind.label(), self.side),
        }
    }
}

/// Named residual values for one evaluation; nonpositive means satisfied.
#[derive(Clone, Debug, Default)]
pub struct ConstraintResiduals {
    pub entries: Vec<(ConstraintId, f64)>,
}

impl ConstraintResiduals {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Largest residual, or negative infinity when empty.
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().fold(f64::NEG_INFINITY, |m, (_, v)| m.max(*v))
    }

    /// Entries exceeding `tol`.
    pub fn violations(&self, tol: f64) -> impl Iterator<Item = &(ConstraintId, f64)> {
        self.entries.iter().filter(move |(_, v)| *v > tol)
    }

    /// True when all residuals are within `tol`.
    pub fn satisfied(&self, tol: f64) -> bool {
        self.entries.iter().all(|(_, v)| *v <= tol)
    }
}

/// One foot's contact data with its polygon prebuilt as halfspaces.
///
/// Foot poses are fixed per phase, so the halfspaces are computed once
/// at construction.
#[derive(Clone, Debug)]
pub struct ContactFoot {
    pub spec: FootSpec,
    pub halfspaces: HalfspaceSet,
}

impl ContactFoot {
    pub fn new(spec: FootSpec) -> Result<Self> {
        spec.validate()?;
        let halfspaces = polygon_to_halfspaces(&spec.polygon)?;
        Ok(ContactFoot { spec, halfspaces })
    }
}

/// Everything needed to evaluate the contact constraints of one phase.
#[derive(Clone, Debug)]
pub struct KnotConstraintContext {
    pub mode: ContactMode,
    pub left: Option<ContactFoot>,
    pub right: Option<ContactFoot>,
    pub friction: FrictionParams,
    pub leg_limits: LegLimits,
}

impl KnotConstraintContext {
    pub fn foot(&self, side: Side) -> Option<&ContactFoot> {
        match side {
            Side::Left => self.left.as_ref(),
            Side::Right => self.right.as_ref(),
        }
    }
}

/// Evaluates every contact constraint of one knot.
///
/// For each foot in contact this emits the CoP halfspace rows, the
/// friction-cone residual, both torsional rows and both leg-length rows,
/// plus a `-λ` row recording unilaterality. Feet not in contact
/// contribute nothing (their multipliers are pinned to zero by variable
/// bounds in the transcription).
pub fn evaluate_knot_constraints(
    state: &CoMState,
    context: &KnotConstraintContext,
    u: &ControlInput,
) -> Result<ConstraintResiduals> {
    state.validate()?;
    u.validate()?;
    context.friction.validate()?;
    context.leg_limits.validate()?;

    let mut residuals = ConstraintResiduals::default();
    for side in context.mode.active_sides() {
        let foot = context
            .foot(side)
            .ok_or_else(|| Error::invalid(format!("mode {} requires a {side} foot", context.mode.label())))?;
        let p = u.cop(side);

        for (row, value) in foot.halfspaces.residuals(p).into_iter().enumerate() {
            residuals.entries.push((
                ConstraintId { kind: ConstraintKind::CopHalfspace, side, row: Some(row) },
                value,
            ));
        }

        let rotation = matrix_rows(&foot.spec);
        let foot_position: [f64; 3] = foot.spec.position.into();
        let x: [f64; 3] = state.position.into();
        let p_arr: [f64; 3] = (*p).into();
        let r = kernel::rotated_offset(&rotation, &foot_position, &x, &p_arr);

        residuals.entries.push((
            ConstraintId { kind: ConstraintKind::FrictionCone, side, row: None },
            kernel::friction_residual(&r, context.friction.mu_s),
        ));
        residuals.entries.push((
            ConstraintId { kind: ConstraintKind::TorsionUpper, side, row: None },
            kernel::torsion_residual(&r, &p_arr, context.friction.mu_t, true),
        ));
        residuals.entries.push((
            ConstraintId { kind: ConstraintKind::TorsionLower, side, row: None },
            kernel::torsion_residual(&r, &p_arr, context.friction.mu_t, false),
        ));
        let (leg_min, leg_max) = leg_length_residuals(&state.position, &foot.spec.position, &context.leg_limits);
        residuals.entries.push((
            ConstraintId { kind: ConstraintKind::LegMin, side, row: None },
            leg_min,
        ));
        residuals.entries.push((
            ConstraintId { kind: ConstraintKind::LegMax, side, row: None },
            leg_max,
        ));
        residuals.entries.push((
            ConstraintId { kind: ConstraintKind::LambdaNonnegative, side, row: None },
            -u.lambda(side),
        ));
    }
    Ok(residuals)
}

pub(crate) fn matrix_rows(spec: &FootSpec) -> [[f64; 3]; 3] {
    let r = &spec.rotation;
    [
        [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
        [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
        [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rectangle() -> Vec<Vector2<f64>> {
        vec![
            Vector2::new(0.1, -0.05),
            Vector2::new(0.1, 0.05),
            Vector2::new(-0.1, 0.05),
            Vector2::new(-0.1, -0.05),
        ]
    }

    /// Winding-number style point-in-polygon oracle: inside iff the point
    /// is on the left of every CCW edge (boundary counts as inside).
    fn inside_oracle(polygon: &[Vector2<f64>], p: Vector2<f64>, tol: f64) -> bool {
        let n = polygon.len();
        (0..n).all(|i| {
            let a = polygon[i];
            let b = polygon[(i + 1) % n];
            (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= -tol
        })
    }

    /// Deterministic pseudo-random stream for grid-free sampling.
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

    #[test]
    fn rectangle_halfspaces_match_box_bounds() {
        // Grid oracle over [-0.2, 0.2]^2: membership must agree with the
        // point-in-convex-polygon test at every node.
        let polygon = rectangle();
        let hs = polygon_to_halfspaces(&polygon).unwrap();
        assert_eq!(hs.len(), 4);
        for i in 0..100 {
            for j in 0..100 {
                let p = Vector2::new(-0.2 + 0.4 * i as f64 / 99.0, -0.2 + 0.4 * j as f64 / 99.0);
                let expected = p.x.abs() <= 0.1 + 1e-12 && p.y.abs() <= 0.05 + 1e-12;
                let got = hs.contains(&Vector3::new(p.x, p.y, 0.0), 1e-12);
                assert_eq!(got, expected, "disagreement at {p:?}");
            }
        }
    }

    #[test]
    fn halfspaces_agree_with_winding_oracle_on_random_points() {
        let polygon = vec![
            Vector2::new(0.12, -0.02),
            Vector2::new(0.08, 0.06),
            Vector2::new(-0.05, 0.07),
            Vector2::new(-0.11, -0.01),
            Vector2::new(-0.02, -0.08),
        ];
        let hs = polygon_to_halfspaces(&polygon).unwrap();
        let mut rng = SplitMix64(42);
        for _ in 0..1000 {
            let p = Vector2::new(rng.in_range(-0.2, 0.2), rng.in_range(-0.2, 0.2));
            let expected = inside_oracle(&polygon, p, 1e-12);
            let got = hs.contains(&Vector3::new(p.x, p.y, 0.0), 1e-12);
            assert_eq!(got, expected, "disagreement at {p:?}");
        }
    }

    #[test]
    fn vertices_and_centroid_feasibility() {
        let polygon = rectangle();
        let hs = polygon_to_halfspaces(&polygon).unwrap();
        for v in &polygon {
            assert!(hs.contains(&Vector3::new(v.x, v.y, 0.0), 1e-12));
        }
        let centroid = Vector3::new(0.0, 0.0, 0.0);
        for (a, b) in hs.rows() {
            assert!(a.dot(&centroid) < b, "centroid must be strictly interior");
        }
    }

    #[test]
    fn far_exterior_point_violates_some_row() {
        let hs = polygon_to_halfspaces(&rectangle()).unwrap();
        let outside = Vector3::new(1.0, 1.0, 0.0);
        assert!(hs.residuals(&outside).iter().any(|r| *r > 0.0));
    }

    #[test]
    fn too_few_vertices_is_degenerate() {
        let two = vec![Vector2::new(0.0, 0.0), Vector2::new(1.0, 0.0)];
        assert!(matches!(
            polygon_to_halfspaces(&two).unwrap_err(),
            Error::DegeneratePolygon(_)
        ));
    }

    #[test]
    fn friction_residual_examples() {
        // 3-4-5 puts the offset exactly on the cone boundary.
        assert_relative_eq!(friction_cone_residual(&[3.0, 4.0, 5.0], 1.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(friction_cone_residual(&[1.0, 1.0, 2.0], 1.0), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn torsional_matrix_zero_lever() {
        let f = torsional_matrix(&Vector3::zeros(), 0.1);
        assert_relative_eq!(f[(0, 0)], 0.0);
        assert_relative_eq!(f[(0, 1)], 0.0);
        assert_relative_eq!(f[(0, 2)], -0.1);
        assert_relative_eq!(f[(1, 2)], -0.1);
        // F r <= 0 collapses to r_z >= 0.
        let r = Vector3::new(0.3, -0.2, 0.5);
        let v = f * r;
        assert!(v[0] <= 0.0 && v[1] <= 0.0);
        let r_neg = Vector3::new(0.3, -0.2, -0.5);
        let v_neg = f * r_neg;
        assert!(v_neg[0] > 0.0);
    }

    #[test]
    fn torsional_matrix_hand_value() {
        let f = torsional_matrix(&Vector3::new(0.1, 0.0, 0.0), 0.1);
        assert_relative_eq!(f[(0, 0)], 0.0);
        assert_relative_eq!(f[(0, 1)], 0.1);
        assert_relative_eq!(f[(0, 2)], -0.1);
        assert_relative_eq!(f[(1, 0)], 0.0);
        assert_relative_eq!(f[(1, 1)], -0.1);
        assert_relative_eq!(f[(1, 2)], -0.1);
    }

    #[test]
    fn zero_torsional_budget_pins_twist_to_zero() {
        // With mu_t = 0 the two rows force the twist component to be both
        // <= 0 and >= 0.
        let p = Vector3::new(0.05, -0.02, 0.0);
        let f = torsional_matrix(&p, 0.0);
        let r = Vector3::new(0.4, 0.3, 1.0);
        let twist = p.x * r.y - p.y * r.x;
        let v = f * r;
        assert_relative_eq!(v[0], twist, epsilon = 1e-15);
        assert_relative_eq!(v[1], -twist, epsilon = 1e-15);
    }

    #[test]
    fn leg_length_examples() {
        let limits = LegLimits::new(0.5, 1.2).unwrap();
        let (lo, hi) = leg_length_residuals(&Vector3::new(0.0, 0.0, 1.0), &Vector3::zeros(), &limits);
        assert_relative_eq!(lo, -0.75, epsilon = 1e-12);
        assert_relative_eq!(hi, -0.44, epsilon = 1e-12);

        // Distance exactly l_max -> upper residual 0.
        let (_, at_max) = leg_length_residuals(&Vector3::new(0.0, 0.0, 1.2), &Vector3::zeros(), &limits);
        assert_relative_eq!(at_max, 0.0, epsilon = 1e-12);

        // Collapsed leg violates the lower bound by l_min².
        let (collapsed, _) = leg_length_residuals(&Vector3::zeros(), &Vector3::zeros(), &limits);
        assert_relative_eq!(collapsed, 0.25, epsilon = 1e-12);
    }

    fn context(mode: ContactMode) -> KnotConstraintContext {
        let left = FootSpec::flat(Vector3::new(0.0, 0.1, 0.0), 0.1, 0.05).unwrap();
        let right = FootSpec::flat(Vector3::new(0.0, -0.1, 0.0), 0.1, 0.05).unwrap();
        KnotConstraintContext {
            mode,
            left: Some(ContactFoot::new(left).unwrap()),
            right: Some(ContactFoot::new(right).unwrap()),
            friction: FrictionParams::new(0.7, 0.1).unwrap(),
            leg_limits: LegLimits::new(0.5, 1.2).unwrap(),
        }
    }

    #[test]
    fn flight_mode_has_no_contact_constraints() {
        let state = CoMState::new(Vector3::new(0.0, 0.0, 1.0), Vector3::zeros());
        let res = evaluate_knot_constraints(&state, &context(ContactMode::Flight), &ControlInput::zero()).unwrap();
        assert!(res.is_empty());
    }

    #[test]
    fn double_support_interior_point_is_strictly_feasible() {
        let state = CoMState::new(Vector3::new(0.0, 0.0, 1.0), Vector3::zeros());
        let u = ControlInput {
            lambda_left: 4.9,
            lambda_right: 4.9,
            ..ControlInput::zero()
        };
        let res = evaluate_knot_constraints(&state, &context(ContactMode::Double), &u).unwrap();
        // 4 halfspaces + friction + 2 torsion + 2 leg + lambda row, per foot.
        assert_eq!(res.len(), 20);
        for (id, value) in &res.entries {
            assert!(*value < 0.0, "{id} expected strictly feasible, got {value}");
        }
    }

    #[test]
    fn cop_at_vertex_touches_its_halfspaces() {
        let state = CoMState::new(Vector3::new(0.0, 0.1, 1.0), Vector3::zeros());
        let u = ControlInput {
            lambda_left: 9.8,
            cop_left: Vector3::new(0.1, 0.05, 0.0),
            ..ControlInput::zero()
        };
        let res = evaluate_knot_constraints(&state, &context(ContactMode::LeftOnly), &u).unwrap();
        let touching = res
            .entries
            .iter()
            .filter(|(id, v)| id.kind == ConstraintKind::CopHalfspace && v.abs() <= 1e-12)
            .count();
        assert_eq!(touching, 2, "a rectangle vertex lies on exactly two edges");
    }

    proptest! {
        /// The friction residual only sees the tangential magnitude, so it
        /// is invariant under rotations of (r_x, r_y) about z.
        #[test]
        fn friction_residual_rotation_invariant(
            rx in -2.0f64..2.0, ry in -2.0f64..2.0, rz in -2.0f64..2.0,
            angle in 0.0f64..std::f64::consts::TAU,
            mu in 0.1f64..2.0,
        ) {
            let base = friction_cone_residual(&[rx, ry, rz], mu);
            let (s, c) = angle.sin_cos();
            let rot = [c * rx - s * ry, s * rx + c * ry, rz];
            let rotated = friction_cone_residual(&rot, mu);
            let scale = base.abs().max(1.0);
            prop_assert!((base - rotated).abs() <= 1e-12 * scale);
        }

        /// Leg residuals depend only on the relative offset.
        #[test]
        fn leg_residuals_translation_invariant(
            xx in -1.0f64..1.0, xy in -1.0f64..1.0, xz in 0.2f64..1.6,
            tx in -5.0f64..5.0, ty in -5.0f64..5.0, tz in -5.0f64..5.0,
        ) {
            let limits = LegLimits::new(0.5, 1.2).unwrap();
            let x = Vector3::new(xx, xy, xz);
            let foot = Vector3::zeros();
            let shift = Vector3::new(tx, ty, tz);
            let (a0, b0) = leg_length_residuals(&x, &foot, &limits);
            let (a1, b1) = leg_length_residuals(&(x + shift), &(foot + shift), &limits);
            prop_assert!((a0 - a1).abs() <= 1e-9);
            prop_assert!((b0 - b1).abs() <= 1e-9);
        }

        /// With p = 0 and mu_t > 0 the torsional pair is equivalent to
        /// r_z >= 0.
        #[test]
        fn torsion_with_zero_cop_is_normal_positivity(
            rx in -1.0f64..1.0, ry in -1.0f64..1.0, rz in -1.0f64..1.0,
            mu_t in 0.01f64..0.5,
        ) {
            let p = [0.0, 0.0, 0.0];
            let upper = kernel::torsion_residual(&[rx, ry, rz], &p, mu_t, true);
            let lower = kernel::torsion_residual(&[rx, ry, rz], &p, mu_t, false);
            let satisfied = upper <= 0.0 && lower <= 0.0;
            prop_assert_eq!(satisfied, rz >= 0.0);
        }

        /// Halfspace membership matches the winding oracle for random
        /// points around a non-axis-aligned polygon.
        #[test]
        fn halfspace_membership_matches_oracle(px in -0.3f64..0.3, py in -0.3f64..0.3) {
            let polygon = vec![
                Vector2::new(0.1, -0.04),
                Vector2::new(0.06, 0.08),
                Vector2::new(-0.07, 0.05),
                Vector2::new(-0.09, -0.06),
            ];
            let hs = polygon_to_halfspaces(&polygon).unwrap();
            let expected = inside_oracle(&polygon, Vector2::new(px, py), 1e-12);
            prop_assert_eq!(hs.contains(&Vector3::new(px, py, 0.0), 1e-12), expected);
        }
    }

    #[test]
    fn rotated_offset_matches_direct_formula() {
        let rot = crate::model::rotation_from_yaw_pitch_roll(0.4, -0.2, 0.1);
        let spec = FootSpec::new(Vector3::new(0.3, -0.2, 0.1), rot, rectangle()).unwrap();
        let x = Vector3::new(0.5, 0.1, 1.2);
        let p = Vector3::new(0.03, -0.01, 0.0);
        let rows = matrix_rows(&spec);
        let r = kernel::rotated_offset(&rows, &spec.position.into(), &x.into(), &p.into());
        let direct: Vector3<f64> = spec.rotation.transpose() * (x - spec.position - spec.rotation * p);
        for c in 0..3 {
            assert_relative_eq!(r[c], direct[c], epsilon = 1e-12);
        }
    }
}
