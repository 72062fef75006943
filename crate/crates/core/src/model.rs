//! Reduced variable-height double pendulum model.
//!
//! The robot is collapsed to its center of mass. Each foot in contact
//! pushes along the line from its center of pressure to the CoM, scaled
//! by a multiplier `lambda` with units 1/s². Forces through the CoM keep
//! the angular momentum constant, so the CoM acceleration is
//!
//! ```text
//! a = -g + Σ_feet  λ_* (x - x_* - R_* p_*)
//! ```
//!
//! with the sum running over the feet active in the current contact mode.
//! The discrete form is a second-order Taylor step per knot.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};

/// Left/right foot selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Contact configuration of a phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContactMode {
    Flight,
    LeftOnly,
    RightOnly,
    Double,
}

impl ContactMode {
    pub fn is_active(self, side: Side) -> bool {
        match (self, side) {
            (ContactMode::Flight, _) => false,
            (ContactMode::LeftOnly, Side::Left) => true,
            (ContactMode::LeftOnly, Side::Right) => false,
            (ContactMode::RightOnly, Side::Right) => true,
            (ContactMode::RightOnly, Side::Left) => false,
            (ContactMode::Double, _) => true,
        }
    }

    /// Sides in contact, left first.
    pub fn active_sides(self) -> impl Iterator<Item = Side> {
        Side::BOTH.into_iter().filter(move |&s| self.is_active(s))
    }

    pub fn label(self) -> &'static str {
        match self {
            ContactMode::Flight => "flight",
            ContactMode::LeftOnly => "left",
            ContactMode::RightOnly => "right",
            ContactMode::Double => "double",
        }
    }
}

/// Center-of-mass position and velocity in the inertial frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoMState {
    /// Position [m].
    pub position: Vector3<f64>,
    /// Velocity [m/s].
    pub velocity: Vector3<f64>,
}

impl CoMState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        CoMState { position, velocity }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.position.iter().all(|c| c.is_finite()) || !self.velocity.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("CoM state has non-finite components"));
        }
        Ok(())
    }
}

/// Per-knot control: one multiplier and one CoP offset per foot.
///
/// CoP offsets are expressed in foot coordinates and lie on the sole,
/// so their z component is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlInput {
    /// Left multiplier [1/s²], nonnegative (unilateral contact).
    pub lambda_left: f64,
    /// Right multiplier [1/s²], nonnegative.
    pub lambda_right: f64,
    /// Left CoP in left-foot coordinates [m], z = 0.
    pub cop_left: Vector3<f64>,
    /// Right CoP in right-foot coordinates [m], z = 0.
    pub cop_right: Vector3<f64>,
}

impl ControlInput {
    pub fn zero() -> Self {
        ControlInput {
            lambda_left: 0.0,
            lambda_right: 0.0,
            cop_left: Vector3::zeros(),
            cop_right: Vector3::zeros(),
        }
    }

    pub fn lambda(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.lambda_left,
            Side::Right => self.lambda_right,
        }
    }

    pub fn cop(&self, side: Side) -> &Vector3<f64> {
        match side {
            Side::Left => &self.cop_left,
            Side::Right => &self.cop_right,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for side in Side::BOTH {
            let lambda = self.lambda(side);
            if !lambda.is_finite() || lambda < 0.0 {
                return Err(Error::invalid(format!(
                    "lambda_{side} must be finite and nonnegative, got {lambda}"
                )));
            }
            let p = self.cop(side);
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid(format!("cop_{side} has non-finite components")));
            }
            if p.z != 0.0 {
                return Err(Error::invalid(format!(
                    "cop_{side} must have zero z component, got {}",
                    p.z
                )));
            }
        }
        Ok(())
    }
}

/// One foot's pose plus its support polygon, fixed for a whole phase.
#[derive(Clone, Debug, PartialEq)]
pub struct FootSpec {
    /// Foot origin in the inertial frame [m].
    pub position: Vector3<f64>,
    /// Foot-to-inertial rotation, orthonormal with determinant +1.
    pub rotation: Matrix3<f64>,
    /// Support polygon vertices in foot coordinates [m], convex and
    /// counter-clockwise.
    pub polygon: Vec<Vector2<f64>>,
}

const ORTHONORMAL_TOL: f64 = 1e-9;
const POLYGON_AREA_TOL: f64 = 1e-12;

impl FootSpec {
    pub fn new(position: Vector3<f64>, rotation: Matrix3<f64>, polygon: Vec<Vector2<f64>>) -> Result<Self> {
        let spec = FootSpec { position, rotation, polygon };
        spec.validate()?;
        Ok(spec)
    }

    /// Axis-aligned rectangular sole centered on the foot origin.
    pub fn flat(position: Vector3<f64>, half_length: f64, half_width: f64) -> Result<Self> {
        FootSpec::new(
            position,
            Matrix3::identity(),
            vec![
                Vector2::new(half_length, -half_width),
                Vector2::new(half_length, half_width),
                Vector2::new(-half_length, half_width),
                Vector2::new(-half_length, -half_width),
            ],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !self.position.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("foot position has non-finite components"));
        }
        let gram = self.rotation.transpose() * self.rotation;
        let identity_defect = (gram - Matrix3::identity()).abs().max();
        if !identity_defect.is_finite() || identity_defect > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "foot rotation is not orthonormal (max |R'R - I| = {identity_defect:.3e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "foot rotation must have determinant +1, got {det}"
            )));
        }
        validate_polygon(&self.polygon)?;
        Ok(())
    }

    /// Polygon centroid in foot coordinates.
    pub fn polygon_centroid(&self) -> Vector2<f64> {
        let mut c = Vector2::zeros();
        for v in &self.polygon {
            c += v;
        }
        c / self.polygon.len() as f64
    }
}

/// Checks that vertices describe a strictly convex, counter-clockwise,
/// positive-area polygon.
pub(crate) fn validate_polygon(polygon: &[Vector2<f64>]) -> Result<()> {
    if polygon.len() < 3 {
        return Err(Error::DegeneratePolygon(format!(
            "need at least 3 vertices, got {}",
            polygon.len()
        )));
    }
    if polygon.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
        return Err(Error::DegeneratePolygon("non-finite vertex".into()));
    }
    let n = polygon.len();
    let mut area2 = 0.0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let c = polygon[(i + 2) % n];
        let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
        if cross <= POLYGON_AREA_TOL {
            return Err(Error::DegeneratePolygon(format!(
                "vertices must be strictly convex in counter-clockwise order \
                 (turn at vertex {i} has cross product {cross:.3e})"
            )));
        }
        area2 += a.x * b.y - b.x * a.y;
    }
    if area2 <= POLYGON_AREA_TOL {
        return Err(Error::DegeneratePolygon("polygon area is not positive".into()));
    }
    Ok(())
}

/// Gravity magnitude with the convention g = (0, 0, +9.81), so the
/// acceleration in flight is -g (downward; the inertial z axis points
/// against gravity).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gravity {
    z: f64,
}

impl Gravity {
    pub const STANDARD_Z: f64 = 9.81;

    pub fn standard() -> Gravity {
        Gravity { z: Gravity::STANDARD_Z }
    }

    pub fn new(z: f64) -> Result<Gravity> {
        if !z.is_finite() || z <= 0.0 {
            return Err(Error::invalid(format!("gravity z must be positive and finite, got {z}")));
        }
        Ok(Gravity { z })
    }

    /// The vector g; flight acceleration is the negation of this.
    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.z)
    }

    pub fn z(&self) -> f64 {
        self.z
    }
}

impl Default for Gravity {
    fn default() -> Self {
        Gravity::standard()
    }
}

/// World position of a foot's center of pressure: `x_* + R_* p_*`.
pub fn cop_world(foot: &FootSpec, p: &Vector3<f64>) -> Result<Vector3<f64>> {
    if !p.iter().all(|c| c.is_finite()) {
        return Err(Error::invalid("CoP offset has non-finite components"));
    }
    if p.z != 0.0 {
        return Err(Error::invalid(format!("CoP offset must have zero z component, got {}", p.z)));
    }
    Ok(foot.position + foot.rotation * p)
}

/// Contact force on one foot in the inertial frame: `m λ (x - x_* - R_* p_*)`.
///
/// The force is collinear with the segment from the world CoP to the CoM,
/// which is what keeps the angular momentum constant in this model.
pub fn foot_force(
    state: &CoMState,
    foot: &FootSpec,
    lambda: f64,
    p: &Vector3<f64>,
    mass: f64,
) -> Result<Vector3<f64>> {
    state.validate()?;
    if !mass.is_finite() || mass <= 0.0 {
        return Err(Error::invalid(format!("mass must be positive, got {mass}")));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    let cop = cop_world(foot, p)?;
    Ok(mass * lambda * (state.position - cop))
}

/// CoM acceleration for the given contact mode.
///
/// Flight yields exactly `-g`; each active foot adds `λ_* (x - x_* - R_* p_*)`.
/// Feet not required by the mode may be passed as `None`.
pub fn contact_acceleration(
    state: &CoMState,
    mode: ContactMode,
    left: Option<&FootSpec>,
    right: Option<&FootSpec>,
    u: &ControlInput,
    gravity: &Gravity,
) -> Result<Vector3<f64>> {
    state.validate()?;
    u.validate()?;
    let mut accel = -gravity.vector();
    for side in mode.active_sides() {
        let foot = match side {
            Side::Left => left,
            Side::Right => right,
        }
        .ok_or_else(|| Error::invalid(format!("mode {} requires a {side} foot", mode.label())))?;
        let cop = cop_world(foot, u.cop(side))?;
        accel += u.lambda(side) * (state.position - cop);
    }
    Ok(accel)
}

/// Second-order Taylor step of the discrete dynamics:
/// `x' = x + v dt + a dt²/2`, `v' = v + a dt`.
///
/// Exact for constant-acceleration motion.
pub fn taylor_step(state: &CoMState, acceleration: &Vector3<f64>, dt: f64) -> Result<CoMState> {
    state.validate()?;
    if !acceleration.iter().all(|c| c.is_finite()) {
        return Err(Error::invalid("acceleration has non-finite components"));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    Ok(CoMState {
        position: state.position + state.velocity * dt + acceleration * (0.5 * dt * dt),
        velocity: state.velocity + acceleration * dt,
    })
}

/// Yaw-pitch-roll (Z-Y-X) rotation from angles in radians.
pub fn rotation_from_yaw_pitch_roll(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    rz * ry * rx
}
