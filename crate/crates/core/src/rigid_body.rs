//! Rigid-body geometry, mass properties, kinematics and the momentum update.

use std::fmt;

use nalgebra::UnitQuaternion;

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField, VectorField};
use crate::{Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    /// Semi-axes along the body frame axes.
    Ellipsoid { axes: Vec3 },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Shape::Sphere { radius } => radius.is_finite() && *radius > 0.0,
            Shape::Ellipsoid { axes } => axes.iter().all(|a| a.is_finite() && *a > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DegenerateShape(format!("{self:?}")))
        }
    }

    pub fn axes(&self) -> Vec3 {
        match *self {
            Shape::Sphere { radius } => Vec3::repeat(radius),
            Shape::Ellipsoid { axes } => axes,
        }
    }

    pub fn volume(&self) -> f64 {
        let a = self.axes();
        4.0 / 3.0 * std::f64::consts::PI * a.x * a.y * a.z
    }

    /// Radius of the smallest centered ball containing the shape.
    pub fn bounding_radius(&self) -> f64 {
        self.axes().max()
    }

    /// Smallest principal semi-axis.
    pub fn min_radius(&self) -> f64 {
        self.axes().min()
    }

    /// Gauge function: `< 1` inside, `= 1` on the boundary (body frame).
    #[inline]
    pub fn gauge(&self, x: Vec3) -> f64 {
        x.component_div(&self.axes()).norm()
    }

    /// Outward unit normal at the radial projection of `x` onto the boundary.
    pub fn normal(&self, x: Vec3) -> Vec3 {
        let a = self.axes();
        let p = x / self.gauge(x);
        p.component_div(&a.component_mul(&a)).normalize()
    }
}

/// `J0` of a homogeneous body of density `rho` about its center.
pub fn inertia_tensor(shape: &Shape, rho: f64) -> Result<Mat3> {
    shape.validate()?;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::Invalid(format!("density must be positive, got {rho}")));
    }
    let m = rho * shape.volume();
    let a = shape.axes();
    let (a2, b2, c2) = (a.x * a.x, a.y * a.y, a.z * a.z);
    Ok(Mat3::from_diagonal(&Vec3::new(b2 + c2, a2 + c2, a2 + b2)) * (m / 5.0))
}

/// Midpoint voxel quadrature of `ρ ∫_S (|r|² I − r rᵀ) dr` on an `n³`
/// lattice covering the bounding box.
pub fn voxel_inertia(shape: &Shape, rho: f64, n: usize) -> Result<Mat3> {
    shape.validate()?;
    let a = shape.axes();
    let h = a * (2.0 / n as f64);
    let dv = h.x * h.y * h.z;
    let mut j = Mat3::zeros();
    for k in 0..n {
        for jj in 0..n {
            for i in 0..n {
                let r = Vec3::new(
                    -a.x + (i as f64 + 0.5) * h.x,
                    -a.y + (jj as f64 + 0.5) * h.y,
                    -a.z + (k as f64 + 0.5) * h.z,
                );
                if shape.gauge(r) <= 1.0 {
                    j += Mat3::identity() * r.norm_squared() - r * r.transpose();
                }
            }
        }
    }
    Ok(j * (rho * dv))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RigidBodyState {
    pub shape: Shape,
    /// Center of mass (unwrapped).
    pub h: Vec3,
    pub rotation: UnitQuaternion<f64>,
    /// Translational velocity `h'`.
    pub l: Vec3,
    pub omega: Vec3,
    pub mass: f64,
    /// Reference-frame inertia.
    pub j0: Mat3,
    pub rho: f64,
}

impl RigidBodyState {
    pub fn new(shape: Shape, rho: f64, h: Vec3, l: Vec3, omega: Vec3) -> Result<Self> {
        let j0 = inertia_tensor(&shape, rho)?;
        Ok(Self {
            shape,
            h,
            rotation: UnitQuaternion::identity(),
            l,
            omega,
            mass: rho * shape.volume(),
            j0,
            rho,
        })
    }

    /// `J(t) = R J0 Rᵀ`.
    pub fn inertia(&self) -> Mat3 {
        let r = self.rotation.to_rotation_matrix().into_inner();
        r * self.j0 * r.transpose()
    }

    pub fn inertia_inverse(&self) -> Mat3 {
        let r = self.rotation.to_rotation_matrix().into_inner();
        let inv = self.j0.try_inverse().expect("reference inertia is positive definite");
        r * inv * r.transpose()
    }

    #[inline]
    pub fn velocity_at(&self, offset: Vec3) -> Vec3 {
        self.l + self.omega.cross(&offset)
    }

    pub fn momentum(&self) -> Vec3 {
        self.l * self.mass
    }

    pub fn angular_momentum(&self) -> Vec3 {
        self.inertia() * self.omega
    }

    /// `m |h'|²`.
    pub fn translational_energy(&self) -> f64 {
        self.mass * self.l.norm_squared()
    }

    /// `(Jω)·ω`.
    pub fn rotational_energy(&self) -> f64 {
        self.angular_momentum().dot(&self.omega)
    }

    /// Body-frame coordinates of a lab-frame offset from the center.
    #[inline]
    pub fn to_body(&self, offset: Vec3) -> Vec3 {
        self.rotation.inverse_transform_vector(&offset)
    }

    /// `t h=(x,y,z) l=(..) omega=(..) quat=(w,i,j,k)`.
    pub fn log_line(&self, t: f64) -> String {
        format!("{t:.16e} {self}")
    }
}

fn triple(v: &Vec3) -> String {
    format!("({:.16e},{:.16e},{:.16e})", v.x, v.y, v.z)
}

impl fmt::Display for RigidBodyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.rotation.quaternion();
        write!(
            f,
            "h={} l={} omega={} quat=({:.16e},{:.16e},{:.16e},{:.16e})",
            triple(&self.h),
            triple(&self.l),
            triple(&self.omega),
            q.w,
            q.i,
            q.j,
            q.k
        )
    }
}

/// Rigid velocity `l + ω × (x − h)` at every node, minimal-image offsets.
pub fn body_velocity_field(state: &RigidBodyState, grid: Grid) -> VectorField {
    VectorField::from_fn(grid, |x| state.velocity_at(grid.delta(x, state.h)))
}

/// Smoothing shell parameter for [`indicator`]; see there.
fn ramp_delta(shape: &Shape, width: f64) -> f64 {
    let a = shape.bounding_radius();
    1.0 - (a / (a + width)).powi(3)
}

#[inline]
fn ramp(f: f64, delta: f64) -> f64 {
    (0.5 - (f * f * f - 1.0) / (2.0 * delta)).clamp(0.0, 1.0)
}

/// Smoothed characteristic function of the body.
///
/// A linear ramp in `F³` with `F` the gauge function; the continuum volume
/// `∫χ` equals `|S|` exactly, `χ = 1` at depth `> width` and `χ = 0` at
/// distance `> width`.
pub fn indicator(state: &RigidBodyState, grid: Grid, width: f64) -> Result<ScalarField> {
    let h = grid.spacing();
    if !(width >= h * (1.0 - 1e-12) && width <= 3.0 * h * (1.0 + 1e-12)) {
        return Err(Error::Invalid(format!(
            "smoothing width {width} outside [1, 3] grid spacings (h = {h})"
        )));
    }
    let eps = state.shape.bounding_radius();
    if eps < 4.0 * h * (1.0 - 1e-12) {
        return Err(Error::BodyUnderResolved { epsilon: eps, min: 4.0 * h });
    }
    let delta = ramp_delta(&state.shape, width);
    let mut chi = ScalarField::zeros(grid);
    let reach = eps + width;
    let vals = chi.values_mut();
    grid.for_each_in_ball(state.h, reach, |idx, d| {
        vals[idx] = ramp(state.shape.gauge(state.to_body(d)), delta);
    });
    Ok(chi)
}

/// Symplectic-Euler momentum update driven by an external force and torque.
///
/// Linear momentum first, then angular momentum `L = J(t)ω` is advanced by
/// `dt·τ`, the rotation is advanced with `ω* = J(t)⁻¹L`, and the stored
/// angular velocity is re-expressed with the new inertia so that `J ω = L`
/// holds at the end of the step.
pub fn advance_body(state: &RigidBodyState, force: Vec3, torque: Vec3, dt: f64) -> Result<RigidBodyState> {
    if !force.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("force"));
    }
    if !torque.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("torque"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    let mut next = state.clone();
    next.l = state.l + force * (dt / state.mass);
    next.h = state.h + next.l * dt;

    let ang = state.angular_momentum() + torque * dt;
    let omega_star = state.inertia_inverse() * ang;
    let rotated = UnitQuaternion::from_scaled_axis(omega_star * dt) * state.rotation;
    next.rotation = UnitQuaternion::new_normalize(rotated.into_inner());
    next.omega = next.inertia_inverse() * ang;
    Ok(next)
}
