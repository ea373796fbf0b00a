//! Rigid-body equations of motion on SE(3) and a fixed-step integrator.

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

use crate::geometry::{self, hat, GeometryError};
use crate::{lit, to_f64, Float};

/// Largest integration step accepted by [`step_rk4`].
pub const MAX_STEP: f64 = 0.05;

/// Default floor on rotor speed (rad/s).
pub const DEFAULT_MIN_ROTOR_SPEED: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("integration step {dt} s outside (0, {MAX_STEP}]")]
    InvalidStep { dt: f64 },
    #[error("invalid vehicle parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("rotation reprojection failed: {0}")]
    Geometry(#[from] GeometryError),
}

/// Pose and velocities of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState<T: Float> {
    /// Position of the center of mass, inertial frame (m).
    pub x: Vector3<T>,
    /// Velocity, inertial frame (m/s).
    pub v: Vector3<T>,
    /// Body-to-inertial rotation.
    pub r: Rotation3<T>,
    /// Angular velocity, body frame (rad/s).
    pub omega: Vector3<T>,
}

impl<T: Float> RigidBodyState<T> {
    pub fn at_rest(x: Vector3<T>) -> Self {
        Self { x, v: Vector3::zeros(), r: Rotation3::identity(), omega: Vector3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.v.iter()).chain(self.r.matrix().iter()).chain(self.omega.iter()).all(|c| c.is_finite())
    }
}

/// Time derivative of a [`RigidBodyState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative<T: Float> {
    pub x_dot: Vector3<T>,
    pub v_dot: Vector3<T>,
    pub r_dot: Matrix3<T>,
    pub omega_dot: Vector3<T>,
}

/// Mass properties and rotor geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadParams<T: Float> {
    pub mass: T,
    pub inertia: Matrix3<T>,
    /// Horizontal distance from the center of mass to each rotor hub (m).
    pub d_h: T,
    /// Vertical offset of the rotor plane along `b3` (m, negative is above).
    pub d_v: T,
    pub gravity: T,
}

impl<T: Float> QuadParams<T> {
    pub fn new(mass: T, inertia: Matrix3<T>, d_h: T, d_v: T, gravity: T) -> Result<Self, DynamicsError> {
        if !(mass > T::zero()) {
            return Err(DynamicsError::InvalidParameter("mass must be positive"));
        }
        if !(d_h > T::zero()) {
            return Err(DynamicsError::InvalidParameter("d_h must be positive"));
        }
        if !d_v.is_finite() || !(gravity >= T::zero()) {
            return Err(DynamicsError::InvalidParameter("d_v and gravity must be finite, gravity ≥ 0"));
        }
        let asym = (inertia - inertia.transpose()).norm();
        if asym > lit::<T>(1e-12) * inertia.norm() {
            return Err(DynamicsError::InvalidParameter("inertia must be symmetric"));
        }
        if !(inertia.symmetric_eigenvalues().min() > T::zero()) {
            return Err(DynamicsError::InvalidParameter("inertia must be positive definite"));
        }
        Ok(Self { mass, inertia, d_h, d_v, gravity })
    }

    /// Rotor hub positions `r_1 … r_4` in the body frame.
    pub fn rotor_positions(&self) -> [Vector3<T>; 4] {
        let (d, dv, z) = (self.d_h, self.d_v, T::zero());
        [Vector3::new(d, z, dv), Vector3::new(z, -d, dv), Vector3::new(-d, z, dv), Vector3::new(z, d, dv)]
    }

    /// Smallest and largest eigenvalue of `J`.
    pub fn inertia_eigen_range(&self) -> (T, T) {
        let ev = self.inertia.symmetric_eigenvalues();
        (ev.min(), ev.max())
    }

    pub fn weight(&self) -> T {
        self.mass * self.gravity
    }
}

/// Constant-coefficient rotor model assumed by the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifiedModelParams<T: Float> {
    /// Thrust coefficient `C_T′` (N·s²).
    pub c_t: T,
    /// Torque coefficient `C_Q′` (N·m·s²).
    pub c_q: T,
    /// Rotor speed floor (rad/s).
    pub omega_min: T,
}

impl<T: Float> SimplifiedModelParams<T> {
    pub fn new(c_t: T, c_q: T) -> Result<Self, DynamicsError> {
        if !(c_t > T::zero()) || !(c_q > T::zero()) {
            return Err(DynamicsError::InvalidParameter("C_T′ and C_Q′ must be positive"));
        }
        Ok(Self { c_t, c_q, omega_min: lit(DEFAULT_MIN_ROTOR_SPEED) })
    }

    /// `C_TQ = C_Q′ / C_T′` (m).
    pub fn c_tq(&self) -> T {
        self.c_q / self.c_t
    }

    pub fn thrust_floor(&self) -> T {
        self.c_t * self.omega_min * self.omega_min
    }
}

/// Rotor speed obtained by inverting `T′ = C_T′ ω²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorSpeed<T: Float> {
    pub omega: T,
    /// Set when the requested thrust was below the floor and got clipped.
    pub saturated: bool,
}

/// `ω = √(max(T′, T_min)/C_T′)` with `T_min = C_T′ ω_min²`.
pub fn rotor_speed_from_thrust<T: Float>(thrust: T, params: &SimplifiedModelParams<T>) -> RotorSpeed<T> {
    let floor = params.thrust_floor();
    // NaN thrust also lands on the floor.
    let saturated = !(thrust > floor);
    let t = if saturated { floor } else { thrust };
    RotorSpeed { omega: if saturated { params.omega_min } else { (t / params.c_t).sqrt() }, saturated }
}

/// `ẋ = v`, `Ṙ = RΩ̂`, `m v̇ = U_e`, `J Ω̇ + Ω × JΩ = M_e`.
pub fn state_derivative<T: Float>(
    state: &RigidBodyState<T>,
    force: &Vector3<T>,
    moment: &Vector3<T>,
    params: &QuadParams<T>,
) -> StateDerivative<T> {
    let j = &params.inertia;
    let gyro = state.omega.cross(&(j * state.omega));
    let omega_dot =
        (*j).cholesky().map(|c| c.solve(&(moment - gyro))).unwrap_or_else(|| Vector3::from_element(lit(f64::NAN)));
    StateDerivative {
        x_dot: state.v,
        v_dot: force / params.mass,
        r_dot: state.r.matrix() * hat(&state.omega),
        omega_dot,
    }
}

/// `(U_e, M_e) = (mg e3 − f R e3 − Δ1, M_c − Δ2)`.
pub fn simplified_wrench<T: Float>(
    state: &RigidBodyState<T>,
    thrust: T,
    moment: &Vector3<T>,
    params: &QuadParams<T>,
    delta1: &Vector3<T>,
    delta2: &Vector3<T>,
) -> (Vector3<T>, Vector3<T>) {
    let e3 = Vector3::z();
    let force = e3 * params.weight() - state.r.matrix() * e3 * thrust - delta1;
    (force, moment - delta2)
}

/// Series expansion of the inverse right Jacobian of SO(3) applied to `w`,
/// truncated after the second-order term (enough for fourth-order RKMK).
fn dexp_inv<T: Float>(theta: &Vector3<T>, w: &Vector3<T>) -> Vector3<T> {
    let tw = theta.cross(w);
    w + tw * lit::<T>(0.5) + theta.cross(&tw) * lit::<T>(1.0 / 12.0)
}

/// Advances the state by one step of `dt`.
///
/// Translation and angular velocity use classical RK4. The attitude is
/// advanced with the Munthe-Kaas variant of RK4: stage rotations are
/// `R exp(θ_k)`, and the final update is `R exp(dt Σ b_k k_k)` built from the
/// stage body angular velocities, followed by reprojection onto SO(3).
///
/// `wrench(t, state)` returns `(U_e, M_e)` for the given stage state.
pub fn step_rk4<T, E, F>(
    state: &RigidBodyState<T>,
    t: T,
    dt: T,
    params: &QuadParams<T>,
    mut wrench: F,
) -> Result<RigidBodyState<T>, E>
where
    T: Float,
    E: From<DynamicsError>,
    F: FnMut(T, &RigidBodyState<T>) -> Result<(Vector3<T>, Vector3<T>), E>,
{
    if !(dt > T::zero() && dt <= lit(MAX_STEP)) {
        return Err(DynamicsError::InvalidStep { dt: to_f64(dt) }.into());
    }
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let sixth = lit::<T>(1.0 / 6.0);

    let mut eval = |tau: T, s: &RigidBodyState<T>| -> Result<StateDerivative<T>, E> {
        let (u, m) = wrench(tau, s)?;
        Ok(state_derivative(s, &u, &m, params))
    };
    let stage = |h: T, d: &StateDerivative<T>, theta: &Vector3<T>| RigidBodyState {
        x: state.x + d.x_dot * h,
        v: state.v + d.v_dot * h,
        r: state.r * geometry::exp_so3(theta),
        omega: state.omega + d.omega_dot * h,
    };

    let d1 = eval(t, state)?;
    let k1 = state.omega;

    let th2 = k1 * (dt * half);
    let s2 = stage(dt * half, &d1, &th2);
    let d2 = eval(t + dt * half, &s2)?;
    let k2 = dexp_inv(&th2, &s2.omega);

    let th3 = k2 * (dt * half);
    let s3 = stage(dt * half, &d2, &th3);
    let d3 = eval(t + dt * half, &s3)?;
    let k3 = dexp_inv(&th3, &s3.omega);

    let th4 = k3 * dt;
    let s4 = stage(dt, &d3, &th4);
    let d4 = eval(t + dt, &s4)?;
    let k4 = dexp_inv(&th4, &s4.omega);

    let avg = |a: Vector3<T>, b: Vector3<T>, c: Vector3<T>, d: Vector3<T>| (a + (b + c) * two + d) * (dt * sixth);
    let theta = avg(k1, k2, k3, k4);
    let r_next = (state.r * geometry::exp_so3(&theta)).into_inner();
    let r_next = geometry::orthonormalize(&r_next).map_err(DynamicsError::from)?;

    Ok(RigidBodyState {
        x: state.x + avg(d1.x_dot, d2.x_dot, d3.x_dot, d4.x_dot),
        v: state.v + avg(d1.v_dot, d2.v_dot, d3.v_dot, d4.v_dot),
        r: r_next,
        omega: state.omega + avg(d1.omega_dot, d2.omega_dot, d3.omega_dot, d4.omega_dot),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Unit;

    fn quad(j: Matrix3<f64>) -> QuadParams<f64> {
        QuadParams::new(2.0, j, 0.23, -0.05, 9.81).unwrap()
    }

    type Wrench = Result<(Vector3<f64>, Vector3<f64>), DynamicsError>;

    #[test]
    fn derivative_examples() {
        let p = quad(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)));
        let s = RigidBodyState::at_rest(Vector3::new(1.0, 2.0, 3.0));
        let d = state_derivative(&s, &Vector3::zeros(), &Vector3::zeros(), &p);
        assert_eq!(d.v_dot, Vector3::zeros());
        assert_eq!(d.omega_dot, Vector3::zeros());

        let spin = RigidBodyState { omega: Vector3::new(4.0, 0.0, 0.0), ..s };
        let d = state_derivative(&spin, &Vector3::zeros(), &Vector3::new(0.5, 0.0, 0.0), &p);
        assert_relative_eq!(d.omega_dot, Vector3::new(0.5, 0.0, 0.0), epsilon = 1e-15);

        let tumble = RigidBodyState { omega: Vector3::new(1.0, 1.0, 0.0), ..s };
        let d = state_derivative(&tumble, &Vector3::zeros(), &Vector3::zeros(), &p);
        assert_relative_eq!(d.omega_dot, Vector3::new(0.0, 0.0, -1.0 / 3.0), epsilon = 1e-15);
    }

    #[test]
    fn rotor_speed_inversion_and_clipping() {
        let p = SimplifiedModelParams::new(2e-5, 3e-7).unwrap();
        let s = rotor_speed_from_thrust(2e-5 * 1e4, &p);
        assert_relative_eq!(s.omega, 100.0, epsilon = 1e-12);
        assert!(!s.saturated);
        for t in [0.0, -3.0, f64::NAN] {
            let s = rotor_speed_from_thrust(t, &p);
            assert_eq!(s.omega, 1.0);
            assert!(s.saturated);
        }
    }

    #[test]
    fn simplified_wrench_examples() {
        let p = quad(Matrix3::identity() * 0.02);
        let s = RigidBodyState::at_rest(Vector3::zeros());
        let z = Vector3::zeros();
        let (u, _) = simplified_wrench(&s, p.weight(), &z, &p, &z, &z);
        assert_relative_eq!(u, z, epsilon = 1e-14);
        let (u, _) = simplified_wrench(&s, p.weight(), &z, &p, &Vector3::x(), &z);
        assert_relative_eq!(u, -Vector3::x(), epsilon = 1e-14);
        let m = Vector3::new(0.0, 0.0, 0.1);
        let (_, mo) = simplified_wrench(&s, p.weight(), &m, &p, &z, &z);
        assert_eq!(mo, m);
    }

    #[test]
    fn rejects_bad_parameters_and_steps() {
        assert!(QuadParams::new(0.0, Matrix3::identity(), 0.2, 0.0, 9.81).is_err());
        assert!(QuadParams::new(1.0, -Matrix3::identity(), 0.2, 0.0, 9.81).is_err());
        let asym = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(QuadParams::new(1.0, asym, 0.2, 0.0, 9.81).is_err());
        let p = quad(Matrix3::identity());
        let s = RigidBodyState::at_rest(Vector3::zeros());
        let free = |_: f64, _: &RigidBodyState<f64>| -> Wrench { Ok((Vector3::zeros(), Vector3::zeros())) };
        assert!(matches!(step_rk4(&s, 0.0, 0.06, &p, free), Err(DynamicsError::InvalidStep { .. })));
        assert!(matches!(step_rk4(&s, 0.0, 0.0, &p, free), Err(DynamicsError::InvalidStep { .. })));
    }

    #[test]
    fn free_fall_matches_closed_form() {
        let p = quad(Matrix3::identity() * 0.02);
        let mut s = RigidBodyState::at_rest(Vector3::new(0.0, 0.0, -10.0));
        let dt = 0.01;
        for k in 0..200 {
            s = step_rk4(&s, k as f64 * dt, dt, &p, |_, _| -> Wrench {
                Ok((Vector3::z() * p.weight(), Vector3::zeros()))
            })
            .unwrap();
        }
        let t = 2.0;
        assert_relative_eq!(s.x.z, -10.0 + 0.5 * 9.81 * t * t, epsilon = 1e-10);
        assert_relative_eq!(s.v.z, 9.81 * t, epsilon = 1e-11);
    }

    #[test]
    fn principal_axis_spin_matches_axis_angle() {
        let p = quad(Matrix3::from_diagonal(&Vector3::new(0.02, 0.02, 0.04)));
        let w = Vector3::new(0.0, 0.0, 5.0);
        let mut s = RigidBodyState { omega: w, ..RigidBodyState::at_rest(Vector3::zeros()) };
        let dt = 1e-3;
        for k in 0..10_000 {
            s = step_rk4(&s, k as f64 * dt, dt, &p, |_, _| -> Wrench { Ok((Vector3::zeros(), Vector3::zeros())) })
                .unwrap();
        }
        assert_eq!(s.omega, w);
        let expected = Rotation3::from_axis_angle(&Unit::new_normalize(w), 50.0);
        assert!((s.r.matrix() - expected.matrix()).norm() < 1e-8);
    }
}
