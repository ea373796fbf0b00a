//! Geometric adaptive tracking controller on SE(3).
//!
//! Per step the controller forms the position errors, evaluates the position
//! network, builds the thrust vector `A`, the total thrust `f` and the computed
//! attitude `R_c`, differentiates `R_c` numerically for `Ω_c` and `Ω̇_c`,
//! evaluates the attitude network, forms the moment `M_c`, allocates rotor
//! thrusts, and finally advances both networks' weights.

use std::collections::VecDeque;

use nalgebra::{DVector, Matrix3, Matrix4, Rotation3, Vector3, Vector4};
use thiserror::Error;

use crate::dynamics::{rotor_speed_from_thrust, QuadParams, RigidBodyState, SimplifiedModelParams};
use crate::geometry::{self, hat, AttitudeErrorSet};
use crate::neural::{self, AdaptationGains, NnError, NnWeights};
use crate::{lit, to_f64, Float};

/// `‖A‖` below this fraction of `mg` is treated as a degenerate thrust command.
pub const DEGENERATE_THRUST_FRACTION: f64 = 1e-6;

/// Minimum `‖b3c × b1d‖` for a well-defined heading.
pub const HEADING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("thrust vector magnitude {norm:e} N is below the degeneracy floor")]
    DegenerateThrust { norm: f64 },
    #[error("desired heading is parallel to the thrust axis (|b3c × b1d| = {cross:e})")]
    HeadingDegenerate { cross: f64 },
    #[error("invalid controller gain: {0}")]
    InvalidGain(&'static str),
    #[error(transparent)]
    Network(#[from] NnError),
}

/// Feedback, coupling and adaptation gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains<T: Float> {
    pub k_x: T,
    pub k_v: T,
    pub k_r: T,
    pub k_omega: T,
    pub c1: T,
    pub c2: T,
    pub position: AdaptationGains<T>,
    pub attitude: AdaptationGains<T>,
}

impl<T: Float> ControllerGains<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k_x: T,
        k_v: T,
        k_r: T,
        k_omega: T,
        c1: T,
        c2: T,
        position: AdaptationGains<T>,
        attitude: AdaptationGains<T>,
    ) -> Result<Self, ControlError> {
        if ![k_x, k_v, k_r, k_omega, c1, c2].iter().all(|&g| g > T::zero() && g.is_finite()) {
            return Err(ControlError::InvalidGain("k_x, k_v, k_R, k_Ω, c1, c2 must be positive"));
        }
        Ok(Self { k_x, k_v, k_r, k_omega, c1, c2, position, attitude })
    }
}

/// Desired flat output at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint<T: Float> {
    pub x: Vector3<T>,
    pub v: Vector3<T>,
    pub a: Vector3<T>,
    pub jerk: Vector3<T>,
    /// Desired heading direction (unit).
    pub b1d: Vector3<T>,
    pub b1d_dot: Vector3<T>,
}

impl<T: Float> TrajectoryPoint<T> {
    pub fn hover(x: Vector3<T>) -> Self {
        Self {
            x,
            v: Vector3::zeros(),
            a: Vector3::zeros(),
            jerk: Vector3::zeros(),
            b1d: Vector3::x(),
            b1d_dot: Vector3::zeros(),
        }
    }
}

/// Thrust, moment and the per-rotor commands realizing them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand<T: Float> {
    pub thrust: T,
    pub moment: Vector3<T>,
    pub rotor_thrusts: [T; 4],
    pub rotor_speeds: [T; 4],
    /// Rotor whose thrust request fell below the floor and was clipped.
    pub saturated: [bool; 4],
}

/// Everything computed during one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlStep<T: Float> {
    pub command: ControlCommand<T>,
    pub e_x: Vector3<T>,
    pub e_v: Vector3<T>,
    pub attitude: AttitudeErrorSet<T>,
    /// Thrust vector `A`.
    pub thrust_vector: Vector3<T>,
    pub rc: Rotation3<T>,
    pub omega_c: Vector3<T>,
    pub omega_c_dot: Vector3<T>,
    pub delta1: Vector3<T>,
    pub delta2: Vector3<T>,
    /// Composite errors `a1 = e_v + c1 e_x`, `a2 = e_Ω + c2 e_R`.
    pub a1: Vector3<T>,
    pub a2: Vector3<T>,
}

/// `A = Δ̄1 − k_x e_x − k_v e_v − m g e3 + m ẍ_d`.
pub fn compute_a<T: Float>(
    e_x: &Vector3<T>,
    e_v: &Vector3<T>,
    delta1: &Vector3<T>,
    acc_d: &Vector3<T>,
    gains: &ControllerGains<T>,
    mass: T,
    gravity: T,
) -> Vector3<T> {
    delta1 - e_x * gains.k_x - e_v * gains.k_v - Vector3::z() * (mass * gravity) + acc_d * mass
}

/// `f = −Aᵀ R e3`.
pub fn compute_thrust<T: Float>(a: &Vector3<T>, r: &Rotation3<T>) -> T {
    -a.dot(&(r.matrix() * Vector3::z()))
}

/// `R_c = [b2c × b3c, −C/‖C‖, −A/‖A‖]` with `C = −b3c × b1d`.
///
/// `min_thrust` is the floor on `‖A‖` (see [`DEGENERATE_THRUST_FRACTION`]).
pub fn compute_rc<T: Float>(a: &Vector3<T>, b1d: &Vector3<T>, min_thrust: T) -> Result<Rotation3<T>, ControlError> {
    let norm_a = a.norm();
    if !(norm_a > min_thrust) {
        return Err(ControlError::DegenerateThrust { norm: to_f64(norm_a) });
    }
    let b3c = -a / norm_a;
    let c = -b3c.cross(b1d);
    let norm_c = c.norm();
    if !(norm_c > lit(HEADING_TOLERANCE)) {
        return Err(ControlError::HeadingDegenerate { cross: to_f64(norm_c) });
    }
    let b2c = -c / norm_c;
    let b1c = b2c.cross(&b3c);
    Ok(Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[b1c, b2c, b3c])))
}

/// Computed angular velocity and acceleration from the most recent computed
/// attitudes (oldest first, at most three used).
///
/// `Ω_c = (R_cᵀ Ṙ_c)^∨` with a backward difference for `Ṙ_c` and the
/// skew-symmetric part taken before `vee`; `Ω̇_c` is the backward difference of
/// consecutive `Ω_c`. Missing history yields zeros.
pub fn compute_omega_c<T: Float>(history: &[Rotation3<T>], dt: T) -> (Vector3<T>, Vector3<T>) {
    let rate = |prev: &Rotation3<T>, cur: &Rotation3<T>| {
        let r_dot = (cur.matrix() - prev.matrix()) / dt;
        geometry::vee_skew_part(&(cur.matrix().transpose() * r_dot))
    };
    match history {
        [.., a, b, c] => {
            let w_prev = rate(a, b);
            let w = rate(b, c);
            (w, (w - w_prev) / dt)
        }
        [a, b] => (rate(a, b), Vector3::zeros()),
        _ => (Vector3::zeros(), Vector3::zeros()),
    }
}

/// `M_c = Δ̄2 − k_R e_R − k_Ω e_Ω + Ω × JΩ − J(Ω̂ RᵀR_c Ω_c − RᵀR_c Ω̇_c)`.
#[allow(clippy::too_many_arguments)]
pub fn compute_moment<T: Float>(
    e_r: &Vector3<T>,
    e_omega: &Vector3<T>,
    omega: &Vector3<T>,
    r: &Rotation3<T>,
    rc: &Rotation3<T>,
    omega_c: &Vector3<T>,
    omega_c_dot: &Vector3<T>,
    delta2: &Vector3<T>,
    inertia: &Matrix3<T>,
    gains: &ControllerGains<T>,
) -> Vector3<T> {
    let rt_rc = r.matrix().transpose() * rc.matrix();
    let feedforward = hat(omega) * (rt_rc * omega_c) - rt_rc * omega_c_dot;
    delta2 - e_r * gains.k_r - e_omega * gains.k_omega + omega.cross(&(inertia * omega)) - inertia * feedforward
}

/// Maps rotor thrusts to `(f, M1, M2, M3)`.
///
/// Rows: `f = ΣT_j`, `M1 = d_h(T2 − T4)`, `M2 = d_h(T1 − T3)`,
/// `M3 = C_TQ(−T1 + T2 − T3 + T4)`, which is what `Σ r_j × (−T_j e3)` and the
/// alternating reactive torques produce for the rotor layout in
/// [`QuadParams::rotor_positions`].
#[rustfmt::skip]
pub fn mixing_matrix<T: Float>(d_h: T, c_tq: T) -> Matrix4<T> {
    let (o, z) = (T::one(), T::zero());
    Matrix4::new(
        o, o, o, o,
        z, d_h, z, -d_h,
        d_h, z, -d_h, z,
        -c_tq, c_tq, -c_tq, c_tq,
    )
}

/// Rotor thrusts realizing `(f, M_c)`; the closed-form inverse of
/// [`mixing_matrix`]. Negative thrusts are returned as is.
pub fn allocate_rotors<T: Float>(thrust: T, moment: &Vector3<T>, d_h: T, c_tq: T) -> [T; 4] {
    let half = lit::<T>(0.5);
    let yaw = moment.z / c_tq;
    let s13 = (thrust - yaw) * half;
    let s24 = (thrust + yaw) * half;
    let roll = moment.x / d_h;
    let pitch = moment.y / d_h;
    [(s13 + pitch) * half, (s24 + roll) * half, (s13 - pitch) * half, (s24 - roll) * half]
}

/// `(f, M)` produced by a set of rotor thrusts.
pub fn mix<T: Float>(thrusts: &[T; 4], d_h: T, c_tq: T) -> (T, Vector3<T>) {
    let out = mixing_matrix(d_h, c_tq) * Vector4::from_column_slice(thrusts);
    (out.x, Vector3::new(out.y, out.z, out.w))
}

/// `𝒳 = f/(e3ᵀR_cᵀRe3) [(e3ᵀR_cᵀRe3) R e3 − R_c e3]`, the force error caused by
/// the attitude not yet matching `R_c`.
pub fn thrust_misalignment<T: Float>(thrust: T, r: &Rotation3<T>, rc: &Rotation3<T>) -> Vector3<T> {
    let e3 = Vector3::z();
    let b3 = r.matrix() * e3;
    let b3c = rc.matrix() * e3;
    let cos = b3c.dot(&b3);
    (b3 * cos - b3c) * (thrust / cos)
}

/// Short history of computed attitudes used to differentiate `R_c`.
#[derive(Debug, Clone, Default)]
pub struct RcHistory<T: Float> {
    samples: VecDeque<Rotation3<T>>,
}

impl<T: Float> RcHistory<T> {
    pub fn new() -> Self {
        Self { samples: VecDeque::with_capacity(3) }
    }

    /// Appends the newest `R_c` and returns `(Ω_c, Ω̇_c)`.
    pub fn push(&mut self, rc: Rotation3<T>, dt: T) -> (Vector3<T>, Vector3<T>) {
        if self.samples.len() == 3 {
            self.samples.pop_front();
        }
        self.samples.push_back(rc);
        compute_omega_c(self.samples.make_contiguous(), dt)
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }
}

/// The closed-loop controller with its adaptive networks and `R_c` history.
#[derive(Debug, Clone)]
pub struct GeometricAdaptiveController<T: Float> {
    pub gains: ControllerGains<T>,
    pub quad: QuadParams<T>,
    pub rotor_model: SimplifiedModelParams<T>,
    pub position_net: NnWeights<T>,
    pub attitude_net: NnWeights<T>,
    /// When false the weights are held fixed.
    pub adaptation: bool,
    history: RcHistory<T>,
    last_angles: Vector3<T>,
}

impl<T: Float> GeometricAdaptiveController<T> {
    pub fn new(
        gains: ControllerGains<T>,
        quad: QuadParams<T>,
        rotor_model: SimplifiedModelParams<T>,
        position_net: NnWeights<T>,
        attitude_net: NnWeights<T>,
    ) -> Result<Self, ControlError> {
        for net in [&position_net, &attitude_net] {
            if net.n_inputs() != neural::DEFAULT_INPUTS || net.n_outputs() != 3 {
                return Err(NnError::DimensionMismatch {
                    what: "network inputs/outputs (6/3)",
                    expected: neural::DEFAULT_INPUTS,
                    actual: net.n_inputs(),
                }
                .into());
            }
        }
        Ok(Self {
            gains,
            quad,
            rotor_model,
            position_net,
            attitude_net,
            adaptation: true,
            history: RcHistory::new(),
            last_angles: Vector3::zeros(),
        })
    }

    /// Runs one control step at `state` and advances the network weights by `dt`.
    pub fn step(
        &mut self,
        state: &RigidBodyState<T>,
        traj: &TrajectoryPoint<T>,
        dt: T,
    ) -> Result<ControlStep<T>, ControlError> {
        let g = self.gains;
        let quad = &self.quad;
        let e_x = state.x - traj.x;
        let e_v = state.v - traj.v;

        let x_pos = neural::build_position_input(&state.x, &state.v);
        let delta1 = to_vec3(&neural::nn_output(&self.position_net, &x_pos)?);

        let a_vec = compute_a(&e_x, &e_v, &delta1, &traj.a, &g, quad.mass, quad.gravity);
        let thrust = compute_thrust(&a_vec, &state.r);
        let rc = compute_rc(&a_vec, &traj.b1d, lit::<T>(DEGENERATE_THRUST_FRACTION) * quad.weight())?;
        let (omega_c, omega_c_dot) = self.history.push(rc, dt);
        let attitude = geometry::attitude_error_set(&state.r, &rc, &state.omega, &omega_c);

        let x_att = neural::build_attitude_input_or_last(&state.r, &state.omega, &mut self.last_angles);
        let delta2 = to_vec3(&neural::nn_output(&self.attitude_net, &x_att)?);

        let moment = compute_moment(
            &attitude.e_r,
            &attitude.e_omega,
            &state.omega,
            &state.r,
            &rc,
            &omega_c,
            &omega_c_dot,
            &delta2,
            &quad.inertia,
            &g,
        );

        let rotor_thrusts = allocate_rotors(thrust, &moment, quad.d_h, self.rotor_model.c_tq());
        let speeds = rotor_thrusts.map(|t| rotor_speed_from_thrust(t, &self.rotor_model));
        let command = ControlCommand {
            thrust,
            moment,
            rotor_thrusts,
            rotor_speeds: speeds.map(|s| s.omega),
            saturated: speeds.map(|s| s.saturated),
        };

        let a1 = e_v + e_x * g.c1;
        let a2 = attitude.e_omega + attitude.e_r * g.c2;
        if self.adaptation {
            self.position_net = neural::update_weights(&self.position_net, &x_pos, &from_vec3(&a1), &g.position, dt)?;
            self.attitude_net = neural::update_weights(&self.attitude_net, &x_att, &from_vec3(&a2), &g.attitude, dt)?;
        }

        Ok(ControlStep {
            command,
            e_x,
            e_v,
            attitude,
            thrust_vector: a_vec,
            rc,
            omega_c,
            omega_c_dot,
            delta1,
            delta2,
            a1,
            a2,
        })
    }

    /// Forgets the `R_c` history (e.g. after a discontinuous reset).
    pub fn reset_history(&mut self) {
        self.history.clear();
    }
}

fn to_vec3<T: Float>(v: &DVector<T>) -> Vector3<T> {
    Vector3::new(v[0], v[1], v[2])
}

fn from_vec3<T: Float>(v: &Vector3<T>) -> DVector<T> {
    DVector::from_column_slice(v.as_slice())
}
