//! Rotation-group primitives on SO(3).
//!
//! Rotations map body-frame coordinates to inertial coordinates. The body
//! third axis points down, so gravity acts along `+e3` in the inertial frame.

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

use crate::{lit, to_f64, Float};

/// Maximum `‖M + Mᵀ‖_F` accepted by [`vee`].
pub const SKEW_TOLERANCE: f64 = 1e-8;

/// Threshold on `|cos(pitch)|` below which Z-Y-X angles are undefined.
pub const GIMBAL_LOCK_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("matrix is not skew-symmetric (|M + Mᵀ|_F = {asymmetry:e})")]
    NotSkewSymmetric { asymmetry: f64 },
    #[error("Euler angles undefined at pitch {pitch} rad (gimbal lock)")]
    GimbalLock { pitch: f64 },
    #[error("matrix cannot be projected onto SO(3) (det = {det:e})")]
    DegenerateMatrix { det: f64 },
}

/// Attitude error `e_R` and configuration error function `Ψ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeError<T: Float> {
    pub e_r: Vector3<T>,
    pub psi: T,
}

/// Full attitude tracking error: `e_R`, `e_Ω` and `Ψ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeErrorSet<T: Float> {
    pub e_r: Vector3<T>,
    pub e_omega: Vector3<T>,
    pub psi: T,
}

/// Skew-symmetric matrix with `hat(v) w = v × w`.
pub fn hat<T: Float>(v: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v.z, v.y, v.z, z, -v.x, -v.y, v.x, z)
}

/// Inverse of [`hat`]. Rejects inputs that are not skew-symmetric.
pub fn vee<T: Float>(m: &Matrix3<T>) -> Result<Vector3<T>, GeometryError> {
    let asymmetry = to_f64((m + m.transpose()).norm());
    if !(asymmetry <= SKEW_TOLERANCE) {
        return Err(GeometryError::NotSkewSymmetric { asymmetry });
    }
    Ok(vee_skew_part(m))
}

/// `vee` of the skew-symmetric part `½(M − Mᵀ)`; never fails.
pub fn vee_skew_part<T: Float>(m: &Matrix3<T>) -> Vector3<T> {
    let half = lit::<T>(0.5);
    Vector3::new((m[(2, 1)] - m[(1, 2)]) * half, (m[(0, 2)] - m[(2, 0)]) * half, (m[(1, 0)] - m[(0, 1)]) * half)
}

/// True when `RᵀR = I` and `det R = 1` within `tol`.
pub fn is_rotation<T: Float>(m: &Matrix3<T>, tol: T) -> bool {
    let ortho = (m.transpose() * m - Matrix3::identity()).norm();
    ortho <= tol && (m.determinant() - T::one()).abs() <= tol
}

/// `e_R = ½(R_cᵀR − RᵀR_c)^∨` and `Ψ = ½ tr(I − R_cᵀR)`.
pub fn attitude_error<T: Float>(r: &Rotation3<T>, rc: &Rotation3<T>) -> AttitudeError<T> {
    let rc_t_r = rc.matrix().transpose() * r.matrix();
    let skew = (rc_t_r - rc_t_r.transpose()) * lit::<T>(0.5);
    let psi = (lit::<T>(3.0) - rc_t_r.trace()) * lit::<T>(0.5);
    AttitudeError { e_r: vee_skew_part(&skew), psi }
}

/// `e_Ω = Ω − RᵀR_c Ω_c`.
pub fn angular_velocity_error<T: Float>(
    r: &Rotation3<T>,
    rc: &Rotation3<T>,
    omega: &Vector3<T>,
    omega_c: &Vector3<T>,
) -> Vector3<T> {
    omega - r.matrix().transpose() * (rc.matrix() * omega_c)
}

pub fn attitude_error_set<T: Float>(
    r: &Rotation3<T>,
    rc: &Rotation3<T>,
    omega: &Vector3<T>,
    omega_c: &Vector3<T>,
) -> AttitudeErrorSet<T> {
    let AttitudeError { e_r, psi } = attitude_error(r, rc);
    AttitudeErrorSet { e_r, e_omega: angular_velocity_error(r, rc, omega, omega_c), psi }
}

/// `C(R_cᵀR) = ½(tr(RᵀR_c) I − RᵀR_c)`, the map with `ė_R = C e_Ω`.
pub fn attitude_error_rate_matrix<T: Float>(r: &Rotation3<T>, rc: &Rotation3<T>) -> Matrix3<T> {
    let rt_rc = r.matrix().transpose() * rc.matrix();
    (Matrix3::identity() * rt_rc.trace() - rt_rc) * lit::<T>(0.5)
}

/// Intrinsic Z-Y-X angles `[yaw, pitch, roll]` with `R = Rz(yaw) Ry(pitch) Rx(roll)`.
pub fn euler_zyx<T: Float>(r: &Rotation3<T>) -> Result<Vector3<T>, GeometryError> {
    let m = r.matrix();
    let cos_pitch = (m[(0, 0)] * m[(0, 0)] + m[(1, 0)] * m[(1, 0)]).sqrt();
    let pitch = (-m[(2, 0)]).atan2(cos_pitch);
    if cos_pitch < lit(GIMBAL_LOCK_THRESHOLD) {
        return Err(GeometryError::GimbalLock { pitch: to_f64(pitch) });
    }
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    Ok(Vector3::new(yaw, pitch, roll))
}

/// Inverse of [`euler_zyx`].
pub fn from_euler_zyx<T: Float>(angles: &Vector3<T>) -> Rotation3<T> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), angles.x)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), angles.y)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), angles.z)
}

/// Exponential map `exp(hat(φ))` via Rodrigues' formula.
pub fn exp_so3<T: Float>(phi: &Vector3<T>) -> Rotation3<T> {
    let theta2 = phi.norm_squared();
    let k = hat(phi);
    let (a, b) = if theta2 < lit(1e-12) {
        // Taylor expansions of sin θ/θ and (1 − cos θ)/θ².
        (T::one() - theta2 / lit(6.0), lit::<T>(0.5) - theta2 / lit(24.0))
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (T::one() - theta.cos()) / theta2)
    };
    Rotation3::from_matrix_unchecked(Matrix3::identity() + k * a + k * k * b)
}

/// Closest rotation to `m` in the Frobenius sense (orthogonal polar factor),
/// computed with the Newton iteration `X ← ½(X + X⁻ᵀ)`.
pub fn orthonormalize<T: Float>(m: &Matrix3<T>) -> Result<Rotation3<T>, GeometryError> {
    let det = m.determinant();
    let scale = m.norm();
    let degenerate = GeometryError::DegenerateMatrix { det: to_f64(det) };
    if !(det > T::zero()) || det <= lit::<T>(1e-12) * scale * scale * scale {
        return Err(degenerate);
    }
    let half = lit::<T>(0.5);
    let stop = lit::<T>(4.0) * T::default_epsilon();
    let mut x = *m;
    for _ in 0..32 {
        let inv_t = x.try_inverse().ok_or(degenerate)?.transpose();
        let next = (x + inv_t) * half;
        let step = (next - x).norm();
        x = next;
        if step <= stop {
            break;
        }
    }
    Ok(Rotation3::from_matrix_unchecked(x))
}
