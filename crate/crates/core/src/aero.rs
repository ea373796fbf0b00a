//! Rotor aerodynamics under wind: relative wind at each hub, the coupled
//! thrust-coefficient / inflow-ratio solve, blade flapping, rotor torque,
//! body drag, and the resulting force and moment on the vehicle.

use nalgebra::Vector3;
use thiserror::Error;

use crate::dynamics::{QuadParams, RigidBodyState, SimplifiedModelParams, DEFAULT_MIN_ROTOR_SPEED};
use crate::{lit, to_f64, Float};

/// Newton iteration cap for [`solve_thrust_inflow`].
pub const MAX_NEWTON_ITERATIONS: usize = 50;

/// Residual accepted for the implicit inflow equation.
pub const INFLOW_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AeroError {
    #[error("rotor speed {omega} rad/s below floor {omega_min} rad/s")]
    RotorStopped { omega: f64, omega_min: f64 },
    #[error("inflow solve did not converge (residual {residual:e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("invalid aerodynamic parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Blade-element constants used by the inflow and torque solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BladeCoefficients<T: Float> {
    /// Solidity ratio `s`.
    pub solidity: T,
    /// Lift-curve slope `C_lα` (1/rad).
    pub lift_slope: T,
    /// Collective blade pitch `θ0` (rad).
    pub pitch: T,
    /// Profile drag coefficient `C_D0`.
    pub profile_drag: T,
}

/// Physical constants of the rotors and airframe drag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorAeroParams<T: Float> {
    /// Air density (kg/m³).
    pub rho: T,
    /// Rotor radius `r_p` (m).
    pub radius: T,
    /// Swept area `A_p = π r_p²` (m²).
    pub area: T,
    pub n_blades: T,
    /// Blade chord (m).
    pub chord: T,
    pub blade: BladeCoefficients<T>,
    /// Flapping coefficient `C_α` (rad·s/m).
    pub flap_coeff: T,
    /// Blade stiffness `K_β` (N·m/rad).
    pub blade_stiffness: T,
    /// Body drag coefficient `C_d` (kg/m).
    pub body_drag: T,
    /// Rotor speed floor (rad/s).
    pub omega_min: T,
}

impl<T: Float> RotorAeroParams<T> {
    /// Builds the parameter set, deriving `A_p` and the solidity ratio.
    ///
    /// Density, radius, blade count, chord and lift slope must be positive.
    /// Pitch, profile drag, flapping, stiffness and body drag may be zero,
    /// which switches the corresponding effect off.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rho: T,
        radius: T,
        n_blades: T,
        chord: T,
        lift_slope: T,
        pitch: T,
        profile_drag: T,
        flap_coeff: T,
        blade_stiffness: T,
        body_drag: T,
    ) -> Result<Self, AeroError> {
        let positive = [rho, radius, n_blades, chord, lift_slope];
        if !positive.iter().all(|&p| p > T::zero() && p.is_finite()) {
            return Err(AeroError::InvalidParameter(
                "density, radius, blade count, chord and lift slope must be positive",
            ));
        }
        let nonneg = [pitch, profile_drag, flap_coeff, blade_stiffness, body_drag];
        if !nonneg.iter().all(|&p| p >= T::zero() && p.is_finite()) {
            return Err(AeroError::InvalidParameter(
                "pitch, drag, flapping and stiffness coefficients must be non-negative",
            ));
        }
        let pi = T::pi();
        let solidity = n_blades * chord / (pi * radius);
        if !(solidity < T::one()) {
            return Err(AeroError::InvalidParameter("solidity ratio must be below 1"));
        }
        Ok(Self {
            rho,
            radius,
            area: pi * radius * radius,
            n_blades,
            chord,
            blade: BladeCoefficients { solidity, lift_slope, pitch, profile_drag },
            flap_coeff,
            blade_stiffness,
            body_drag,
            omega_min: lit(DEFAULT_MIN_ROTOR_SPEED),
        })
    }

    /// Thrust per unit thrust coefficient at rotor speed `omega`: `ρ A_p (r_p ω)²`.
    pub fn thrust_scale(&self, omega: T) -> T {
        let tip = self.radius * omega;
        self.rho * self.area * tip * tip
    }

    /// Torque per unit torque coefficient: `ρ A_p r_p (r_p ω)²`.
    pub fn torque_scale(&self, omega: T) -> T {
        self.thrust_scale(omega) * self.radius
    }
}

/// Converged solution of the coupled thrust/inflow equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflowSolution<T: Float> {
    pub c_t: T,
    pub lambda: T,
    /// `|λ − C_T / (2√(μx² + (λ + μz)²))|` at the returned point.
    pub residual: T,
    pub iterations: usize,
}

/// Aerodynamic state of one rotor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorWindState<T: Float> {
    /// Relative wind at the hub, body frame (m/s).
    pub u: Vector3<T>,
    pub mu_x: T,
    pub mu_z: T,
    pub lambda: T,
    pub c_t: T,
    pub c_q: T,
    /// Flapping angle (rad).
    pub alpha: T,
    /// Unit thrust direction, body frame.
    pub d: Vector3<T>,
    /// Thrust magnitude (N).
    pub thrust: T,
    /// Reactive torque magnitude (N·m).
    pub torque: T,
}

/// Resultant force (inertial) and moment (body) with per-rotor detail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroWrench<T: Float> {
    pub force: Vector3<T>,
    pub moment: Vector3<T>,
    pub rotors: [RotorWindState<T>; 4],
}

/// `v_wj = Rᵀ(v_w − v) + Ω̂ r_j`.
pub fn rotor_relative_wind<T: Float>(state: &RigidBodyState<T>, wind: &Vector3<T>, hub: &Vector3<T>) -> Vector3<T> {
    state.r.matrix().transpose() * (wind - state.v) + state.omega.cross(hub)
}

/// In-plane and axial advance ratios `(μx, μz)`.
pub fn advance_ratios<T: Float>(u: &Vector3<T>, omega: T, radius: T, omega_min: T) -> Result<(T, T), AeroError> {
    if !(omega >= omega_min) {
        return Err(AeroError::RotorStopped { omega: to_f64(omega), omega_min: to_f64(omega_min) });
    }
    let tip = omega * radius;
    Ok(((u.x * u.x + u.y * u.y).sqrt() / tip, u.z / tip))
}

/// `C_T(λ) = (s C_lα / 2)[θ0 (1/3 + μx²/2) − (λ + μz)/2]`.
pub fn thrust_coefficient<T: Float>(lambda: T, mu_x: T, mu_z: T, blade: &BladeCoefficients<T>) -> T {
    let half = lit::<T>(0.5);
    blade.solidity
        * blade.lift_slope
        * half
        * (blade.pitch * (lit::<T>(1.0 / 3.0) + mu_x * mu_x * half) - (lambda + mu_z) * half)
}

fn inflow_residual<T: Float>(lambda: T, mu_x: T, mu_z: T, blade: &BladeCoefficients<T>) -> T {
    let q = (mu_x * mu_x + (lambda + mu_z) * (lambda + mu_z)).sqrt();
    let c_t = thrust_coefficient(lambda, mu_x, mu_z, blade);
    if q > T::zero() {
        lambda - c_t / (lit::<T>(2.0) * q)
    } else {
        // 0/0 inflow: only λ = 0 with zero thrust is consistent.
        lambda.abs() + c_t.abs()
    }
}

/// Solves the implicit pair `C_T(λ)`, `λ = C_T / (2√(μx² + (λ + μz)²))`.
///
/// Newton's method runs on the cleared form
/// `G(λ) = 2λ√(μx² + (λ + μz)²) − C_T(λ)` from `λ0 = √(s C_lα θ0 / 12)`. If it
/// leaves the physical range or stalls, a bracketing bisection on `G` takes
/// over.
pub fn solve_thrust_inflow<T: Float>(
    mu_x: T,
    mu_z: T,
    blade: &BladeCoefficients<T>,
) -> Result<InflowSolution<T>, AeroError> {
    let two = lit::<T>(2.0);
    let sa = blade.solidity * blade.lift_slope;
    let g = |l: T| {
        let q = (mu_x * mu_x + (l + mu_z) * (l + mu_z)).sqrt();
        two * l * q - thrust_coefficient(l, mu_x, mu_z, blade)
    };
    let tol = lit::<T>(INFLOW_TOLERANCE);
    let finish = |lambda: T, iterations: usize| {
        let residual = inflow_residual(lambda, mu_x, mu_z, blade).abs();
        InflowSolution { c_t: thrust_coefficient(lambda, mu_x, mu_z, blade), lambda, residual, iterations }
    };

    let mut lambda = (sa * blade.pitch.max(T::zero()) / lit(12.0)).sqrt();
    let tiny = lit::<T>(1e-30);
    let mut iterations = 0;
    let mut newton_ok = false;
    while iterations < MAX_NEWTON_ITERATIONS {
        iterations += 1;
        let q = (mu_x * mu_x + (lambda + mu_z) * (lambda + mu_z)).sqrt();
        let value = g(lambda);
        let slope = two * q + two * lambda * (lambda + mu_z) / q.max(tiny) + sa / lit(4.0);
        if value == T::zero() {
            newton_ok = true;
            break;
        }
        if !(slope.abs() > tiny) {
            break;
        }
        let step = value / slope;
        lambda -= step;
        if !lambda.is_finite() || lambda.abs() > lit(4.0) {
            break;
        }
        if step.abs() <= T::default_epsilon() * lambda.abs().max(lit(1e-3)) {
            newton_ok = true;
            break;
        }
    }
    if newton_ok {
        let sol = finish(lambda, iterations);
        if sol.residual < tol {
            return Ok(sol);
        }
    }

    // Bracketing fallback.
    let (mut lo, mut hi) = (T::zero(), T::one());
    let mut expand = 0;
    while g(lo) > T::zero() && expand < 8 {
        lo -= lit::<T>(0.125) * lit::<T>(2.0).powi(expand);
        expand += 1;
    }
    expand = 0;
    while g(hi) < T::zero() && expand < 8 {
        hi *= two;
        expand += 1;
    }
    if g(lo) > T::zero() || g(hi) < T::zero() {
        let residual = to_f64(inflow_residual(lambda, mu_x, mu_z, blade).abs());
        return Err(AeroError::NoConvergence { residual, iterations });
    }
    for _ in 0..200 {
        iterations += 1;
        let mid = (lo + hi) * lit(0.5);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let sol = finish((lo + hi) * lit(0.5), iterations);
    if sol.residual < tol {
        Ok(sol)
    } else {
        Err(AeroError::NoConvergence { residual: to_f64(sol.residual), iterations })
    }
}

/// `C_Q = C_T (λ + μz) + (C_D0 s / 8)(1 + 3 μx²)`.
pub fn torque_coefficient<T: Float>(c_t: T, lambda: T, mu_x: T, mu_z: T, blade: &BladeCoefficients<T>) -> T {
    c_t * (lambda + mu_z) + blade.profile_drag * blade.solidity / lit(8.0) * (T::one() + lit::<T>(3.0) * mu_x * mu_x)
}

/// Flapping angle `α = C_α √(u1² + u2²)` and the tilted thrust direction.
/// With no in-plane wind the direction is `−e3`.
pub fn flap_direction<T: Float>(u1: T, u2: T, c_alpha: T) -> (T, Vector3<T>) {
    let planar = (u1 * u1 + u2 * u2).sqrt();
    let alpha = c_alpha * planar;
    if planar == T::zero() {
        return (alpha, -Vector3::z());
    }
    let s = alpha.sin() / planar;
    let d = Vector3::new(-s * u1, -s * u2, -alpha.cos());
    // Renormalize away the last ulp so ‖d‖ = 1 holds tightly.
    (alpha, d / d.norm())
}

/// `D = −C_d ‖v − v_w‖ (v − v_w)`.
pub fn drag_force<T: Float>(v: &Vector3<T>, wind: &Vector3<T>, c_d: T) -> Vector3<T> {
    let rel = v - wind;
    rel * (-c_d * rel.norm())
}

/// Aerodynamic state of rotor `hub` spinning at `omega`.
pub fn rotor_wind_state<T: Float>(
    state: &RigidBodyState<T>,
    wind: &Vector3<T>,
    hub: &Vector3<T>,
    omega: T,
    aero: &RotorAeroParams<T>,
) -> Result<RotorWindState<T>, AeroError> {
    let u = rotor_relative_wind(state, wind, hub);
    let (mu_x, mu_z) = advance_ratios(&u, omega, aero.radius, aero.omega_min)?;
    let sol = solve_thrust_inflow(mu_x, mu_z, &aero.blade)?;
    let c_q = torque_coefficient(sol.c_t, sol.lambda, mu_x, mu_z, &aero.blade);
    let (alpha, d) = flap_direction(u.x, u.y, aero.flap_coeff);
    Ok(RotorWindState {
        u,
        mu_x,
        mu_z,
        lambda: sol.lambda,
        c_t: sol.c_t,
        c_q,
        alpha,
        d,
        thrust: sol.c_t * aero.thrust_scale(omega),
        torque: c_q * aero.torque_scale(omega),
    })
}

/// Total force `U_e` (inertial) and moment `M_e` (body) on the vehicle.
///
/// Rotors 1 and 3 spin opposite to rotors 2 and 4; the reactive torque of
/// rotor `j` enters as `(−1)^(j+1) Q_j d_j`. The flapping hinge moment of
/// rotor `j` is applied as `(N_b/2) K_β α_j (d_j·e1)` about `b1` and
/// `(N_b/2) K_β α_j (d_j·e2)` about `b2`.
pub fn resultant_wrench<T: Float>(
    state: &RigidBodyState<T>,
    wind: &Vector3<T>,
    omegas: &[T; 4],
    quad: &QuadParams<T>,
    aero: &RotorAeroParams<T>,
) -> Result<AeroWrench<T>, AeroError> {
    let hubs = quad.rotor_positions();
    let mut rotors = [None; 4];
    let mut body_thrust = Vector3::zeros();
    let mut moment = Vector3::zeros();
    let hinge = aero.n_blades * lit(0.5) * aero.blade_stiffness;
    for (j, (hub, &omega)) in hubs.iter().zip(omegas).enumerate() {
        let rs = rotor_wind_state(state, wind, hub, omega, aero)?;
        let thrust_vec = rs.d * rs.thrust;
        let sign = if j % 2 == 0 { T::one() } else { -T::one() };
        body_thrust += thrust_vec;
        moment += hub.cross(&thrust_vec) + rs.d * (sign * rs.torque);
        moment += Vector3::new(rs.d.x, rs.d.y, T::zero()) * (hinge * rs.alpha);
        rotors[j] = Some(rs);
    }
    let force =
        Vector3::z() * quad.weight() + drag_force(&state.v, wind, aero.body_drag) + state.r.matrix() * body_thrust;
    Ok(AeroWrench { force, moment, rotors: rotors.map(|r| r.expect("all four rotors evaluated")) })
}

/// Hover solution at zero advance ratio.
pub fn hover_coefficients<T: Float>(aero: &RotorAeroParams<T>) -> Result<(T, T), AeroError> {
    let z = T::zero();
    let sol = solve_thrust_inflow(z, z, &aero.blade)?;
    Ok((sol.c_t, torque_coefficient(sol.c_t, sol.lambda, z, z, &aero.blade)))
}

/// Rotor speed at which four rotors in still air carry the vehicle weight.
pub fn hover_rotor_speed<T: Float>(quad: &QuadParams<T>, aero: &RotorAeroParams<T>) -> Result<T, AeroError> {
    let (c_t, _) = hover_coefficients(aero)?;
    if !(c_t > T::zero()) {
        return Err(AeroError::InvalidParameter("hover thrust coefficient must be positive"));
    }
    let r2 = aero.radius * aero.radius;
    Ok((quad.weight() / (lit::<T>(4.0) * c_t * aero.rho * aero.area * r2)).sqrt())
}

/// Constant-coefficient model matching the aerodynamic rotor in still-air hover.
pub fn calibrated_simplified_model<T: Float>(aero: &RotorAeroParams<T>) -> Result<SimplifiedModelParams<T>, AeroError> {
    let (c_t, c_q) = hover_coefficients(aero)?;
    let r2 = aero.radius * aero.radius;
    let mut p =
        SimplifiedModelParams::new(c_t * aero.rho * aero.area * r2, c_q * aero.rho * aero.area * r2 * aero.radius)
            .map_err(|_| AeroError::InvalidParameter("hover coefficients must be positive"))?;
    p.omega_min = aero.omega_min;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Rotation3, Unit};
    use proptest::prelude::*;

    fn blade(pitch: f64) -> BladeCoefficients<f64> {
        BladeCoefficients { solidity: 0.1, lift_slope: 5.7, pitch, profile_drag: 0.01 }
    }

    fn quad() -> QuadParams<f64> {
        QuadParams::new(2.0, Matrix3::from_diagonal(&Vector3::new(0.02, 0.02, 0.04)), 0.23, -0.05, 9.81).unwrap()
    }

    fn aero() -> RotorAeroParams<f64> {
        RotorAeroParams::new(1.225, 0.127, 2.0, 0.02, 5.7, 0.2, 0.01, 0.01, 0.25, 0.1).unwrap()
    }

    #[test]
    fn relative_wind_examples() {
        let s = RigidBodyState::at_rest(Vector3::zeros());
        let hub = Vector3::new(0.3, 0.0, 0.05);
        assert_eq!(rotor_relative_wind(&s, &Vector3::new(3.0, 0.0, 0.0), &hub), Vector3::new(3.0, 0.0, 0.0));
        let moving = RigidBodyState { v: Vector3::new(1.0, -2.0, 0.5), ..s };
        assert_eq!(rotor_relative_wind(&moving, &moving.v, &hub), Vector3::zeros());
        let spinning = RigidBodyState { omega: Vector3::z(), ..s };
        assert_relative_eq!(
            rotor_relative_wind(&spinning, &Vector3::zeros(), &hub),
            Vector3::new(0.0, 0.3, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn advance_ratio_examples() {
        assert_eq!(advance_ratios(&Vector3::zeros(), 100.0, 0.25, 1.0).unwrap(), (0.0, 0.0));
        let (mx, mz) = advance_ratios(&Vector3::new(3.0, 4.0, 0.0), 100.0, 0.25, 1.0).unwrap();
        assert_relative_eq!(mx, 0.2, epsilon = 1e-15);
        assert_eq!(mz, 0.0);
        assert!(matches!(advance_ratios(&Vector3::zeros(), 0.0, 0.25, 1.0), Err(AeroError::RotorStopped { .. })));
    }

    #[test]
    fn hover_inflow_matches_quadratic() {
        // Hover reduces to 2λ² + (s a/4) λ − s a θ0/6 = 0.
        let (s, a, th): (f64, f64, f64) = (0.1, 5.7, 0.2);
        let (qa, qb, qc) = (2.0, s * a / 4.0, -s * a * th / 6.0);
        let lambda = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
        let sol = solve_thrust_inflow(0.0, 0.0, &blade(th)).unwrap();
        assert_relative_eq!(sol.lambda, lambda, epsilon = 1e-14);
        assert!((sol.lambda - 0.0681495).abs() < 1e-6);
        assert!((sol.c_t - 0.0092887).abs() < 1e-6);
        assert!(sol.residual < 1e-10);
    }

    #[test]
    fn zero_pitch_hover_produces_no_thrust() {
        let sol = solve_thrust_inflow(0.0, 0.0, &blade(0.0)).unwrap();
        assert_eq!(sol.c_t, 0.0);
        assert_eq!(sol.lambda, 0.0);
    }

    #[test]
    fn torque_coefficient_examples() {
        assert_relative_eq!(torque_coefficient(0.0, 0.0, 0.0, 0.0, &blade(0.2)), 1.25e-4, epsilon = 1e-18);
        let sol = solve_thrust_inflow(0.0, 0.0, &blade(0.2)).unwrap();
        let cq = torque_coefficient(sol.c_t, sol.lambda, 0.0, 0.0, &blade(0.2));
        assert!((cq - 7.5804e-4).abs() < 5e-8, "{cq}");
        let profile = torque_coefficient(0.0, 0.0, 0.3, 0.0, &blade(0.2));
        assert_relative_eq!(profile / 1.25e-4, 1.27, epsilon = 1e-12);
    }

    #[test]
    fn flap_examples() {
        let (a, d) = flap_direction(0.0, 0.0, 0.05);
        assert_eq!(a, 0.0);
        assert_eq!(d, -Vector3::z());
        let (a, d) = flap_direction(3.0, 4.0, 0.05);
        assert_relative_eq!(a, 0.25, epsilon = 1e-15);
        let expected = Vector3::new(-0.25f64.sin() * 0.6, -0.25f64.sin() * 0.8, -0.25f64.cos());
        assert_relative_eq!(d, expected, epsilon = 1e-15);
        assert!((d - Vector3::new(-0.14845, -0.19793, -0.96891)).amax() < 1e-5);
    }

    #[test]
    fn drag_examples() {
        let v = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(drag_force(&v, &v, 0.5), Vector3::zeros());
        assert_eq!(drag_force(&v, &Vector3::zeros(), 0.0).norm(), 0.0);
        assert_relative_eq!(
            drag_force(&Vector3::new(2.0, 0.0, 0.0), &Vector3::zeros(), 0.5),
            Vector3::new(-2.0, 0.0, 0.0)
        );
    }

    #[test]
    fn hover_wrench_is_symmetric() {
        let (q, a) = (quad(), aero());
        let s = RigidBodyState::at_rest(Vector3::zeros());
        let w = 700.0;
        let out = resultant_wrench(&s, &Vector3::zeros(), &[w; 4], &q, &a).unwrap();
        assert!(out.force.x.abs() < 1e-12 && out.force.y.abs() < 1e-12);
        assert!(out.moment.norm() < 1e-12, "{}", out.moment);
        let (c_t, _) = hover_coefficients(&a).unwrap();
        let t_hover = c_t * a.thrust_scale(w);
        assert_relative_eq!(out.force.z, q.weight() - 4.0 * t_hover, epsilon = 1e-12);
    }

    #[test]
    fn hover_trim_cancels_weight() {
        let (q, a) = (quad(), aero());
        let w_h = hover_rotor_speed(&q, &a).unwrap();
        // Oracle: bisection on the vertical force as a function of a common speed.
        let fz = |w: f64| {
            let s = RigidBodyState::at_rest(Vector3::zeros());
            resultant_wrench(&s, &Vector3::zeros(), &[w; 4], &q, &a).unwrap().force.z
        };
        let (mut lo, mut hi) = (10.0, 5000.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if fz(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert_relative_eq!(w_h, 0.5 * (lo + hi), max_relative = 1e-12);
        assert!(fz(w_h).abs() < 1e-9 * q.weight());
        assert!(matches!(
            resultant_wrench(
                &RigidBodyState::at_rest(Vector3::zeros()),
                &Vector3::zeros(),
                &[w_h, 0.5, w_h, w_h],
                &q,
                &a
            ),
            Err(AeroError::RotorStopped { .. })
        ));
    }

    #[test]
    fn calibrated_model_reproduces_hover() {
        let (q, a) = (quad(), aero());
        let p = calibrated_simplified_model(&a).unwrap();
        let w_h = hover_rotor_speed(&q, &a).unwrap();
        assert_relative_eq!(4.0 * p.c_t * w_h * w_h, q.weight(), max_relative = 1e-13);
        let (c_t, c_q) = hover_coefficients(&a).unwrap();
        assert_relative_eq!(p.c_tq(), a.radius * c_q / c_t, max_relative = 1e-13);
    }

    #[test]
    fn flapping_moment_vanishes_without_wind_and_is_bounded() {
        let (q, mut a) = (quad(), aero());
        let s = RigidBodyState::at_rest(Vector3::zeros());
        let w = [720.0; 4];
        let base = resultant_wrench(&s, &Vector3::zeros(), &w, &q, &a).unwrap();
        let wind = Vector3::new(4.0, -3.0, 0.0);
        let with = resultant_wrench(&s, &wind, &w, &q, &a).unwrap();
        a.blade_stiffness = 0.0;
        let without = resultant_wrench(&s, &wind, &w, &q, &a).unwrap();
        let a_ref = aero();
        let hinge = a_ref.n_blades / 2.0 * a_ref.blade_stiffness;
        let bound: f64 = with.rotors.iter().map(|r| hinge * r.alpha * 2f64.sqrt()).sum();
        assert!((with.moment - without.moment).norm() <= bound + 1e-15);
        assert!((with.moment - without.moment).norm() > 0.0);
        assert!(base.moment.norm() < 1e-12);
    }

    fn oracle_lambda(mu_x: f64, mu_z: f64, b: &BladeCoefficients<f64>) -> f64 {
        // Bisection on the unscaled residual λ − C_T/(2√(μx² + (λ+μz)²)).
        let f = |l: f64| {
            let ct = b.solidity * b.lift_slope / 2.0 * (b.pitch * (1.0 / 3.0 + mu_x * mu_x / 2.0) - (l + mu_z) / 2.0);
            l - ct / (2.0 * (mu_x * mu_x + (l + mu_z).powi(2)).sqrt())
        };
        let (mut lo, mut hi) = (1e-9, 1.0);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn newton_matches_bisection_on_grid_corners() {
        let b = blade(0.2);
        for mu_x in [0.0, 0.15, 0.3] {
            for mu_z in [-0.05, 0.0, 0.1] {
                let sol = solve_thrust_inflow(mu_x, mu_z, &b).unwrap();
                assert!((sol.lambda - oracle_lambda(mu_x, mu_z, &b)).abs() < 1e-8);
                assert!(sol.residual < 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn flap_direction_is_unit(u1 in -30.0..30.0f64, u2 in -30.0..30.0f64, ca in 0.0..0.1f64) {
            let (a, d) = flap_direction(u1, u2, ca);
            prop_assert!((d.norm() - 1.0).abs() <= 1e-12);
            if a == 0.0 { prop_assert_eq!(d, -Vector3::z()); }
        }

        #[test]
        fn drag_is_dissipative(v in prop::array::uniform3(-20.0..20.0f64),
                               w in prop::array::uniform3(-20.0..20.0f64),
                               cd in 0.0..2.0f64) {
            let (v, w) = (Vector3::from(v), Vector3::from(w));
            prop_assert!(drag_force(&v, &w, cd).dot(&(v - w)) <= 0.0);
        }

        #[test]
        fn wrench_is_yaw_frame_consistent(
            yaw in -3.0..3.0f64,
            att in prop::array::uniform3(-0.4..0.4f64),
            vel in prop::array::uniform3(-3.0..3.0f64),
            wind in prop::array::uniform3(-6.0..6.0f64),
            rate in prop::array::uniform3(-1.0..1.0f64),
        ) {
            let (q, a) = (quad(), aero());
            let r = crate::geometry::exp_so3(&Vector3::from(att));
            let s = RigidBodyState { x: Vector3::zeros(), v: Vector3::from(vel), r, omega: Vector3::from(rate) };
            let qz = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::z()), yaw);
            let rotated = RigidBodyState { v: qz * s.v, r: qz * s.r, ..s };
            let w = [690.0, 710.0, 705.0, 695.0];
            let base = resultant_wrench(&s, &Vector3::from(wind), &w, &q, &a).unwrap();
            let turned = resultant_wrench(&rotated, &(qz * Vector3::from(wind)), &w, &q, &a).unwrap();
            prop_assert!((turned.force - qz * base.force).norm() <= 1e-10);
            prop_assert!((turned.moment - base.moment).norm() <= 1e-11);
        }
    }
}
