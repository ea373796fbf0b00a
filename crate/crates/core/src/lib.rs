//! Geometric adaptive control of a quadrotor on SE(3) with online-trained
//! neural networks, a wind-aware rotor aerodynamics plant, and tooling for
//! checking the Lyapunov gain conditions of the closed loop.
//!
//! All of the math is generic over the scalar type through [`Float`]
//! (implemented for `f32` and `f64`). The aliases at the crate root fix the
//! scalar to `f64`, which is what the simulation harness uses.
//!
//! ## Modules
//!
//! - [`geometry`]: hat/vee maps, attitude errors, Euler angles, reprojection
//! - [`aero`]: rotor inflow, thrust/torque coefficients, flapping, drag, wrench
//! - [`dynamics`]: rigid-body equations of motion and the RKMK4 integrator
//! - [`neural`]: the two adaptive networks and their weight update laws
//! - [`control`]: thrust, computed attitude, moment and rotor allocation
//! - [`stability`]: gain conditions, Lyapunov functions, ultimate bound
//! - [`scenarios`]: desired trajectories and wind fields

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aero;
pub mod control;
pub mod dynamics;
pub mod geometry;
pub mod neural;
pub mod scenarios;
pub mod stability;

use nalgebra as na;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar accepted by every numerical routine in the crate.
pub trait Float: na::RealField + Copy + FromPrimitive + ToPrimitive {}

impl Float for f32 {}
impl Float for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub(crate) fn lit<T: Float>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Lossy conversion used for error payloads and reports.
#[inline]
pub(crate) fn to_f64<T: Float>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub use aero::{BladeCoefficients, RotorAeroParams, RotorWindState};
pub use control::{ControlCommand, ControllerGains, GeometricAdaptiveController, TrajectoryPoint};
pub use dynamics::{QuadParams, RigidBodyState, SimplifiedModelParams};
pub use geometry::{AttitudeError, AttitudeErrorSet};
pub use neural::{AdaptationGains, NnWeights};
pub use scenarios::{TrajectoryGenerator, WindField};
pub use stability::{BoundAssumptions, LyapunovReport};

/// 3-vector in `f64`.
pub type Vec3 = na::Vector3<f64>;
/// 3×3 matrix in `f64`.
pub type Mat3 = na::Matrix3<f64>;
/// Rotation matrix in `f64`.
pub type Rot3 = na::Rotation3<f64>;

/// Single-precision variants.
pub type Vec3f = na::Vector3<f32>;
pub type Mat3f = na::Matrix3<f32>;
pub type Rot3f = na::Rotation3<f32>;

pub type State = RigidBodyState<f64>;
pub type Quad = QuadParams<f64>;
pub type Aero = RotorAeroParams<f64>;
pub type Simplified = SimplifiedModelParams<f64>;
pub type Gains = ControllerGains<f64>;
pub type Weights = NnWeights<f64>;
pub type Controller = GeometricAdaptiveController<f64>;
pub type Trajectory = TrajectoryGenerator<f64>;
pub type Wind = WindField<f64>;
pub type Bounds = BoundAssumptions<f64>;
