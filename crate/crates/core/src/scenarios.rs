//! Desired trajectories and ambient wind fields.
//!
//! All positions use the NED-style convention of the plant: `e3` points down,
//! so climbing means decreasing `z`.

use nalgebra::Vector3;

use crate::control::TrajectoryPoint;
use crate::{lit, Float};

/// Ambient wind velocity as a function of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindField<T: Float> {
    Constant {
        velocity: Vector3<T>,
    },
    /// `base` before `onset`, `base + amplitude·direction` from `onset` on.
    StepGust {
        base: Vector3<T>,
        amplitude: T,
        direction: Vector3<T>,
        onset: T,
    },
    /// `base + amplitude·sin(2π f t)·direction`.
    Sinusoidal {
        base: Vector3<T>,
        amplitude: T,
        frequency_hz: T,
        direction: Vector3<T>,
    },
}

impl<T: Float> WindField<T> {
    pub fn calm() -> Self {
        Self::Constant { velocity: Vector3::zeros() }
    }

    pub fn wind_at(&self, t: T) -> Vector3<T> {
        match *self {
            Self::Constant { velocity } => velocity,
            Self::StepGust { base, amplitude, direction, onset } => {
                if t >= onset {
                    base + unit_or_zero(&direction) * amplitude
                } else {
                    base
                }
            }
            Self::Sinusoidal { base, amplitude, frequency_hz, direction } => {
                let phase = lit::<T>(2.0) * T::pi() * frequency_hz * t;
                base + unit_or_zero(&direction) * (amplitude * phase.sin())
            }
        }
    }

    /// Upper bound on `‖v_w(t)‖` over all `t`.
    pub fn max_speed(&self) -> T {
        match *self {
            Self::Constant { velocity } => velocity.norm(),
            Self::StepGust { base, amplitude, .. } | Self::Sinusoidal { base, amplitude, .. } => {
                base.norm() + amplitude.abs()
            }
        }
    }
}

fn unit_or_zero<T: Float>(v: &Vector3<T>) -> Vector3<T> {
    let n = v.norm();
    if n > T::zero() {
        v / n
    } else {
        Vector3::zeros()
    }
}

/// Parametric desired trajectories with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryGenerator<T: Float> {
    Hover {
        position: Vector3<T>,
    },
    /// Horizontal circle about `center`, angle `rate·t`, heading along the tangent.
    Circle {
        center: Vector3<T>,
        radius: T,
        rate: T,
    },
    /// Circle that climbs at `climb_rate` (m/s, upward), heading along the
    /// horizontal tangent.
    Helix {
        center: Vector3<T>,
        radius: T,
        rate: T,
        climb_rate: T,
    },
    /// `center_i + amplitude_i sin(frequency_i t + phase_i)` per axis, fixed heading `e1`.
    Lissajous {
        center: Vector3<T>,
        amplitude: Vector3<T>,
        frequency: Vector3<T>,
        phase: Vector3<T>,
    },
}

/// Bounds on the desired motion over a time horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryBounds<T: Float> {
    pub position: T,
    pub velocity: T,
    pub acceleration: T,
    pub jerk: T,
    pub heading_rate: T,
}

impl<T: Float> TrajectoryGenerator<T> {
    pub fn trajectory_at(&self, t: T) -> TrajectoryPoint<T> {
        match *self {
            Self::Hover { position } => TrajectoryPoint::hover(position),
            Self::Circle { center, radius, rate } => circle_point(center, radius, rate, T::zero(), t),
            Self::Helix { center, radius, rate, climb_rate } => circle_point(center, radius, rate, climb_rate, t),
            Self::Lissajous { center, amplitude, frequency, phase } => {
                let mut p = TrajectoryPoint::hover(center);
                for i in 0..3 {
                    let (a, w) = (amplitude[i], frequency[i]);
                    let (s, c) = (w * t + phase[i]).sin_cos();
                    p.x[i] += a * s;
                    p.v[i] = a * w * c;
                    p.a[i] = -a * w * w * s;
                    p.jerk[i] = -a * w * w * w * c;
                }
                p
            }
        }
    }

    /// Bounds holding for all `t ∈ [0, horizon]`.
    pub fn bounds(&self, horizon: T) -> TrajectoryBounds<T> {
        let z = T::zero();
        match *self {
            Self::Hover { position } => {
                TrajectoryBounds { position: position.norm(), velocity: z, acceleration: z, jerk: z, heading_rate: z }
            }
            Self::Circle { center, radius, rate } => circle_bounds(center, radius, rate, z, horizon),
            Self::Helix { center, radius, rate, climb_rate } => {
                circle_bounds(center, radius, rate, climb_rate, horizon)
            }
            Self::Lissajous { center, amplitude, frequency, .. } => {
                let scaled = |p: i32| amplitude.zip_map(&frequency, |a, w| (a * w.powi(p)).abs()).norm();
                TrajectoryBounds {
                    position: center.norm() + amplitude.abs().norm(),
                    velocity: scaled(1),
                    acceleration: scaled(2),
                    jerk: scaled(3),
                    heading_rate: z,
                }
            }
        }
    }
}

fn circle_point<T: Float>(center: Vector3<T>, radius: T, rate: T, climb: T, t: T) -> TrajectoryPoint<T> {
    let (s, c) = (rate * t).sin_cos();
    let (w, r) = (rate, radius);
    let x = center + Vector3::new(r * c, r * s, -climb * t);
    let v = Vector3::new(-r * w * s, r * w * c, -climb);
    let a = Vector3::new(-r * w * w * c, -r * w * w * s, T::zero());
    let jerk = Vector3::new(r * w * w * w * s, -r * w * w * w * c, T::zero());
    let (b1d, b1d_dot) = if rate == T::zero() || radius == T::zero() {
        (Vector3::x(), Vector3::zeros())
    } else {
        // Unit horizontal tangent sign(ω)·[−sin, cos, 0]; its rate is |ω|·[−cos, −sin, 0].
        let sign = rate.signum();
        (Vector3::new(-s * sign, c * sign, T::zero()), Vector3::new(-c, -s, T::zero()) * rate.abs())
    };
    TrajectoryPoint { x, v, a, jerk, b1d, b1d_dot }
}

fn circle_bounds<T: Float>(center: Vector3<T>, radius: T, rate: T, climb: T, horizon: T) -> TrajectoryBounds<T> {
    let (r, w) = (radius.abs(), rate.abs());
    let heading_rate = if r == T::zero() { T::zero() } else { w };
    TrajectoryBounds {
        position: center.norm() + r + climb.abs() * horizon,
        velocity: ((r * w).powi(2) + climb * climb).sqrt(),
        acceleration: r * w * w,
        jerk: r * w * w * w,
        heading_rate,
    }
}
