//! Three-layer networks producing the adaptive terms, with the online weight
//! update laws and norm-ball projection.
//!
//! A network with `n_in` inputs (plus bias), `n_hidden` sigmoid units (plus
//! bias) and `n_out` outputs evaluates `Δ̄ = W̄ᵀ σ(V̄ᵀ x_nn)`, where
//! `W̄ ∈ ℝ^{(n_hidden+1)×n_out}` and `V̄ ∈ ℝ^{(n_in+1)×n_hidden}`.

use nalgebra::{DMatrix, DVector, Rotation3, Vector3};
use thiserror::Error;

use crate::geometry::{self, GeometryError};
use crate::{lit, Float};

/// Default input count (excluding bias) for both networks.
pub const DEFAULT_INPUTS: usize = 6;
/// Default hidden-layer width.
pub const DEFAULT_HIDDEN: usize = 10;
/// Default output count.
pub const DEFAULT_OUTPUTS: usize = 3;
/// Default Frobenius bound on both weight matrices.
pub const DEFAULT_WEIGHT_BOUND: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("dimension mismatch: {what} expected {expected}, got {actual}")]
    DimensionMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("invalid network parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Learning rates and damping of one network's update law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationGains<T: Float> {
    pub gamma_w: T,
    pub gamma_v: T,
    pub kappa: T,
}

impl<T: Float> AdaptationGains<T> {
    pub fn new(gamma_w: T, gamma_v: T, kappa: T) -> Result<Self, NnError> {
        if !(gamma_w > T::zero() && gamma_v > T::zero() && kappa > T::zero()) {
            return Err(NnError::InvalidParameter("learning rates and κ must be positive"));
        }
        Ok(Self { gamma_w, gamma_v, kappa })
    }

    /// Zero learning rates and damping: the update law leaves weights unchanged.
    pub fn frozen() -> Self {
        Self { gamma_w: T::zero(), gamma_v: T::zero(), kappa: T::zero() }
    }

    /// `max(γ_w, γ_v)`, the normalization used in the ultimate-bound set.
    pub fn gamma_max(&self) -> T {
        self.gamma_w.max(self.gamma_v)
    }
}

/// Estimated weights of one network together with their norm bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct NnWeights<T: Float> {
    /// Output layer, `(n_hidden+1) × n_out`.
    pub w: DMatrix<T>,
    /// Hidden layer, `(n_in+1) × n_hidden`.
    pub v: DMatrix<T>,
    pub w_max: T,
    pub v_max: T,
    pub z_max: T,
}

impl<T: Float> NnWeights<T> {
    /// All-zero weights, so the network initially outputs zero.
    pub fn zeros(n_in: usize, n_hidden: usize, n_out: usize, w_max: T, v_max: T) -> Result<Self, NnError> {
        if n_hidden == 0 || n_out == 0 {
            return Err(NnError::InvalidParameter("hidden and output widths must be positive"));
        }
        if !(w_max > T::zero() && v_max > T::zero()) {
            return Err(NnError::InvalidParameter("weight bounds must be positive"));
        }
        Ok(Self {
            w: DMatrix::zeros(n_hidden + 1, n_out),
            v: DMatrix::zeros(n_in + 1, n_hidden),
            w_max,
            v_max,
            z_max: (w_max * w_max + v_max * v_max).sqrt(),
        })
    }

    /// Wraps given matrices, checking shapes and projecting onto the bounds.
    pub fn from_matrices(w: DMatrix<T>, v: DMatrix<T>, w_max: T, v_max: T) -> Result<Self, NnError> {
        if w.nrows() != v.ncols() + 1 {
            return Err(NnError::DimensionMismatch {
                what: "W rows (hidden + 1)",
                expected: v.ncols() + 1,
                actual: w.nrows(),
            });
        }
        let mut out = Self::zeros(v.nrows().saturating_sub(1), v.ncols(), w.ncols(), w_max, v_max)?;
        out.w = project_to_ball(&w, w_max);
        out.v = project_to_ball(&v, v_max);
        Ok(out)
    }

    pub fn n_inputs(&self) -> usize {
        self.v.nrows() - 1
    }

    pub fn n_hidden(&self) -> usize {
        self.v.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.w.ncols()
    }

    /// `‖diag(W, V)‖_F`.
    pub fn z_norm(&self) -> T {
        (self.w.norm_squared() + self.v.norm_squared()).sqrt()
    }

    /// Row-major listing of `W` followed by `V`.
    pub fn flatten(&self) -> Vec<T> {
        let row_major = |m: &DMatrix<T>| -> Vec<T> { m.transpose().iter().copied().collect() };
        let mut out = row_major(&self.w);
        out.extend(row_major(&self.v));
        out
    }

    fn check_input(&self, x_nn: &DVector<T>) -> Result<(), NnError> {
        if x_nn.len() != self.v.nrows() {
            return Err(NnError::DimensionMismatch {
                what: "network input (with bias)",
                expected: self.v.nrows(),
                actual: x_nn.len(),
            });
        }
        Ok(())
    }
}

/// `ς(t) = 1 / (1 + e^{−t})`.
pub fn sigmoid<T: Float>(t: T) -> T {
    T::one() / (T::one() + (-t).exp())
}

/// Hidden-layer features `σ(z) = [1, ς(z_1), …, ς(z_n)]` and their Jacobian
/// `σ′(z)`, an `(n+1) × n` matrix with a zero first row and
/// `diag(ς_k (1 − ς_k))` below it.
pub fn sigmoid_features<T: Float>(z: &DVector<T>) -> (DVector<T>, DMatrix<T>) {
    let n = z.len();
    let mut sigma = DVector::from_element(n + 1, T::one());
    let mut jac = DMatrix::zeros(n + 1, n);
    for (k, &zk) in z.iter().enumerate() {
        let s = sigmoid(zk);
        sigma[k + 1] = s;
        jac[(k + 1, k)] = s * (T::one() - s);
    }
    (sigma, jac)
}

/// `Δ̄ = W̄ᵀ σ(V̄ᵀ x_nn)`.
pub fn nn_output<T: Float>(weights: &NnWeights<T>, x_nn: &DVector<T>) -> Result<DVector<T>, NnError> {
    weights.check_input(x_nn)?;
    let z = weights.v.tr_mul(x_nn);
    let (sigma, _) = sigmoid_features(&z);
    Ok(weights.w.tr_mul(&sigma))
}

/// `[1, x, v]`.
pub fn build_position_input<T: Float>(x: &Vector3<T>, v: &Vector3<T>) -> DVector<T> {
    DVector::from_vec(vec![T::one(), x.x, x.y, x.z, v.x, v.y, v.z])
}

/// `[1, yaw, pitch, roll, Ω]`, with the angles from [`geometry::euler_zyx`].
pub fn build_attitude_input<T: Float>(r: &Rotation3<T>, omega: &Vector3<T>) -> Result<DVector<T>, GeometryError> {
    let e = geometry::euler_zyx(r)?;
    Ok(attitude_input_from_angles(&e, omega))
}

/// Like [`build_attitude_input`], but at gimbal lock substitutes the last
/// valid angle set held in `last_angles`. Valid angles update `last_angles`.
pub fn build_attitude_input_or_last<T: Float>(
    r: &Rotation3<T>,
    omega: &Vector3<T>,
    last_angles: &mut Vector3<T>,
) -> DVector<T> {
    if let Ok(e) = geometry::euler_zyx(r) {
        *last_angles = e;
    }
    attitude_input_from_angles(last_angles, omega)
}

fn attitude_input_from_angles<T: Float>(e: &Vector3<T>, omega: &Vector3<T>) -> DVector<T> {
    DVector::from_vec(vec![T::one(), e.x, e.y, e.z, omega.x, omega.y, omega.z])
}

/// Radial projection onto the Frobenius ball of radius `bound`.
///
/// The result never exceeds `bound` when its norm is recomputed.
pub fn project_to_ball<T: Float>(m: &DMatrix<T>, bound: T) -> DMatrix<T> {
    let norm = m.norm();
    if norm <= bound {
        return m.clone();
    }
    let mut out = m * (bound / norm);
    let shrink = T::one() - lit::<T>(4.0) * T::default_epsilon();
    while out.norm() > bound {
        out *= shrink;
    }
    out
}

/// One explicit-Euler step of the weight update laws
///
/// ```text
/// Ẇ = −γ_w [σ(z̄) aᵀ − σ′(z̄) z̄ aᵀ] − κ γ_w W̄
/// V̇ = −γ_v x_nn [σ′(z̄)ᵀ W̄ a]ᵀ − κ γ_v V̄
/// ```
///
/// evaluated at `z̄ = V̄ᵀ x_nn`, followed by projection onto the norm balls.
pub fn update_weights<T: Float>(
    weights: &NnWeights<T>,
    x_nn: &DVector<T>,
    a: &DVector<T>,
    gains: &AdaptationGains<T>,
    dt: T,
) -> Result<NnWeights<T>, NnError> {
    weights.check_input(x_nn)?;
    if a.len() != weights.n_outputs() {
        return Err(NnError::DimensionMismatch {
            what: "composite error",
            expected: weights.n_outputs(),
            actual: a.len(),
        });
    }
    let z = weights.v.tr_mul(x_nn);
    let (sigma, jac) = sigmoid_features(&z);
    let feature = sigma - &jac * &z;
    let w_dot = (feature * a.transpose()) * (-gains.gamma_w) - &weights.w * (gains.kappa * gains.gamma_w);
    let back = jac.tr_mul(&(&weights.w * a));
    let v_dot = (x_nn * back.transpose()) * (-gains.gamma_v) - &weights.v * (gains.kappa * gains.gamma_v);
    Ok(NnWeights {
        w: project_to_ball(&(&weights.w + w_dot * dt), weights.w_max),
        v: project_to_ball(&(&weights.v + v_dot * dt), weights.v_max),
        ..weights.clone()
    })
}
