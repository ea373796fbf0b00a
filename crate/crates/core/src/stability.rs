//! Gain feasibility checks, the positive-definiteness conditions of the
//! Lyapunov analysis, Lyapunov function evaluation and the ultimate bound.
//!
//! Conventions that differ from a literal transcription of the analysis:
//! the undefined `ψ2` in the primed upper-bound matrices is taken to be `ψ1`;
//! `C_{5_2}` uses `C_{1_2}` (the attitude counterpart of `C_{5_1}`); and
//! `k_{RΩ}` uses the gain `k_Ω`. Each report lists these in its notes.

use std::fmt;

use nalgebra::{DMatrix, Matrix3, Vector3};
use thiserror::Error;

use crate::control::ControllerGains;
use crate::{lit, to_f64, Float};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("convergence rate ν = {nu:e} is not positive")]
    DegenerateNu { nu: f64 },
    #[error("invalid bound assumption: {0}")]
    InvalidAssumption(&'static str),
}

/// Bounds assumed by the analysis. Network bounds are indexed 0 for the
/// position network and 1 for the attitude network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundAssumptions<T: Float> {
    /// Attitude error level `ψ1 ∈ (0, 1)` bounding `Ψ` along the motion.
    pub psi1: T,
    /// Bound on `‖−mge3 + mẍ_d + Δ̄1‖` (N).
    pub b1: T,
    /// Bound on `‖m x⃛_d + Δ̄̇1‖` (N/s).
    pub b2: T,
    /// Bound on `‖Ṙ_c‖`, hence on `‖Ω_c‖` (rad/s).
    pub b4: T,
    pub e_x_max: T,
    pub x_d_max: T,
    pub v_d_max: T,
    /// Bound on the Euler-angle kinematics matrix.
    pub e_max: T,
    /// `δ1 ≥ ‖Δ̄1‖`, `δ2 ≥ ‖Δ̄̇1‖`, `δ3 ≥ ‖x⃛_d‖`, `δ4 ≥ ‖ḃ1d‖`.
    pub delta: [T; 4],
    /// Approximation error bounds `ε_i`.
    pub eps: [T; 2],
    /// Ideal weight bounds `W_{M_i}`, `V_{M_i}`.
    pub w_m: [T; 2],
    pub v_m: [T; 2],
}

impl<T: Float> BoundAssumptions<T> {
    pub fn validate(&self) -> Result<(), StabilityError> {
        if !(self.psi1 > T::zero() && self.psi1 < T::one()) {
            return Err(StabilityError::InvalidAssumption("ψ1 must lie in (0, 1)"));
        }
        if ![self.b1, self.b2, self.b4, self.e_x_max, self.e_max].iter().all(|&b| b > T::zero()) {
            return Err(StabilityError::InvalidAssumption("B1, B2, B4, e_x_max, E_max must be positive"));
        }
        let rest =
            [self.x_d_max, self.v_d_max].into_iter().chain(self.delta).chain(self.eps).chain(self.w_m).chain(self.v_m);
        if !rest.into_iter().all(|b| b >= T::zero() && b.is_finite()) {
            return Err(StabilityError::InvalidAssumption("bounds must be finite and non-negative"));
        }
        Ok(())
    }

    /// `β = √(ψ1(2 − ψ1))`.
    pub fn beta(&self) -> T {
        (self.psi1 * (lit::<T>(2.0) - self.psi1)).sqrt()
    }

    /// `Z_{M_i} = √(W_{M_i}² + V_{M_i}²)`.
    pub fn z_m(&self, i: usize) -> T {
        (self.w_m[i] * self.w_m[i] + self.v_m[i] * self.v_m[i]).sqrt()
    }

    /// Messages for bounds inconsistent with each other: `B2 ≥ mδ3 + δ2`.
    pub fn consistency_notes(&self, mass: T) -> Vec<String> {
        let mut notes = Vec::new();
        if self.b2 < mass * self.delta[2] + self.delta[1] {
            notes.push(format!(
                "B2 = {} is below m·δ3 + δ2 = {}",
                to_f64(self.b2),
                to_f64(mass * self.delta[2] + self.delta[1])
            ));
        }
        notes
    }
}

/// Pass/fail of a strict upper-limit gain condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCheck<T: Float> {
    pub passed: bool,
    pub limit: T,
    /// `limit − value`; negative or zero when failing.
    pub margin: T,
}

impl<T: Float> GainCheck<T> {
    fn strict_below(value: T, limit: T) -> Self {
        Self { passed: value < limit, limit, margin: limit - value }
    }
}

/// `c1 < √(k_x/m)`.
pub fn validate_c1<T: Float>(c1: T, k_x: T, mass: T) -> GainCheck<T> {
    GainCheck::strict_below(c1, (k_x / mass).sqrt())
}

/// `c2 < min{√(k_R λ_m(J))/λ_M(J), √(2k_R/(λ_M(J)(2 − ψ1)))}`.
pub fn validate_c2<T: Float>(c2: T, k_r: T, inertia: &Matrix3<T>, psi1: T) -> GainCheck<T> {
    let (lm, l_max) = inertia_range(inertia);
    let first = (k_r * lm).sqrt() / l_max;
    let second = (lit::<T>(2.0) * k_r / (l_max * (lit::<T>(2.0) - psi1))).sqrt();
    GainCheck::strict_below(c2, first.min(second))
}

/// A constructed matrix with its ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCheck<T: Float> {
    pub name: &'static str,
    pub matrix: DMatrix<T>,
    pub eigenvalues: Vec<T>,
}

impl<T: Float> MatrixCheck<T> {
    fn new(name: &'static str, matrix: DMatrix<T>) -> Self {
        let eigenvalues = sorted_eigenvalues(&matrix);
        Self { name, matrix, eigenvalues }
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> T {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn positive_definite(&self) -> bool {
        self.min_eigenvalue() > T::zero()
    }
}

/// Constants of the Lyapunov analysis derived from gains and bounds. Pairs are
/// indexed 0 (position) and 1 (attitude).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants<T: Float> {
    pub beta: T,
    pub z_m: [T; 2],
    pub c1: [T; 2],
    pub c2: [T; 2],
    pub c3: [T; 2],
    pub c4: [T; 2],
    pub c5: [T; 2],
    pub k_x_beta: T,
    pub k_v_beta: T,
    pub k_xv: T,
    pub k_omega_beta: T,
    pub k_r_omega: T,
}

impl<T: Float> DerivedConstants<T> {
    pub fn compute(gains: &ControllerGains<T>, mass: T, inertia: &Matrix3<T>, a: &BoundAssumptions<T>) -> Self {
        let (_, l_max) = inertia_range(inertia);
        let (half, quarter, two) = (lit::<T>(0.5), lit::<T>(0.25), lit::<T>(2.0));
        let one = T::one();
        let beta = a.beta();
        let z_m = [a.z_m(0), a.z_m(1)];
        let c1 = [two * a.w_m[0] + a.eps[0], two * a.w_m[1] + a.eps[1]];
        let c2 = [quarter * (a.v_m[0] + a.w_m[0]), quarter * (a.v_m[1] + a.w_m[1])];
        let c3 = [c2[0] * z_m[0], c2[1] * z_m[1]];
        let c4 = [c2[0] * (one + a.x_d_max + a.v_d_max), c2[1] * (one + a.e_max + a.b4)];

        let k_x_beta = gains.k_x * (one - beta) - c3[0];
        let k_v_beta = gains.k_v * (one - beta) - mass * gains.c1 - c3[0];
        let k_xv = gains.c1 * ((one + beta) * gains.k_v + c3[0]) + c3[0];
        let k_omega_beta = gains.k_omega - gains.c2 * l_max - c3[1];
        let k_r_omega = gains.c2 * (gains.k_omega + c3[1]);

        let c5_1 = gains.c1 * c1[0] * c1[0] / (two * k_x_beta)
            + c1[0] * c1[0] / (two * k_v_beta)
            + half * gains.position.kappa * z_m[0] * z_m[0];
        let c5_2 = gains.c2 * c1[1] * c1[1] / (two * gains.k_r)
            + c1[1] * c1[1] / (two * k_omega_beta)
            + half * gains.attitude.kappa * z_m[1] * z_m[1];

        Self { beta, z_m, c1, c2, c3, c4, c5: [c5_1, c5_2], k_x_beta, k_v_beta, k_xv, k_omega_beta, k_r_omega }
    }

    pub fn c5_total(&self) -> T {
        self.c5[0] + self.c5[1]
    }
}

/// Full set of feasibility results for a gain/bound configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport<T: Float> {
    pub c1_check: GainCheck<T>,
    pub c2_check: GainCheck<T>,
    pub constants: DerivedConstants<T>,
    pub m11: MatrixCheck<T>,
    pub m12: MatrixCheck<T>,
    pub m21: MatrixCheck<T>,
    pub m22: MatrixCheck<T>,
    pub n: [MatrixCheck<T>; 3],
    pub n_prime: [MatrixCheck<T>; 3],
    /// `min_i λ_m(N_i)/λ_M(N_i′)`.
    pub nu: T,
    pub c5: T,
    /// `C5/ν` when `ν > 0`.
    pub radius: Option<T>,
    pub notes: Vec<String>,
}

impl<T: Float> LyapunovReport<T> {
    pub fn matrices(&self) -> impl Iterator<Item = &MatrixCheck<T>> {
        [&self.m11, &self.m12, &self.m21, &self.m22].into_iter().chain(&self.n).chain(&self.n_prime)
    }

    /// Both coupling checks pass, the `M` and `N` matrices are PD and the
    /// β-reduced gains are positive. The primed matrices only supply `λ_M` for
    /// `ν` and are not required to be PD.
    pub fn all_pass(&self) -> bool {
        let k = &self.constants;
        self.c1_check.passed
            && self.c2_check.passed
            && [&self.m11, &self.m12, &self.m21, &self.m22]
                .into_iter()
                .chain(&self.n)
                .all(MatrixCheck::positive_definite)
            && [k.k_x_beta, k.k_v_beta, k.k_omega_beta].iter().all(|&g| g > T::zero())
            && self.radius.is_some()
    }

    /// `key: value` lines for the run summary.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: String, v: String| out.push((k, v));
        push("stability.c1_pass".into(), self.c1_check.passed.to_string());
        push("stability.c1_limit".into(), fmt_num(self.c1_check.limit));
        push("stability.c1_margin".into(), fmt_num(self.c1_check.margin));
        push("stability.c2_pass".into(), self.c2_check.passed.to_string());
        push("stability.c2_limit".into(), fmt_num(self.c2_check.limit));
        push("stability.c2_margin".into(), fmt_num(self.c2_check.margin));
        let k = &self.constants;
        for (name, v) in [
            ("beta", k.beta),
            ("k_x_beta", k.k_x_beta),
            ("k_v_beta", k.k_v_beta),
            ("k_xv", k.k_xv),
            ("k_omega_beta", k.k_omega_beta),
            ("k_r_omega", k.k_r_omega),
            ("c5_position", k.c5[0]),
            ("c5_attitude", k.c5[1]),
        ] {
            push(format!("stability.{name}"), fmt_num(v));
        }
        for m in self.matrices() {
            push(format!("stability.{}.min_eig", m.name), fmt_num(m.min_eigenvalue()));
            push(format!("stability.{}.max_eig", m.name), fmt_num(m.max_eigenvalue()));
            push(format!("stability.{}.pd", m.name), m.positive_definite().to_string());
        }
        push("stability.nu".into(), fmt_num(self.nu));
        push("stability.c5".into(), fmt_num(self.c5));
        push("stability.radius".into(), self.radius.map_or_else(|| "undefined".to_string(), fmt_num));
        push("stability.all_pass".into(), self.all_pass().to_string());
        for (i, note) in self.notes.iter().enumerate() {
            push(format!("stability.note{i}"), note.clone());
        }
        out
    }
}

impl<T: Float> fmt::Display for LyapunovReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.key_values() {
            writeln!(f, "{k}: {v}")?;
        }
        Ok(())
    }
}

/// Builds every matrix of the analysis with its eigenvalues, plus `ν`, `C5`
/// and the ultimate-bound radius.
pub fn build_pd_matrices<T: Float>(
    gains: &ControllerGains<T>,
    mass: T,
    inertia: &Matrix3<T>,
    assumptions: &BoundAssumptions<T>,
) -> LyapunovReport<T> {
    let a = assumptions;
    let k = DerivedConstants::compute(gains, mass, inertia, a);
    let (lm, l_max) = inertia_range(inertia);
    let (half, two) = (lit::<T>(0.5), lit::<T>(2.0));
    let z = T::zero();
    let (c1, c2) = (gains.c1, gains.c2);
    let psi = a.psi1;

    let m2 =
        |rows: [[T; 2]; 2]| DMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]]) * half;
    let m3 = |rows: [[T; 3]; 3]| DMatrix::from_fn(3, 3, |i, j| rows[i][j]);

    let mc1 = mass * c1;
    let m11 = m2([[gains.k_x, -mc1], [-mc1, mass]]);
    let m12 = m2([[gains.k_x, mc1], [mc1, mass]]);
    let c2l = c2 * l_max;
    let m21 = m2([[gains.k_r, -c2l], [-c2l, lm]]);
    let m22 = m2([[two * gains.k_r / (two - psi), c2l], [c2l, l_max]]);

    let n1 = m3([
        [c1 * k.k_x_beta * half, -k.k_xv * half, -c1 * k.c4[0]],
        [-k.k_xv * half, k.k_v_beta * half, -k.c4[0]],
        [-c1 * k.c4[0], -k.c4[0], gains.position.kappa],
    ]);
    let n2 = m3([
        [c2 * gains.k_r * half, -k.k_r_omega, -c2 * k.c4[1]],
        [-k.k_r_omega, k.k_omega_beta, -k.c4[1]],
        [-c2 * k.c4[1], -k.c4[1], gains.attitude.kappa],
    ]);
    let coupling = a.b1 + gains.k_x * a.e_x_max;
    let n3 = m3([
        [c1 * k.k_x_beta * half, -k.k_xv * half, -c1 * a.b1],
        [-k.k_xv * half, c1 * k.k_v_beta * half, -coupling],
        [-c1 * a.b1, -coupling, c2 * gains.k_r * half],
    ]);

    let inv_min_gamma = |g: &crate::neural::AdaptationGains<T>| T::one() / g.gamma_w.min(g.gamma_v);
    let n1p = m3([[c2 * gains.k_r * half, mc1, z], [mc1, mass * half, z], [z, z, inv_min_gamma(&gains.position)]]);
    let n2p = m3([[T::one() / (two - psi), c2l, z], [c2l, l_max, z], [z, z, inv_min_gamma(&gains.attitude)]]);
    let n3p = m3([[gains.k_x * half, z, z], [z, mass * half, z], [z, z, T::one() / (two - psi)]]);

    let n = [MatrixCheck::new("n1", n1), MatrixCheck::new("n2", n2), MatrixCheck::new("n3", n3)];
    let n_prime =
        [MatrixCheck::new("n1_prime", n1p), MatrixCheck::new("n2_prime", n2p), MatrixCheck::new("n3_prime", n3p)];
    let nu = n
        .iter()
        .zip(&n_prime)
        .map(|(a, b)| a.min_eigenvalue() / b.max_eigenvalue())
        .fold(T::max_value().unwrap(), |acc, r| acc.min(r));
    let c5 = k.c5_total();
    let radius = ultimate_bound(nu, c5).ok();

    let mut notes = vec![
        "psi2 in the primed bound matrices taken as psi1".to_string(),
        "C5 attitude term uses C1 of the attitude network".to_string(),
    ];
    for (name, v) in [("k_x_beta", k.k_x_beta), ("k_v_beta", k.k_v_beta), ("k_omega_beta", k.k_omega_beta)] {
        if v <= z {
            notes.push(format!("{name} = {} is not positive", to_f64(v)));
        }
    }
    notes.extend(a.consistency_notes(mass));

    LyapunovReport {
        c1_check: validate_c1(c1, gains.k_x, mass),
        c2_check: validate_c2(c2, gains.k_r, inertia, psi),
        constants: k,
        m11: MatrixCheck::new("m11", m11),
        m12: MatrixCheck::new("m12", m12),
        m21: MatrixCheck::new("m21", m21),
        m22: MatrixCheck::new("m22", m22),
        n,
        n_prime,
        nu,
        c5,
        radius,
        notes,
    }
}

/// Tracking errors entering the Lyapunov function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState<T: Float> {
    pub e_x: Vector3<T>,
    pub e_v: Vector3<T>,
    pub e_r: Vector3<T>,
    pub e_omega: Vector3<T>,
    pub psi: T,
}

/// Weight estimation errors `(W̃, Ṽ)` of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightError<T: Float> {
    pub w: DMatrix<T>,
    pub v: DMatrix<T>,
}

impl<T: Float> WeightError<T> {
    /// `‖Z̃‖ = √(‖W̃‖² + ‖Ṽ‖²)`.
    pub fn norm(&self) -> T {
        (self.w.norm_squared() + self.v.norm_squared()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValue<T: Float> {
    pub v1: T,
    pub v2: T,
    pub v: T,
    /// Weight terms `V_{0_i}`; zero when weight errors are not supplied.
    pub v0: [T; 2],
}

/// `V1 = ½k_x‖e_x‖² + ½m‖e_v‖² + mc1 e_xᵀe_v + V01`,
/// `V2 = ½e_ΩᵀJe_Ω + k_RΨ + c2 e_RᵀJe_Ω + V02`,
/// with `V0i = tr(W̃ᵀW̃)/(2γ_w) + tr(ṼᵀṼ)/(2γ_v)` when weight errors are given.
pub fn lyapunov_value<T: Float>(
    e: &ErrorState<T>,
    gains: &ControllerGains<T>,
    inertia: &Matrix3<T>,
    mass: T,
    nn_errors: Option<(&WeightError<T>, &WeightError<T>)>,
) -> LyapunovValue<T> {
    let half = lit::<T>(0.5);
    let v0 = match nn_errors {
        Some((p, a)) => [weight_term(p, &gains.position), weight_term(a, &gains.attitude)],
        None => [T::zero(); 2],
    };
    let v1 = half * gains.k_x * e.e_x.norm_squared()
        + half * mass * e.e_v.norm_squared()
        + mass * gains.c1 * e.e_x.dot(&e.e_v)
        + v0[0];
    let j_eo = inertia * e.e_omega;
    let v2 = half * e.e_omega.dot(&j_eo) + gains.k_r * e.psi + gains.c2 * e.e_r.dot(&j_eo) + v0[1];
    LyapunovValue { v1, v2, v: v1 + v2, v0 }
}

fn weight_term<T: Float>(err: &WeightError<T>, g: &crate::neural::AdaptationGains<T>) -> T {
    let two = lit::<T>(2.0);
    err.w.norm_squared() / (two * g.gamma_w) + err.v.norm_squared() / (two * g.gamma_v)
}

/// Radius `C5/ν` of the ultimate-bound set.
pub fn ultimate_bound<T: Float>(nu: T, c5: T) -> Result<T, StabilityError> {
    if !(nu > T::zero()) {
        return Err(StabilityError::DegenerateNu { nu: to_f64(nu) });
    }
    Ok(c5 / nu)
}

/// `‖e_x‖² + ‖e_v‖² + ‖e_R‖² + ‖e_Ω‖² + ‖Z̃1‖²/γ1 + ‖Z̃2‖²/γ2`, whose sublevel
/// set at `C5/ν` is the ultimate-bound set; `γi = max(γ_{v_i}, γ_{w_i})`.
pub fn set_d_functional<T: Float>(e: &ErrorState<T>, z_tilde: [T; 2], gamma: [T; 2]) -> T {
    e.e_x.norm_squared()
        + e.e_v.norm_squared()
        + e.e_r.norm_squared()
        + e.e_omega.norm_squared()
        + z_tilde[0] * z_tilde[0] / gamma[0]
        + z_tilde[1] * z_tilde[1] / gamma[1]
}

/// Instantaneous bound `B3 = 2(k_x‖e_v‖ + k_v‖ė_v‖ + B2)/(k_x‖e_x‖ + k_v‖e_v‖ + B1)`
/// on `‖ḃ_{3c}‖`.
#[allow(clippy::too_many_arguments)]
pub fn b3_diagnostic<T: Float>(k_x: T, k_v: T, e_x_norm: T, e_v_norm: T, e_v_dot_norm: T, b1: T, b2: T) -> T {
    lit::<T>(2.0) * (k_x * e_v_norm + k_v * e_v_dot_norm + b2) / (k_x * e_x_norm + k_v * e_v_norm + b1)
}

fn inertia_range<T: Float>(inertia: &Matrix3<T>) -> (T, T) {
    let eig = inertia.symmetric_eigenvalues();
    (eig.min(), eig.max())
}

fn sorted_eigenvalues<T: Float>(m: &DMatrix<T>) -> Vec<T> {
    let mut eig: Vec<T> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    eig
}

fn fmt_num<T: Float>(v: T) -> String {
    format!("{:.12e}", to_f64(v))
}
