//! Simulation configuration: a TOML file with one table per concern.
//!
//! Every table and key is optional; omitted values take the defaults of the
//! `Default` impls below. Unknown keys are rejected. See `docs/config.md`
//! for the schema reference.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use windnn_core::aero::{self, RotorAeroParams};
use windnn_core::dynamics::{QuadParams, SimplifiedModelParams, MAX_STEP};
use windnn_core::neural::AdaptationGains;
use windnn_core::scenarios::{TrajectoryGenerator, WindField};
use windnn_core::stability::BoundAssumptions;
use windnn_core::ControllerGains;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Validation(String),
}

impl From<toml::de::Error> for ConfigError {
    fn from(e: toml::de::Error) -> Self {
        ConfigError::Parse(e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub vehicle: VehicleConfig,
    pub aero: AeroConfig,
    pub simplified: SimplifiedConfig,
    pub controller: ControllerConfig,
    pub adaptation: AdaptationConfig,
    pub bounds: BoundsConfig,
    pub scenario: ScenarioConfig,
    pub wind: WindConfig,
    pub initial: InitialConfig,
    pub plant: PlantConfig,
    pub sim: RunConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleConfig {
    /// kg
    pub mass: f64,
    /// Principal moments `[J_xx, J_yy, J_zz]` (kg·m²).
    pub inertia: [f64; 3],
    /// Products of inertia `[J_xy, J_xz, J_yz]` (kg·m²).
    pub inertia_products: [f64; 3],
    /// Horizontal hub distance from the center of mass (m).
    pub arm_length: f64,
    /// Vertical hub offset along `b3` (m; negative is above the center of mass).
    pub rotor_offset: f64,
    pub gravity: f64,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        Self {
            mass: 2.0,
            inertia: [0.02, 0.02, 0.04],
            inertia_products: [0.0; 3],
            arm_length: 0.23,
            rotor_offset: -0.05,
            gravity: 9.81,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeroConfig {
    pub air_density: f64,
    pub rotor_radius: f64,
    pub blades: f64,
    pub chord: f64,
    pub lift_slope: f64,
    /// Blade root pitch (rad).
    pub pitch: f64,
    pub profile_drag: f64,
    /// Flapping proportionality constant.
    pub flap_coefficient: f64,
    /// Blade hinge stiffness (N·m/rad).
    pub blade_stiffness: f64,
    /// Body drag coefficient (N·s²/m²).
    pub body_drag: f64,
    /// Rotor speed floor (rad/s).
    pub min_rotor_speed: f64,
}

impl Default for AeroConfig {
    fn default() -> Self {
        Self {
            air_density: 1.225,
            rotor_radius: 0.127,
            blades: 2.0,
            chord: 0.02,
            lift_slope: 5.7,
            pitch: 0.2,
            profile_drag: 0.01,
            flap_coefficient: 0.01,
            blade_stiffness: 0.25,
            body_drag: 0.1,
            min_rotor_speed: 1.0,
        }
    }
}

/// Coefficients of the constant-coefficient rotor model. When omitted they are
/// calibrated to the aerodynamic rotor in still-air hover.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplifiedConfig {
    /// `C_T′` (N·s²)
    pub thrust_coefficient: Option<f64>,
    /// `C_Q′` (N·m·s²)
    pub torque_coefficient: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub k_x: f64,
    pub k_v: f64,
    pub k_r: f64,
    pub k_omega: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self { k_x: 8.0, k_v: 6.0, k_r: 2.0, k_omega: 0.3, c1: 0.5, c2: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightInit {
    Zero,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub gamma_w: f64,
    pub gamma_v: f64,
    pub kappa: f64,
    /// Projection bound on `‖W̄‖_F`.
    pub w_max: f64,
    /// Projection bound on `‖V̄‖_F`.
    pub v_max: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { gamma_w: 1.0, gamma_v: 1.0, kappa: 0.01, w_max: 20.0, v_max: 20.0 }
    }
}

impl NetworkConfig {
    pub fn gains(&self) -> Result<AdaptationGains<f64>, ConfigError> {
        AdaptationGains::new(self.gamma_w, self.gamma_v, self.kappa).map_err(|e| invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptationConfig {
    pub enabled: bool,
    /// Hidden units of both networks.
    pub hidden: usize,
    pub init: WeightInit,
    /// Frobenius norm of randomly initialized weight matrices.
    pub init_scale: f64,
    pub position: NetworkConfig,
    pub attitude: NetworkConfig,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            hidden: windnn_core::neural::DEFAULT_HIDDEN,
            init: WeightInit::Zero,
            init_scale: 0.1,
            position: NetworkConfig::default(),
            attitude: NetworkConfig::default(),
        }
    }
}

/// Mirrors [`BoundAssumptions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub psi1: f64,
    pub b1: f64,
    pub b2: f64,
    pub b4: f64,
    pub e_x_max: f64,
    pub x_d_max: f64,
    pub v_d_max: f64,
    pub e_max: f64,
    pub delta: [f64; 4],
    pub eps: [f64; 2],
    pub w_m: [f64; 2],
    pub v_m: [f64; 2],
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            psi1: 0.5,
            b1: 25.0,
            b2: 5.0,
            b4: 2.0,
            e_x_max: 2.0,
            x_d_max: 2.0,
            v_d_max: 1.0,
            e_max: 0.5,
            delta: [5.0, 2.0, 1.0, 1.0],
            eps: [0.1, 0.1],
            w_m: [1.0, 0.1],
            v_m: [1.0, 0.1],
        }
    }
}

impl BoundsConfig {
    pub fn assumptions(&self) -> BoundAssumptions<f64> {
        BoundAssumptions {
            psi1: self.psi1,
            b1: self.b1,
            b2: self.b2,
            b4: self.b4,
            e_x_max: self.e_x_max,
            x_d_max: self.x_d_max,
            v_d_max: self.v_d_max,
            e_max: self.e_max,
            delta: self.delta,
            eps: self.eps,
            w_m: self.w_m,
            v_m: self.v_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Hover,
    Circle,
    Helix,
    Lissajous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub trajectory: TrajectoryKind,
    /// Hover point or center of the curve (m).
    pub center: [f64; 3],
    pub radius: f64,
    /// Angular rate along circle/helix (rad/s).
    pub rate: f64,
    /// Upward speed of the helix (m/s).
    pub climb_rate: f64,
    pub amplitude: [f64; 3],
    /// Per-axis angular frequency of the Lissajous curve (rad/s).
    pub frequency: [f64; 3],
    pub phase: [f64; 3],
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            trajectory: TrajectoryKind::Hover,
            center: [0.0, 0.0, -2.0],
            radius: 2.0,
            rate: 0.5,
            climb_rate: 0.2,
            amplitude: [1.0, 1.0, 0.0],
            frequency: [0.5, 1.0, 0.0],
            phase: [0.0; 3],
        }
    }
}

impl ScenarioConfig {
    pub fn generator(&self) -> TrajectoryGenerator<f64> {
        let center = Vector3::from(self.center);
        match self.trajectory {
            TrajectoryKind::Hover => TrajectoryGenerator::Hover { position: center },
            TrajectoryKind::Circle => TrajectoryGenerator::Circle { center, radius: self.radius, rate: self.rate },
            TrajectoryKind::Helix => {
                TrajectoryGenerator::Helix { center, radius: self.radius, rate: self.rate, climb_rate: self.climb_rate }
            }
            TrajectoryKind::Lissajous => TrajectoryGenerator::Lissajous {
                center,
                amplitude: Vector3::from(self.amplitude),
                frequency: Vector3::from(self.frequency),
                phase: Vector3::from(self.phase),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindKind {
    Constant,
    Step,
    Sinusoidal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindConfig {
    pub kind: WindKind,
    /// Constant or base wind velocity (m/s, inertial).
    pub velocity: [f64; 3],
    pub amplitude: f64,
    pub direction: [f64; 3],
    /// Step onset (s).
    pub onset: f64,
    /// Sinusoid frequency (Hz).
    pub frequency: f64,
}

impl Default for WindConfig {
    fn default() -> Self {
        Self {
            kind: WindKind::Constant,
            velocity: [0.0; 3],
            amplitude: 0.0,
            direction: [1.0, 0.0, 0.0],
            onset: 0.0,
            frequency: 0.0,
        }
    }
}

impl WindConfig {
    pub fn field(&self) -> WindField<f64> {
        let base = Vector3::from(self.velocity);
        let direction = Vector3::from(self.direction);
        match self.kind {
            WindKind::Constant => WindField::Constant { velocity: base },
            WindKind::Step => WindField::StepGust { base, amplitude: self.amplitude, direction, onset: self.onset },
            WindKind::Sinusoidal => {
                WindField::Sinusoidal { base, amplitude: self.amplitude, frequency_hz: self.frequency, direction }
            }
        }
    }
}

/// Initial state relative to the desired trajectory at `t = 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    /// `x(0) − x_d(0)` (m).
    pub position_offset: [f64; 3],
    pub velocity: [f64; 3],
    /// Extra `[yaw, pitch, roll]` (rad) on top of a level attitude facing `b1d(0)`.
    pub attitude: [f64; 3],
    pub angular_velocity: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantMode {
    /// Blade-element rotors with wind, flapping and drag.
    Full,
    /// Constant-coefficient rotors with constant injected disturbances.
    Simplified,
    /// Constant-coefficient rotors with disturbances from fixed target networks.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub mode: PlantMode,
    /// Injected `Δ1` (N), simplified mode.
    pub delta1: [f64; 3],
    /// Injected `Δ2` (N·m), simplified mode.
    pub delta2: [f64; 3],
    /// Seed of the target networks, synthetic mode.
    pub target_seed: u64,
    /// `‖W‖_F` and `‖V‖_F` of the position target network.
    pub target_position_norms: [f64; 2],
    /// `‖W‖_F` and `‖V‖_F` of the attitude target network.
    pub target_attitude_norms: [f64; 2],
    /// Required bounds on the target outputs (N, N·m).
    pub target_output_bounds: [f64; 2],
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            mode: PlantMode::Full,
            delta1: [0.0; 3],
            delta2: [0.0; 3],
            target_seed: 7,
            target_position_norms: [0.1, 0.1],
            target_attitude_norms: [0.025, 0.025],
            target_output_bounds: [2.0, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Control and integration step (s).
    pub dt: f64,
    /// s
    pub duration: f64,
    /// Seed for random weight initialization.
    pub seed: u64,
    /// Keep every Nth telemetry record.
    pub decimate: usize,
    /// Treat failed gain checks as configuration errors.
    pub strict: bool,
    /// `‖e_x‖` band for the settling time (m).
    pub settling_band: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { dt: 1e-3, duration: 10.0, seed: 0, decimate: 1, strict: false, settling_band: 0.05 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub telemetry: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub weights: Option<PathBuf>,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one `section.key` (or `section.sub.key`) to a TOML literal, e.g.
    /// `controller.k_x = 16` or `wind.velocity = [5, 0, 0]`.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self, ConfigError> {
        let mut root = toml::Value::try_from(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .map(|mut t| t.remove("v").expect("key v present"))
            .or_else(|_| Ok::<_, ConfigError>(toml::Value::String(value.to_string())))?;
        let mut slot = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = slot
                .as_table_mut()
                .ok_or_else(|| ConfigError::Parse(format!("`{key}` does not name a table entry")))?;
            if i + 1 == parts.len() {
                table.insert((*part).to_string(), parsed.clone());
                break;
            }
            slot = table.entry((*part).to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        }
        let out: SimConfig = root.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        out.validate()?;
        Ok(out)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.sim;
        if !(s.dt > 0.0 && s.dt <= MAX_STEP) {
            return Err(invalid(format!("sim.dt = {} must lie in (0, {MAX_STEP}]", s.dt)));
        }
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            return Err(invalid("sim.duration must be positive"));
        }
        if s.decimate == 0 {
            return Err(invalid("sim.decimate must be at least 1"));
        }
        if !(s.settling_band > 0.0) {
            return Err(invalid("sim.settling_band must be positive"));
        }
        self.quad()?;
        self.aero_params()?;
        self.simplified_params()?;
        self.gains()?;
        if self.adaptation.hidden == 0 {
            return Err(invalid("adaptation.hidden must be positive"));
        }
        for (name, n) in [("position", &self.adaptation.position), ("attitude", &self.adaptation.attitude)] {
            if !(n.w_max > 0.0 && n.v_max > 0.0) {
                return Err(invalid(format!("adaptation.{name}: w_max and v_max must be positive")));
            }
        }
        self.bounds.assumptions().validate().map_err(|e| invalid(e.to_string()))?;
        if self.wind.kind != WindKind::Constant && !(self.wind.amplitude >= 0.0) {
            return Err(invalid("wind.amplitude must be non-negative"));
        }
        let sc = &self.scenario;
        if matches!(sc.trajectory, TrajectoryKind::Circle | TrajectoryKind::Helix) && !(sc.radius > 0.0) {
            return Err(invalid("scenario.radius must be positive"));
        }
        let p = &self.plant;
        if p.target_position_norms.iter().chain(&p.target_attitude_norms).any(|&v| !(v >= 0.0)) {
            return Err(invalid("plant target norms must be non-negative"));
        }
        // ‖Wᵀσ‖ ≤ ‖W‖_F ‖σ‖ ≤ ‖W‖_F √(hidden + 1).
        let gain = ((self.adaptation.hidden + 1) as f64).sqrt();
        for (i, norms) in [p.target_position_norms, p.target_attitude_norms].iter().enumerate() {
            if norms[0] * gain > p.target_output_bounds[i] {
                return Err(invalid(format!(
                    "plant target network {i} can exceed its output bound ({} > {})",
                    norms[0] * gain,
                    p.target_output_bounds[i]
                )));
            }
        }
        Ok(())
    }

    pub fn quad(&self) -> Result<QuadParams<f64>, ConfigError> {
        let v = &self.vehicle;
        let [jxy, jxz, jyz] = v.inertia_products;
        let j = Matrix3::new(v.inertia[0], jxy, jxz, jxy, v.inertia[1], jyz, jxz, jyz, v.inertia[2]);
        QuadParams::new(v.mass, j, v.arm_length, v.rotor_offset, v.gravity).map_err(|e| invalid(e.to_string()))
    }

    pub fn aero_params(&self) -> Result<RotorAeroParams<f64>, ConfigError> {
        let a = &self.aero;
        let mut p = RotorAeroParams::new(
            a.air_density,
            a.rotor_radius,
            a.blades,
            a.chord,
            a.lift_slope,
            a.pitch,
            a.profile_drag,
            a.flap_coefficient,
            a.blade_stiffness,
            a.body_drag,
        )
        .map_err(|e| invalid(e.to_string()))?;
        if !(a.min_rotor_speed > 0.0) {
            return Err(invalid("aero.min_rotor_speed must be positive"));
        }
        p.omega_min = a.min_rotor_speed;
        Ok(p)
    }

    pub fn simplified_params(&self) -> Result<SimplifiedModelParams<f64>, ConfigError> {
        let calibrated = aero::calibrated_simplified_model(&self.aero_params()?).map_err(|e| invalid(e.to_string()))?;
        let s = &self.simplified;
        let mut p = SimplifiedModelParams::new(
            s.thrust_coefficient.unwrap_or(calibrated.c_t),
            s.torque_coefficient.unwrap_or(calibrated.c_q),
        )
        .map_err(|e| invalid(e.to_string()))?;
        p.omega_min = self.aero.min_rotor_speed;
        Ok(p)
    }

    pub fn gains(&self) -> Result<ControllerGains<f64>, ConfigError> {
        let c = &self.controller;
        let ad = &self.adaptation;
        ControllerGains::new(c.k_x, c.k_v, c.k_r, c.k_omega, c.c1, c.c2, ad.position.gains()?, ad.attitude.gains()?)
            .map_err(|e| invalid(e.to_string()))
    }
}

pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    SimConfig::from_toml_str(&text)
}
