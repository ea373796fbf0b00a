//! Closed-loop simulation driver.

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use windnn_core::aero::{self, AeroError, RotorAeroParams};
use windnn_core::control::{self, ControlError, ControlStep};
use windnn_core::dynamics::{self, DynamicsError, QuadParams, RigidBodyState, SimplifiedModelParams};
use windnn_core::geometry::{self, GeometryError};
use windnn_core::neural::{self, NnError, NnWeights};
use windnn_core::stability::{self, ErrorState, LyapunovReport, WeightError};
use windnn_core::{Controller, TrajectoryPoint};

use crate::config::{ConfigError, PlantMode, SimConfig, WeightInit};
use crate::metrics::{summarize, Metrics};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Aero(#[from] AeroError),
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
}

/// Where and why a run stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub step: usize,
    pub t: f64,
    pub error: SimError,
}

/// One telemetry row, taken at the start of each step.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
    /// Row-major attitude matrix.
    pub r: [f64; 9],
    pub omega: Vector3<f64>,
    pub x_d: Vector3<f64>,
    pub e_x: Vector3<f64>,
    pub e_v: Vector3<f64>,
    pub e_r: Vector3<f64>,
    pub e_omega: Vector3<f64>,
    pub psi: f64,
    pub thrust: f64,
    pub moment: Vector3<f64>,
    pub rotor_thrusts: [f64; 4],
    pub rotor_speeds: [f64; 4],
    pub saturated: [bool; 4],
    pub delta1_hat: Vector3<f64>,
    pub delta2_hat: Vector3<f64>,
    /// Disturbance acting on the plant relative to the simplified model.
    pub delta1: Vector3<f64>,
    pub delta2: Vector3<f64>,
    /// `[‖W̄1‖, ‖V̄1‖, ‖W̄2‖, ‖V̄2‖]`.
    pub weight_norms: [f64; 4],
    pub lyap_v1: f64,
    pub lyap_v2: f64,
    pub lyap_v: f64,
    /// Ultimate-bound functional; includes weight errors in synthetic mode only.
    pub set_d: f64,
    pub wind: Vector3<f64>,
    /// `e3ᵀ R_cᵀ R e3`.
    pub alignment: f64,
}

/// Fixed networks generating the disturbances in synthetic mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetNetworks {
    pub position: NnWeights<f64>,
    pub attitude: NnWeights<f64>,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub records: Vec<TelemetryRecord>,
    pub metrics: Metrics,
    pub report: LyapunovReport<f64>,
    pub abort: Option<Abort>,
    pub final_weights: [NnWeights<f64>; 2],
    pub targets: Option<TargetNetworks>,
}

impl SimResult {
    pub fn succeeded(&self) -> bool {
        self.abort.is_none()
    }
}

/// Everything a run needs, built once from a validated configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: SimConfig,
    pub quad: QuadParams<f64>,
    pub aero: RotorAeroParams<f64>,
    pub rotor_model: SimplifiedModelParams<f64>,
    pub controller: Controller,
    pub targets: Option<TargetNetworks>,
    pub report: LyapunovReport<f64>,
}

impl Setup {
    pub fn new(config: &SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let quad = config.quad()?;
        let aero = config.aero_params()?;
        let rotor_model = config.simplified_params()?;
        let gains = config.gains()?;
        let ad = &config.adaptation;
        let mut rng = ChaCha8Rng::seed_from_u64(config.sim.seed);
        let mut init = |n: &crate::config::NetworkConfig| -> Result<NnWeights<f64>, ConfigError> {
            let zeros = NnWeights::zeros(neural::DEFAULT_INPUTS, ad.hidden, 3, n.w_max, n.v_max)
                .map_err(|e| ConfigError::Validation(e.to_string()))?;
            Ok(match ad.init {
                WeightInit::Zero => zeros,
                WeightInit::Random => {
                    let w = random_matrix(&mut rng, zeros.w.nrows(), zeros.w.ncols(), ad.init_scale);
                    let v = random_matrix(&mut rng, zeros.v.nrows(), zeros.v.ncols(), ad.init_scale);
                    NnWeights::from_matrices(w, v, n.w_max, n.v_max)
                        .map_err(|e| ConfigError::Validation(e.to_string()))?
                }
            })
        };
        let position_net = init(&ad.position)?;
        let attitude_net = init(&ad.attitude)?;
        let mut controller = Controller::new(gains, quad, rotor_model, position_net, attitude_net)
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        controller.adaptation = ad.enabled;

        let targets = (config.plant.mode == PlantMode::Synthetic).then(|| target_networks(config));
        let report = stability::build_pd_matrices(&gains, quad.mass, &quad.inertia, &config.bounds.assumptions());
        if config.sim.strict && !report.all_pass() {
            return Err(ConfigError::Validation(format!(
                "gain checks failed under --strict (nu = {:e}, c1 pass = {}, c2 pass = {})",
                report.nu, report.c1_check.passed, report.c2_check.passed
            )));
        }
        Ok(Self { config: config.clone(), quad, aero, rotor_model, controller, targets, report })
    }

    /// Initial state relative to the desired trajectory at `t = 0`.
    pub fn initial_state(&self) -> RigidBodyState<f64> {
        let init = &self.config.initial;
        let tp = self.config.scenario.generator().trajectory_at(0.0);
        let yaw = tp.b1d.y.atan2(tp.b1d.x);
        let angles = Vector3::new(yaw + init.attitude[0], init.attitude[1], init.attitude[2]);
        RigidBodyState {
            x: tp.x + Vector3::from(init.position_offset),
            v: tp.v + Vector3::from(init.velocity),
            r: geometry::from_euler_zyx(&angles),
            omega: Vector3::from(init.angular_velocity),
        }
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, norm: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
    let n = m.norm();
    if n > 0.0 {
        m * (norm / n)
    } else {
        m
    }
}

/// Target networks with the configured Frobenius norms, drawn from the
/// plant seed. Their projection bounds equal their norms.
pub fn target_networks(config: &SimConfig) -> TargetNetworks {
    let mut rng = ChaCha8Rng::seed_from_u64(config.plant.target_seed);
    let hidden = config.adaptation.hidden;
    let mut net = |[w_norm, v_norm]: [f64; 2]| {
        let w = random_matrix(&mut rng, hidden + 1, 3, w_norm);
        let v = random_matrix(&mut rng, neural::DEFAULT_INPUTS + 1, hidden, v_norm);
        // Bounds slightly above the norms so projection never alters them.
        let (wb, vb) = (w_norm.max(f64::MIN_POSITIVE) * 2.0, v_norm.max(f64::MIN_POSITIVE) * 2.0);
        NnWeights::from_matrices(w, v, wb, vb).expect("target network shapes are consistent")
    };
    let position = net(config.plant.target_position_norms);
    let attitude = net(config.plant.target_attitude_norms);
    TargetNetworks { position, attitude }
}

fn vec3(v: &nalgebra::DVector<f64>) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

/// Disturbances `(Δ1, Δ2)` of the simplified/synthetic plant at a state.
fn model_disturbance(
    mode: PlantMode,
    config: &SimConfig,
    targets: Option<&TargetNetworks>,
    state: &RigidBodyState<f64>,
) -> Result<(Vector3<f64>, Vector3<f64>), SimError> {
    match (mode, targets) {
        (PlantMode::Synthetic, Some(tn)) => {
            let x1 = neural::build_position_input(&state.x, &state.v);
            let x2 = neural::build_attitude_input(&state.r, &state.omega)?;
            Ok((vec3(&neural::nn_output(&tn.position, &x1)?), vec3(&neural::nn_output(&tn.attitude, &x2)?)))
        }
        _ => Ok((Vector3::from(config.plant.delta1), Vector3::from(config.plant.delta2))),
    }
}

/// Inertial force and body moment on the vehicle for fixed rotor speeds.
fn plant_wrench(
    setup: &Setup,
    t: f64,
    state: &RigidBodyState<f64>,
    speeds: &[f64; 4],
) -> Result<(Vector3<f64>, Vector3<f64>), SimError> {
    let cfg = &setup.config;
    match cfg.plant.mode {
        PlantMode::Full => {
            let wind = cfg.wind.field().wind_at(t);
            let w = aero::resultant_wrench(state, &wind, speeds, &setup.quad, &setup.aero)?;
            Ok((w.force, w.moment))
        }
        mode => {
            let realized = speeds.map(|w| setup.rotor_model.c_t * w * w);
            let (f, m) = control::mix(&realized, setup.quad.d_h, setup.rotor_model.c_tq());
            let (d1, d2) = model_disturbance(mode, cfg, setup.targets.as_ref(), state)?;
            Ok(dynamics::simplified_wrench(state, f, &m, &setup.quad, &d1, &d2))
        }
    }
}

fn check_finite(values: &[(&'static str, &[f64])]) -> Result<(), SimError> {
    for (name, v) in values {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(SimError::NonFinite(name));
        }
    }
    Ok(())
}

pub fn run_simulation(config: &SimConfig) -> Result<SimResult, ConfigError> {
    let setup = Setup::new(config)?;
    Ok(run_setup(setup))
}

/// Runs a prepared setup to completion or to the first abort.
pub fn run_setup(mut setup: Setup) -> SimResult {
    let cfg = setup.config.clone();
    let dt = cfg.sim.dt;
    let steps = (cfg.sim.duration / dt).round() as usize;
    let traj_gen = cfg.scenario.generator();
    let wind_field = cfg.wind.field();
    let mut state = setup.initial_state();
    let mut records = Vec::with_capacity(steps);
    let mut abort = None;

    for k in 0..steps {
        let t = k as f64 * dt;
        let traj = traj_gen.trajectory_at(t);
        match advance(&mut setup, &mut state, &traj, t, dt, wind_field.wind_at(t)) {
            Ok(rec) => records.push(rec),
            Err(error) => {
                abort = Some(Abort { step: k, t, error });
                break;
            }
        }
    }

    let metrics = summarize(&records, cfg.sim.settling_band);
    SimResult {
        records,
        metrics,
        report: setup.report.clone(),
        abort,
        final_weights: [setup.controller.position_net.clone(), setup.controller.attitude_net.clone()],
        targets: setup.targets.clone(),
    }
}

fn advance(
    setup: &mut Setup,
    state: &mut RigidBodyState<f64>,
    traj: &TrajectoryPoint<f64>,
    t: f64,
    dt: f64,
    wind: Vector3<f64>,
) -> Result<TelemetryRecord, SimError> {
    let weights_before = [setup.controller.position_net.clone(), setup.controller.attitude_net.clone()];
    let out = setup.controller.step(state, traj, dt)?;
    let cmd = &out.command;
    check_finite(&[("thrust", &[cmd.thrust]), ("moment", cmd.moment.as_slice()), ("rotor speed", &cmd.rotor_speeds)])?;

    let speeds = cmd.rotor_speeds;
    let (force, moment) = plant_wrench(setup, t, state, &speeds)?;
    let rec = record(setup, state, traj, &out, &weights_before, force, moment, t, wind)?;

    let next = dynamics::step_rk4(state, t, dt, &setup.quad, |ts, s: &RigidBodyState<f64>| {
        plant_wrench(setup, ts, s, &speeds)
    })?;
    check_finite(&[
        ("position", next.x.as_slice()),
        ("velocity", next.v.as_slice()),
        ("attitude", next.r.matrix().as_slice()),
        ("angular velocity", next.omega.as_slice()),
    ])?;
    *state = next;
    Ok(rec)
}

#[allow(clippy::too_many_arguments)]
fn record(
    setup: &Setup,
    state: &RigidBodyState<f64>,
    traj: &TrajectoryPoint<f64>,
    out: &ControlStep<f64>,
    weights: &[NnWeights<f64>; 2],
    force: Vector3<f64>,
    moment: Vector3<f64>,
    t: f64,
    wind: Vector3<f64>,
) -> Result<TelemetryRecord, SimError> {
    let quad = &setup.quad;
    let cmd = &out.command;
    let e3 = Vector3::z();
    let b3 = state.r.matrix() * e3;

    // Disturbance relative to what the simplified model predicts for the
    // commanded (clipped) rotor speeds.
    let realized = cmd.rotor_speeds.map(|w| setup.rotor_model.c_t * w * w);
    let (f_model, m_model) = control::mix(&realized, quad.d_h, setup.rotor_model.c_tq());
    let delta1 = e3 * quad.weight() - b3 * f_model - force;
    let delta2 = m_model - moment;

    let errors = ErrorState {
        e_x: out.e_x,
        e_v: out.e_v,
        e_r: out.attitude.e_r,
        e_omega: out.attitude.e_omega,
        psi: out.attitude.psi,
    };
    let gains = &setup.controller.gains;
    let weight_errors = setup.targets.as_ref().map(|tn| {
        [
            WeightError { w: &tn.position.w - &weights[0].w, v: &tn.position.v - &weights[0].v },
            WeightError { w: &tn.attitude.w - &weights[1].w, v: &tn.attitude.v - &weights[1].v },
        ]
    });
    let lyap = stability::lyapunov_value(
        &errors,
        gains,
        &quad.inertia,
        quad.mass,
        weight_errors.as_ref().map(|[a, b]| (a, b)),
    );
    let z_tilde = weight_errors.as_ref().map_or([0.0; 2], |[a, b]| [a.norm(), b.norm()]);
    let set_d = stability::set_d_functional(
        &errors,
        z_tilde,
        [gains.position.gamma_max().max(f64::MIN_POSITIVE), gains.attitude.gamma_max().max(f64::MIN_POSITIVE)],
    );

    let m = state.r.matrix();
    let r = [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]];
    Ok(TelemetryRecord {
        t,
        x: state.x,
        v: state.v,
        r,
        omega: state.omega,
        x_d: traj.x,
        e_x: out.e_x,
        e_v: out.e_v,
        e_r: out.attitude.e_r,
        e_omega: out.attitude.e_omega,
        psi: out.attitude.psi,
        thrust: cmd.thrust,
        moment: cmd.moment,
        rotor_thrusts: cmd.rotor_thrusts,
        rotor_speeds: cmd.rotor_speeds,
        saturated: cmd.saturated,
        delta1_hat: out.delta1,
        delta2_hat: out.delta2,
        delta1,
        delta2,
        weight_norms: [weights[0].w.norm(), weights[0].v.norm(), weights[1].w.norm(), weights[1].v.norm()],
        lyap_v1: lyap.v1,
        lyap_v2: lyap.v2,
        lyap_v: lyap.v,
        set_d,
        wind,
        alignment: (out.rc.matrix() * e3).dot(&b3),
    })
}
