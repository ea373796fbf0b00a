use nalgebra::Vector3;

use windnn_core::dynamics::{self, RigidBodyState};
use windnn_core::{aero, control, geometry};
use windnn_sim::config::{load_config, ConfigError, PlantMode, SimConfig};
use windnn_sim::harness::{run_simulation, SimError};
use windnn_sim::telemetry;

fn short(mut cfg: SimConfig, duration: f64) -> SimConfig {
    cfg.sim.duration = duration;
    cfg
}

#[test]
fn minimal_file_takes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hover.toml");
    std::fs::write(&path, "[scenario]\ntrajectory = \"hover\"\n").unwrap();
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg, SimConfig::default());
    cfg.validate().unwrap();
}

#[test]
fn step_above_limit_is_rejected() {
    let err = SimConfig::from_toml_str("[sim]\ndt = 0.2\n").unwrap_err();
    match err {
        ConfigError::Validation(msg) => assert!(msg.contains("dt"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unknown_key_is_named() {
    match SimConfig::from_toml_str("[sim]\nfoo = 1\n") {
        Err(ConfigError::Parse(msg)) => assert!(msg.contains("foo"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_config("/nonexistent/windnn.toml".as_ref()), Err(ConfigError::Io { .. })));
}

#[test]
fn same_seed_gives_identical_csv() {
    let mut cfg = short(SimConfig::default(), 1.0);
    cfg.adaptation.init = windnn_sim::config::WeightInit::Random;
    cfg.plant.mode = PlantMode::Full;
    cfg.wind.velocity = [3.0, 1.0, 0.0];
    cfg.sim.seed = 11;
    let bytes = |cfg: &SimConfig| {
        let res = run_simulation(cfg).unwrap();
        let mut buf = Vec::new();
        telemetry::write_csv(&res.records, &mut buf, 1).unwrap();
        buf
    };
    let a = bytes(&cfg);
    assert_eq!(a, bytes(&cfg));
    cfg.sim.seed = 12;
    assert_ne!(a, bytes(&cfg));
}

#[test]
fn full_aero_hover_settles() {
    let mut cfg = short(SimConfig::default(), 5.0);
    cfg.plant.mode = PlantMode::Full;
    cfg.adaptation.enabled = false;
    cfg.initial.position_offset = [0.1, 0.0, 0.0];
    let res = run_simulation(&cfg).unwrap();
    assert!(res.succeeded());
    assert_eq!(res.records.len(), 5000);
    assert!(res.metrics.final_ex <= 1e-3, "{}", res.metrics.final_ex);
    assert_eq!(res.metrics.saturation_counts, [0; 4]);
}

/// With no wind, flapping or drag, a vehicle at rest sees the hover inflow for
/// every rotor speed, so the aerodynamic wrench equals the simplified model
/// calibrated to the aero hover point.
#[test]
fn plant_modes_agree_at_hover_inflow() {
    let mut cfg = SimConfig::default();
    cfg.aero.flap_coefficient = 0.0;
    cfg.aero.body_drag = 0.0;
    let quad = cfg.quad().unwrap();
    let aero_params = cfg.aero_params().unwrap();
    let model = cfg.simplified_params().unwrap();
    let mut worst = 0.0f64;
    for k in 0..50 {
        let s = 0.1 * k as f64;
        let mut state = RigidBodyState::at_rest(Vector3::new(s, -s, 1.0));
        state.r = geometry::from_euler_zyx(&Vector3::new(s, 0.3 * s.sin(), -0.2 * s.cos()));
        let speeds = [400.0 + 20.0 * s, 500.0 - 10.0 * s, 450.0 + s * s, 380.0 + 5.0 * s];
        let w = aero::resultant_wrench(&state, &Vector3::zeros(), &speeds, &quad, &aero_params).unwrap();
        let thrusts = speeds.map(|o| model.c_t * o * o);
        let (f, m) = control::mix(&thrusts, quad.d_h, model.c_tq());
        let (force, moment) = dynamics::simplified_wrench(&state, f, &m, &quad, &Vector3::zeros(), &Vector3::zeros());
        worst = worst.max((w.force - force).norm()).max((w.moment - moment).norm());
    }
    assert!(worst <= 1e-6, "{worst}");

    // Closed loop from the hover point: commands agree step for step.
    cfg.sim.duration = 2.0;
    cfg.adaptation.enabled = false;
    let run = |mode| {
        let mut c = cfg.clone();
        c.plant.mode = mode;
        run_simulation(&c).unwrap()
    };
    let (full, simple) = (run(PlantMode::Full), run(PlantMode::Simplified));
    for (a, b) in full.records.iter().zip(&simple.records) {
        assert!((a.thrust - b.thrust).abs() <= 1e-6);
    }
}

#[test]
fn degenerate_thrust_aborts_with_step() {
    // k_v e_v cancels gravity in the thrust vector at t = 0.
    let mut cfg = short(SimConfig::default(), 1.0);
    cfg.plant.mode = PlantMode::Simplified;
    cfg.initial.velocity = [0.0, 0.0, -cfg.vehicle.mass * cfg.vehicle.gravity / cfg.controller.k_v];
    let res = run_simulation(&cfg).unwrap();
    let abort = res.abort.expect("run must abort");
    assert_eq!(abort.step, 0);
    assert!(matches!(abort.error, SimError::Control(_)), "{:?}", abort.error);
    assert!(res.records.is_empty());
}

#[test]
fn synthetic_targets_respect_configured_norms() {
    let mut cfg = short(SimConfig::default(), 0.1);
    cfg.plant.mode = PlantMode::Synthetic;
    let res = run_simulation(&cfg).unwrap();
    let t = res.targets.unwrap();
    assert!((t.position.w.norm() - cfg.plant.target_position_norms[0]).abs() < 1e-12);
    assert!((t.attitude.v.norm() - cfg.plant.target_attitude_norms[1]).abs() < 1e-12);
}

#[test]
fn presets_load_and_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap();
        n += 1;
    }
    assert_eq!(n, 4);
}
