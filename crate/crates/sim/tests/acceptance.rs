//! Acceptance criteria. Each criterion prints one `PASS`/`FAIL` line to
//! stderr (written directly, so it shows without `--nocapture`); the test
//! fails if any criterion fails.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};

use windnn_core::aero::{solve_thrust_inflow, thrust_coefficient, BladeCoefficients};
use windnn_core::dynamics::{self, QuadParams, RigidBodyState};
use windnn_core::stability::{build_pd_matrices, validate_c1};
use windnn_core::{AdaptationGains, ControllerGains, TrajectoryPoint};
use windnn_sim::config::{load_config, PlantMode, SimConfig};
use windnn_sim::harness::{run_simulation, Setup, SimResult};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

fn preset(name: &str) -> SimConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run(cfg: &SimConfig) -> SimResult {
    run_simulation(cfg).expect("preset configuration is valid")
}

fn blade() -> BladeCoefficients<f64> {
    BladeCoefficients { solidity: 0.1, lift_slope: 5.7, pitch: 0.2, profile_drag: 0.01 }
}

fn hover_inflow() -> Outcome {
    let b = blade();
    // 2λ² + (sa/4)λ − saθ0/6 = 0, positive root.
    let sa = b.solidity * b.lift_slope;
    let (qa, qb, qc) = (2.0, sa / 4.0, -sa * b.pitch / 6.0);
    let lambda_ref = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
    let ct_ref = 2.0 * lambda_ref * lambda_ref;

    let start = Instant::now();
    let sol = solve_thrust_inflow(0.0, 0.0, &b).unwrap();
    let elapsed = start.elapsed();
    let pass = (sol.lambda - 0.0681495).abs() <= 1e-6
        && (sol.c_t - 0.0092887).abs() <= 1e-6
        && (sol.lambda - lambda_ref).abs() <= 1e-12
        && (sol.c_t - ct_ref).abs() <= 1e-12
        && elapsed.as_secs_f64() < 1e-3;
    outcome(
        1,
        "hover inflow closed form",
        pass,
        format!("lambda={:.7} C_T={:.7} oracle=({lambda_ref:.7},{ct_ref:.7}) t={elapsed:?}", sol.lambda, sol.c_t),
    )
}

/// Plain bisection on `G(λ) = 2λ√(μx² + (λ + μz)²) − C_T(λ)`, which is
/// increasing in λ over the bracket used here.
fn bisect_inflow(mu_x: f64, mu_z: f64, b: &BladeCoefficients<f64>) -> f64 {
    let g = |l: f64| 2.0 * l * (mu_x * mu_x + (l + mu_z).powi(2)).sqrt() - thrust_coefficient(l, mu_x, mu_z, b);
    let (mut lo, mut hi) = (-0.5, 1.0);
    assert!(g(lo) < 0.0 && g(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn newton_vs_bisection() -> Outcome {
    let b = blade();
    let n = 31;
    let start = Instant::now();
    let (mut max_diff, mut max_res) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for i in 0..n {
        for j in 0..n {
            let mu_x = 0.3 * i as f64 / (n - 1) as f64;
            let mu_z = -0.05 + 0.15 * j as f64 / (n - 1) as f64;
            match solve_thrust_inflow(mu_x, mu_z, &b) {
                Ok(sol) => {
                    max_diff = max_diff.max((sol.lambda - bisect_inflow(mu_x, mu_z, &b)).abs());
                    max_res = max_res.max(sol.residual);
                }
                Err(_) => failures += 1,
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures == 0 && max_diff <= 1e-8 && max_res < 1e-10 && elapsed.as_secs_f64() < 1.0;
    outcome(
        2,
        "Newton vs bisection",
        pass,
        format!("max|dlambda|={max_diff:.2e} max residual={max_res:.2e} failures={failures} t={elapsed:?}"),
    )
}

fn integrator_conservation() -> Outcome {
    let j = Matrix3::from_diagonal(&Vector3::new(0.02, 0.02, 0.04));
    let quad = QuadParams::new(1.0, j, 0.2, 0.0, 9.81).unwrap();
    let mut s = RigidBodyState::at_rest(Vector3::zeros());
    s.omega = Vector3::new(1.0, 2.0, 3.0);
    let momentum = |s: &RigidBodyState<f64>| s.r.matrix() * j * s.omega;
    let energy = |s: &RigidBodyState<f64>| 0.5 * s.omega.dot(&(j * s.omega));
    let (h0, e0) = (momentum(&s), energy(&s));
    let dt = 1e-3;
    let (mut max_h, mut max_e) = (0.0f64, 0.0f64);
    for k in 0..100_000 {
        s = dynamics::step_rk4(&s, k as f64 * dt, dt, &quad, |_, _| {
            Ok::<_, dynamics::DynamicsError>((Vector3::zeros(), Vector3::zeros()))
        })
        .unwrap();
        if k < 10_000 {
            max_h = max_h.max((momentum(&s) - h0).norm() / h0.norm());
            max_e = max_e.max((energy(&s) - e0).abs() / e0);
        }
    }
    let drift = (s.r.matrix().transpose() * s.r.matrix() - Matrix3::identity()).norm();
    let pass = max_h <= 1e-6 && max_e <= 1e-6 && drift <= 1e-10;
    outcome(
        3,
        "integrator conservation",
        pass,
        format!("rel dH={max_h:.2e} rel dE={max_e:.2e} |RtR-I| after 1e5 steps={drift:.2e}"),
    )
}

fn baseline(result: &SimResult, cfg: &SimConfig) -> Outcome {
    let r = &result.report;
    let validated = r.c1_check.passed
        && r.c2_check.passed
        && [&r.m11, &r.m12, &r.m21, &r.m22].iter().all(|m| m.positive_definite());
    let m = &result.metrics;
    let psi0 = result.records.first().map_or(f64::NAN, |r| r.psi);
    let settled = m.settling_time.filter(|&t| t <= cfg.sim.duration);
    let pass = !cfg.adaptation.enabled
        && cfg.sim.settling_band <= 1e-3
        && validated
        && result.succeeded()
        && psi0 < 1.0
        && m.max_psi < 1.0
        && settled.is_some();
    outcome(
        4,
        "geometric controller baseline",
        pass,
        format!(
            "gains validated={validated} settle(|e_x|<=1e-3)={:?}s final |e_x|={:.2e} psi(0)={psi0:.3} max psi={:.3}",
            settled, m.final_ex, m.max_psi
        ),
    )
}

fn synthetic_uub(on: &SimResult, off: &SimResult) -> Outcome {
    let radius = on.report.radius;
    let tail = on.metrics.max_set_d_tail;
    let ratio = off.metrics.rms_ex_tail / on.metrics.rms_ex_tail;
    let bounded = on.succeeded() && off.succeeded() && tail.is_finite();
    let inside = radius.is_some_and(|r| tail <= r);
    let pass = bounded && inside && ratio >= 5.0 && on.report.all_pass();
    outcome(
        5,
        "synthetic-truth UUB",
        pass,
        format!(
            "tail set-D max={tail:.3e} radius={} rms|e_x| tail on={:.3e} off={:.3e} ratio={ratio:.2}",
            radius.map_or("none".into(), |r| format!("{r:.3e}")),
            on.metrics.rms_ex_tail,
            off.metrics.rms_ex_tail
        ),
    )
}

/// Forward-difference `V̇` checked against `−νV + C5`. The tolerance is the
/// truncation bound `½ dt max|V̈|`, with `V̈` estimated by second differences
/// over the run.
fn lyapunov_decrease(on: &SimResult) -> Outcome {
    let rec = &on.records;
    let (nu, c5) = (on.report.nu, on.report.c5);
    let threshold = c5 / nu;
    let vdot: Vec<f64> = rec.windows(2).map(|w| (w[1].lyap_v - w[0].lyap_v) / (w[1].t - w[0].t)).collect();
    let tol = 0.5 * vdot.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let (mut checked, mut violations, mut all_violations) = (0usize, 0usize, 0usize);
    for (k, d) in vdot.iter().enumerate() {
        let v = rec[k].lyap_v;
        let excess = d - (-nu * v + c5);
        if excess > tol {
            all_violations += 1;
        }
        if v > threshold {
            checked += 1;
            if excess > tol {
                violations += 1;
            }
        }
    }
    let max_v = rec.iter().map(|r| r.lyap_v).fold(0.0, f64::max);
    outcome(
        6,
        "Lyapunov decrease",
        on.succeeded() && violations == 0,
        format!(
            "steps with V>C5/nu: {checked} (C5/nu={threshold:.3e}, max V={max_v:.3e}) violations={violations}; \
             inequality on all {} steps: violations={all_violations} tol={tol:.2e}",
            vdot.len()
        ),
    )
}

fn wind_rejection(on: &SimResult, off: &SimResult) -> Outcome {
    let ratio = off.metrics.rms_ex_tail / on.metrics.rms_ex_tail;
    let pass = on.succeeded() && off.succeeded() && ratio >= 3.0;
    outcome(
        7,
        "wind rejection",
        pass,
        format!("rms|e_x| tail on={:.3e} off={:.3e} ratio={ratio:.2}", on.metrics.rms_ex_tail, off.metrics.rms_ex_tail),
    )
}

fn projection_safety(runs: &[(&SimConfig, &SimResult)]) -> Outcome {
    let mut worst = 0.0f64;
    let mut exceeded = 0usize;
    for (cfg, res) in runs {
        let ad = &cfg.adaptation;
        let bounds = [ad.position.w_max, ad.position.v_max, ad.attitude.w_max, ad.attitude.v_max];
        let finals = [
            res.final_weights[0].w.norm(),
            res.final_weights[0].v.norm(),
            res.final_weights[1].w.norm(),
            res.final_weights[1].v.norm(),
        ];
        for norms in res.records.iter().map(|r| r.weight_norms).chain(std::iter::once(finals)) {
            for (n, b) in norms.iter().zip(bounds) {
                worst = worst.max(n / b);
                exceeded += usize::from(*n > b);
            }
        }
    }
    outcome(
        8,
        "projection safety",
        exceeded == 0,
        format!("{} runs, max norm/bound={worst:.4}, exceedances={exceeded}", runs.len()),
    )
}

/// `𝒳 = f/(e3ᵀR_cᵀRe3)[(e3ᵀR_cᵀRe3)Re3 − R_c e3]`.
fn misalignment(f: f64, r: &Matrix3<f64>, rc: &Matrix3<f64>) -> Vector3<f64> {
    let (b3, b3c) = (r.column(2).into_owned(), rc.column(2).into_owned());
    let c = b3c.dot(&b3);
    (b3 * c - b3c) * (f / c)
}

/// Largest per-step residual of `m ė_v = −k_x e_x − k_v e_v − Δ̃1 − 𝒳`.
fn error_dynamics_residual(dt: f64) -> f64 {
    let mut cfg = SimConfig::default();
    cfg.plant.mode = PlantMode::Simplified;
    cfg.plant.delta1 = [0.4, -0.3, 0.2];
    cfg.initial.position_offset = [0.1, -0.05, 0.05];
    cfg.sim.dt = dt;
    let mut setup = Setup::new(&cfg).unwrap();
    let quad = setup.quad;
    let gains = setup.controller.gains;
    let delta1 = Vector3::from(cfg.plant.delta1);
    let traj: TrajectoryPoint<f64> = cfg.scenario.generator().trajectory_at(0.0);
    let mut state = setup.initial_state();
    let steps = (1.0 / dt).round() as usize;
    let mut worst = 0.0f64;
    let mut prev: Option<(Vector3<f64>, Vector3<f64>)> = None;
    for k in 0..steps {
        let out = setup.controller.step(&state, &traj, dt).unwrap();
        if let Some((ev_prev, rhs)) = prev {
            worst = worst.max((quad.mass * (out.e_v - ev_prev) - rhs * dt).norm());
        }
        let f = out.command.thrust;
        let chi = misalignment(f, state.r.matrix(), out.rc.matrix());
        let rhs = -out.e_x * gains.k_x - out.e_v * gains.k_v - (delta1 - out.delta1) - chi;
        prev = Some((out.e_v, rhs));
        let m = out.command.moment;
        state = dynamics::step_rk4(&state, k as f64 * dt, dt, &quad, |_, s| {
            Ok::<_, dynamics::DynamicsError>(dynamics::simplified_wrench(s, f, &m, &quad, &delta1, &Vector3::zeros()))
        })
        .unwrap();
    }
    worst
}

fn error_dynamics() -> Outcome {
    let dts = [1e-3, 5e-4];
    let res: Vec<f64> = dts.iter().map(|&dt| error_dynamics_residual(dt)).collect();
    let order = (res[0] / res[1]).log2();
    let within = res.iter().zip(dts).all(|(r, dt)| *r <= 10.0 * dt * dt);
    let pass = within && (1.7..=2.3).contains(&order);
    outcome(
        9,
        "error-dynamics residual",
        pass,
        format!(
            "max residual dt=1e-3: {:.3e} (limit {:.1e}), dt=5e-4: {:.3e} (limit {:.1e}), observed order {order:.2}",
            res[0],
            10.0 * dts[0] * dts[0],
            res[1],
            10.0 * dts[1] * dts[1]
        ),
    )
}

fn gain_vectors() -> Outcome {
    let fail = validate_c1(2.5, 16.0, 4.0);
    let ok = validate_c1(1.0, 16.0, 4.0);
    let ad = AdaptationGains::new(1.0, 1.0, 0.01).unwrap();
    let c1 = (16.0f64 / 4.0).sqrt();
    let gains = ControllerGains::new(16.0, 8.0, 2.0, 0.3, c1, 0.5, ad, ad).unwrap();
    let j = Matrix3::from_diagonal(&Vector3::new(0.02, 0.02, 0.04));
    let report = build_pd_matrices(&gains, 4.0, &j, &windnn_sim::config::BoundsConfig::default().assumptions());
    let lam = report.m11.min_eigenvalue();
    let pass = !fail.passed && ok.passed && lam.abs() < 1e-12 && !report.m11.positive_definite();
    outcome(
        10,
        "gain validator vectors",
        pass,
        format!("c1=2.5 pass={} c1=1 pass={} lambda_min(M11) at c1=sqrt(kx/m): {lam:.1e}", fail.passed, ok.passed),
    )
}

#[test]
fn acceptance() {
    let base_cfg = preset("baseline.toml");
    let uub_on_cfg = preset("synthetic_uub.toml");
    let mut uub_off_cfg = uub_on_cfg.clone();
    uub_off_cfg.adaptation.enabled = false;
    let wind_on_cfg = preset("wind_circle.toml");
    let mut wind_off_cfg = wind_on_cfg.clone();
    wind_off_cfg.adaptation.enabled = false;

    let cfgs = [&base_cfg, &uub_on_cfg, &uub_off_cfg, &wind_on_cfg, &wind_off_cfg];
    let results: Vec<SimResult> = std::thread::scope(|s| {
        let handles: Vec<_> = cfgs.iter().map(|c| s.spawn(move || run(c))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let [base, uub_on, uub_off, wind_on, wind_off] = &results[..] else { unreachable!() };

    let outcomes = vec![
        hover_inflow(),
        newton_vs_bisection(),
        integrator_conservation(),
        baseline(base, &base_cfg),
        synthetic_uub(uub_on, uub_off),
        lyapunov_decrease(uub_on),
        wind_rejection(wind_on, wind_off),
        projection_safety(&cfgs.iter().copied().zip(results.iter()).collect::<Vec<_>>()),
        error_dynamics(),
        gain_vectors(),
    ];

    let mut err = std::io::stderr().lock();
    for o in &outcomes {
        let _ = writeln!(
            err,
            "criterion {:>2} {:<32} {}  {}",
            o.id,
            o.name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
