use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use windnn_sim::config::{load_config, ConfigError, PlantMode, SimConfig, WindKind};
use windnn_sim::harness::{run_setup, Setup, SimResult};
use windnn_sim::telemetry;

const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "windnn", version, about = "Adaptive geometric quadrotor control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlantArg {
    Full,
    Simplified,
    Synthetic,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving telemetry.csv, summary.txt and weights.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Constant wind velocity "vx,vy,vz" in m/s.
    #[arg(long)]
    wind: Option<String>,
    #[arg(long, value_enum)]
    adaptation: Option<OnOff>,
    #[arg(long, value_enum)]
    plant: Option<PlantArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep every Nth telemetry record.
    #[arg(long)]
    decimate: Option<usize>,
    /// Refuse to run when the gain checks fail.
    #[arg(long)]
    strict: bool,
    /// Extra overrides, `section.key=value` with a TOML value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop simulation.
    Run(RunArgs),
    /// Print the gain feasibility report for a configuration.
    ValidateGains {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Exit with the configuration-error code when a check fails.
        #[arg(long)]
        strict: bool,
    },
    /// Run one simulation per value of a parameter, in parallel.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter to vary, e.g. `controller.k_x`.
        #[arg(long)]
        param: String,
        /// Comma-separated TOML values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

fn base_config(path: Option<&Path>, overrides: &[String]) -> Result<SimConfig, ConfigError> {
    let mut cfg = match path {
        Some(p) => load_config(p)?,
        None => SimConfig::default(),
    };
    for item in overrides {
        let (k, v) =
            item.split_once('=').ok_or_else(|| ConfigError::Parse(format!("override `{item}` is not KEY=VALUE")))?;
        cfg = cfg.with_override(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn parse_vec3(text: &str) -> Result<[f64; 3], ConfigError> {
    let parts: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match parts {
        Ok(v) if v.len() == 3 => Ok([v[0], v[1], v[2]]),
        _ => Err(ConfigError::Parse(format!("`{text}` is not a vector vx,vy,vz"))),
    }
}

fn run_config(args: &RunArgs) -> Result<SimConfig, ConfigError> {
    let mut cfg = base_config(args.config.as_deref(), &args.set)?;
    if let Some(d) = args.duration {
        cfg.sim.duration = d;
    }
    if let Some(dt) = args.dt {
        cfg.sim.dt = dt;
    }
    if let Some(w) = &args.wind {
        cfg.wind.kind = WindKind::Constant;
        cfg.wind.velocity = parse_vec3(w)?;
    }
    if let Some(a) = args.adaptation {
        cfg.adaptation.enabled = matches!(a, OnOff::On);
    }
    if let Some(p) = args.plant {
        cfg.plant.mode = match p {
            PlantArg::Full => PlantMode::Full,
            PlantArg::Simplified => PlantMode::Simplified,
            PlantArg::Synthetic => PlantMode::Synthetic,
        };
    }
    if let Some(s) = args.seed {
        cfg.sim.seed = s;
    }
    if let Some(n) = args.decimate {
        cfg.sim.decimate = n;
    }
    cfg.sim.strict |= args.strict;
    cfg.validate()?;
    Ok(cfg)
}

fn write_outputs(result: &SimResult, cfg: &SimConfig, out: Option<&Path>) -> std::io::Result<()> {
    let (telemetry_path, summary_path, weights_path) = match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            (Some(dir.join("telemetry.csv")), Some(dir.join("summary.txt")), Some(dir.join("weights.csv")))
        }
        None => (cfg.output.telemetry.clone(), cfg.output.summary.clone(), cfg.output.weights.clone()),
    };
    if let Some(p) = telemetry_path {
        telemetry::write_csv_file(&result.records, &p, cfg.sim.decimate).map_err(std::io::Error::other)?;
    }
    if let Some(p) = summary_path {
        telemetry::write_summary(result, fs::File::create(p)?)?;
    }
    if let Some(p) = weights_path {
        telemetry::write_weights(result, fs::File::create(p)?).map_err(std::io::Error::other)?;
    }
    Ok(())
}

fn config_failure(e: ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let cfg = match run_config(args) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let setup = match Setup::new(&cfg) {
        Ok(s) => s,
        Err(e) => return config_failure(e),
    };
    if !setup.report.all_pass() {
        eprintln!("warning: gain checks failed; see stability.* entries in the summary");
    }
    let result = run_setup(setup);
    if let Err(e) = write_outputs(&result, &cfg, args.out.as_deref()) {
        eprintln!("error: writing outputs: {e}");
        return ExitCode::from(EXIT_IO);
    }
    let stdout = std::io::stdout();
    let _ = telemetry::write_summary(&result, stdout.lock());
    match &result.abort {
        Some(a) => {
            eprintln!("aborted at step {} (t = {:.6} s): {}", a.step, a.t, a.error);
            ExitCode::from(EXIT_ABORT)
        }
        None => ExitCode::SUCCESS,
    }
}

fn cmd_validate(config: Option<&Path>, set: &[String], strict: bool) -> ExitCode {
    let cfg = match base_config(config, set) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let (quad, gains) = match (cfg.quad(), cfg.gains()) {
        (Ok(q), Ok(g)) => (q, g),
        (Err(e), _) | (_, Err(e)) => return config_failure(e),
    };
    let report = windnn_core::stability::build_pd_matrices(&gains, quad.mass, &quad.inertia, &cfg.bounds.assumptions());
    let _ = write!(std::io::stdout().lock(), "{report}");
    if strict && !report.all_pass() {
        eprintln!("error: gain checks failed");
        return ExitCode::from(EXIT_CONFIG);
    }
    ExitCode::SUCCESS
}

fn cmd_sweep(run: &RunArgs, param: &str, values: &[String]) -> ExitCode {
    let base = match run_config(run) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let configs: Result<Vec<SimConfig>, ConfigError> = values.iter().map(|v| base.with_override(param, v)).collect();
    let configs = match configs {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let setups: Result<Vec<Setup>, ConfigError> = configs.iter().map(Setup::new).collect();
    let setups = match setups {
        Ok(s) => s,
        Err(e) => return config_failure(e),
    };
    let results: Vec<SimResult> = setups.into_par_iter().map(run_setup).collect();

    if let Some(dir) = &run.out {
        for (i, (res, cfg)) in results.iter().zip(&configs).enumerate() {
            if let Err(e) = write_outputs(res, cfg, Some(&dir.join(format!("run{i:03}")))) {
                eprintln!("error: writing outputs: {e}");
                return ExitCode::from(EXIT_IO);
            }
        }
    }
    println!("{param},status,rms_ex,rms_ex_tail,max_ex,rms_er_tail,final_lyapunov,gains_pass");
    for (v, r) in values.iter().zip(&results) {
        let m = &r.metrics;
        println!(
            "{v},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
            if r.succeeded() { "ok" } else { "aborted" },
            m.rms_ex,
            m.rms_ex_tail,
            m.max_ex,
            m.rms_er_tail,
            m.final_v,
            r.report.all_pass()
        );
    }
    if results.iter().any(|r| !r.succeeded()) {
        ExitCode::from(EXIT_ABORT)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::ValidateGains { config, set, strict } => cmd_validate(config.as_deref(), set, *strict),
        Command::Sweep { run, param, values } => cmd_sweep(run, param, values),
    }
}
