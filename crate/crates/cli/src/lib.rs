//! Configuration-driven front end: `sllb <command> --config run.toml`.

pub mod config;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sllb_core::control::{monte_carlo_cost, ControlSchedule, OrdinaryControl, YoungMeasure};
use sllb_core::integrator::simulate;
use sllb_core::optimize::cross_entropy_minimize;
use sllb_core::verify::{self, VerifyReport, SCHEMA_VERSION};

pub use config::RunConfig;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "sllb", version, about = "Controlled stochastic LLB with Marcus jump noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// One path: trajectory CSV and path summary.
    Simulate(Common),
    /// Monte Carlo relaxed cost of a Young measure or ordinary control.
    Cost {
        #[command(flatten)]
        common: Common,
        /// Young measure JSON; defaults to uniform weights on [0, T].
        #[arg(long, conflicts_with = "ordinary")]
        measure: Option<PathBuf>,
        /// Ordinary control JSON.
        #[arg(long)]
        ordinary: Option<PathBuf>,
    },
    /// Cross-entropy search over Young measures.
    Optimize(Common),
    /// Property suites; exit 3 if any check fails.
    Verify(Common),
    /// Step-size and cutoff sweeps.
    Convergence(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=config::MAX_SEED))]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(anyhow::Error),
    Verification,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            EXIT_VERIFY_FAILED
        }
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Simulate(c) | Command::Optimize(c) | Command::Verify(c) | Command::Convergence(c) => c,
        Command::Cost { common, .. } => common,
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    let c = common(&cmd).clone();
    let text = fs::read_to_string(&c.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", c.config.display())))?;
    let mut cfg = RunConfig::from_toml(&text).map_err(|e| Failure::Config(format!("{}: {e}", c.config.display())))?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = c.paths {
        cfg.paths = paths;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = c.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Runtime(e.into()))?;
    fs::create_dir_all(&c.out)
        .with_context(|| format!("creating {}", c.out.display()))
        .map_err(Failure::Runtime)?;
    let started = Instant::now();
    let (name, artifacts) = pool.install(|| match &cmd {
        Command::Simulate(_) => cmd_simulate(&cfg, &c.out).map(|a| ("simulate", a)),
        Command::Cost { measure, ordinary, .. } => {
            cmd_cost(&cfg, &c.out, measure.as_deref(), ordinary.as_deref()).map(|a| ("cost", a))
        }
        Command::Optimize(_) => cmd_optimize(&cfg, &c.out, c.paths).map(|a| ("optimize", a)),
        Command::Verify(_) => cmd_verify(&cfg, &c.out).map(|a| ("verify", a)),
        Command::Convergence(_) => cmd_convergence(&cfg, &c.out).map(|a| ("convergence", a)),
    })?;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": name,
        "seed": cfg.seed,
        "threads": pool.current_num_threads(),
        "wall_seconds": started.elapsed().as_secs_f64(),
        "artifacts": artifacts.files,
    });
    write_json(&c.out.join("summary.json"), &summary).map_err(Failure::Runtime)?;
    if artifacts.failed {
        return Err(Failure::Verification);
    }
    Ok(())
}

struct Artifacts {
    files: Vec<String>,
    failed: bool,
}

impl Artifacts {
    fn ok(files: &[&str]) -> Self {
        Self {
            files: files.iter().map(|s| s.to_string()).collect(),
            failed: false,
        }
    }
}

/// The provenance envelope carried by every result document.
fn envelope(cfg: &RunConfig, command: &str, result: impl Serialize) -> anyhow::Result<Value> {
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": cfg.seed,
        "config": serde_json::to_value(cfg)?,
        "result": serde_json::to_value(result)?,
    }))
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn default_schedule(cfg: &RunConfig) -> Result<YoungMeasure<f64>, Failure> {
    YoungMeasure::uniform(vec![0.0, cfg.time.horizon], cfg.control.points.len())
        .map_err(|e| Failure::Config(format!("time.horizon: {e}")))
}

fn sim(cfg: &RunConfig) -> Result<sllb_core::SimConfig64, Failure> {
    cfg.sim_config().map_err(Failure::Config)
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Artifacts, Failure> {
    let sim = sim(cfg)?;
    let schedule = default_schedule(cfg)?;
    let traj = simulate(&sim, &schedule, cfg.seed).context("simulation failed")?;
    let file = fs::File::create(out.join("trajectory.csv")).context("creating trajectory.csv")?;
    traj.write_csv(BufWriter::new(file)).context("writing trajectory.csv")?;
    let last = traj.final_state();
    let result = json!({
        "snapshots": traj.times.len(),
        "jumps": traj.jumps,
        "final_time": traj.times.last(),
        "final_l2_squared": sllb_core::grid::l2_norm_squared(last),
        "final_h1_squared": sllb_core::grid::h1_norm_squared(last),
    });
    write_json(&out.join("path.json"), &envelope(cfg, "simulate", result)?)?;
    Ok(Artifacts::ok(&["trajectory.csv", "path.json"]))
}

fn check_paths(cfg: &RunConfig) -> Result<(), Failure> {
    if cfg.paths < 2 {
        return Err(Failure::Config(format!("paths: need at least 2, got {}", cfg.paths)));
    }
    Ok(())
}

fn cmd_cost(cfg: &RunConfig, out: &Path, measure: Option<&Path>, ordinary: Option<&Path>) -> Result<Artifacts, Failure> {
    check_paths(cfg)?;
    let problem = cfg.problem().map_err(Failure::Config)?;
    let (schedule, input): (Box<dyn ControlSchedule<f64>>, Value) = match (measure, ordinary) {
        (_, Some(p)) => {
            let u: OrdinaryControl<f64> = read_json(p)?;
            let v = json!({ "ordinary": &u });
            (Box::new(u), v)
        }
        (Some(p), None) => {
            let y: YoungMeasure<f64> = read_json(p)?;
            let v = json!({ "measure": &y });
            (Box::new(y), v)
        }
        (None, None) => {
            let y = default_schedule(cfg)?;
            let v = json!({ "measure": &y });
            (Box::new(y), v)
        }
    };
    let est = monte_carlo_cost(&problem, schedule.as_ref(), cfg.paths, cfg.seed).context("cost estimation failed")?;
    let result = json!({
        "input": input,
        "estimate": est.estimate,
        "stderr": est.stderr,
        "n_paths": est.n_paths,
    });
    write_json(&out.join("cost.json"), &envelope(cfg, "cost", result)?)?;
    Ok(Artifacts::ok(&["cost.json"]))
}

fn cmd_optimize(cfg: &RunConfig, out: &Path, paths: Option<usize>) -> Result<Artifacts, Failure> {
    let problem = cfg.problem().map_err(Failure::Config)?;
    let mut opt = cfg.optimizer.clone();
    opt.seed = cfg.seed;
    if let Some(p) = paths {
        opt.paths_per_evaluation = p;
    }
    opt.validate().map_err(|e| Failure::Config(format!("optimizer: {e}")))?;
    let report = cross_entropy_minimize(&problem, &opt).context("optimization failed")?;
    let result = json!({
        "optimizer": opt,
        "report": &report,
        "relaxation_gap": report.relaxation_gap(),
        "selection_bias_ok": report.selection_bias_ok(3.0),
    });
    write_json(&out.join("report.json"), &envelope(cfg, "optimize", result)?)?;
    write_json(&out.join("measure.json"), &report.measure)?;
    Ok(Artifacts::ok(&["report.json", "measure.json"]))
}

/// Runs every property suite on the resolved configuration.
pub fn verify_report(cfg: &RunConfig) -> Result<VerifyReport, String> {
    let sim = cfg.sim_config()?;
    let schedule =
        YoungMeasure::uniform(vec![0.0, cfg.time.horizon], cfg.control.points.len()).map_err(|e| e.to_string())?;
    let v = &cfg.verify;
    let mut checks = Vec::new();
    if v.marcus {
        checks.push(verify::check_marcus_lemmas(cfg.seed, cfg.jump_rule));
    }
    let mut specs = verify::default_compensator_specs();
    specs.push(("config".into(), cfg.levy.clone()));
    checks.push(verify::check_compensator_identity(&specs, cfg.seed, v.compensator_tolerance));
    checks.push(verify::check_noise_isometry(&sim, &schedule, cfg.paths, cfg.seed));
    checks.push(verify::check_energy_estimates(&sim, &schedule, cfg.paths, &v.energy_dts, cfg.seed));
    checks.push(verify::check_increment_moments(
        &sim,
        &schedule,
        v.increment_t0,
        &v.increment_thetas,
        cfg.paths,
        cfg.seed,
    ));
    Ok(VerifyReport::new(checks))
}

fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<Artifacts, Failure> {
    let report = verify_report(cfg).map_err(Failure::Config)?;
    for c in &report.checks {
        eprintln!("{:<20} {}", c.name, if c.pass { "pass" } else { "FAIL" });
    }
    let mut doc = envelope(cfg, "verify", &report.checks).map_err(Failure::Runtime)?;
    doc["pass"] = json!(report.pass);
    write_json(&out.join("verify.json"), &doc)?;
    let mut a = Artifacts::ok(&["verify.json"]);
    a.failed = !report.pass;
    Ok(a)
}

fn cmd_convergence(cfg: &RunConfig, out: &Path) -> Result<Artifacts, Failure> {
    let sim = sim(cfg)?;
    let schedule = default_schedule(cfg)?;
    let c = &cfg.convergence;
    if c.dts.len() < 2 || c.cutoffs.len() < 2 {
        return Err(Failure::Config("convergence: need at least two dts and two cutoffs".into()));
    }
    let dt = verify::dt_sweep(&sim, &schedule, &c.dts, c.reference_dt, cfg.paths, cfg.seed).context("dt sweep")?;
    let eps = verify::epsilon_sweep(c.alpha, c.scale, &c.cutoffs, c.reference_cutoff, cfg.grid, cfg.seed)
        .context("cutoff sweep")?;
    for (table, name) in [(&dt, "dt_convergence.csv"), (&eps, "epsilon_convergence.csv")] {
        let f = fs::File::create(out.join(name)).with_context(|| format!("creating {name}"))?;
        table.write_csv(BufWriter::new(f)).with_context(|| format!("writing {name}"))?;
    }
    let result = json!({
        "dt": { "slope": dt.slope, "r2": dt.r2 },
        "epsilon": { "slope": eps.slope, "r2": eps.r2, "expected_slope": 2.0 - c.alpha },
    });
    write_json(&out.join("convergence.json"), &envelope(cfg, "convergence", result)?)?;
    if !dt.slope.is_finite() || !eps.slope.is_finite() {
        bail_runtime("non-finite fitted slope")?;
    }
    Ok(Artifacts::ok(&["dt_convergence.csv", "epsilon_convergence.csv", "convergence.json"]))
}

fn bail_runtime(msg: &str) -> Result<(), Failure> {
    let r: anyhow::Result<()> = (|| bail!("{msg}"))();
    r.map_err(Failure::Runtime)
}
