//! Command-line front end: single runs, parameter sweeps, convergence
//! studies and a cross-scheme verification mode.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 scenario validation
//! failure, 3 numerical failure (partial output written), 4 unreliable
//! convergence, 5 a diagnostic check failed.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use carbofront_core::config;
use carbofront_core::diagnostics::{self, DiagnosticsReport, Tolerances};
use carbofront_core::model::{Scenario, ValidScenario};
use carbofront_core::oracle::{self, Refinement, RefinementStudy};
use carbofront_core::solver::{self, RunFailure, StepControl, Trajectory};
use carbofront_core::{Error, FixedGrid};

mod output;
mod sweep;

pub use output::{summary_lines, write_summary, write_trajectory_csv, CSV_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_UNRELIABLE: i32 = 4;
pub const EXIT_CHECKS: i32 = 5;

/// Cross-scheme tolerance used by `verify`.
pub const VERIFY_GAP: f64 = 0.01;

/// Minimum order accepted by `convergence`.
pub const MIN_CONVERGENCE_ORDER: f64 = 0.8;

#[derive(Parser, Debug)]
#[command(name = "carbofront", version, about = "Carbonation front simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and check the trajectory.
    Run(Common),
    /// Run a grid of scenarios in parallel.
    Sweep(SweepArgs),
    /// Refinement study of the main solver.
    Convergence(ConvergenceArgs),
    /// Validate a scenario and compare the main solver with the explicit scheme.
    Verify(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Scenario file (`key = value` lines), applied on top of the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "baseline")]
    pub preset: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 101)]
    pub nodes: usize,
    #[arg(long = "checkpoint-every", default_value_t = 1.0)]
    pub checkpoint_every: f64,
    /// Centered instead of upwind advection.
    #[arg(long)]
    pub centered: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Parameter axis `key=v1,v2,...`; repeat for a product grid.
    #[arg(long = "grid")]
    grid: Vec<String>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// simultaneous, temporal or spatial
    #[arg(long, default_value = "temporal")]
    study: String,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

/// Scenario plus numerical settings of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub scenario: Scenario,
    pub horizon: f64,
    pub nodes: usize,
    pub control: StepControl,
    pub checkpoint_every: f64,
    pub out: PathBuf,
}

/// Error raised while setting up or executing a command, tagged with the
/// exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_USAGE,
            error: e.into(),
        }
    }
}

fn usage(msg: String) -> Failure {
    fail(EXIT_USAGE, anyhow::Error::msg(msg))
}

fn fail(code: i32, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

impl RunConfig {
    pub fn from_common(c: &Common) -> Result<Self, Failure> {
        let base = Scenario::preset(&c.preset).with_context(|| {
            format!(
                "unknown preset {:?} (known: {})",
                c.preset,
                Scenario::PRESETS.join(", ")
            )
        })?;
        let (name, scenario) = match &c.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let sc = config::parse_onto(base, &text)
                    .with_context(|| format!("in {}", path.display()))?;
                (path.display().to_string(), sc)
            }
            None => (c.preset.clone(), base),
        };
        if !(c.horizon >= 0.0 && c.horizon.is_finite()) {
            return Err(usage(format!(
                "--horizon must be a nonnegative number, got {}",
                c.horizon
            )));
        }
        if !(c.dt > 0.0 && c.checkpoint_every > 0.0) {
            return Err(usage("--dt and --checkpoint-every must be positive".into()));
        }
        if c.nodes < 3 {
            return Err(usage(format!(
                "--nodes must be at least 3, got {}",
                c.nodes
            )));
        }
        Ok(Self {
            name,
            scenario,
            horizon: c.horizon,
            nodes: c.nodes,
            control: StepControl {
                dt: c.dt,
                upwind: !c.centered,
                ..StepControl::default()
            },
            checkpoint_every: c.checkpoint_every,
            out: c.out.clone(),
        })
    }

    pub fn validated(&self) -> Result<ValidScenario, Failure> {
        validate(&self.scenario)
    }

    pub fn grid(&self) -> FixedGrid {
        FixedGrid::new(self.nodes).expect("nodes >= 3 checked on construction")
    }
}

fn validate(sc: &Scenario) -> Result<ValidScenario, Failure> {
    ValidScenario::new(sc.clone()).map_err(|e| match e {
        Error::Validation(rep) => {
            let names: Vec<String> = rep
                .failed_assumptions()
                .iter()
                .map(|a| a.to_string())
                .collect();
            fail(
                EXIT_VALIDATION,
                anyhow::anyhow!("scenario violates {}\n{rep}", names.join(", ")),
            )
        }
        other => fail(EXIT_USAGE, other.into()),
    })
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn check_status(report: &DiagnosticsReport) -> i32 {
    if report.all_pass() {
        EXIT_OK
    } else {
        EXIT_CHECKS
    }
}

/// `run`: simulate, check, write `trajectory.csv` and `summary.txt`.
pub fn cmd_run(cfg: &RunConfig) -> Result<i32, Failure> {
    let sc = cfg.validated()?;
    ensure_dir(&cfg.out)?;
    let outcome = solver::run(
        &sc,
        &cfg.grid(),
        &cfg.control,
        cfg.horizon,
        cfg.checkpoint_every,
    );
    let (traj, err) = match outcome {
        Ok(tr) => (tr, None),
        Err(RunFailure { error, partial }) => (partial, Some(error)),
    };
    let report = write_outputs(cfg, &traj)?;
    if let Some(e) = err {
        return Err(fail(
            EXIT_NUMERICAL,
            anyhow::anyhow!("{e} (partial output in {})", cfg.out.display()),
        ));
    }
    let report = report.expect("complete runs always have diagnostics");
    for line in summary_lines(cfg, &traj, Some(&report))
        .iter()
        .filter(|l| l.starts_with("beta") || l.contains(".pass"))
    {
        println!("{line}");
    }
    Ok(check_status(&report))
}

fn write_outputs(cfg: &RunConfig, traj: &Trajectory) -> Result<Option<DiagnosticsReport>, Failure> {
    let report = diagnostics::evaluate(traj, &Tolerances::default()).ok();
    write_trajectory_csv(&cfg.out.join("trajectory.csv"), traj)?;
    write_summary(
        &cfg.out.join("summary.txt"),
        &summary_lines(cfg, traj, report.as_ref()),
    )?;
    Ok(report)
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()?)
}

/// `convergence`: refinement table in `convergence.csv`.
pub fn cmd_convergence(
    cfg: &RunConfig,
    levels: usize,
    kind: Refinement,
    workers: usize,
) -> Result<i32, Failure> {
    let sc = cfg.validated()?;
    ensure_dir(&cfg.out)?;
    let horizon = if cfg.horizon > 0.0 {
        cfg.horizon
    } else {
        return Err(usage(
            "--horizon must be positive for a convergence study".into(),
        ));
    };
    let study = thread_pool(workers)?
        .install(|| oracle::refine_run(&sc, &cfg.grid(), &cfg.control, horizon, levels, kind))
        .map_err(|e| match e {
            Error::StepFailure { .. } | Error::NumericalBlowup { .. } => {
                fail(EXIT_NUMERICAL, e.into())
            }
            other => fail(EXIT_USAGE, other.into()),
        })?;
    output::write_convergence_csv(&cfg.out.join("convergence.csv"), &study)?;
    print!("{}", output::convergence_table(&study));
    Ok(convergence_status(&study))
}

pub fn convergence_status(study: &RefinementStudy) -> i32 {
    match study.min_order() {
        _ if study.exact => EXIT_OK,
        Some(o) if study.reliable && o >= MIN_CONVERGENCE_ORDER => EXIT_OK,
        _ => EXIT_UNRELIABLE,
    }
}

/// `verify`: validation, then main solver against the explicit scheme at the
/// same number of nodes.
pub fn cmd_verify(cfg: &RunConfig) -> Result<i32, Failure> {
    let sc = cfg.validated()?;
    println!("validation: passed");
    let grid = cfg.grid();
    let every = cfg.checkpoint_every.min(cfg.horizon.max(f64::MIN_POSITIVE));
    let main = solver::run(&sc, &grid, &cfg.control, cfg.horizon, every)
        .map_err(|f| fail(EXIT_NUMERICAL, f.into()))?;
    let alt = oracle::alt_scheme_run(&sc, &grid, &cfg.control, cfg.horizon, every)
        .map_err(|f| fail(EXIT_NUMERICAL, f.into()))?;
    let (s_main, s_alt) = (main.final_s(), alt.final_s());
    let gap = (s_alt - s_main).abs() / s_main;
    println!("s_main = {s_main}");
    println!("s_alt = {s_alt}");
    println!("relative_gap = {gap:e}");
    let ok = gap <= VERIFY_GAP;
    println!("cross_check.pass = {ok}");
    Ok(if ok { EXIT_OK } else { EXIT_CHECKS })
}

fn dispatch(cli: Cli) -> Result<i32, Failure> {
    match cli.cmd {
        Command::Run(c) => cmd_run(&RunConfig::from_common(&c)?),
        Command::Verify(c) => cmd_verify(&RunConfig::from_common(&c)?),
        Command::Sweep(a) => {
            let cfg = RunConfig::from_common(&a.common)?;
            let axes = sweep::parse_axes(&a.grid)?;
            sweep::cmd_sweep(&cfg, &axes, a.workers)
        }
        Command::Convergence(a) => {
            let cfg = RunConfig::from_common(&a.common)?;
            let kind = Refinement::parse(&a.study).with_context(|| {
                format!(
                    "unknown study {:?} (simultaneous, temporal, spatial)",
                    a.study
                )
            })?;
            cmd_convergence(&cfg, a.levels, kind, a.workers)
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}
