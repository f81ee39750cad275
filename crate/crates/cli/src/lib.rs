//! Command-line front end for the `becbell` pipeline.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 physics error
//! (instability, degenerate measurement, non-physical state), 3 numerical
//! failure (quadrature convergence, failed validation suite).

pub mod config;
pub mod csv;
pub mod presets;

use std::ffi::OsString;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use becbell::bell::ConditioningKernel;
use becbell::node::{build_linear_model, derive_node};
use becbell::pipeline::evaluate_point;
use becbell::sweep::run_sweep;
use becbell::validation::{run_all, ValidationOptions};
use clap::{Parser, Subcommand};
use serde_json::json;

pub use config::{parse, ConfigError, RunConfig};
pub use presets::Preset;

#[derive(Debug, Parser)]
#[command(
    name = "becbell",
    version,
    about = "Quantum correlations between remote BEC-cavity nodes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the derived rates and steady state of both nodes.
    Derive {
        /// Config file, `-` for stdin; built-in defaults when omitted.
        config: Option<PathBuf>,
    },
    /// Evaluate one point and print it as JSON.
    Point {
        config: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run a parameter sweep and write CSV.
    Sweep {
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Directory for `<preset>.csv` (or `sweep.csv`); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// Points per axis, replacing the preset or config counts.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Run the self-validation suites.
    Validate {
        #[arg(long)]
        tol: Option<f64>,
        /// Divide the quadrature tolerance by this factor.
        #[arg(long, default_value_t = 1.0)]
        tighten: f64,
        #[arg(long, hide = true)]
        inject_k_sign_flip: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Io(String),
    /// Output closed by the reader, as in `becbell point | head`.
    Closed,
    Core(becbell::Error),
    ValidationFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Closed => 0,
            CliError::Core(e) => core_exit_code(e),
            CliError::ValidationFailed(_) => 3,
        }
    }
}

pub fn core_exit_code(e: &becbell::Error) -> i32 {
    use becbell::Error::*;
    match e {
        Structural(_) | Domain(_) => 1,
        Unstable { .. } | DegenerateMeasurement { .. } | NonPhysical(_) => 2,
        Convergence { .. } | Numerical(_) => 3,
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Config(e) => write!(f, "config: {e}"),
            CliError::Io(m) => write!(f, "io: {m}"),
            CliError::Closed => f.write_str("output closed"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::ValidationFailed(n) => write!(f, "{n} validation suite(s) failed"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<becbell::Error> for CliError {
    fn from(e: becbell::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::Closed;
        }
        CliError::Io(e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::Derive { config } => load(config.as_deref()).and_then(|c| cmd_derive(&c, out)),
        Command::Point { config, tol } => load(config.as_deref()).and_then(|mut c| {
            if let Some(t) = tol {
                c.tolerance = check_tol(t)?;
            }
            cmd_point(&c, out)
        }),
        Command::Sweep {
            config,
            preset,
            out: dir,
            workers,
            tol,
            resolution,
        } => load(config.as_deref()).and_then(|mut c| {
            if let Some(t) = tol {
                c.tolerance = check_tol(t)?;
            }
            if let Some(p) = preset {
                c.sweep = Some(p.settings());
            }
            if let Some(n) = resolution {
                let sweep = c.sweep.as_mut().ok_or_else(no_axes)?;
                for axis in &mut sweep.axes {
                    axis.count = n;
                }
            }
            let workers = match workers {
                Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
                Some(w) => w,
                None => std::thread::available_parallelism().map_or(1, |n| n.get()),
            };
            let name = preset.map_or("sweep", Preset::name);
            cmd_sweep(&c, workers, dir.as_deref(), name, out)
        }),
        Command::Validate {
            tol,
            tighten,
            inject_k_sign_flip,
        } => {
            let base = tol.map_or(Ok(ValidationOptions::default().tolerance), check_tol);
            base.and_then(|t| {
                if !(tighten.is_finite() && tighten >= 1.0) {
                    return Err(CliError::Usage(format!(
                        "--tighten must be at least 1, got {tighten}"
                    )));
                }
                let opts = ValidationOptions {
                    tolerance: t / tighten,
                    kernel: if inject_k_sign_flip {
                        ConditioningKernel::FlippedK12
                    } else {
                        ConditioningKernel::Consistent
                    },
                };
                cmd_validate(&opts, out)
            })
        }
    };
    match result {
        Ok(code) => code,
        Err(CliError::Closed) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn no_axes() -> CliError {
    CliError::Usage("no sweep axes: pass --preset or add a [sweep] table to the config".into())
}

fn check_tol(t: f64) -> Result<f64, CliError> {
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(CliError::Usage(format!("--tol must be positive, got {t}")))
    }
}

/// Reads a config from a path, from stdin for `-`, or returns the defaults.
pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let text = match path {
        None => return Ok(RunConfig::default()),
        Some(p) if p == Path::new("-") => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
        Some(p) => {
            std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?
        }
    };
    Ok(parse(&text)?)
}

fn cmd_derive(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut all_stable = true;
    for (name, node) in [("a", &cfg.node_a), ("b", &cfg.node_b)] {
        let d = derive_node(&node.to_params())?;
        let model = build_linear_model(&d);
        let stable = model.is_stable();
        all_stable &= stable;
        writeln!(out, "[node {name}]")?;
        writeln!(out, "kappa_per_s = {:?}", d.kappa)?;
        writeln!(out, "omega_c_per_s = {:?}", d.omega_c)?;
        writeln!(out, "omega_b_per_s = {:?}", d.omega_b)?;
        writeln!(out, "coupling_per_s = {:?}", d.coupling)?;
        writeln!(out, "detuning_per_s = {:?}", d.delta)?;
        writeln!(out, "n_c = {:?}", d.n_c)?;
        writeln!(out, "alpha_s = {:?}", d.steady.alpha)?;
        writeln!(out, "q_s = {:?}", d.steady.q)?;
        writeln!(out, "max_re_eigenvalue_per_s = {:?}", model.max_real_part())?;
        writeln!(out, "stable = {stable}")?;
        writeln!(out)?;
    }
    Ok(if all_stable { 0 } else { 2 })
}

fn cmd_point(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let r = evaluate_point(&cfg.pipeline())?;
    let d = &r.measures.discord;
    let n = &r.measures.negativity;
    let record = json!({
        "discord": d.discord,
        "log_negativity": n.log_negativity,
        "eta_minus": n.eta_minus,
        "measured_mode": cfg.measured_mode.index(),
        "invariants": d.invariants,
        "lambda_plus": d.lambda_plus,
        "lambda_minus": d.lambda_minus,
        "epsilon": d.epsilon,
        "branch": d.branch,
        "physicality_margin": r.physicality_margin(),
        "quadrature_error": r.node_a.quadrature_error.max(r.node_b.quadrature_error),
        "conditional_cm": r.conditional.matrix().row_iter().map(|row| row.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
    });
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&record).map_err(|e| CliError::Io(e.to_string()))?
    )?;
    Ok(0)
}

fn cmd_sweep(
    cfg: &RunConfig,
    workers: usize,
    dir: Option<&Path>,
    name: &str,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let spec = cfg.sweep_spec().ok_or_else(no_axes)?;
    let result = run_sweep(&spec, workers)?;
    let text = csv::render(cfg, &result);
    match dir {
        None => out.write_all(text.as_bytes())?,
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            let path = dir.join(format!("{name}.csv"));
            std::fs::write(&path, text)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let failed = result.rows.iter().filter(|r| r.outcome.is_err()).count();
            writeln!(
                out,
                "wrote {} ({} points, {} failed, {:.2} s)",
                path.display(),
                result.rows.len(),
                failed,
                result.metadata.wall_time_s
            )?;
        }
    }
    Ok(0)
}

fn cmd_validate(opts: &ValidationOptions, out: &mut dyn Write) -> Result<i32, CliError> {
    writeln!(out, "quadrature tolerance {:e}", opts.tolerance)?;
    let reports = run_all(opts);
    let mut failed = 0;
    for r in &reports {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{verdict} {:<24} worst {:.3e} (threshold {:.1e}) {}",
            r.name, r.metric, r.threshold, r.detail
        )?;
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        return Err(CliError::ValidationFailed(failed));
    }
    writeln!(out, "all {} suites passed", reports.len())?;
    Ok(0)
}
