//! Command-line front end for `fogscale`.
//!
//! Exit codes: 0 success, 1 infeasible or failed validation, 2 usage or
//! parse error.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use fogscale_core::analytics::{full_report, QueueParameters};
use fogscale_core::harness::{
    emit_results, find_sct_switch, lambda_grid, power_consumption, run_sweep,
    validate_against_des, ExperimentResults, Scheme, SweepResult,
};
use fogscale_core::Error;

pub mod scenario;

use scenario::{RunInfo, ScenarioFile};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Unstable { .. } | Error::Io(_) | Error::Csv(_) => Self::failure(e.to_string()),
            _ => Self::usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fogscale", version, about = "Fog node capacity planning with priority queues")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario (or manifest) file; omitted keys use the evaluation defaults.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Scheme name or `all`.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Arrival-rate grid as start:stop:step.
    #[arg(long = "lambda-grid", global = true)]
    pub lambda_grid: Option<String>,
    /// Exit 1 if any sweep point is infeasible.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form report for one configuration.
    Analyze {
        /// Arrival rate; defaults to the net device rate in the scenario.
        #[arg(long)]
        lambda: Option<f64>,
        /// Node count; defaults to m_init.
        #[arg(long)]
        m: Option<u32>,
        /// Queue system-critical tasks with class 1.
        #[arg(long)]
        sct_class1: bool,
    },
    /// Sweep the arrival rate for one or all schemes.
    Sweep,
    /// Check the closed forms against the simulator.
    Simulate,
    /// Same as `sweep --scheme all`.
    Compare,
}

/// Parse `start:stop:step`.
pub fn parse_grid(spec: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::usage(format!("--lambda-grid expects start:stop:step, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    lambda_grid(start, stop, step)?;
    Ok((start, stop, step))
}

fn load(common: &CommonArgs) -> Result<ScenarioFile, CliError> {
    let mut file = match &common.scenario {
        Some(path) => ScenarioFile::load(path)?,
        None => ScenarioFile::default(),
    };
    if let Some(seed) = common.seed {
        file.seed = seed;
    }
    if let Some(spec) = &common.lambda_grid {
        let (start, stop, step) = parse_grid(spec)?;
        file.lambda_min = start;
        file.lambda_max = stop;
        file.lambda_step = step;
    }
    file.check()?;
    Ok(file)
}

pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<(), CliError> {
    let file = load(&cli.common)?;
    match &cli.command {
        Command::Analyze {
            lambda,
            m,
            sct_class1,
        } => {
            let lambda = match (lambda, file.arrival_rate()?) {
                (Some(l), _) => *l,
                (None, Some(l)) => l,
                (None, None) => {
                    return Err(CliError::usage(
                        "analyze needs --lambda or device_rates in the scenario",
                    ))
                }
            };
            cmd_analyze(&file, lambda, m.unwrap_or(file.m_init), *sct_class1, out)
        }
        Command::Sweep => {
            let scheme = cli
                .common
                .scheme
                .clone()
                .or_else(|| file.run.as_ref().and_then(|r| r.scheme.clone()))
                .unwrap_or_else(|| "proposed".to_string());
            cmd_sweep(&file, &scheme, &cli.common.out, cli.common.strict, out)
        }
        Command::Compare => cmd_sweep(&file, "all", &cli.common.out, cli.common.strict, out),
        Command::Simulate => cmd_simulate(&file, &cli.common.out, out),
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::failure(e.to_string())
}

pub fn cmd_analyze<W: Write>(
    file: &ScenarioFile,
    lambda: f64,
    m: u32,
    sct_class1: bool,
    out: &mut W,
) -> Result<(), CliError> {
    let params = QueueParameters::new(lambda, file.mu, m)?;
    let mix = file.mix()?.with_sct_in_class1(sct_class1 || file.sct_in_class1);
    let r = full_report(&params, &mix)?;
    let lines = [
        format!("lambda = {lambda}"),
        format!("mu = {}", file.mu),
        format!("m = {m}"),
        format!("rho = {}", r.rho),
        format!("rho1 = {}", r.utilization.rho1),
        format!("rho2 = {}", r.utilization.rho2),
        format!("p0 = {}", r.p0),
        format!("p_wait = {}", r.p_wait),
        format!("mean_tasks = {}", r.mean_tasks),
        format!("w0 = {}", r.residual),
        format!("w1 = {}", r.w1),
        format!("w2 = {}", r.w2),
    ];
    for line in lines {
        writeln!(out, "{line}").map_err(io_err)?;
    }
    Ok(())
}

fn schemes(name: &str) -> Result<Vec<Scheme>, CliError> {
    if name == "all" {
        Ok(Scheme::ALL.to_vec())
    } else {
        Ok(vec![name.parse()?])
    }
}

pub fn cmd_sweep<W: Write>(
    file: &ScenarioFile,
    scheme: &str,
    dir: &Path,
    strict: bool,
    out: &mut W,
) -> Result<(), CliError> {
    let scenario = file.scenario()?;
    let schemes = schemes(scheme)?;
    let sweeps = schemes
        .iter()
        .map(|s| run_sweep(*s, &scenario))
        .collect::<Result<Vec<SweepResult>, _>>()?;
    let baseline = sweeps.iter().find(|s| s.scheme == Scheme::Baseline);

    for sweep in &sweeps {
        let power = power_consumption(sweep, baseline.filter(|b| b.scheme != sweep.scheme))?;
        let mut line = format!("{}: power {}P", sweep.scheme, power.total_power);
        if let Some(r) = power.reduction_percent {
            line.push_str(&format!(" ({r:.2}% lower than baseline)"));
        }
        if sweep.scheme.spec().priority_enabled {
            match find_sct_switch(sweep)? {
                Some(l) => line.push_str(&format!(", SCT to class 1 at lambda {l}")),
                None => line.push_str(", SCT stay in class 2"),
            }
        }
        let infeasible = sweep.points.iter().filter(|p| !p.feasible).count();
        if infeasible > 0 {
            line.push_str(&format!(", {infeasible} infeasible point(s)"));
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }

    let manifest = file
        .resolved(RunInfo::new("sweep", Some(scheme.to_string())))?
        .to_toml()?;
    let written = emit_results(
        &ExperimentResults {
            sweeps: sweeps.clone(),
            validation: None,
            manifest: Some(manifest),
        },
        dir,
    )?;
    for path in written {
        writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
    }

    if strict && sweeps.iter().any(|s| !s.all_feasible()) {
        return Err(CliError::failure("infeasible sweep points (strict mode)"));
    }
    Ok(())
}

pub fn cmd_simulate<W: Write>(file: &ScenarioFile, dir: &Path, out: &mut W) -> Result<(), CliError> {
    let settings = file.validation_settings()?;
    let grid = file.validation_grid()?;
    let report = validate_against_des(&grid, &settings)?;

    for pv in &report.points {
        let status = if pv.passed() { "pass" } else { "FAIL" };
        writeln!(
            out,
            "lambda={} mu={} m={} sct_class1={}: {status}",
            pv.point.lambda,
            pv.point.mu,
            pv.point.m,
            pv.point.mix.sct_in_class1()
        )
        .map_err(io_err)?;
    }
    let manifest = file.resolved(RunInfo::new("simulate", None))?.to_toml()?;
    let passed = report.passed();
    let written = emit_results(
        &ExperimentResults {
            sweeps: Vec::new(),
            validation: Some(report),
            manifest: Some(manifest),
        },
        dir,
    )?;
    for path in written {
        writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::failure("simulation disagrees with the closed forms"))
    }
}
