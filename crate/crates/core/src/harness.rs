//! Load sweeps over the four comparison schemes, power accounting, SCT
//! switch detection, DES validation and CSV output.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analytics::{full_report, mean_tasks, ClassMix, QueueParameters};
use crate::controller::{
    class_waits, controller_step, evaluate_sct_placement, ScalingPolicy, ScalingState,
};
use crate::des::{run_simulation, SimConfig, DEFAULT_REPLICATIONS, DEFAULT_WARMUP_FRACTION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Proposed,
    PriorityOnly,
    ScalingOnly,
    Baseline,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Proposed,
        Scheme::PriorityOnly,
        Scheme::ScalingOnly,
        Scheme::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::PriorityOnly => "priority-only",
            Scheme::ScalingOnly => "scaling-only",
            Scheme::Baseline => "baseline",
        }
    }

    pub fn spec(self) -> SchemeSpec {
        let (priority_enabled, scaling_enabled) = match self {
            Scheme::Proposed => (true, true),
            Scheme::PriorityOnly => (true, false),
            Scheme::ScalingOnly => (false, true),
            Scheme::Baseline => (false, false),
        };
        SchemeSpec {
            scheme: self,
            priority_enabled,
            scaling_enabled,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown scheme {s:?} (expected proposed, priority-only, scaling-only or baseline)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeSpec {
    pub scheme: Scheme,
    pub priority_enabled: bool,
    pub scaling_enabled: bool,
}

/// Everything a sweep needs besides the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub service_rate: f64,
    /// Class fractions; the SCT flag is the placement at the first point.
    pub mix: ClassMix,
    pub m_init: u32,
    pub policy: ScalingPolicy,
    pub lambdas: Vec<f64>,
    /// Carry controller state from one load point to the next. When false,
    /// every point starts again from `m_init`.
    pub carry_state: bool,
}

impl Scenario {
    /// Evaluation setup: lambda 1..14, mu 1, alpha 0.2, beta 0.1, 18 initial
    /// nodes within [15, 20], thresholds 10 ms (class 1) and 20 ms (SCT).
    pub fn table1() -> Self {
        Self {
            service_rate: 1.0,
            mix: ClassMix::new(0.2, 0.1, false).expect("valid mix"),
            m_init: 18,
            policy: ScalingPolicy {
                m_min: 15,
                m_max: 20,
                w1_threshold: 0.01,
                w_sct_threshold: 0.02,
                pool_size: 20,
            },
            lambdas: (1..=14).map(f64::from).collect(),
            carry_state: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.service_rate.is_finite() && self.service_rate > 0.0) {
            return Err(Error::invalid(format!(
                "service rate must be > 0, got {}",
                self.service_rate
            )));
        }
        ScalingState::initial(self.m_init, &self.policy)?;
        if let Some(bad) = self.lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::invalid(format!("sweep arrival rates must be > 0, got {bad}")));
        }
        if self.lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sweep arrival rates must be strictly increasing"));
        }
        Ok(())
    }
}

/// `start, start + step, ...` up to and including `stop`.
pub fn lambda_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || start <= 0.0
    {
        return Err(Error::invalid(format!(
            "grid {start}:{stop}:{step} needs start > 0 and step > 0"
        )));
    }
    if stop < start {
        return Err(Error::invalid(format!("grid stop {stop} is below start {start}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub chosen_m: u32,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub w_sct: Option<f64>,
    pub sct_in_class1: bool,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scheme: Scheme,
    pub w_sct_threshold: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    pub fn all_feasible(&self) -> bool {
        self.points.iter().all(|p| p.feasible)
    }
}

fn fixed_point(
    lambda: f64,
    mu: f64,
    m: u32,
    mix: &ClassMix,
    policy: &ScalingPolicy,
) -> (Option<f64>, Option<f64>, bool) {
    match class_waits(lambda, mu, m, mix) {
        Some((w1, w2)) => (Some(w1), Some(w2), w1 <= policy.w1_threshold),
        None => (None, None, false),
    }
}

pub fn run_sweep(scheme: Scheme, scenario: &Scenario) -> Result<SweepResult> {
    scenario.validate()?;
    let spec = scheme.spec();
    let mu = scenario.service_rate;
    let policy = &scenario.policy;
    let fresh = || {
        ScalingState::initial(scenario.m_init, policy).map(|mut s| {
            s.sct_in_class1 = spec.priority_enabled && scenario.mix.sct_in_class1();
            s
        })
    };
    let mut state = fresh()?;
    let mut points = Vec::with_capacity(scenario.lambdas.len());

    for &lambda in &scenario.lambdas {
        if !scenario.carry_state {
            state = fresh()?;
        }
        let point = match (spec.priority_enabled, spec.scaling_enabled) {
            (true, true) => {
                let (next, d) = controller_step(state, lambda, mu, &scenario.mix, policy)?;
                state = next;
                SweepPoint {
                    lambda,
                    chosen_m: d.chosen_m,
                    w1: d.w1,
                    w2: d.w2,
                    w_sct: d.w_sct,
                    sct_in_class1: d.sct_in_class1,
                    feasible: d.feasible,
                }
            }
            (false, true) => {
                let single = ClassMix::single_class();
                let (mut next, d) = controller_step(state, lambda, mu, &single, policy)?;
                next.sct_in_class1 = false;
                state = next;
                SweepPoint {
                    lambda,
                    chosen_m: d.chosen_m,
                    w1: d.w1,
                    w2: d.w1,
                    w_sct: d.w1,
                    sct_in_class1: false,
                    feasible: d.feasible,
                }
            }
            (true, false) => {
                let mix = scenario.mix.with_sct_in_class1(state.sct_in_class1);
                let (w1, w2, feasible) = fixed_point(lambda, mu, scenario.m_init, &mix, policy);
                let sct_in_class1 = w2.is_none_or(|w2| evaluate_sct_placement(w2, policy));
                state.sct_in_class1 = sct_in_class1;
                SweepPoint {
                    lambda,
                    chosen_m: scenario.m_init,
                    w1,
                    w2,
                    w_sct: if sct_in_class1 { w1 } else { w2 },
                    sct_in_class1,
                    feasible,
                }
            }
            (false, false) => {
                let single = ClassMix::single_class();
                let (w, _, feasible) = fixed_point(lambda, mu, scenario.m_init, &single, policy);
                SweepPoint {
                    lambda,
                    chosen_m: scenario.m_init,
                    w1: w,
                    w2: w,
                    w_sct: w,
                    sct_in_class1: false,
                    feasible,
                }
            }
        };
        points.push(point);
    }

    Ok(SweepResult {
        scheme,
        w_sct_threshold: policy.w_sct_threshold,
        points,
    })
}

/// Power in multiples of the per-node, per-point unit `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub total_power: f64,
    pub per_point_power: Vec<f64>,
    pub comparison_baseline_power: Option<f64>,
    /// `(baseline - total) / total`, in percent.
    pub reduction_percent: Option<f64>,
    /// `(baseline - total) / baseline`, in percent.
    pub baseline_share_saved_percent: Option<f64>,
}

/// Each allocated node costs one unit per sweep point.
pub const UNIT_POWER: f64 = 1.0;

pub fn power_consumption(
    result: &SweepResult,
    baseline: Option<&SweepResult>,
) -> Result<PowerReport> {
    let per_point_power: Vec<f64> = result
        .points
        .iter()
        .map(|p| f64::from(p.chosen_m) * UNIT_POWER)
        .collect();
    let total_power: f64 = per_point_power.iter().sum();
    let mut report = PowerReport {
        total_power,
        per_point_power,
        comparison_baseline_power: None,
        reduction_percent: None,
        baseline_share_saved_percent: None,
    };
    if let Some(base) = baseline {
        if base.lambdas() != result.lambdas() {
            return Err(Error::GridMismatch(format!(
                "{} has {} points, {} has {}",
                result.scheme,
                result.points.len(),
                base.scheme,
                base.points.len()
            )));
        }
        let base_total: f64 = base
            .points
            .iter()
            .map(|p| f64::from(p.chosen_m) * UNIT_POWER)
            .sum();
        report.comparison_baseline_power = Some(base_total);
        if total_power > 0.0 {
            report.reduction_percent = Some((base_total - total_power) / total_power * 100.0);
        }
        if base_total > 0.0 {
            report.baseline_share_saved_percent =
                Some((base_total - total_power) / base_total * 100.0);
        }
    }
    Ok(report)
}

/// Smallest sweep load at which SCT are queued with class 1.
pub fn find_sct_switch(result: &SweepResult) -> Result<Option<f64>> {
    if !result.scheme.spec().priority_enabled {
        return Err(Error::NotApplicable(format!(
            "scheme {} has no priority classes",
            result.scheme
        )));
    }
    Ok(result
        .points
        .iter()
        .find(|p| p.sct_in_class1)
        .map(|p| p.lambda))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationPoint {
    pub lambda: f64,
    pub mu: f64,
    pub m: u32,
    pub mix: ClassMix,
}

/// Ten stable configurations across the evaluation's load and node ranges,
/// plus the small two-server worked case.
pub fn default_validation_grid() -> Vec<ValidationPoint> {
    let table = |sct| ClassMix::new(0.2, 0.1, sct).expect("valid mix");
    let pt = |lambda, m, mix| ValidationPoint {
        lambda,
        mu: 1.0,
        m,
        mix,
    };
    vec![
        pt(1.0, 2, ClassMix::new(0.2, 0.0, false).expect("valid mix")),
        pt(5.0, 6, table(false)),
        pt(8.0, 15, table(false)),
        pt(10.0, 15, table(false)),
        pt(10.0, 15, table(true)),
        pt(11.0, 15, table(true)),
        pt(12.0, 15, table(true)),
        pt(13.0, 16, table(false)),
        pt(14.0, 18, table(false)),
        pt(14.0, 20, table(true)),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Relative error allowed against the analytic value.
    pub relative: f64,
    /// Allowed distance in cross-replication standard errors.
    pub std_errors: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            relative: 0.05,
            std_errors: 3.0,
        }
    }
}

impl Tolerance {
    pub fn accepts(&self, analytic: f64, simulated: f64, std_error: f64) -> bool {
        let allowed = (self.relative * analytic.abs()).max(self.std_errors * std_error);
        (simulated - analytic).abs() <= allowed
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationSettings {
    pub seed: u64,
    pub replications: u32,
    /// Post-warmup tasks per replication.
    pub measured_tasks: u64,
    pub warmup_fraction: f64,
    pub tolerance: Tolerance,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            seed: 42,
            replications: DEFAULT_REPLICATIONS,
            measured_tasks: 50_000,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            tolerance: Tolerance::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    W1,
    W2,
    MeanTasks,
    /// `L - lambda * S`, expected to be zero.
    LittlesLaw,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::W1 => "w1",
            Metric::W2 => "w2",
            Metric::MeanTasks => "mean_tasks",
            Metric::LittlesLaw => "littles_law",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricCheck {
    pub metric: Metric,
    pub analytic: f64,
    pub simulated: f64,
    pub std_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointValidation {
    pub point: ValidationPoint,
    pub checks: Vec<MetricCheck>,
}

impl PointValidation {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, metric: Metric) -> Option<&MetricCheck> {
        self.checks.iter().find(|c| c.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub settings: ValidationSettings,
    pub points: Vec<PointValidation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.points.iter().all(PointValidation::passed)
    }
}

/// Simulate every grid point and compare against the closed forms.
pub fn validate_against_des(
    grid: &[ValidationPoint],
    settings: &ValidationSettings,
) -> Result<ValidationReport> {
    if settings.replications < 2 {
        return Err(Error::invalid(
            "at least two replications are needed for a standard error",
        ));
    }
    let params = grid
        .iter()
        .map(|p| {
            let q = QueueParameters::new(p.lambda, p.mu, p.m)?;
            if !q.is_stable() {
                return Err(Error::Unstable {
                    rho: q.utilization(),
                });
            }
            Ok(q)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::with_capacity(grid.len());
    for (i, (point, q)) in grid.iter().zip(&params).enumerate() {
        let report = full_report(q, &point.mix)?;
        let seed = settings
            .seed
            .wrapping_add(i as u64 * u64::from(settings.replications));
        let mut config = SimConfig::new(*q, point.mix, crate::des::Horizon::Tasks(0), seed);
        config.warmup_fraction = settings.warmup_fraction;
        config.replications = settings.replications;
        let config = config.with_measured_tasks(settings.measured_tasks);
        let stats = run_simulation(&config)?;

        let tol = settings.tolerance;
        let mut checks = Vec::new();
        let mut push = |metric, analytic: f64, simulated: f64, std_error: f64| {
            checks.push(MetricCheck {
                metric,
                analytic,
                simulated,
                std_error,
                pass: tol.accepts(analytic, simulated, std_error),
            });
        };
        if let Some(e) = stats.mean_w1 {
            push(Metric::W1, report.w1, e.mean, e.std_error);
        }
        if let Some(e) = stats.mean_w2 {
            push(Metric::W2, report.w2, e.mean, e.std_error);
        }
        let k = stats.mean_tasks_in_system;
        push(Metric::MeanTasks, mean_tasks(q)?, k.mean, k.std_error);
        let gap = stats.little_gap;
        push(Metric::LittlesLaw, 0.0, gap.mean, gap.std_error);

        points.push(PointValidation {
            point: *point,
            checks,
        });
    }
    Ok(ValidationReport {
        settings: *settings,
        points,
    })
}

/// Everything one run can write.
#[derive(Debug, Clone, Default)]
pub struct ExperimentResults {
    pub sweeps: Vec<SweepResult>,
    pub validation: Option<ValidationReport>,
    /// Written verbatim as `manifest.toml`.
    pub manifest: Option<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

/// Write the CSV datasets (and manifest) into `dir`; returns the paths
/// written in order.
pub fn emit_results(results: &ExperimentResults, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    if !results.sweeps.is_empty() {
        let path = dir.join("delays.csv");
        let mut w = writer(&path)?;
        w.write_record(["lambda", "scheme", "class", "delay_seconds"])?;
        for sweep in &results.sweeps {
            for p in &sweep.points {
                let lambda = p.lambda.to_string();
                for (class, delay) in [("1", p.w1), ("2", p.w2)] {
                    w.write_record([
                        lambda.as_str(),
                        sweep.scheme.name(),
                        class,
                        &fmt_opt(delay),
                    ])?;
                }
            }
        }
        w.flush()?;
        written.push(path);

        let path = dir.join("nodes_power.csv");
        let mut w = writer(&path)?;
        w.write_record(["lambda", "scheme", "nodes", "power_units"])?;
        for sweep in &results.sweeps {
            for p in &sweep.points {
                w.write_record([
                    p.lambda.to_string(),
                    sweep.scheme.name().to_string(),
                    p.chosen_m.to_string(),
                    (f64::from(p.chosen_m) * UNIT_POWER).to_string(),
                ])?;
            }
        }
        w.flush()?;
        written.push(path);

        let sct_source = results
            .sweeps
            .iter()
            .find(|s| s.scheme == Scheme::Proposed)
            .or_else(|| results.sweeps.iter().find(|s| s.scheme.spec().priority_enabled));
        if let Some(sweep) = sct_source {
            let path = dir.join("sct.csv");
            let mut w = writer(&path)?;
            w.write_record(["lambda", "sct_class", "w2_seconds", "threshold_seconds"])?;
            for p in &sweep.points {
                w.write_record([
                    p.lambda.to_string(),
                    if p.sct_in_class1 { "1" } else { "2" }.to_string(),
                    fmt_opt(p.w2),
                    sweep.w_sct_threshold.to_string(),
                ])?;
            }
            w.flush()?;
            written.push(path);
        }
    }

    if let Some(report) = &results.validation {
        let path = dir.join("validation.csv");
        let mut w = writer(&path)?;
        w.write_record([
            "lambda",
            "mu",
            "m",
            "metric",
            "analytic",
            "simulated",
            "stderr",
            "pass",
        ])?;
        for pv in &report.points {
            for c in &pv.checks {
                w.write_record([
                    pv.point.lambda.to_string(),
                    pv.point.mu.to_string(),
                    pv.point.m.to_string(),
                    c.metric.name().to_string(),
                    c.analytic.to_string(),
                    c.simulated.to_string(),
                    c.std_error.to_string(),
                    c.pass.to_string(),
                ])?;
            }
        }
        w.flush()?;
        written.push(path);
    }

    if let Some(manifest) = &results.manifest {
        let path = dir.join("manifest.toml");
        fs::write(&path, manifest)?;
        written.push(path);
    }
    Ok(written)
}
