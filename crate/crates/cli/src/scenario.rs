//! Scenario files: flat TOML with keys named after the evaluation
//! parameters. Omitted keys take the evaluation defaults; unknown keys are
//! rejected. A run manifest is a scenario file with a `[run]` table, so
//! passing it back through `--scenario` replays the run.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use fogscale_core::analytics::{net_arrival_rate, ArrivalProfile, ClassMix};
use fogscale_core::controller::ScalingPolicy;
use fogscale_core::des::MIN_MEASURED_TASKS;
use fogscale_core::harness::{
    default_validation_grid, lambda_grid, Scenario, Tolerance, ValidationPoint,
    ValidationSettings,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sct_in_class1: bool,
    pub m_init: u32,
    pub m_max: u32,
    pub m_min: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_size: Option<u32>,
    pub w1_threshold: f64,
    pub w_sct_threshold: f64,
    pub carry_state: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub device_rates: Vec<f64>,
    pub cloud_offload_rate: f64,
    pub seed: u64,
    pub replications: u32,
    /// Post-warmup tasks per replication.
    pub tasks_per_replication: u64,
    pub warmup_fraction: f64,
    pub rel_tolerance: f64,
    pub se_multiplier: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub validation_points: Vec<PointEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            lambda_min: 1.0,
            lambda_max: 14.0,
            lambda_step: 1.0,
            mu: 1.0,
            alpha: 0.2,
            beta: 0.1,
            sct_in_class1: false,
            m_init: 18,
            m_max: 20,
            m_min: 15,
            pool_size: None,
            w1_threshold: 0.01,
            w_sct_threshold: 0.02,
            carry_state: true,
            device_rates: Vec::new(),
            cloud_offload_rate: 0.0,
            seed: 42,
            replications: 20,
            tasks_per_replication: 50_000,
            warmup_fraction: 0.1,
            rel_tolerance: 0.05,
            se_multiplier: 3.0,
            validation_points: Vec::new(),
            run: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointEntry {
    pub lambda: f64,
    pub m: u32,
    #[serde(default = "one")]
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub sct_in_class1: bool,
}

fn one() -> f64 {
    1.0
}

/// Provenance written into manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
}

impl RunInfo {
    pub fn new(command: &str, scheme: Option<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            scheme,
        }
    }
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
            .map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::usage(e.to_string()))?;
        file.check()?;
        Ok(file)
    }

    /// Re-check every module invariant.
    pub fn check(&self) -> Result<(), CliError> {
        self.scenario()?;
        self.validation_settings()?;
        self.validation_grid()?;
        self.arrival_rate()?;
        Ok(())
    }

    pub fn mix(&self) -> Result<ClassMix, CliError> {
        Ok(ClassMix::new(self.alpha, self.beta, self.sct_in_class1)?)
    }

    pub fn policy(&self) -> ScalingPolicy {
        ScalingPolicy {
            m_min: self.m_min,
            m_max: self.m_max,
            w1_threshold: self.w1_threshold,
            w_sct_threshold: self.w_sct_threshold,
            pool_size: self.pool_size.unwrap_or(self.m_max),
        }
    }

    pub fn lambdas(&self) -> Result<Vec<f64>, CliError> {
        Ok(lambda_grid(self.lambda_min, self.lambda_max, self.lambda_step)?)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let scenario = Scenario {
            service_rate: self.mu,
            mix: self.mix()?,
            m_init: self.m_init,
            policy: self.policy(),
            lambdas: self.lambdas()?,
            carry_state: self.carry_state,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Net arrival rate from the device list, when one is given.
    pub fn arrival_rate(&self) -> Result<Option<f64>, CliError> {
        if self.device_rates.is_empty() {
            return Ok(None);
        }
        Ok(Some(net_arrival_rate(&ArrivalProfile {
            device_rates: self.device_rates.clone(),
            cloud_offload_rate: self.cloud_offload_rate,
        })?))
    }

    pub fn validation_settings(&self) -> Result<ValidationSettings, CliError> {
        if self.replications < 2 {
            return Err(CliError::usage(format!(
                "replications must be >= 2 for a standard error, got {}",
                self.replications
            )));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(CliError::usage(format!(
                "warmup_fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if (self.tasks_per_replication as f64) < MIN_MEASURED_TASKS {
            return Err(CliError::usage(format!(
                "tasks_per_replication must be >= {MIN_MEASURED_TASKS}, got {}",
                self.tasks_per_replication
            )));
        }
        if self.rel_tolerance < 0.0 || self.se_multiplier < 0.0 {
            return Err(CliError::usage("tolerances must be >= 0"));
        }
        Ok(ValidationSettings {
            seed: self.seed,
            replications: self.replications,
            measured_tasks: self.tasks_per_replication,
            warmup_fraction: self.warmup_fraction,
            tolerance: Tolerance {
                relative: self.rel_tolerance,
                std_errors: self.se_multiplier,
            },
        })
    }

    pub fn validation_grid(&self) -> Result<Vec<ValidationPoint>, CliError> {
        if self.validation_points.is_empty() {
            return Ok(default_validation_grid());
        }
        self.validation_points
            .iter()
            .map(|p| {
                Ok(ValidationPoint {
                    lambda: p.lambda,
                    mu: p.mu,
                    m: p.m,
                    mix: ClassMix::new(p.alpha, p.beta, p.sct_in_class1)?,
                })
            })
            .collect()
    }

    /// A copy with every default made explicit, suitable for a manifest.
    pub fn resolved(&self, run: RunInfo) -> Result<Self, CliError> {
        let mut out = self.clone();
        out.pool_size = Some(self.policy().pool_size);
        out.validation_points = self
            .validation_grid()?
            .into_iter()
            .map(|p| PointEntry {
                lambda: p.lambda,
                m: p.m,
                mu: p.mu,
                alpha: p.mix.alpha(),
                beta: p.mix.beta(),
                sct_in_class1: p.mix.sct_in_class1(),
            })
            .collect();
        out.run = Some(run);
        Ok(out)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::failure(format!("cannot render manifest: {e}")))
    }
}
