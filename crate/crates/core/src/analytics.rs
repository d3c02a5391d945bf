//! Closed-form M/M/m queue and two-class non-preemptive priority delays.
//!
//! Everything here is a pure function of its inputs. Delays are mean
//! queueing (waiting) times; sojourn time is `wait + 1/mu` and is exposed
//! separately on [`DelayReport`].

use crate::error::{Error, Result};

/// Utilization above `1 - STABILITY_MARGIN` is treated as unstable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Returns true when `rho` is inside the stable region.
pub fn is_stable(rho: f64) -> bool {
    rho <= 1.0 - STABILITY_MARGIN
}

fn require_stable(rho: f64) -> Result<()> {
    if is_stable(rho) {
        Ok(())
    } else {
        Err(Error::Unstable { rho })
    }
}

/// The `(lambda, mu, m)` triple of an M/M/m queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueParameters {
    arrival_rate: f64,
    service_rate: f64,
    servers: u32,
}

impl QueueParameters {
    /// `arrival_rate` may be zero (the empty-system limit); the other two
    /// must be strictly positive.
    pub fn new(arrival_rate: f64, service_rate: f64, servers: u32) -> Result<Self> {
        if !(arrival_rate.is_finite() && arrival_rate >= 0.0) {
            return Err(Error::invalid(format!(
                "arrival rate must be finite and >= 0, got {arrival_rate}"
            )));
        }
        if !(service_rate.is_finite() && service_rate > 0.0) {
            return Err(Error::invalid(format!(
                "service rate must be finite and > 0, got {service_rate}"
            )));
        }
        if servers == 0 {
            return Err(Error::invalid("server count must be >= 1"));
        }
        Ok(Self {
            arrival_rate,
            service_rate,
            servers,
        })
    }

    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate
    }

    pub fn service_rate(&self) -> f64 {
        self.service_rate
    }

    pub fn servers(&self) -> u32 {
        self.servers
    }

    pub fn utilization(&self) -> f64 {
        utilization(self)
    }

    pub fn is_stable(&self) -> bool {
        is_stable(self.utilization())
    }

    /// Same queue with a different server count.
    pub fn with_servers(&self, servers: u32) -> Result<Self> {
        Self::new(self.arrival_rate, self.service_rate, servers)
    }
}

/// Per-device arrival rates and the stream forwarded to the cloud untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalProfile {
    pub device_rates: Vec<f64>,
    pub cloud_offload_rate: f64,
}

/// Long-run class fractions and where system-critical tasks are queued.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMix {
    alpha: f64,
    beta: f64,
    sct_in_class1: bool,
}

impl ClassMix {
    pub fn new(alpha: f64, beta: f64, sct_in_class1: bool) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite()) || alpha < 0.0 || beta < 0.0 {
            return Err(Error::invalid(format!(
                "class fractions must be finite and >= 0 (alpha={alpha}, beta={beta})"
            )));
        }
        if alpha + beta > 1.0 + 1e-12 {
            return Err(Error::invalid(format!(
                "alpha + beta must not exceed 1 (alpha={alpha}, beta={beta})"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            sct_in_class1,
        })
    }

    /// All traffic in one class: the non-priority comparator.
    pub fn single_class() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            sct_in_class1: false,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sct_in_class1(&self) -> bool {
        self.sct_in_class1
    }

    pub fn with_sct_in_class1(self, sct_in_class1: bool) -> Self {
        Self {
            sct_in_class1,
            ..self
        }
    }

    /// Fraction of all traffic that joins the class-1 queue.
    pub fn class1_share(&self) -> f64 {
        if self.sct_in_class1 {
            self.alpha + self.beta
        } else {
            self.alpha
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassUtilization {
    pub rho1: f64,
    pub rho2: f64,
}

impl ClassUtilization {
    pub fn total(&self) -> f64 {
        self.rho1 + self.rho2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayReport {
    pub rho: f64,
    pub utilization: ClassUtilization,
    pub p0: f64,
    pub p_wait: f64,
    pub mean_tasks: f64,
    /// Mean residual service time seen by an arrival.
    pub residual: f64,
    pub w1: f64,
    pub w2: f64,
    pub service_rate: f64,
}

impl DelayReport {
    pub fn sojourn1(&self) -> f64 {
        self.w1 + 1.0 / self.service_rate
    }

    pub fn sojourn2(&self) -> f64 {
        self.w2 + 1.0 / self.service_rate
    }
}

/// `sum(lambda_i) - lambda_c`.
pub fn net_arrival_rate(profile: &ArrivalProfile) -> Result<f64> {
    if let Some(bad) = profile
        .device_rates
        .iter()
        .find(|r| !(r.is_finite() && **r >= 0.0))
    {
        return Err(Error::invalid(format!("device rate must be >= 0, got {bad}")));
    }
    let offload = profile.cloud_offload_rate;
    if !(offload.is_finite() && offload >= 0.0) {
        return Err(Error::invalid(format!(
            "cloud offload rate must be >= 0, got {offload}"
        )));
    }
    let total: f64 = profile.device_rates.iter().sum();
    let net = total - offload;
    if net < 0.0 {
        return Err(Error::invalid(format!(
            "cloud offload rate {offload} exceeds total device rate {total}"
        )));
    }
    Ok(net)
}

pub fn utilization(params: &QueueParameters) -> f64 {
    params.arrival_rate / (f64::from(params.servers) * params.service_rate)
}

/// Normalised Erlang terms for a stable queue.
///
/// Terms `(m rho)^k / k!` are built in log space from the ratio
/// `t_k = t_{k-1} * (m rho) / k` and scaled by the largest one, so no
/// factorial is ever formed.
struct ErlangTerms {
    /// `sum_{k<m} t_k + t_m / (1 - rho)`, all scaled by `exp(-max_log)`.
    scaled_total: f64,
    /// `t_m / (1 - rho)` scaled by `exp(-max_log)`.
    scaled_tail: f64,
    max_log: f64,
}

impl ErlangTerms {
    fn new(params: &QueueParameters) -> Result<Option<Self>> {
        let rho = utilization(params);
        require_stable(rho)?;
        if params.arrival_rate == 0.0 {
            return Ok(None);
        }
        let m = params.servers as usize;
        let offered = f64::from(params.servers) * rho;
        let ln_offered = offered.ln();
        let mut logs = Vec::with_capacity(m + 1);
        let mut current = 0.0_f64;
        logs.push(current);
        for k in 1..=m {
            current += ln_offered - (k as f64).ln();
            logs.push(current);
        }
        let tail_log = logs[m] - (1.0 - rho).ln();
        let max_log = logs[..m]
            .iter()
            .copied()
            .fold(tail_log, f64::max);
        let head: f64 = logs[..m].iter().map(|l| (l - max_log).exp()).sum();
        let scaled_tail = (tail_log - max_log).exp();
        Ok(Some(Self {
            scaled_total: head + scaled_tail,
            scaled_tail,
            max_log,
        }))
    }
}

/// Probability of an empty system.
pub fn steady_state_p0(params: &QueueParameters) -> Result<f64> {
    Ok(match ErlangTerms::new(params)? {
        None => 1.0,
        Some(t) => (-t.max_log).exp() / t.scaled_total,
    })
}

/// Erlang C: probability that an arriving task has to queue.
pub fn wait_probability(params: &QueueParameters) -> Result<f64> {
    Ok(match ErlangTerms::new(params)? {
        None => 0.0,
        Some(t) => t.scaled_tail / t.scaled_total,
    })
}

/// Mean number of tasks in the system, `m rho + rho/(1-rho) P_m`.
pub fn mean_tasks(params: &QueueParameters) -> Result<f64> {
    let rho = utilization(params);
    let p_wait = wait_probability(params)?;
    Ok(f64::from(params.servers) * rho + rho / (1.0 - rho) * p_wait)
}

/// Split total utilization between the two priority classes.
pub fn class_utilizations(rho: f64, mix: &ClassMix) -> Result<ClassUtilization> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::invalid(format!("utilization must be >= 0, got {rho}")));
    }
    require_stable(rho)?;
    // Re-check in case the mix was built by struct update from bad values.
    let mix = ClassMix::new(mix.alpha, mix.beta, mix.sct_in_class1)?;
    let share = mix.class1_share();
    let rho1 = share * rho;
    Ok(ClassUtilization {
        rho1,
        rho2: rho - rho1,
    })
}

/// Mean residual service time with equal class service rates.
pub fn residual_service_time(
    p_wait: f64,
    params: &QueueParameters,
    util: &ClassUtilization,
) -> Result<f64> {
    let mu = params.service_rate;
    residual_service_time_with_rates(p_wait, params, util, mu, mu)
}

/// `P_m / (m rho) * (rho1/mu1 + rho2/mu2)`.
///
/// Returns 0 for an empty system (`rho == 0`) or when nobody waits.
pub fn residual_service_time_with_rates(
    p_wait: f64,
    params: &QueueParameters,
    util: &ClassUtilization,
    mu1: f64,
    mu2: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_wait) {
        return Err(Error::invalid(format!(
            "wait probability must lie in [0, 1], got {p_wait}"
        )));
    }
    if !(mu1 > 0.0 && mu2 > 0.0) {
        return Err(Error::invalid("class service rates must be > 0"));
    }
    let rho = utilization(params);
    if rho == 0.0 || p_wait == 0.0 {
        return Ok(0.0);
    }
    let m = f64::from(params.servers);
    Ok(p_wait / (m * rho) * (util.rho1 / mu1 + util.rho2 / mu2))
}

/// Mean queueing delays `(W1, W2)` of the high and low priority classes.
pub fn class_delays(w0: f64, util: &ClassUtilization) -> Result<(f64, f64)> {
    if !(w0.is_finite() && w0 >= 0.0) {
        return Err(Error::invalid(format!("residual time must be >= 0, got {w0}")));
    }
    require_stable(util.rho1)?;
    require_stable(util.total())?;
    let w1 = w0 / (1.0 - util.rho1);
    let w2 = w1 / (1.0 - util.total());
    Ok((w1, w2))
}

/// Evaluate every quantity of the priority model for one configuration.
pub fn full_report(params: &QueueParameters, mix: &ClassMix) -> Result<DelayReport> {
    let rho = utilization(params);
    let utilization = class_utilizations(rho, mix)?;
    let p0 = steady_state_p0(params)?;
    let p_wait = wait_probability(params)?;
    let mean_tasks = mean_tasks(params)?;
    let residual = residual_service_time(p_wait, params, &utilization)?;
    let (w1, w2) = class_delays(residual, &utilization)?;
    Ok(DelayReport {
        rho,
        utilization,
        p0,
        p_wait,
        mean_tasks,
        residual,
        w1,
        w2,
        service_rate: params.service_rate,
    })
}
