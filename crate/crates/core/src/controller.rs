//! Threshold-driven fog node scaling with system-critical task placement.
//!
//! One [`controller_step`] runs a single pass of the allocation loop:
//! scale under the placement carried in from the previous step, recompute
//! the class delays, then decide where system-critical tasks (SCT) queue
//! next. A placement flip only affects the following step.

use crate::analytics::{full_report, ClassMix, QueueParameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPolicy {
    pub m_min: u32,
    pub m_max: u32,
    /// Class-1 delay threshold in seconds.
    pub w1_threshold: f64,
    /// SCT delay threshold in seconds.
    pub w_sct_threshold: f64,
    /// Total fog nodes that can ever be allocated to the layer.
    pub pool_size: u32,
}

impl ScalingPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.m_min == 0 || self.m_min > self.m_max {
            return Err(Error::invalid(format!(
                "need 1 <= m_min <= m_max (m_min={}, m_max={})",
                self.m_min, self.m_max
            )));
        }
        if !(self.w1_threshold > 0.0) || self.w_sct_threshold.is_nan() || self.w_sct_threshold < 0.0
        {
            return Err(Error::invalid(format!(
                "thresholds must be positive (w1={}, w_sct={})",
                self.w1_threshold, self.w_sct_threshold
            )));
        }
        if self.pool_size < self.m_min {
            return Err(Error::invalid(format!(
                "pool of {} nodes cannot cover m_min={}",
                self.pool_size, self.m_min
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalingState {
    pub current_m: u32,
    pub sct_in_class1: bool,
    /// `m_max`, lowered permanently once the pool runs dry.
    pub effective_m_max: u32,
}

impl ScalingState {
    pub fn initial(m_init: u32, policy: &ScalingPolicy) -> Result<Self> {
        policy.validate()?;
        if m_init < policy.m_min || m_init > policy.m_max || m_init > policy.pool_size {
            return Err(Error::invalid(format!(
                "initial node count {m_init} outside [{}, {}] or beyond pool {}",
                policy.m_min, policy.m_max, policy.pool_size
            )));
        }
        Ok(Self {
            current_m: m_init,
            sct_in_class1: false,
            effective_m_max: policy.m_max,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingDecision {
    pub chosen_m: u32,
    /// Placement for the next step.
    pub sct_in_class1: bool,
    /// Placement under which this step's delays were evaluated.
    pub evaluated_sct_in_class1: bool,
    /// `None` when the chosen node count cannot hold the load.
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub w_sct: Option<f64>,
    pub feasible: bool,
}

/// Class delays `(W1, W2)` with `m` nodes, or `None` when unstable.
pub fn class_waits(lambda: f64, mu: f64, m: u32, mix: &ClassMix) -> Option<(f64, f64)> {
    let params = QueueParameters::new(lambda, mu, m).ok()?;
    full_report(&params, mix).ok().map(|r| (r.w1, r.w2))
}

/// Class-1 delay with `m` nodes; unstable systems read as infinite.
pub fn class1_wait(lambda: f64, mu: f64, m: u32, mix: &ClassMix) -> f64 {
    if m == 0 {
        return f64::INFINITY;
    }
    class_waits(lambda, mu, m, mix).map_or(f64::INFINITY, |(w1, _)| w1)
}

/// `true` moves SCT into class 1. A tie counts as exceeding the threshold.
pub fn evaluate_sct_placement(w2: f64, policy: &ScalingPolicy) -> bool {
    !(policy.w_sct_threshold > w2)
}

fn placed(mix: &ClassMix, state: &ScalingState) -> ClassMix {
    mix.with_sct_in_class1(state.sct_in_class1)
}

/// Add nodes one at a time until the class-1 delay meets its threshold or
/// the node budget is spent.
pub fn scale_up(
    state: ScalingState,
    lambda: f64,
    mu: f64,
    mix: &ClassMix,
    policy: &ScalingPolicy,
) -> ScalingState {
    let mix = placed(mix, &state);
    let mut next = state;
    while policy.w1_threshold < class1_wait(lambda, mu, next.current_m, &mix)
        && next.current_m < next.effective_m_max
    {
        if next.current_m >= policy.pool_size {
            next.effective_m_max = next.current_m;
        } else {
            next.current_m += 1;
        }
    }
    next
}

/// Release nodes while one fewer still meets the threshold and stays stable.
pub fn scale_down(
    state: ScalingState,
    lambda: f64,
    mu: f64,
    mix: &ClassMix,
    policy: &ScalingPolicy,
) -> ScalingState {
    let mix = placed(mix, &state);
    let mut next = state;
    while next.current_m > policy.m_min
        && class1_wait(lambda, mu, next.current_m - 1, &mix) <= policy.w1_threshold
    {
        next.current_m -= 1;
    }
    next
}

/// One pass of the allocation loop.
pub fn controller_step(
    state: ScalingState,
    lambda: f64,
    mu: f64,
    mix: &ClassMix,
    policy: &ScalingPolicy,
) -> Result<(ScalingState, ScalingDecision)> {
    policy.validate()?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("arrival rate must be > 0, got {lambda}")));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::invalid(format!("service rate must be > 0, got {mu}")));
    }

    let evaluated = placed(mix, &state);
    let before = class1_wait(lambda, mu, state.current_m, &evaluated);
    let mut next = if policy.w1_threshold < before {
        scale_up(state, lambda, mu, mix, policy)
    } else {
        scale_down(state, lambda, mu, mix, policy)
    };

    let waits = class_waits(lambda, mu, next.current_m, &evaluated);
    let w1 = waits.map(|(w1, _)| w1);
    let w2 = waits.map(|(_, w2)| w2);
    let feasible = lambda < mu * f64::from(next.effective_m_max)
        && w1.is_some_and(|w| w <= policy.w1_threshold);

    let sct_in_class1 = match w2 {
        Some(w2) => evaluate_sct_placement(w2, policy),
        // Overloaded: class 2 is unbounded, so SCT goes to class 1.
        None => true,
    };
    let w_sct = if sct_in_class1 { w1 } else { w2 };
    next.sct_in_class1 = sct_in_class1;

    Ok((
        next,
        ScalingDecision {
            chosen_m: next.current_m,
            sct_in_class1,
            evaluated_sct_in_class1: state.sct_in_class1,
            w1,
            w2,
            w_sct,
            feasible,
        },
    ))
}
