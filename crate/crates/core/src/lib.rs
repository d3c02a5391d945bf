//! Capacity planning for a priority-queued fog computing layer.
//!
//! * [`analytics`]: closed-form M/M/m and two-class non-preemptive
//!   priority delays.
//! * [`controller`]: threshold-driven node scaling with placement of
//!   system-critical tasks.
//! * [`des`]: seeded discrete-event simulator used to check the analytics.
//! * [`harness`]: load sweeps, power accounting, validation and CSV output.

pub mod analytics;
pub mod controller;
pub mod des;
mod error;
pub mod harness;
pub mod stats;

pub use analytics::{
    ArrivalProfile, ClassMix, ClassUtilization, DelayReport, QueueParameters,
};
pub use controller::{ScalingDecision, ScalingPolicy, ScalingState};
pub use des::{Horizon, SimConfig, SimStats, TaskRecord};
pub use error::{Error, Result};
pub use harness::{PowerReport, Scenario, Scheme, SchemeSpec, SweepResult};
