//! Seeded discrete-event simulation of an M/M/m queue with two
//! non-preemptive priority classes.
//!
//! A replication is strictly sequential: a future-event calendar ordered by
//! time, FIFO among simultaneous events. Replications are independent and
//! run in parallel; their results are aggregated in seed order, so a
//! simulation is a deterministic function of its configuration.
//!
//! Sampling uses a ChaCha8 stream and inverse-transform exponentials. Each
//! arrival draws, in order: the next inter-arrival gap, its class label,
//! and its service demand.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytics::{ClassMix, QueueParameters};
use crate::error::{Error, Result};
use crate::stats::{Estimate, Replicates};

/// Post-warmup tasks a replication must be able to observe.
pub const MIN_MEASURED_TASKS: f64 = 10_000.0;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;
pub const DEFAULT_REPLICATIONS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Total arrivals generated, warm-up included.
    Tasks(u64),
    /// Simulated seconds during which arrivals are generated.
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: QueueParameters,
    pub mix: ClassMix,
    pub horizon: Horizon,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub replications: u32,
}

impl SimConfig {
    pub fn new(params: QueueParameters, mix: ClassMix, horizon: Horizon, seed: u64) -> Self {
        Self {
            params,
            mix,
            horizon,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            seed,
            replications: DEFAULT_REPLICATIONS,
        }
    }

    /// Horizon sized so that `measured` tasks arrive after warm-up.
    pub fn with_measured_tasks(mut self, measured: u64) -> Self {
        let total = (measured as f64 / (1.0 - self.warmup_fraction)).ceil() as u64;
        self.horizon = Horizon::Tasks(total);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::invalid(format!(
                "warm-up fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if self.replications == 0 {
            return Err(Error::invalid("at least one replication is required"));
        }
        let expected = match self.horizon {
            Horizon::Tasks(n) => n as f64 * (1.0 - self.warmup_fraction),
            Horizon::Time(t) => {
                if !(t.is_finite() && t > 0.0) {
                    return Err(Error::invalid(format!("time horizon must be > 0, got {t}")));
                }
                self.params.arrival_rate() * t * (1.0 - self.warmup_fraction)
            }
        };
        if expected < MIN_MEASURED_TASKS {
            return Err(Error::InsufficientHorizon(format!(
                "about {expected:.0} post-warmup tasks per replication, need {MIN_MEASURED_TASKS}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Priority {
    High,
    Low,
}

impl Priority {
    pub fn number(self) -> u8 {
        match self {
            Priority::High => 1,
            Priority::Low => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskRecord {
    pub id: u64,
    /// Queue the task joined.
    pub class: Priority,
    pub is_sct: bool,
    pub arrival_time: f64,
    pub service_start: f64,
    pub departure_time: f64,
    pub service_demand: f64,
}

impl TaskRecord {
    pub fn waiting_time(&self) -> f64 {
        self.service_start - self.arrival_time
    }

    pub fn sojourn_time(&self) -> f64 {
        self.departure_time - self.arrival_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Arrival,
    ServiceStart,
    Departure,
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceKind::Arrival => "arrival",
            TraceKind::ServiceStart => "start",
            TraceKind::Departure => "departure",
        })
    }
}

/// One line of the event trace. Queue lengths and busy servers are the
/// state after the whole event (including any dispatch it caused), so a
/// departure that frees a server for a queued task is followed by that
/// task's `start` line at the same time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: TraceKind,
    pub task_id: u64,
    pub class: Priority,
    pub queue1: usize,
    pub queue2: usize,
    pub busy: u32,
}

/// Writes `time,kind,task_id,class,queue1,queue2,busy` with a header row.
pub fn write_trace<W: Write>(events: &[TraceEvent], mut out: W) -> Result<()> {
    writeln!(out, "time,kind,task_id,class,queue1,queue2,busy")?;
    for e in events {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.time,
            e.kind,
            e.task_id,
            e.class.number(),
            e.queue1,
            e.queue2,
            e.busy
        )?;
    }
    Ok(())
}

/// Measurements of one replication over its post-warmup window.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationStats {
    pub seed: u64,
    pub mean_w1: Option<f64>,
    pub mean_w2: Option<f64>,
    pub mean_w_sct: Option<f64>,
    pub mean_wait: f64,
    pub mean_sojourn: f64,
    pub mean_tasks_in_system: f64,
    pub utilization_observed: f64,
    /// Completions per queue: `[class 1, class 2]`.
    pub completed: [u64; 2],
    pub completed_sct: u64,
    pub window: (f64, f64),
    /// The configuration was not stable; figures may not have converged.
    pub divergent: bool,
}

impl ReplicationStats {
    pub fn completed_total(&self) -> u64 {
        self.completed[0] + self.completed[1]
    }
}

/// Cross-replication aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub mean_w1: Option<Estimate>,
    pub mean_w2: Option<Estimate>,
    pub mean_w_sct: Option<Estimate>,
    pub mean_sojourn: Estimate,
    pub mean_tasks_in_system: Estimate,
    pub utilization_observed: Estimate,
    /// Per-replication `L - lambda * S`.
    pub little_gap: Estimate,
    pub completed: [u64; 2],
    pub completed_sct: u64,
    pub divergent: bool,
    pub replications: Vec<ReplicationStats>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Arrival,
    Departure { server: usize },
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Future-event calendar with FIFO tie-breaking.
#[derive(Debug, Default)]
struct Calendar {
    heap: BinaryHeap<Scheduled>,
    next_seq: u64,
}

impl Calendar {
    fn schedule(&mut self, time: f64, kind: EventKind) {
        self.heap.push(Scheduled {
            time,
            seq: self.next_seq,
            kind,
        });
        self.next_seq += 1;
    }

    fn pop(&mut self) -> Option<Scheduled> {
        self.heap.pop()
    }
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    id: u64,
    class: Priority,
    is_sct: bool,
    arrival_time: f64,
    service_demand: f64,
}

/// Everything a replication produced, including optional audit data.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutput {
    pub stats: ReplicationStats,
    /// Filled only when tracing was requested.
    pub tasks: Vec<TaskRecord>,
    pub trace: Vec<TraceEvent>,
}

struct Replication<'a> {
    config: &'a SimConfig,
    rng: ChaCha8Rng,
    calendar: Calendar,
    queues: [VecDeque<Pending>; 2],
    servers: Vec<Option<Pending>>,
    service_starts: Vec<f64>,
    busy: u32,
    now: f64,
    arrivals: u64,
    window: (f64, f64),
    warmup_tasks: u64,
    arrivals_closed: bool,
    // Time-weighted population and busy-server integrals over the window.
    population: u64,
    population_area: f64,
    busy_area: f64,
    last_time: f64,
    // Sums over tasks that arrived inside the window.
    wait_sum: [f64; 2],
    wait_sct_sum: f64,
    sojourn_sum: f64,
    completed: [u64; 2],
    completed_sct: u64,
    record: bool,
    tasks: Vec<TaskRecord>,
    trace: Vec<TraceEvent>,
}

impl<'a> Replication<'a> {
    fn new(config: &'a SimConfig, seed: u64, record: bool) -> Self {
        let m = config.params.servers() as usize;
        let (window, warmup_tasks) = match config.horizon {
            Horizon::Tasks(n) => {
                // Window bounds are filled in as arrivals happen.
                let warm = (n as f64 * config.warmup_fraction).floor() as u64;
                ((f64::NAN, f64::NAN), warm)
            }
            Horizon::Time(t) => ((t * config.warmup_fraction, t), 0),
        };
        Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            calendar: Calendar::default(),
            queues: [VecDeque::new(), VecDeque::new()],
            servers: vec![None; m],
            service_starts: vec![0.0; m],
            busy: 0,
            now: 0.0,
            arrivals: 0,
            window,
            warmup_tasks,
            arrivals_closed: false,
            population: 0,
            population_area: 0.0,
            busy_area: 0.0,
            last_time: 0.0,
            wait_sum: [0.0; 2],
            wait_sct_sum: 0.0,
            sojourn_sum: 0.0,
            completed: [0; 2],
            completed_sct: 0,
            record,
            tasks: Vec::new(),
            trace: Vec::new(),
        }
    }

    fn lambda(&self) -> f64 {
        self.config.params.arrival_rate()
    }

    fn in_window(&self, arrival_time: f64) -> bool {
        let (start, end) = self.window;
        arrival_time >= start && (end.is_nan() || arrival_time <= end)
    }

    fn advance(&mut self, to: f64) {
        let (start, end) = self.window;
        if !start.is_nan() {
            let from = self.last_time.max(start);
            let until = if end.is_nan() { to } else { to.min(end) };
            if until > from {
                let dt = until - from;
                self.population_area += self.population as f64 * dt;
                self.busy_area += f64::from(self.busy) * dt;
            }
        }
        self.last_time = to;
        self.now = to;
    }

    fn log(&mut self, kind: TraceKind, task: &Pending) {
        if self.record {
            self.trace.push(TraceEvent {
                time: self.now,
                kind,
                task_id: task.id,
                class: task.class,
                queue1: self.queues[0].len(),
                queue2: self.queues[1].len(),
                busy: self.busy,
            });
        }
    }

    fn draw_class(&mut self) -> (Priority, bool) {
        let mix = self.config.mix;
        let u: f64 = self.rng.random();
        if u < mix.alpha() {
            (Priority::High, false)
        } else if u < mix.alpha() + mix.beta() {
            let class = if mix.sct_in_class1() {
                Priority::High
            } else {
                Priority::Low
            };
            (class, true)
        } else {
            (Priority::Low, false)
        }
    }

    fn start_service(&mut self, server: usize, task: Pending) {
        let done = self.now + task.service_demand;
        self.servers[server] = Some(task);
        self.service_starts[server] = self.now;
        self.busy += 1;
        self.calendar.schedule(done, EventKind::Departure { server });
    }

    fn on_arrival(&mut self) {
        let lambda = self.lambda();
        let id = self.arrivals;
        self.arrivals += 1;

        let gap = exponential(&mut self.rng, lambda);
        let (class, is_sct) = self.draw_class();
        let service_demand = exponential(&mut self.rng, self.config.params.service_rate());

        match self.config.horizon {
            Horizon::Tasks(n) => {
                if id == self.warmup_tasks {
                    self.window.0 = self.now;
                }
                if id + 1 == n {
                    self.window.1 = self.now;
                    self.arrivals_closed = true;
                }
            }
            Horizon::Time(t) => {
                if self.now + gap > t {
                    self.arrivals_closed = true;
                }
            }
        }
        if !self.arrivals_closed {
            self.calendar.schedule(self.now + gap, EventKind::Arrival);
        }

        let task = Pending {
            id,
            class,
            is_sct,
            arrival_time: self.now,
            service_demand,
        };
        self.population += 1;
        match self.servers.iter().position(Option::is_none) {
            Some(server) => {
                self.start_service(server, task);
                self.log(TraceKind::Arrival, &task);
                self.log(TraceKind::ServiceStart, &task);
            }
            None => {
                let q = match class {
                    Priority::High => 0,
                    Priority::Low => 1,
                };
                self.queues[q].push_back(task);
                self.log(TraceKind::Arrival, &task);
            }
        }
    }

    fn on_departure(&mut self, server: usize) {
        let task = self.servers[server]
            .take()
            .expect("departure scheduled for an idle server");
        let start = self.service_starts[server];
        self.busy -= 1;
        self.population -= 1;

        if self.in_window(task.arrival_time) {
            let wait = start - task.arrival_time;
            let q = match task.class {
                Priority::High => 0,
                Priority::Low => 1,
            };
            self.wait_sum[q] += wait;
            self.completed[q] += 1;
            if task.is_sct {
                self.wait_sct_sum += wait;
                self.completed_sct += 1;
            }
            self.sojourn_sum += self.now - task.arrival_time;
        }
        if self.record {
            self.tasks.push(TaskRecord {
                id: task.id,
                class: task.class,
                is_sct: task.is_sct,
                arrival_time: task.arrival_time,
                service_start: start,
                departure_time: self.now,
                service_demand: task.service_demand,
            });
        }
        let next = self.queues[0]
            .pop_front()
            .or_else(|| self.queues[1].pop_front());
        if let Some(next) = next {
            self.start_service(server, next);
        }
        self.log(TraceKind::Departure, &task);
        if let Some(next) = next {
            self.log(TraceKind::ServiceStart, &next);
        }
    }

    fn run(mut self, seed: u64) -> Result<ReplicationOutput> {
        let lambda = self.lambda();
        if lambda > 0.0 {
            let first = exponential(&mut self.rng, lambda);
            if let Horizon::Time(t) = self.config.horizon {
                self.arrivals_closed = first > t;
            }
            if !self.arrivals_closed {
                self.calendar.schedule(first, EventKind::Arrival);
            }
        }
        while let Some(event) = self.calendar.pop() {
            self.advance(event.time);
            match event.kind {
                EventKind::Arrival => self.on_arrival(),
                EventKind::Departure { server } => self.on_departure(server),
            }
        }

        let total: u64 = self.completed.iter().sum();
        if total == 0 {
            return Err(Error::InsufficientHorizon(
                "no task completed inside the measurement window".into(),
            ));
        }
        let (start, end) = self.window;
        let span = end - start;
        let m = f64::from(self.config.params.servers());
        let per_class = |sum: f64, n: u64| (n > 0).then(|| sum / n as f64);
        let (mean_tasks_in_system, utilization_observed) = if span > 0.0 {
            (self.population_area / span, self.busy_area / (span * m))
        } else {
            (0.0, 0.0)
        };
        let stats = ReplicationStats {
            seed,
            mean_w1: per_class(self.wait_sum[0], self.completed[0]),
            mean_w2: per_class(self.wait_sum[1], self.completed[1]),
            mean_w_sct: per_class(self.wait_sct_sum, self.completed_sct),
            mean_wait: (self.wait_sum[0] + self.wait_sum[1]) / total as f64,
            mean_sojourn: self.sojourn_sum / total as f64,
            mean_tasks_in_system,
            utilization_observed,
            completed: self.completed,
            completed_sct: self.completed_sct,
            window: self.window,
            divergent: !self.config.params.is_stable(),
        };
        Ok(ReplicationOutput {
            stats,
            tasks: self.tasks,
            trace: self.trace,
        })
    }
}

/// Simulate one replication with the given seed.
pub fn run_replication(config: &SimConfig, seed: u64) -> Result<ReplicationStats> {
    config.validate()?;
    Replication::new(config, seed, false).run(seed).map(|o| o.stats)
}

/// Like [`run_replication`] but also returns every task record and the
/// event trace. Horizon validation is skipped so short audit runs work.
pub fn run_replication_traced(config: &SimConfig, seed: u64) -> Result<ReplicationOutput> {
    let mut tasks = Replication::new(config, seed, true).run(seed)?;
    tasks.tasks.sort_by_key(|t| t.id);
    Ok(tasks)
}

/// Time-average system population of a finished replication.
pub fn measure_mean_tasks(stats: &ReplicationStats) -> f64 {
    stats.mean_tasks_in_system
}

/// Run `config.replications` replications seeded `seed, seed + 1, ...`
/// and aggregate them.
pub fn run_simulation(config: &SimConfig) -> Result<SimStats> {
    config.validate()?;
    if config.replications < 2 {
        return Err(Error::invalid(
            "at least two replications are needed for a standard error",
        ));
    }
    let runs = (0..u64::from(config.replications))
        .into_par_iter()
        .map(|i| run_replication(config, config.seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;

    let lambda = config.params.arrival_rate();
    let pick = |f: &dyn Fn(&ReplicationStats) -> Option<f64>| {
        runs.iter().filter_map(f).collect::<Replicates>().estimate()
    };
    let all = |f: &dyn Fn(&ReplicationStats) -> f64| {
        runs.iter()
            .map(f)
            .collect::<Replicates>()
            .estimate()
            .expect("at least two replications")
    };
    let mut completed = [0u64; 2];
    for r in &runs {
        completed[0] += r.completed[0];
        completed[1] += r.completed[1];
    }
    Ok(SimStats {
        mean_w1: pick(&|r| r.mean_w1),
        mean_w2: pick(&|r| r.mean_w2),
        mean_w_sct: pick(&|r| r.mean_w_sct),
        mean_sojourn: all(&|r| r.mean_sojourn),
        mean_tasks_in_system: all(&|r| r.mean_tasks_in_system),
        utilization_observed: all(&|r| r.utilization_observed),
        little_gap: all(&|r| r.mean_tasks_in_system - lambda * r.mean_sojourn),
        completed,
        completed_sct: runs.iter().map(|r| r.completed_sct).sum(),
        divergent: runs.iter().any(|r| r.divergent),
        replications: runs,
    })
}
